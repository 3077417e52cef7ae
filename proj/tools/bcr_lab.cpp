// bcr_lab: run Bayesian control rule experiments and their diagnostics.

#include <bcr/error.hpp>
#include <bcr/runner.hpp>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

int exit_code(const bcr::Error& e) {
  switch (e.code()) {
    case bcr::ErrorCode::kIo:
      return 3;
    case bcr::ErrorCode::kParseError:
    case bcr::ErrorCode::kSchemaViolation:
    case bcr::ErrorCode::kDanglingReference:
    case bcr::ErrorCode::kUnknownScenario:
      return 2;
    default:
      return 1;
  }
}

fs::path locate_trace(const fs::path& dir, std::uint64_t seed) {
  const auto name = bcr::trace_file_name(seed);
  if (fs::exists(dir / "traces" / name)) return dir / "traces" / name;
  return dir / name;
}

int cmd_run(const std::string& config, const std::string& out, int seeds,
            std::uint64_t base_seed, bool base_given, unsigned threads) {
  auto cfg = bcr::load_config(config);
  if (seeds > 0) {
    cfg.seeds.clear();
    bcr::override_seeds(cfg, static_cast<std::size_t>(seeds), base_seed);
  } else if (base_given) {
    bcr::override_seeds(cfg, cfg.seeds.size(), base_seed);
  }
  bcr::RunOptions opts;
  opts.out_dir = out;
  opts.threads = threads;
  opts.log = &std::cerr;
  const auto art = bcr::run_experiment(cfg, opts);
  std::cout << "wrote " << art.trace_files.size() << " traces to " << art.out_dir.string()
            << " (config " << art.config_hash << ")\n";
  if (!art.aborted_seeds.empty()) {
    std::cerr << "warning: " << art.aborted_seeds.size() << " of "
              << art.trace_files.size() << " seeds aborted\n";
  }
  return 0;
}

int cmd_scenario(const std::string& name, const std::string& emit) {
  const std::string text = bcr::scenario_config_text(name);
  if (emit.empty() || emit == "-") {
    std::cout << text;
    return 0;
  }
  std::ofstream out(emit, std::ios::binary);
  if (!out || !(out << text)) {
    throw bcr::Error(bcr::ErrorCode::kIo, "cannot write '" + emit + "'");
  }
  return 0;
}

int cmd_diagnose(const std::string& check, const std::string& config,
                 const std::string& trace_dir) {
  const auto kind = bcr::parse_diagnostic_kind(check);
  const auto cfg = bcr::load_config(config);
  const fs::path dir = bcr::resolve_output_dir(cfg, trace_dir);
  std::vector<bcr::RunTrace> traces;
  if (kind == bcr::DiagnosticKind::kTheorems) {
    for (auto seed : cfg.seeds) {
      traces.push_back(bcr::read_trace_jsonl(locate_trace(dir, seed), cfg, seed));
    }
  }
  const auto files = bcr::run_diagnostic(cfg, kind, traces, dir, &std::cout);
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian control rule lab"};
  app.set_version_flag("--version", std::string(bcr::library_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int seeds = 0;
  std::uint64_t base_seed = 0;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "simulate every seed of a config");
  run->add_option("--config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory (default: $BCR_LAB_OUT/<name>)");
  run->add_option("--seeds", seeds, "number of seeds, replacing the config's")
      ->check(CLI::PositiveNumber);
  auto* base_opt = run->add_option("--base-seed", base_seed, "first seed");
  run->add_option("--threads", threads, "worker threads (0: all cores)");

  std::string name;
  std::string emit;
  auto* scen = app.add_subcommand("scenario", "print or save a built-in scenario config");
  scen->add_option("name", name, "scenario name")
      ->required()
      ->check(CLI::IsMember(bcr::scenario_names()));
  scen->add_option("--emit-config", emit, "write the config here ('-' for stdout)");

  std::string check;
  std::string trace_dir;
  auto* diag = app.add_subcommand("diagnose", "run one diagnostic for a config");
  diag->add_option("check", check, "boundedness | core | consistency | theorems")
      ->required()
      ->check(CLI::IsMember({"boundedness", "core", "consistency", "theorems"}));
  diag->add_option("--config", config, "experiment config (JSON)")->required();
  diag->add_option("--trace-dir", trace_dir, "directory written by `run`");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, seeds, base_seed, base_opt->count() > 0, threads);
    if (*scen) return cmd_scenario(name, emit);
    if (*diag) return cmd_diagnose(check, config, trace_dir);
  } catch (const bcr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
