#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

#include "bcr/error.hpp"
#include "bcr/runner.hpp"

namespace bcr {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

std::vector<std::size_t> tested_modes(const DiagnosticRequest& r, std::size_t n,
                                      std::size_t reference) {
  if (!r.modes.empty()) return r.modes;
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < n; ++m) {
    if (m != reference) out.push_back(m);
  }
  return out;
}

std::size_t require_reference(const ExperimentConfig& cfg, DiagnosticKind kind) {
  if (!cfg.reference_mode) {
    throw Error(ErrorCode::kInvalidParameter,
                std::string(to_string(kind)) +
                    " needs reference_mode (or a plant built from a mode)");
  }
  return *cfg.reference_mode;
}

void write_verdict_header(std::ostream& out) {
  out << "check,target,policy,label,passed,confidence,diverged,statistic,value\n";
}

void write_verdict(std::ostream& out, const ExperimentConfig& cfg, std::size_t target,
                   std::optional<std::size_t> policy, const TestVerdict& v) {
  const auto& modes = *cfg.modes;
  for (const auto& [name, value] : v.statistics) {
    out << to_string(v.kind) << ',' << modes[target].id() << ','
        << (policy ? modes[*policy].id() : "") << ',' << v.label << ','
        << (v.passed ? 1 : 0) << ',' << num(v.confidence) << ','
        << (v.diverged ? 1 : 0) << ',' << name << ',' << num(value) << '\n';
  }
}

std::vector<fs::path> diag_boundedness(const ExperimentConfig& cfg,
                                       const DiagnosticRequest& r, const fs::path& dir,
                                       std::ostream* log) {
  const std::size_t ref = require_reference(cfg, r.kind);
  Rng rng(r.seed);
  const auto report = check_boundedness(*cfg.modes, ref, r.boundedness, rng);
  const auto& modes = *cfg.modes;

  const fs::path curves = dir / "boundedness_curves.csv";
  const fs::path verdicts = dir / "boundedness_verdicts.csv";
  auto c = open_out(curves);
  auto v = open_out(verdicts);
  c << "reference,target,policy,t,band\n";
  write_verdict_header(v);
  for (const auto& cell : report.cells) {
    for (std::size_t i = 0; i < cell.ladder.size(); ++i) {
      c << modes[ref].id() << ',' << modes[cell.target].id() << ','
        << modes[cell.policy].id() << ',' << cell.ladder[i] << ',' << num(cell.band[i])
        << '\n';
    }
    write_verdict(v, cfg, cell.target, cell.policy, cell.verdict);
    log_line(log, "boundedness " + modes[cell.target].id() + " under " +
                      modes[cell.policy].id() + ": " + cell.verdict.label +
                      " (C_hat=" + num(cell.verdict.stat("c_hat")) + ")");
  }
  finish(c, curves);
  finish(v, verdicts);
  return {curves, verdicts};
}

CoreOptions resolve_core(const ExperimentConfig& cfg, const DiagnosticRequest& r,
                         CoreOptions o) {
  o.background = r.background ? &(*cfg.modes)[*r.background] : nullptr;
  return o;
}

void write_core_curve(std::ostream& c, const ExperimentConfig& cfg, std::size_t ref,
                      std::size_t target, const CoreResult& res) {
  const auto& modes = *cfg.modes;
  for (std::size_t i = 0; i < res.ladder.size(); ++i) {
    c << modes[ref].id() << ',' << modes[target].id() << ',' << res.ladder[i] << ','
      << num(res.mean_curve[i]) << ',' << num(res.se_curve[i]) << '\n';
  }
}

std::vector<fs::path> diag_core(const ExperimentConfig& cfg, const DiagnosticRequest& r,
                                const fs::path& dir, std::ostream* log) {
  const std::size_t ref = require_reference(cfg, r.kind);
  const auto& modes = *cfg.modes;
  const CoreOptions opts = resolve_core(cfg, r, r.core);
  const fs::path curves = dir / "core_curves.csv";
  const fs::path verdicts = dir / "core_verdicts.csv";
  auto c = open_out(curves);
  auto v = open_out(verdicts);
  c << "reference,target,t,mean_g,std_error\n";
  write_verdict_header(v);
  Rng root(r.seed);
  for (std::size_t m : tested_modes(r, modes.size(), ref)) {
    Rng rng(root.derive_seed());
    const auto res = test_core_membership(modes[ref], modes[m], opts, rng);
    write_core_curve(c, cfg, ref, m, res);
    write_verdict(v, cfg, m, std::nullopt, res.verdict);
    log_line(log, "core " + modes[m].id() + " vs " + modes[ref].id() + ": " +
                      res.verdict.label);
  }
  finish(c, curves);
  finish(v, verdicts);
  return {curves, verdicts};
}

std::vector<fs::path> diag_consistency(const ExperimentConfig& cfg,
                                       const DiagnosticRequest& r, const fs::path& dir,
                                       std::ostream* log) {
  const std::size_t ref = require_reference(cfg, r.kind);
  const auto& modes = *cfg.modes;
  ConsistencyOptions opts = r.consistency;
  opts.core = resolve_core(cfg, r, opts.core);
  const fs::path curves = dir / "consistency_core_curves.csv";
  const fs::path verdicts = dir / "consistency_verdicts.csv";
  auto c = open_out(curves);
  auto v = open_out(verdicts);
  c << "reference,target,t,mean_g,std_error\n";
  write_verdict_header(v);
  Rng root(r.seed);
  for (std::size_t m : tested_modes(r, modes.size(), ref)) {
    Rng rng(root.derive_seed());
    const auto res = check_consistency(modes[m], modes[ref], opts, rng);
    write_core_curve(c, cfg, ref, m, res.core);
    write_verdict(v, cfg, m, std::nullopt, res.verdict);
    log_line(log, "consistency " + modes[m].id() + " vs " + modes[ref].id() + ": " +
                      res.verdict.label);
  }
  finish(c, curves);
  finish(v, verdicts);
  return {curves, verdicts};
}

std::vector<fs::path> diag_theorems(const ExperimentConfig& cfg, const DiagnosticRequest& r,
                                    std::span<const RunTrace> traces, const fs::path& dir,
                                    std::ostream* log) {
  const std::size_t ref = require_reference(cfg, r.kind);
  const auto& modes = *cfg.modes;
  TheoremOptions opts;
  opts.delta = r.delta;
  opts.non_core = r.non_core;
  opts.lambda = r.lambda;
  if (r.auto_lambda) {
    Rng rng(r.seed);
    const auto report = check_boundedness(modes, ref, r.boundedness, rng);
    opts.lambda = fitted_lambda(report, cfg.prior);
  }
  const auto report = theorem_checks(modes, traces, ref, opts);

  const fs::path summary = dir / "theorems_summary.csv";
  const fs::path tv = dir / "theorems_tv.csv";
  const fs::path runs = dir / "theorems_runs.csv";
  auto s = open_out(summary);
  s << "statistic,mode,value\n";
  s << "lambda,," << num(report.lambda) << '\n';
  s << "t1_threshold,," << num(report.t1_threshold) << '\n';
  s << "t1_fraction_pairs,," << num(report.t1_fraction_pairs) << '\n';
  s << "t1_fraction_runs,," << num(report.t1_fraction_runs) << '\n';
  for (const auto& d : report.t2) {
    const std::string& id = modes[d.mode].id();
    s << "t2_mean_terminal," << id << ',' << num(d.mean_terminal) << '\n';
    s << "t2_median_terminal," << id << ',' << num(d.median_terminal) << '\n';
    s << "t2_max_terminal," << id << ',' << num(d.max_terminal) << '\n';
    s << "t2_mean_log_slope," << id << ',' << num(d.mean_log_slope) << '\n';
  }
  s << "t3_mean_terminal_tv,," << num(report.t3_mean_terminal_tv) << '\n';
  finish(s, summary);

  auto c = open_out(tv);
  c << "t,mean_tv\n";
  for (std::size_t t = 0; t < report.t3_mean_tv.size(); ++t) {
    c << t << ',' << num(report.t3_mean_tv[t]) << '\n';
  }
  finish(c, tv);

  auto rr = open_out(runs);
  rr << "seed,min_reference_weight,terminal_tv\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    rr << traces[i].seed << ',' << num(report.t1_min_weight[i]) << ','
       << num(report.t3_terminal_tv[i]) << '\n';
  }
  finish(rr, runs);

  log_line(log, "theorems: lambda=" + num(report.lambda) +
                    " t1_fraction_runs=" + num(report.t1_fraction_runs) +
                    " mean_terminal_tv=" + num(report.t3_mean_terminal_tv));
  return {summary, tv, runs};
}

std::vector<fs::path> dispatch(const ExperimentConfig& cfg, const DiagnosticRequest& r,
                               std::span<const RunTrace> traces, const fs::path& dir,
                               std::ostream* log) {
  switch (r.kind) {
    case DiagnosticKind::kBoundedness: return diag_boundedness(cfg, r, dir, log);
    case DiagnosticKind::kCore: return diag_core(cfg, r, dir, log);
    case DiagnosticKind::kConsistency: return diag_consistency(cfg, r, dir, log);
    case DiagnosticKind::kTheorems: return diag_theorems(cfg, r, traces, dir, log);
  }
  return {};
}

void write_summary(const ExperimentConfig& cfg, std::span<const RunTrace> traces,
                   const fs::path& path) {
  const auto& modes = *cfg.modes;
  auto out = open_out(path);
  out << "seed,steps,aborted,abort_reason,terminal_tv";
  for (const auto& m : modes) out << ",posterior_" << m.id();
  for (const auto& m : modes) out << ",divergence_" << m.id();
  out << '\n';
  for (const auto& trace : traces) {
    out << trace.seed << ',' << trace.steps.size() << ',' << (trace.aborted ? 1 : 0) << ','
        << quoted(trace.abort_reason) << ',';
    if (cfg.reference_mode) {
      out << num(realized_tv_curve(modes, trace, *cfg.reference_mode).back());
    }
    const auto& w = trace.steps.empty() ? trace.prior : trace.steps.back().posterior;
    for (double x : w) out << ',' << num(x);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      out << ',';
      if (cfg.reference_mode) {
        try {
          out << num(divergence_process(trace, *cfg.reference_mode, m).final_value());
        } catch (const Error&) {
          out << "nan";
        }
      }
    }
    out << '\n';
  }
  finish(out, path);
}

std::vector<fs::path> write_curves(const ExperimentConfig& cfg,
                                   std::span<const RunTrace> traces, const fs::path& dir) {
  const auto& modes = *cfg.modes;
  const std::size_t ref = *cfg.reference_mode;
  const fs::path div_path = dir / "divergence.csv";
  const fs::path sub_path = dir / "subdivergence.csv";
  const fs::path tv_path = dir / "tv.csv";
  auto d_out = open_out(div_path);
  auto s_out = open_out(sub_path);
  auto tv_out = open_out(tv_path);
  d_out << "seed,reference,target,t,increment,divergence\n";
  s_out << "seed,reference,target,policy,t,subdivergence\n";
  tv_out << "seed,t,tv\n";
  for (const auto& trace : traces) {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (m == ref) continue;
      DivergenceTrace d;
      try {
        d = divergence_process(trace, ref, m);
      } catch (const Error&) {
        continue;
      }
      for (std::size_t i = 0; i < d.cumulative.size(); ++i) {
        d_out << trace.seed << ',' << modes[ref].id() << ',' << modes[m].id() << ','
              << i + 1 << ',' << num(d.increments[i]) << ',' << num(d.cumulative[i])
              << '\n';
      }
      if (!trace.has_partition()) continue;
      const auto sub = decompose_subdivergences(d, modes.size());
      for (std::size_t p = 0; p < modes.size(); ++p) {
        const auto run = sub.running_total(p, d.cumulative.size());
        for (std::size_t i = 0; i < run.size(); ++i) {
          s_out << trace.seed << ',' << modes[ref].id() << ',' << modes[m].id() << ','
                << modes[p].id() << ',' << i + 1 << ',' << num(run[i]) << '\n';
        }
      }
    }
    const auto tv = realized_tv_curve(modes, trace, ref);
    for (std::size_t t = 0; t < tv.size(); ++t) {
      tv_out << trace.seed << ',' << t << ',' << num(tv[t]) << '\n';
    }
  }
  finish(d_out, div_path);
  finish(s_out, sub_path);
  finish(tv_out, tv_path);
  return {div_path, sub_path, tv_path};
}

void write_manifest(const ExperimentConfig& cfg, const RunArtifacts& a) {
  Json j;
  j["name"] = cfg.name;
  j["config_hash"] = a.config_hash;
  j["code_version"] = std::string(library_version());
  j["schema_version"] = cfg.schema_version;
  j["seeds"] = cfg.seeds;
  Json ids = Json::array();
  for (const auto& m : *cfg.modes) ids.push_back(m.id());
  j["modes"] = std::move(ids);
  j["reference_mode"] =
      cfg.reference_mode ? Json((*cfg.modes)[*cfg.reference_mode].id()) : Json(nullptr);
  j["action_mode"] = std::string(to_string(cfg.action_mode));
  j["horizon"] = cfg.horizon;
  Json traces = Json::array();
  for (std::size_t i = 0; i < a.trace_files.size(); ++i) {
    traces.push_back({{"seed", cfg.seeds[i]},
                      {"file", fs::relative(a.trace_files[i], a.out_dir).generic_string()},
                      {"steps", a.traces[i].steps.size()},
                      {"aborted", a.traces[i].aborted}});
  }
  j["traces"] = std::move(traces);
  j["aborted_seeds"] = a.aborted_seeds;
  j["summary"] = fs::relative(a.summary_csv, a.out_dir).generic_string();
  Json curves = Json::array();
  for (const auto& p : a.curve_csvs) curves.push_back(fs::relative(p, a.out_dir).generic_string());
  j["curves"] = std::move(curves);
  Json diags = Json::array();
  for (const auto& p : a.diagnostics_csvs) {
    diags.push_back(fs::relative(p, a.out_dir).generic_string());
  }
  j["diagnostics"] = std::move(diags);
  auto out = open_out(a.manifest);
  out << j.dump(2) << '\n';
  finish(out, a.manifest);
}

}  // namespace

fs::path resolve_output_dir(const ExperimentConfig& cfg, const fs::path& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("BCR_LAB_OUT"); env && *env) {
    return fs::path(env) / cfg.name;
  }
  return fs::path("bcr_out") / cfg.name;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  RunArtifacts a;
  a.out_dir = resolve_output_dir(cfg, options.out_dir);
  a.config_hash = cfg.config_hash();
  std::error_code ec;
  fs::create_directories(a.out_dir / "traces", ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot create '" + a.out_dir.string() + "': " + ec.message());
  }
  {
    const fs::path cfg_path = a.out_dir / "config.json";
    auto out = open_out(cfg_path);
    out << Json::parse(cfg.canonical).dump(2) << '\n';
    finish(out, cfg_path);
  }

  const std::size_t n = cfg.seeds.size();
  a.traces.resize(n);
  a.trace_files.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::uint64_t seed = cfg.seeds[i];
        a.traces[i] = simulate_run(cfg.modes, cfg.prior, *cfg.plant, cfg.horizon, seed,
                                   cfg.action_mode, cfg.commit_length);
        a.trace_files[i] = a.out_dir / "traces" / trace_file_name(seed);
        auto out = open_out(a.trace_files[i]);
        write_trace_jsonl(out, a.traces[i], cfg.io());
        finish(out, a.trace_files[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& trace : a.traces) {
    if (trace.aborted) {
      a.aborted_seeds.push_back(trace.seed);
      log_line(options.log, "warning: seed " + std::to_string(trace.seed) +
                                " aborted after " + std::to_string(trace.steps.size()) +
                                " steps: " + trace.abort_reason);
    }
  }

  a.summary_csv = a.out_dir / "summary.csv";
  write_summary(cfg, a.traces, a.summary_csv);
  if (cfg.write_curves && cfg.reference_mode) {
    a.curve_csvs = write_curves(cfg, a.traces, a.out_dir);
  }
  if (options.run_diagnostics) {
    for (const auto& r : cfg.diagnostics) {
      auto files = dispatch(cfg, r, a.traces, a.out_dir, options.log);
      a.diagnostics_csvs.insert(a.diagnostics_csvs.end(), files.begin(), files.end());
    }
  }
  a.manifest = a.out_dir / "manifest.json";
  write_manifest(cfg, a);
  return a;
}

std::vector<fs::path> run_diagnostic(const ExperimentConfig& cfg, DiagnosticKind kind,
                                     std::span<const RunTrace> traces,
                                     const fs::path& out_dir, std::ostream* log) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + out_dir.string() + "'");
  std::vector<fs::path> files;
  bool any = false;
  for (const auto& r : cfg.diagnostics) {
    if (r.kind != kind) continue;
    any = true;
    auto f = dispatch(cfg, r, traces, out_dir, log);
    files.insert(files.end(), f.begin(), f.end());
  }
  if (!any) {
    DiagnosticRequest r;
    r.kind = kind;
    r.boundedness.horizon = cfg.horizon;
    r.core.horizon = cfg.horizon;
    r.consistency.core.horizon = cfg.horizon;
    files = dispatch(cfg, r, traces, out_dir, log);
  }
  return files;
}

}  // namespace bcr
