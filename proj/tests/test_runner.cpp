#include <bcr/runner.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "test_support.hpp"

namespace bcr {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const char* kMinimal = R"({
  "schema_version": 1,
  "name": "minimal",
  "alphabets": {"actions": ["L", "R"], "observations": ["1", "0"]},
  "modes": [
    {"id": "only", "kind": "bernoulli_bandit", "arms": {"L": 0.6, "R": 0.4},
     "policy": {"kind": "uniform"}}
  ],
  "plant": {"mode": "only"},
  "horizon": 20
})";

Json minimal() { return Json::parse(kMinimal); }

std::string error_of(const std::string& text, ErrorCode expected) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "config was accepted";
  return {};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bcr_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, MinimalOneModeConfig) {
  const auto cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.modes->size(), 1u);
  EXPECT_EQ(cfg.prior, std::vector<double>{1.0});
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
  EXPECT_EQ(cfg.reference_mode, std::optional<std::size_t>(0));
  EXPECT_EQ(cfg.action_mode, ActionMode::kSampleMode);
  EXPECT_EQ(cfg.commit_length, 1u);
  EXPECT_EQ(cfg.config_hash().size(), 16u);
}

TEST(Config, PriorLengthMismatchNamesPrior) {
  auto j = minimal();
  j["prior"] = {0.2, 0.3, 0.5};
  const auto what = error_of(j.dump(), ErrorCode::kSchemaViolation);
  EXPECT_NE(what.find("`prior`"), std::string::npos) << what;
}

TEST(Config, PlantReferencingUnknownModeDangles) {
  auto j = minimal();
  j["plant"] = {{"mode", "ghost"}};
  const auto what = error_of(j.dump(), ErrorCode::kDanglingReference);
  EXPECT_NE(what.find("ghost"), std::string::npos);
}

TEST(Config, ParseErrorsCarryPosition) {
  const auto what = error_of("{\n  \"schema_version\": 1,\n  oops\n}", ErrorCode::kParseError);
  EXPECT_NE(what.find("line 3"), std::string::npos) << what;
}

TEST(Config, SchemaViolationsNameTheField) {
  struct Case {
    const char* pointer;
    Json value;
    const char* field;
  };
  const std::vector<Case> cases{
      {"/horizon", 0, "`horizon`"},
      {"/modes/0/arms/L", 1.5, "`modes[0]`"},
      {"/modes/0/policy/kind", "sometimes", "`modes[0].policy.kind`"},
      {"/action_mode", "random", "`action_mode`"},
      {"/seeds", "many", "`seeds`"},
      {"/schema_version", 7, "`schema_version`"},
      {"/extra", true, "`extra`"},
  };
  for (const auto& c : cases) {
    auto j = minimal();
    j[Json::json_pointer(c.pointer)] = c.value;
    const auto what = error_of(j.dump(), ErrorCode::kSchemaViolation);
    EXPECT_NE(what.find(c.field), std::string::npos) << c.pointer << ": " << what;
  }
  auto j = minimal();
  j["modes"][0]["arms"].erase("R");
  EXPECT_NE(error_of(j.dump(), ErrorCode::kSchemaViolation).find("`modes[0].arms.R`"),
            std::string::npos);
}

TEST(Config, PriorMustBePositiveAndNormalized) {
  auto j = minimal();
  j["modes"].push_back(j["modes"][0]);
  j["modes"][1]["id"] = "other";
  j["prior"] = {1.0, 0.0};
  error_of(j.dump(), ErrorCode::kSchemaViolation);
  j["prior"] = {0.5, 0.6};
  error_of(j.dump(), ErrorCode::kSchemaViolation);
  j["prior"] = {0.25, 0.75};
  EXPECT_EQ(parse_config(j.dump()).prior[1], 0.75);
  j["modes"][1]["id"] = "only";
  error_of(j.dump(), ErrorCode::kSchemaViolation);
}

TEST(Config, TabularModesAndExplicitPlant) {
  const char* text = R"({
    "schema_version": 1,
    "alphabets": {"actions": ["a", "b"], "observations": ["A", "B"]},
    "state_map": {"kind": "table", "k": 1,
                  "table": {"s0": "A", "aA": "A", "bA": "A", "aB": "B", "bB": "B"}},
    "modes": [
      {"id": "h", "kind": "tabular",
       "policy": {"A": [0.5, 0.5], "B": [1, 0]},
       "hypothesis": {"A": {"a": [1, 0], "b": [0.5, 0.5]},
                      "B": {"a": [0.9, 0.1], "b": [0.2, 0.8]}}}
    ],
    "plant": {"response": {"A": {"a": [1, 0], "b": [0.5, 0.5]},
                           "B": {"a": [0.9, 0.1], "b": [0.2, 0.8]}}},
    "horizon": 5,
    "seeds": [3, 9]
  })";
  const auto cfg = parse_config(text);
  EXPECT_FALSE(cfg.plant_mode.has_value());
  EXPECT_FALSE(cfg.reference_mode.has_value());
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 9}));
  EXPECT_EQ(cfg.modes->front().state_count(), 2u);

  auto j = Json::parse(text);
  j["modes"][0]["hypothesis"]["B"].erase("b");
  EXPECT_NE(error_of(j.dump(), ErrorCode::kSchemaViolation).find("incomplete-table"),
            std::string::npos);
}

TEST(Config, DiagnosticsAreParsed) {
  auto j = minimal();
  j["diagnostics"] = Json::array({
      {{"check", "core"}, {"xi", 0.25}, {"c_grid", {2, 4}}, {"modes", {"only"}}},
      {{"check", "theorems"}, {"lambda", "auto"}},
      {{"check", "consistency"}, {"epsilon", 0.01}, {"core", {{"horizon", 30}}}},
  });
  const auto cfg = parse_config(j.dump());
  ASSERT_EQ(cfg.diagnostics.size(), 3u);
  EXPECT_EQ(cfg.diagnostics[0].core.xi, 0.25);
  EXPECT_EQ(cfg.diagnostics[0].core.horizon, 20u);
  EXPECT_EQ(cfg.diagnostics[0].core.c_grid, (std::vector<double>{2, 4}));
  EXPECT_TRUE(cfg.diagnostics[1].auto_lambda);
  EXPECT_EQ(cfg.diagnostics[2].consistency.core.horizon, 30u);

  j["diagnostics"] = Json::array({{{"check", "core"}, {"modes", {"nobody"}}}});
  error_of(j.dump(), ErrorCode::kDanglingReference);
  j["diagnostics"] = Json::array({{{"check", "astrology"}}});
  error_of(j.dump(), ErrorCode::kSchemaViolation);
}

TEST(Config, LoadReportsMissingFiles) {
  EXPECT_BCR_ERROR(load_config("/nonexistent/config.json"), ErrorCode::kIo);
}

TEST(Config, OverrideSeedsRefreshesTheHash) {
  auto cfg = parse_config(kMinimal);
  const auto before = cfg.config_hash();
  override_seeds(cfg, 3, 10);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_NE(cfg.config_hash(), before);
  EXPECT_EQ(parse_config(cfg.canonical).config_hash(), cfg.config_hash());
}

TEST(Scenario, BanditParameters) {
  const auto cfg = scenario("bandit-identifiable");
  const auto& m = *cfg.modes;
  ASSERT_EQ(m.size(), 2u);
  const History h;
  EXPECT_EQ(m[0].observation_dist(h, "L")[0], 0.8);
  EXPECT_EQ(m[0].observation_dist(h, "R")[0], 0.3);
  EXPECT_EQ(m[1].observation_dist(h, "L")[0], 0.3);
  EXPECT_EQ(m[1].observation_dist(h, "R")[0], 0.8);
  // per pulled-arm KL between the two hypotheses, identical for both arms
  const double expected = 0.8 * std::log(0.8 / 0.3) + 0.2 * std::log(0.2 / 0.7);
  for (const char* arm : {"L", "R"}) {
    const auto& p = m[0].observation_dist(h, arm);
    const auto& q = m[1].observation_dist(h, arm);
    const double kl = (arm[0] == 'L')
                          ? p[0] * std::log(p[0] / q[0]) + p[1] * std::log(p[1] / q[1])
                          : q[0] * std::log(q[0] / p[0]) + q[1] * std::log(q[1] / p[1]);
    EXPECT_NEAR(kl, expected, 1e-15);
  }
  EXPECT_EQ(cfg.plant->source_mode(), std::optional<std::string>("m1"));
  EXPECT_EQ(cfg.horizon, 500u);
  EXPECT_EQ(cfg.seeds.size(), 10u);
}

TEST(Scenario, AllParseAndRoundTrip) {
  for (const auto& name : scenario_names()) {
    const auto text = scenario_config_text(name);
    const auto cfg = parse_config(text);
    EXPECT_EQ(cfg.name, name);
    EXPECT_EQ(cfg.reference_mode, std::optional<std::size_t>(0));
    EXPECT_EQ(parse_config(text).config_hash(), cfg.config_hash());
  }
}

TEST(Scenario, Fig6IsInconsistent) {
  const auto cfg = scenario("fig6-inconsistent");
  const auto& m = *cfg.modes;
  ConsistencyOptions o;
  o.core.horizon = 100;
  o.core.n_realizations = 20;
  Rng rng(1);
  const auto r = check_consistency(m[1], m[0], o, rng);
  EXPECT_EQ(r.verdict.label, "inconsistent");
  EXPECT_EQ(r.max_gap, 1.0);
}

TEST(Scenario, UnknownName) {
  EXPECT_BCR_ERROR(scenario("nope"), ErrorCode::kUnknownScenario);
}

TEST(TraceIo, RoundTripsEveryField) {
  const auto cfg = scenario("fig5-core-ambiguity");
  const auto trace = simulate_run(cfg.modes, cfg.prior, *cfg.plant, 200, 4);
  std::stringstream ss;
  write_trace_jsonl(ss, trace, cfg.io());
  const auto back = read_trace_jsonl(ss, cfg, 4);
  EXPECT_EQ(back.steps, trace.steps);
  EXPECT_EQ(back.mode_ids, trace.mode_ids);
}

TEST(TraceIo, NegativeInfinityIsNull) {
  const auto cfg = scenario("fig6-inconsistent");
  RunTrace t;
  t.mode_ids = {"h1", "h2"};
  t.prior = cfg.prior;
  StepRecord s;
  s.t = 1;
  s.sampled_mode = 1;
  s.action = 0;
  s.observation = 1;
  s.obs_loglik = {-std::numeric_limits<double>::infinity(), std::log(0.5)};
  s.posterior = {0.0, 1.0};
  t.steps.push_back(s);
  std::stringstream ss;
  write_trace_jsonl(ss, t, cfg.io());
  const auto row = Json::parse(ss.str());
  EXPECT_TRUE(row["obs_loglik"][0].is_null());
  EXPECT_EQ(row["sampled_mode"], "h2");
  std::stringstream in(ss.str());
  EXPECT_EQ(read_trace_jsonl(in, cfg, 0).steps[0], s);
}

TEST(TraceIo, RejectsMalformedRows) {
  const auto cfg = scenario("fig6-inconsistent");
  std::stringstream bad("{\"t\": 1, \"sampled_mode\": null}\n");
  EXPECT_BCR_ERROR(read_trace_jsonl(bad, cfg, 0), ErrorCode::kSchemaViolation);
  std::stringstream junk("not json\n");
  EXPECT_BCR_ERROR(read_trace_jsonl(junk, cfg, 0), ErrorCode::kParseError);
}

TEST(Run, BanditFanOut) {
  auto cfg = scenario("bandit-identifiable");
  cfg.diagnostics.clear();
  RunOptions opts;
  opts.out_dir = fresh_dir("fanout");
  opts.threads = 3;
  const auto art = run_experiment(cfg, opts);
  ASSERT_EQ(art.trace_files.size(), 10u);
  for (const auto& f : art.trace_files) EXPECT_TRUE(fs::exists(f));
  std::ifstream summary(art.summary_csv);
  std::string line;
  std::size_t rows = 0;
  std::getline(summary, line);
  EXPECT_EQ(line,
            "seed,steps,aborted,abort_reason,terminal_tv,posterior_m1,posterior_m2,"
            "divergence_m1,divergence_m2");
  while (std::getline(summary, line)) ++rows;
  EXPECT_EQ(rows, 10u);
  const auto manifest = Json::parse(slurp(art.manifest));
  EXPECT_EQ(manifest["config_hash"], cfg.config_hash());
  EXPECT_EQ(manifest["code_version"], std::string(library_version()));
  EXPECT_EQ(manifest["traces"].size(), 10u);
  EXPECT_TRUE(fs::exists(art.out_dir / "divergence.csv"));
  EXPECT_TRUE(fs::exists(art.out_dir / "subdivergence.csv"));
  EXPECT_TRUE(fs::exists(art.out_dir / "tv.csv"));
}

TEST(Run, ByteIdenticalAcrossReruns) {
  auto cfg = scenario("fig5-core-ambiguity");
  cfg.diagnostics.clear();
  override_seeds(cfg, 4, 100);
  RunOptions a;
  a.out_dir = fresh_dir("det_a");
  a.threads = 1;
  RunOptions b = a;
  b.out_dir = fresh_dir("det_b");
  b.threads = 4;
  const auto ra = run_experiment(cfg, a);
  const auto rb = run_experiment(cfg, b);
  for (std::size_t i = 0; i < ra.trace_files.size(); ++i) {
    EXPECT_EQ(slurp(ra.trace_files[i]), slurp(rb.trace_files[i]));
  }
  EXPECT_EQ(slurp(ra.summary_csv), slurp(rb.summary_csv));
  EXPECT_EQ(slurp(ra.out_dir / "subdivergence.csv"), slurp(rb.out_dir / "subdivergence.csv"));
}

TEST(Run, MisspecifiedPlantFlagsTheSeed) {
  auto j = minimal();
  j["modes"][0]["arms"] = {{"L", 1.0}, {"R", 1.0}};
  j["plant"] = {{"response", {{"s0", {{"L", {0.0, 1.0}}, {"R", {0.0, 1.0}}}}}}};
  j["state_map"] = {{"kind", "window"}, {"k", 0}};
  j["seeds"] = {{"count", 2}, {"base", 0}};
  const auto cfg = parse_config(j.dump());
  RunOptions opts;
  opts.out_dir = fresh_dir("abort");
  std::stringstream log;
  opts.log = &log;
  const auto art = run_experiment(cfg, opts);
  EXPECT_EQ(art.aborted_seeds, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  const auto summary = slurp(art.summary_csv);
  EXPECT_NE(summary.find("\n0,0,1,"), std::string::npos) << summary;
}

TEST(Run, DiagnosticsArePersisted) {
  auto cfg = scenario("fig6-inconsistent");
  override_seeds(cfg, 3, 1);
  auto j = Json::parse(cfg.canonical);
  j["horizon"] = 100;
  j["diagnostics"] = Json::array({
      {{"check", "core"}, {"n_realizations", 10}},
      {{"check", "consistency"}, {"core", {{"n_realizations", 10}}}},
      {{"check", "theorems"}},
      {{"check", "boundedness"}, {"n_realizations", 10}, {"horizon", 50}},
  });
  const auto small = parse_config(j.dump());
  RunOptions opts;
  opts.out_dir = fresh_dir("diag");
  const auto art = run_experiment(small, opts);
  for (const char* f : {"core_verdicts.csv", "core_curves.csv", "consistency_verdicts.csv",
                        "theorems_summary.csv", "theorems_tv.csv", "theorems_runs.csv",
                        "boundedness_curves.csv", "boundedness_verdicts.csv"}) {
    EXPECT_TRUE(fs::exists(art.out_dir / f)) << f;
  }
  EXPECT_NE(slurp(art.out_dir / "consistency_verdicts.csv").find("inconsistent"),
            std::string::npos);

  // offline: reread the traces and rerun one diagnostic
  std::vector<RunTrace> traces;
  for (auto seed : small.seeds) {
    traces.push_back(
        read_trace_jsonl(art.out_dir / "traces" / trace_file_name(seed), small, seed));
    EXPECT_EQ(traces.back().steps, art.traces[traces.size() - 1].steps);
  }
  const auto files = run_diagnostic(small, DiagnosticKind::kTheorems, traces,
                                    fresh_dir("diag_offline"));
  EXPECT_EQ(slurp(files[0]), slurp(art.out_dir / "theorems_summary.csv"));
}

TEST(Run, OutputDirectoryResolution) {
  auto cfg = parse_config(kMinimal);
  EXPECT_EQ(resolve_output_dir(cfg, "/x/y"), fs::path("/x/y"));
  ::setenv("BCR_LAB_OUT", "/tmp/bcr_root", 1);
  EXPECT_EQ(resolve_output_dir(cfg, {}), fs::path("/tmp/bcr_root/minimal"));
  ::unsetenv("BCR_LAB_OUT");
  EXPECT_EQ(resolve_output_dir(cfg, {}), fs::path("bcr_out/minimal"));
  cfg.output_dir = "/explicit";
  EXPECT_EQ(resolve_output_dir(cfg, {}), fs::path("/explicit"));
}

TEST(DiagnosticKindNames, RoundTrip) {
  for (auto k : {DiagnosticKind::kBoundedness, DiagnosticKind::kCore,
                 DiagnosticKind::kConsistency, DiagnosticKind::kTheorems}) {
    EXPECT_EQ(parse_diagnostic_kind(to_string(k)), k);
  }
}

}  // namespace
}  // namespace bcr
