#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "bcr/error.hpp"
#include "bcr/runner.hpp"

namespace bcr {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void violation(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, "`" + path + "`: " + what);
}

std::string child(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string item(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) violation(path, "expected an object");
}

void allow_keys(const Json& j, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) violation(child(path, key), "unknown field");
  }
}

const Json& require(const Json& j, std::string_view key, const std::string& path) {
  auto it = j.find(std::string(key));
  if (it == j.end()) violation(child(path, key), "required field is missing");
  return *it;
}

const Json* optional(const Json& j, std::string_view key) {
  auto it = j.find(std::string(key));
  return it == j.end() ? nullptr : &*it;
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) violation(path, "expected a string");
  return j.get<std::string>();
}

double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) violation(path, "expected a number");
  return j.get<double>();
}

std::uint64_t as_unsigned(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  violation(path, "expected a non-negative integer");
}

std::size_t as_count(const Json& j, const std::string& path, std::size_t min_value) {
  const auto v = as_unsigned(j, path);
  if (v < min_value) {
    violation(path, "must be >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

std::vector<double> as_row(const Json& j, const std::string& path) {
  if (!j.is_array()) violation(path, "expected an array of probabilities");
  std::vector<double> row;
  for (std::size_t i = 0; i < j.size(); ++i) row.push_back(as_number(j[i], item(path, i)));
  return row;
}

std::vector<std::string> as_symbols(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) violation(path, "expected a non-empty array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], item(path, i)));
  return out;
}

StateMap parse_state_map(const Json& j, const IoSpace& io, const std::string& path) {
  expect_object(j, path);
  allow_keys(j, path, {"kind", "k", "table"});
  const std::string kind = as_string(require(j, "kind", path), child(path, "kind"));
  try {
    if (kind == "full_history") return StateMap::full_history(io);
    const std::size_t k =
        as_count(require(j, "k", path), child(path, "k"), 0);
    if (kind == "window") return StateMap::window(io, k);
    if (kind == "table") {
      const Json& table = require(j, "table", path);
      expect_object(table, child(path, "table"));
      std::vector<std::pair<std::string, std::string>> entries;
      for (const auto& [key, value] : table.items()) {
        entries.emplace_back(key, as_string(value, child(child(path, "table"), key)));
      }
      return StateMap::table(io, k, entries);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaViolation) throw;
    violation(path, e.what());
  }
  violation(child(path, "kind"), "expected one of window, table, full_history");
}

HypothesisTable parse_observation_table(const Json& j, const std::string& path) {
  expect_object(j, path);
  HypothesisTable table;
  for (const auto& [state, by_action] : j.items()) {
    const std::string sp = child(path, state);
    expect_object(by_action, sp);
    for (const auto& [action, row] : by_action.items()) {
      table[state][action] = as_row(row, child(sp, action));
    }
  }
  return table;
}

OperationMode parse_mode(const Json& j, const IoSpace& io, const Json& default_map,
                         const std::string& path) {
  expect_object(j, path);
  const std::string id = as_string(require(j, "id", path), child(path, "id"));
  const std::string kind = as_string(require(j, "kind", path), child(path, "kind"));
  if (kind == "bernoulli_bandit") {
    allow_keys(j, path, {"id", "kind", "arms", "policy"});
    const Json& arms = require(j, "arms", path);
    expect_object(arms, child(path, "arms"));
    for (const auto& [arm, value] : arms.items()) {
      if (!io.actions.find(arm)) {
        violation(child(child(path, "arms"), arm), "not an action symbol");
      }
    }
    std::vector<double> thetas;
    for (const auto& action : io.actions.symbols()) {
      const std::string ap = child(child(path, "arms"), action);
      auto it = arms.find(action);
      if (it == arms.end()) violation(ap, "missing arm parameter");
      thetas.push_back(as_number(*it, ap));
    }
    const std::string pp = child(path, "policy");
    const Json& pj = require(j, "policy", path);
    expect_object(pj, pp);
    allow_keys(pj, pp, {"kind", "arm", "epsilon"});
    const std::string pk = as_string(require(pj, "kind", pp), child(pp, "kind"));
    BanditPolicy policy;
    if (pk == "greedy") {
      policy = BanditPolicy::greedy(as_string(require(pj, "arm", pp), child(pp, "arm")));
    } else if (pk == "epsilon_greedy") {
      policy = BanditPolicy::epsilon_greedy(
          as_string(require(pj, "arm", pp), child(pp, "arm")),
          as_number(require(pj, "epsilon", pp), child(pp, "epsilon")));
    } else if (pk == "uniform") {
      policy = BanditPolicy::uniform();
    } else {
      violation(child(pp, "kind"), "expected greedy, epsilon_greedy or uniform");
    }
    try {
      return make_bernoulli_bandit_mode(id, io, thetas, policy);
    } catch (const Error& e) {
      violation(path, e.what());
    }
  }
  if (kind == "tabular") {
    allow_keys(j, path, {"id", "kind", "state_map", "policy", "hypothesis"});
    const Json* map_json = optional(j, "state_map");
    StateMap map = parse_state_map(map_json ? *map_json : default_map, io,
                                   child(path, "state_map"));
    const std::string pp = child(path, "policy");
    const Json& pj = require(j, "policy", path);
    expect_object(pj, pp);
    PolicyTable policy;
    for (const auto& [state, row] : pj.items()) policy[state] = as_row(row, child(pp, state));
    HypothesisTable hypothesis = parse_observation_table(
        require(j, "hypothesis", path), child(path, "hypothesis"));
    try {
      return make_tabular_mode(id, io, std::move(map), policy, hypothesis);
    } catch (const Error& e) {
      violation(path, e.what());
    }
  }
  violation(child(path, "kind"), "expected bernoulli_bandit or tabular");
}

std::size_t resolve_mode(const Json& j, const std::vector<std::string>& ids,
                         const std::string& path) {
  const std::string id = as_string(j, path);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw Error(ErrorCode::kDanglingReference,
              "`" + path + "`: no mode with id '" + id + "'");
}

std::vector<std::size_t> resolve_modes(const Json& j, const std::vector<std::string>& ids,
                                       const std::string& path) {
  if (!j.is_array()) violation(path, "expected an array of mode ids");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(resolve_mode(j[i], ids, item(path, i)));
  return out;
}

double get_number_or(const Json& j, std::string_view key, const std::string& path,
                     double fallback) {
  const Json* v = optional(j, key);
  return v ? as_number(*v, child(path, key)) : fallback;
}

std::size_t get_count_or(const Json& j, std::string_view key, const std::string& path,
                         std::size_t fallback, std::size_t min_value = 1) {
  const Json* v = optional(j, key);
  return v ? as_count(*v, child(path, key), min_value) : fallback;
}

void check_delta(double delta, const std::string& path) {
  if (!(delta > 0.0 && delta < 1.0)) violation(path, "must lie in (0, 1)");
}

BoundednessOptions parse_boundedness(const Json& j, const std::string& path,
                                     std::size_t default_horizon) {
  expect_object(j, path);
  BoundednessOptions o;
  o.horizon = get_count_or(j, "horizon", path, default_horizon);
  o.n_realizations = get_count_or(j, "n_realizations", path, o.n_realizations);
  o.delta = get_number_or(j, "delta", path, o.delta);
  check_delta(o.delta, child(path, "delta"));
  o.ladder_points = get_count_or(j, "ladder_points", path, o.ladder_points);
  o.random_subsets = get_count_or(j, "random_subsets", path, o.random_subsets, 0);
  o.subset_inclusion = get_number_or(j, "subset_inclusion", path, o.subset_inclusion);
  o.slope_tol = get_number_or(j, "slope_tol", path, o.slope_tol);
  o.burn_in_fraction = get_number_or(j, "burn_in_fraction", path, o.burn_in_fraction);
  return o;
}

CoreOptions parse_core(const Json& j, const std::string& path,
                       std::size_t default_horizon) {
  expect_object(j, path);
  CoreOptions o;
  o.horizon = default_horizon;
  o.xi = get_number_or(j, "xi", path, o.xi);
  if (!(o.xi > 0.0 && o.xi <= 1.0)) violation(child(path, "xi"), "must lie in (0, 1]");
  o.horizon = get_count_or(j, "horizon", path, o.horizon);
  o.n_realizations = get_count_or(j, "n_realizations", path, o.n_realizations);
  o.delta = get_number_or(j, "delta", path, o.delta);
  check_delta(o.delta, child(path, "delta"));
  o.curve_points = get_count_or(j, "curve_points", path, o.curve_points);
  if (const Json* grid = optional(j, "c_grid")) {
    o.c_grid = as_row(*grid, child(path, "c_grid"));
    if (o.c_grid.empty()) violation(child(path, "c_grid"), "must not be empty");
  }
  return o;
}

DiagnosticRequest parse_diagnostic(const Json& j, const std::vector<std::string>& ids,
                                   std::size_t horizon, const std::string& path) {
  expect_object(j, path);
  DiagnosticRequest r;
  r.kind = [&] {
    const std::string p = child(path, "check");
    try {
      return parse_diagnostic_kind(as_string(require(j, "check", path), p));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchemaViolation) throw;
      violation(p, e.what());
    }
  }();
  if (const Json* s = optional(j, "seed")) r.seed = as_unsigned(*s, child(path, "seed"));
  if (const Json* m = optional(j, "modes")) r.modes = resolve_modes(*m, ids, child(path, "modes"));
  if (const Json* b = optional(j, "background")) {
    r.background = resolve_mode(*b, ids, child(path, "background"));
  }
  switch (r.kind) {
    case DiagnosticKind::kBoundedness:
      allow_keys(j, path, {"check", "seed", "horizon", "n_realizations", "delta",
                           "ladder_points", "random_subsets", "subset_inclusion",
                           "slope_tol", "burn_in_fraction"});
      r.boundedness = parse_boundedness(j, path, horizon);
      break;
    case DiagnosticKind::kCore:
      allow_keys(j, path, {"check", "seed", "modes", "background", "xi", "horizon",
                           "n_realizations", "delta", "c_grid", "curve_points"});
      r.core = parse_core(j, path, horizon);
      break;
    case DiagnosticKind::kConsistency: {
      allow_keys(j, path, {"check", "seed", "modes", "background", "epsilon", "t0",
                           "n_histories", "history_length", "core"});
      auto& c = r.consistency;
      c.epsilon = get_number_or(j, "epsilon", path, c.epsilon);
      if (!(c.epsilon > 0.0)) violation(child(path, "epsilon"), "must be > 0");
      c.t0 = get_count_or(j, "t0", path, c.t0);
      c.n_histories = get_count_or(j, "n_histories", path, c.n_histories);
      c.history_length = get_count_or(j, "history_length", path, c.history_length, 0);
      const Json* core = optional(j, "core");
      c.core = parse_core(core ? *core : Json::object(), child(path, "core"), horizon);
      break;
    }
    case DiagnosticKind::kTheorems: {
      allow_keys(j, path, {"check", "seed", "lambda", "delta", "non_core", "boundedness"});
      if (const Json* l = optional(j, "lambda")) {
        if (l->is_string() && l->get<std::string>() == "auto") {
          r.auto_lambda = true;
        } else {
          r.lambda = as_number(*l, child(path, "lambda"));
          if (!(r.lambda > 0.0 && r.lambda <= 1.0)) {
            violation(child(path, "lambda"), "must lie in (0, 1] or be \"auto\"");
          }
        }
      }
      r.delta = get_number_or(j, "delta", path, r.delta);
      check_delta(r.delta, child(path, "delta"));
      if (const Json* nc = optional(j, "non_core")) {
        r.non_core = resolve_modes(*nc, ids, child(path, "non_core"));
      }
      const Json* b = optional(j, "boundedness");
      r.boundedness = parse_boundedness(b ? *b : Json::object(),
                                        child(path, "boundedness"), horizon);
      break;
    }
  }
  return r;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return s;
}

ExperimentConfig build_config(const Json& root) {
  const std::string path;
  expect_object(root, "<root>");
  allow_keys(root, path,
             {"schema_version", "name", "alphabets", "state_map", "modes", "prior",
              "plant", "reference_mode", "horizon", "seeds", "action_mode",
              "commit_length", "write_curves", "diagnostics", "output_dir"});
  ExperimentConfig cfg;
  const auto version = as_unsigned(require(root, "schema_version", path), "schema_version");
  if (version != static_cast<std::uint64_t>(kSchemaVersion)) {
    violation("schema_version", "unsupported version " + std::to_string(version));
  }
  cfg.schema_version = static_cast<int>(version);
  if (const Json* n = optional(root, "name")) cfg.name = as_string(*n, "name");
  if (cfg.name.empty()) cfg.name = "experiment";

  const Json& alph = require(root, "alphabets", path);
  expect_object(alph, "alphabets");
  allow_keys(alph, "alphabets", {"actions", "observations"});
  std::optional<IoSpace> io;
  try {
    io.emplace(as_symbols(require(alph, "actions", "alphabets"), "alphabets.actions"),
               as_symbols(require(alph, "observations", "alphabets"),
                          "alphabets.observations"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaViolation) throw;
    violation("alphabets", e.what());
  }

  const Json default_map = optional(root, "state_map")
                               ? *optional(root, "state_map")
                               : Json{{"kind", "window"}, {"k", 1}};

  const Json& modes_json = require(root, "modes", path);
  if (!modes_json.is_array() || modes_json.empty()) {
    violation("modes", "expected a non-empty array");
  }
  auto modes = std::make_shared<ModeSet>();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < modes_json.size(); ++i) {
    modes->push_back(parse_mode(modes_json[i], *io, default_map, item("modes", i)));
    const std::string& id = modes->back().id();
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) {
      violation(item("modes", i) + ".id", "duplicate mode id '" + id + "'");
    }
    ids.push_back(id);
  }
  cfg.modes = modes;

  if (const Json* prior = optional(root, "prior")) {
    cfg.prior = as_row(*prior, "prior");
    if (cfg.prior.size() != ids.size()) {
      violation("prior", "expected " + std::to_string(ids.size()) +
                             " entries (one per mode), got " +
                             std::to_string(cfg.prior.size()));
    }
    double sum = 0.0;
    for (double p : cfg.prior) {
      if (!(p > 0.0)) violation("prior", "entries must be strictly positive");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kPosteriorTolerance) {
      violation("prior", "entries sum to " + std::to_string(sum) + ", not 1");
    }
  } else {
    cfg.prior.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
  }

  const Json& plant = require(root, "plant", path);
  expect_object(plant, "plant");
  if (optional(plant, "mode")) {
    allow_keys(plant, "plant", {"mode"});
    const std::size_t m = resolve_mode(plant["mode"], ids, "plant.mode");
    cfg.plant_mode = m;
    cfg.plant = std::make_shared<const Plant>(plant_from_mode((*modes)[m]));
  } else {
    allow_keys(plant, "plant", {"state_map", "response"});
    const Json* map_json = optional(plant, "state_map");
    StateMap map = parse_state_map(map_json ? *map_json : default_map, *io,
                                   "plant.state_map");
    auto table = parse_observation_table(require(plant, "response", "plant"),
                                         "plant.response");
    try {
      cfg.plant = std::make_shared<const Plant>(make_tabular_plant(*io, std::move(map), table));
    } catch (const Error& e) {
      violation("plant", e.what());
    }
  }
  if (const Json* ref = optional(root, "reference_mode")) {
    cfg.reference_mode = resolve_mode(*ref, ids, "reference_mode");
  } else {
    cfg.reference_mode = cfg.plant_mode;
  }

  cfg.horizon = as_count(require(root, "horizon", path), "horizon", 1);

  if (const Json* seeds = optional(root, "seeds")) {
    if (seeds->is_array()) {
      if (seeds->empty()) violation("seeds", "expected at least one seed");
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        cfg.seeds.push_back(as_unsigned((*seeds)[i], item("seeds", i)));
      }
    } else if (seeds->is_object()) {
      allow_keys(*seeds, "seeds", {"count", "base"});
      const auto count = as_count(require(*seeds, "count", "seeds"), "seeds.count", 1);
      const Json* b = optional(*seeds, "base");
      const std::uint64_t base = b ? as_unsigned(*b, "seeds.base") : 0;
      for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(base + i);
    } else {
      violation("seeds", "expected an array or {count, base}");
    }
  } else {
    cfg.seeds = {0};
  }

  if (const Json* am = optional(root, "action_mode")) {
    try {
      cfg.action_mode = parse_action_mode(as_string(*am, "action_mode"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchemaViolation) throw;
      violation("action_mode", "expected sample-mode or exact-mixture");
    }
  }
  cfg.commit_length = get_count_or(root, "commit_length", "", 1);
  if (const Json* wc = optional(root, "write_curves")) {
    if (!wc->is_boolean()) violation("write_curves", "expected a boolean");
    cfg.write_curves = wc->get<bool>();
  }
  if (const Json* diags = optional(root, "diagnostics")) {
    if (!diags->is_array()) violation("diagnostics", "expected an array");
    for (std::size_t i = 0; i < diags->size(); ++i) {
      cfg.diagnostics.push_back(
          parse_diagnostic((*diags)[i], ids, cfg.horizon, item("diagnostics", i)));
    }
  }
  if (const Json* out = optional(root, "output_dir")) {
    cfg.output_dir = as_string(*out, "output_dir");
  }
  cfg.canonical = root.dump();
  return cfg;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

}  // namespace

std::string_view library_version() { return BCR_VERSION; }

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kBoundedness: return "boundedness";
    case DiagnosticKind::kCore: return "core";
    case DiagnosticKind::kConsistency: return "consistency";
    case DiagnosticKind::kTheorems: return "theorems";
  }
  return "unknown";
}

DiagnosticKind parse_diagnostic_kind(std::string_view text) {
  if (text == "boundedness") return DiagnosticKind::kBoundedness;
  if (text == "core") return DiagnosticKind::kCore;
  if (text == "consistency") return DiagnosticKind::kConsistency;
  if (text == "theorems") return DiagnosticKind::kTheorems;
  throw Error(ErrorCode::kInvalidParameter,
              "unknown diagnostic '" + std::string(text) +
                  "' (expected boundedness, core, consistency or theorems)");
}

std::size_t ExperimentConfig::mode_index(std::string_view id) const {
  for (std::size_t i = 0; i < modes->size(); ++i) {
    if ((*modes)[i].id() == id) return i;
  }
  throw Error(ErrorCode::kUnknownMode, "no mode '" + std::string(id) + "'");
}

std::string ExperimentConfig::config_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

ExperimentConfig parse_config(std::string_view text) {
  return build_config(parse_json(text));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " +
                              std::string(e.what()).substr(to_string(e.code()).size() + 2));
  }
}

void override_seeds(ExperimentConfig& cfg, std::size_t count, std::uint64_t base) {
  if (count < 1) throw Error(ErrorCode::kInvalidParameter, "seed count must be >= 1");
  Json root = parse_json(cfg.canonical);
  root["seeds"] = Json{{"count", count}, {"base", base}};
  cfg.seeds.clear();
  for (std::size_t i = 0; i < count; ++i) cfg.seeds.push_back(base + i);
  cfg.canonical = root.dump();
}

}  // namespace bcr
