#include <nlohmann/json.hpp>

#include "bcr/error.hpp"
#include "bcr/runner.hpp"

namespace bcr {

namespace {

using Json = nlohmann::ordered_json;

Json bandit_identifiable() {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = "bandit-identifiable";
  j["alphabets"] = {{"actions", {"L", "R"}}, {"observations", {"1", "0"}}};
  j["modes"] = Json::array({
      {{"id", "m1"},
       {"kind", "bernoulli_bandit"},
       {"arms", {{"L", 0.8}, {"R", 0.3}}},
       {"policy", {{"kind", "greedy"}, {"arm", "L"}}}},
      {{"id", "m2"},
       {"kind", "bernoulli_bandit"},
       {"arms", {{"L", 0.3}, {"R", 0.8}}},
       {"policy", {{"kind", "greedy"}, {"arm", "R"}}}},
  });
  j["prior"] = {0.5, 0.5};
  j["plant"] = {{"mode", "m1"}};
  j["reference_mode"] = "m1";
  j["horizon"] = 500;
  j["seeds"] = {{"count", 10}, {"base", 1}};
  j["action_mode"] = "sample-mode";
  j["commit_length"] = 1;
  j["diagnostics"] = Json::array({
      {{"check", "boundedness"}, {"seed", 7}, {"horizon", 500}},
      {{"check", "core"}, {"seed", 11}},
      {{"check", "consistency"}, {"seed", 13}},
      {{"check", "theorems"}, {"lambda", "auto"}, {"seed", 17}},
  });
  return j;
}

// Two regions A and B; the state is the region of the last observation.
Json region_map(const std::vector<std::string>& actions) {
  Json table = Json::object();
  table["s0"] = "A";
  for (const char* region : {"A", "B"}) {
    for (const auto& a : actions) table[a + region] = region;
  }
  return {{"kind", "table"}, {"k", 1}, {"table", table}};
}

Json tabular(const std::string& id, const Json& policy, const Json& hypothesis) {
  return {{"id", id}, {"kind", "tabular"}, {"policy", policy}, {"hypothesis", hypothesis}};
}

Json fig5_core_ambiguity() {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = "fig5-core-ambiguity";
  j["alphabets"] = {{"actions", {"a", "b"}}, {"observations", {"A", "B"}}};
  j["state_map"] = region_map({"a", "b"});
  j["modes"] = Json::array({
      tabular("h1", {{"A", {0.0, 1.0}}, {"B", {0.0, 1.0}}},
              {{"A", {{"a", {1.0, 0.0}}, {"b", {0.5, 0.5}}}},
               {"B", {{"a", {0.9, 0.1}}, {"b", {0.2, 0.8}}}}}),
      tabular("h2", {{"A", {1.0, 0.0}}, {"B", {1.0, 0.0}}},
              {{"A", {{"a", {1.0, 0.0}}, {"b", {0.5, 0.5}}}},
               {"B", {{"a", {0.5, 0.5}}, {"b", {0.7, 0.3}}}}}),
      tabular("h3", {{"A", {0.5, 0.5}}, {"B", {1.0, 0.0}}},
              {{"A", {{"a", {0.5, 0.5}}, {"b", {0.8, 0.2}}}},
               {"B", {{"a", {0.3, 0.7}}, {"b", {0.6, 0.4}}}}}),
  });
  j["plant"] = {{"mode", "h1"}};
  j["reference_mode"] = "h1";
  j["horizon"] = 2000;
  j["seeds"] = {{"count", 50}, {"base", 1}};
  j["action_mode"] = "sample-mode";
  j["commit_length"] = 1;
  j["diagnostics"] = Json::array({
      {{"check", "core"}, {"seed", 11}},
      {{"check", "consistency"}, {"seed", 13}},
      {{"check", "theorems"}, {"non_core", {"h2", "h3"}}, {"seed", 17}},
  });
  return j;
}

Json fig6_inconsistent() {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = "fig6-inconsistent";
  j["alphabets"] = {{"actions", {"x", "y", "b"}}, {"observations", {"A", "B"}}};
  j["state_map"] = region_map({"x", "y", "b"});
  const Json region_b = {{"x", {0.9, 0.1}}, {"y", {0.9, 0.1}}, {"b", {0.9, 0.1}}};
  Json h2_b = {{"x", {0.2, 0.8}}, {"y", {0.2, 0.8}}, {"b", {0.2, 0.8}}};
  const Json region_a = {{"x", {1.0, 0.0}}, {"y", {1.0, 0.0}}, {"b", {0.5, 0.5}}};
  j["modes"] = Json::array({
      tabular("h1", {{"A", {1.0, 0.0, 0.0}}, {"B", {1.0, 0.0, 0.0}}},
              {{"A", region_a}, {"B", region_b}}),
      tabular("h2", {{"A", {0.0, 1.0, 0.0}}, {"B", {0.0, 1.0, 0.0}}},
              {{"A", region_a}, {"B", h2_b}}),
  });
  j["prior"] = {0.5, 0.5};
  j["plant"] = {{"mode", "h1"}};
  j["reference_mode"] = "h1";
  j["horizon"] = 2000;
  j["seeds"] = {{"count", 50}, {"base", 1}};
  j["action_mode"] = "sample-mode";
  j["commit_length"] = 1;
  j["diagnostics"] = Json::array({
      {{"check", "core"}, {"seed", 11}},
      {{"check", "consistency"}, {"seed", 13}},
      {{"check", "theorems"}, {"seed", 17}},
  });
  return j;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"bandit-identifiable", "fig5-core-ambiguity", "fig6-inconsistent"};
}

std::string scenario_config_text(std::string_view name) {
  Json j;
  if (name == "bandit-identifiable") {
    j = bandit_identifiable();
  } else if (name == "fig5-core-ambiguity") {
    j = fig5_core_ambiguity();
  } else if (name == "fig6-inconsistent") {
    j = fig6_inconsistent();
  } else {
    throw Error(ErrorCode::kUnknownScenario, "no scenario '" + std::string(name) + "'");
  }
  return j.dump(2) + "\n";
}

ExperimentConfig scenario(std::string_view name) {
  return parse_config(scenario_config_text(name));
}

}  // namespace bcr
