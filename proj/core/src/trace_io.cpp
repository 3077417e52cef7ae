#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "bcr/error.hpp"
#include "bcr/runner.hpp"

namespace bcr {

namespace {

using Json = nlohmann::ordered_json;

Json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

std::vector<double> read_numbers(const Json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) {
    throw Error(ErrorCode::kSchemaViolation, where + ": expected " + std::to_string(n) +
                                                 " entries");
  }
  std::vector<double> out;
  out.reserve(n);
  for (const auto& v : j) {
    if (v.is_null()) {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else if (v.is_number()) {
      out.push_back(v.get<double>());
    } else {
      throw Error(ErrorCode::kSchemaViolation, where + ": expected numbers");
    }
  }
  return out;
}

}  // namespace

std::string trace_file_name(std::uint64_t seed) {
  return "trace_seed" + std::to_string(seed) + ".jsonl";
}

void write_trace_jsonl(std::ostream& out, const RunTrace& trace, const IoSpace& io) {
  for (const auto& s : trace.steps) {
    Json row;
    row["t"] = s.t;
    if (s.sampled_mode) {
      row["sampled_mode"] = trace.mode_ids.at(*s.sampled_mode);
    } else {
      row["sampled_mode"] = nullptr;
    }
    row["action"] = io.actions.symbol(s.action);
    row["observation"] = io.observations.symbol(s.observation);
    Json ll = Json::array();
    for (double x : s.obs_loglik) ll.push_back(number_or_null(x));
    row["obs_loglik"] = std::move(ll);
    row["posterior"] = s.posterior;
    out << row.dump() << '\n';
  }
}

RunTrace read_trace_jsonl(std::istream& in, const ExperimentConfig& cfg,
                          std::uint64_t seed) {
  RunTrace trace;
  trace.seed = seed;
  trace.prior = cfg.prior;
  for (const auto& m : *cfg.modes) trace.mode_ids.push_back(m.id());
  const std::size_t n = trace.mode_ids.size();
  const IoSpace& io = cfg.io();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "trace line " + std::to_string(line_no);
    Json row;
    try {
      row = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    }
    try {
      StepRecord s;
      s.t = row.at("t").get<std::size_t>();
      const Json& sm = row.at("sampled_mode");
      if (!sm.is_null()) s.sampled_mode = trace.mode_index(sm.get<std::string>());
      s.action = io.actions.index_of(row.at("action").get<std::string>());
      s.observation = io.observations.index_of(row.at("observation").get<std::string>());
      s.obs_loglik = read_numbers(row.at("obs_loglik"), n, where + " obs_loglik");
      s.posterior = read_numbers(row.at("posterior"), n, where + " posterior");
      if (s.t != trace.steps.size() + 1) {
        throw Error(ErrorCode::kSchemaViolation, where + ": steps out of order");
      }
      trace.steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaViolation, where + ": " + e.what());
    }
  }
  return trace;
}

RunTrace read_trace_jsonl(const std::filesystem::path& path, const ExperimentConfig& cfg,
                          std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trace '" + path.string() + "'");
  return read_trace_jsonl(in, cfg, seed);
}

}  // namespace bcr
