#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcr/diagnostics.hpp"
#include "bcr/engine.hpp"
#include "bcr/modes.hpp"
#include "bcr/plants.hpp"

namespace bcr {

std::string_view library_version();

inline constexpr int kSchemaVersion = 1;

enum class DiagnosticKind { kBoundedness, kCore, kConsistency, kTheorems };

std::string_view to_string(DiagnosticKind kind);
DiagnosticKind parse_diagnostic_kind(std::string_view text);

struct DiagnosticRequest {
  DiagnosticKind kind = DiagnosticKind::kTheorems;
  std::uint64_t seed = 0;
  // Modes tested against the reference (core, consistency); every other mode
  // when empty.
  std::vector<std::size_t> modes;
  std::optional<std::size_t> background;

  BoundednessOptions boundedness;
  CoreOptions core;  // background pointer is resolved at dispatch time
  ConsistencyOptions consistency;

  bool auto_lambda = false;
  double lambda = 1.0;
  double delta = 0.05;
  std::optional<std::vector<std::size_t>> non_core;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  std::shared_ptr<const ModeSet> modes;
  std::vector<double> prior;
  std::shared_ptr<const Plant> plant;
  std::optional<std::size_t> plant_mode;      // mode the plant was built from
  std::optional<std::size_t> reference_mode;  // m* for diagnostics
  std::size_t horizon = 1;
  std::vector<std::uint64_t> seeds;
  ActionMode action_mode = ActionMode::kSampleMode;
  std::size_t commit_length = 1;
  bool write_curves = true;
  std::vector<DiagnosticRequest> diagnostics;
  std::string output_dir;
  // Canonical JSON text of the document this config was built from.
  std::string canonical;

  const IoSpace& io() const { return modes->front().io(); }
  std::size_t mode_index(std::string_view id) const;
  // 16 hex digits of FNV-1a over the canonical text.
  std::string config_hash() const;
};

// Errors carry kParseError (with line and column), kSchemaViolation (with the
// offending field path) or kDanglingReference.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Replaces the seed list by base, base + 1, ..., base + count - 1 and
// refreshes the canonical text (and so the hash).
void override_seeds(ExperimentConfig& cfg, std::size_t count, std::uint64_t base);

std::vector<std::string> scenario_names();
// Canonical JSON document for a built-in scenario; kUnknownScenario otherwise.
std::string scenario_config_text(std::string_view name);
ExperimentConfig scenario(std::string_view name);

// JSONL trace rows: {t, sampled_mode, action, observation, obs_loglik,
// posterior}. -inf log-likelihoods are written as null.
void write_trace_jsonl(std::ostream& out, const RunTrace& trace, const IoSpace& io);
RunTrace read_trace_jsonl(std::istream& in, const ExperimentConfig& cfg,
                          std::uint64_t seed);
RunTrace read_trace_jsonl(const std::filesystem::path& path,
                          const ExperimentConfig& cfg, std::uint64_t seed);
std::string trace_file_name(std::uint64_t seed);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: resolve_output_dir(cfg, {})
  unsigned threads = 0;           // 0: hardware concurrency
  bool run_diagnostics = true;
  std::ostream* log = nullptr;    // warnings and verdict lines
};

struct RunArtifacts {
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> trace_files;  // seed order
  std::filesystem::path summary_csv;
  std::vector<std::filesystem::path> curve_csvs;
  std::vector<std::filesystem::path> diagnostics_csvs;
  std::filesystem::path manifest;
  std::string config_hash;
  std::vector<RunTrace> traces;
  std::vector<std::uint64_t> aborted_seeds;
};

// Output root: explicit override, else the config's output_dir, else
// $BCR_LAB_OUT/<name>, else ./bcr_out/<name>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::filesystem::path& override_dir);

RunArtifacts run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Runs one kind of the config's diagnostics (theorems need traces) and writes
// its CSVs under out_dir. When the config requests none of that kind, a
// request with default parameters is used.
std::vector<std::filesystem::path> run_diagnostic(
    const ExperimentConfig& cfg, DiagnosticKind kind,
    std::span<const RunTrace> traces, const std::filesystem::path& out_dir,
    std::ostream* log = nullptr);

}  // namespace bcr
