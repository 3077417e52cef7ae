#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcr/core.hpp"
#include "bcr/modes.hpp"
#include "bcr/plants.hpp"
#include "bcr/random.hpp"

namespace bcr {

inline constexpr double kPosteriorTolerance = 1e-10;

enum class ActionMode {
  kSampleMode,    // draw m from the posterior, then a from m's policy
  kExactMixture,  // draw a from the posterior-weighted policy mixture
};

std::string_view to_string(ActionMode mode);
ActionMode parse_action_mode(std::string_view text);

// Posterior over modes in natural-log space. A weight of exactly zero is
// stored as -inf and stays there.
struct PosteriorState {
  std::vector<double> log_weights;
  bool normalized = false;

  static PosteriorState from_prior(std::span<const double> prior);

  // Max-subtracted log-sum-exp; -inf entries do not take part.
  void normalize();
  std::vector<double> probabilities() const;
};

struct ActionChoice {
  std::size_t action = 0;
  std::optional<std::size_t> sampled_mode;
};

// One completed cycle, with everything offline diagnostics need.
struct StepRecord {
  std::size_t t = 0;  // 1-based cycle index
  std::optional<std::size_t> sampled_mode;
  std::size_t action = 0;
  std::size_t observation = 0;
  std::vector<double> obs_loglik;  // ln P(o_t | m, state, a_t) per mode
  std::vector<double> posterior;   // weights after the update

  bool operator==(const StepRecord&) const = default;
};

// The controller: a posterior over a fixed mode set, updated from
// observation likelihoods only. Issued actions are interventions and never
// contribute a likelihood term.
class Controller {
 public:
  Controller(std::shared_ptr<const ModeSet> modes, std::span<const double> prior,
             ActionMode action_mode = ActionMode::kSampleMode,
             std::size_t commit_length = 1);

  const ModeSet& modes() const { return *modes_; }
  const IoSpace& io() const { return modes_->front().io(); }
  ActionMode action_mode() const { return action_mode_; }
  std::size_t commit_length() const { return commit_length_; }

  const PosteriorState& posterior() const { return posterior_; }
  std::vector<double> weights() const { return posterior_.probabilities(); }
  const History& history() const { return history_; }
  // One entry per completed cycle in sample-mode; empty in exact-mixture.
  const std::vector<std::optional<std::size_t>>& sampled_modes() const {
    return sampled_modes_;
  }

  // Posterior-weighted mixture of the modes' action rows at the current
  // history.
  std::vector<double> action_law() const;

  ActionChoice select_action(Rng& rng);

  // Adds ln P(o | m, state, a) to every mode and renormalizes; extends the
  // history with (a, o, intervened). Returns the per-mode log-likelihoods.
  // Throws kImpossibleObservation, leaving the state untouched, when every
  // mode with positive weight assigns o probability zero.
  std::vector<double> update_posterior(
      std::size_t action, std::size_t observation,
      std::optional<std::size_t> sampled_mode = std::nullopt);

  // select_action, plant response, update_posterior.
  StepRecord step(const Plant& plant, Rng& rng);

 private:
  std::shared_ptr<const ModeSet> modes_;
  PosteriorState posterior_;
  History history_;
  std::vector<std::optional<std::size_t>> sampled_modes_;
  ActionMode action_mode_;
  std::size_t commit_length_;
  std::optional<std::size_t> committed_mode_;
  std::size_t commit_start_ = 0;  // cycle at which committed_mode_ was drawn
  std::size_t commit_until_ = 0;  // committed_mode_ holds for cycles < this
};

// A complete run as persisted by the runner and consumed by diagnostics.
struct RunTrace {
  std::uint64_t seed = 0;
  std::vector<std::string> mode_ids;
  std::vector<double> prior;
  std::vector<StepRecord> steps;
  bool aborted = false;
  std::string abort_reason;

  std::size_t mode_index(std::string_view id) const;
  // True when every step carries the mode that was sampled for it.
  bool has_partition() const;
  History history() const;
};

// Drives one controller against one plant for `horizon` cycles. An
// impossible observation stops the run and marks it aborted.
RunTrace simulate_run(std::shared_ptr<const ModeSet> modes,
                      std::span<const double> prior, const Plant& plant,
                      std::size_t horizon, std::uint64_t seed,
                      ActionMode action_mode = ActionMode::kSampleMode,
                      std::size_t commit_length = 1);

}  // namespace bcr
