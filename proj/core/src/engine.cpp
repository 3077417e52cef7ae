#include "bcr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcr/error.hpp"

namespace bcr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(ActionMode mode) {
  return mode == ActionMode::kSampleMode ? "sample-mode" : "exact-mixture";
}

ActionMode parse_action_mode(std::string_view text) {
  if (text == "sample-mode") return ActionMode::kSampleMode;
  if (text == "exact-mixture") return ActionMode::kExactMixture;
  throw Error(ErrorCode::kInvalidParameter,
              "unknown action mode '" + std::string(text) + "'");
}

PosteriorState PosteriorState::from_prior(std::span<const double> prior) {
  if (prior.empty()) {
    throw Error(ErrorCode::kInvalidPrior, "prior over zero modes");
  }
  double sum = 0.0;
  for (double p : prior) {
    if (!std::isfinite(p) || p <= 0.0) {
      throw Error(ErrorCode::kInvalidPrior,
                  "prior entries must be strictly positive, got " +
                      std::to_string(p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kPosteriorTolerance) {
    throw Error(ErrorCode::kInvalidPrior,
                "prior sums to " + std::to_string(sum) + ", not 1");
  }
  PosteriorState state;
  state.log_weights.reserve(prior.size());
  for (double p : prior) state.log_weights.push_back(std::log(p));
  state.normalized = true;
  return state;
}

void PosteriorState::normalize() {
  const double peak =
      *std::max_element(log_weights.begin(), log_weights.end());
  if (peak == kNegInf) {
    throw Error(ErrorCode::kImpossibleObservation,
                "every mode has zero posterior weight");
  }
  double mass = 0.0;
  for (double lw : log_weights) {
    if (lw != kNegInf) mass += std::exp(lw - peak);
  }
  const double log_norm = peak + std::log(mass);
  for (double& lw : log_weights) {
    if (lw != kNegInf) lw -= log_norm;
  }
  normalized = true;
}

std::vector<double> PosteriorState::probabilities() const {
  std::vector<double> w(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), w.begin(),
                 [](double lw) { return std::exp(lw); });
  return w;
}

Controller::Controller(std::shared_ptr<const ModeSet> modes,
                       std::span<const double> prior, ActionMode action_mode,
                       std::size_t commit_length)
    : modes_(std::move(modes)),
      action_mode_(action_mode),
      commit_length_(commit_length) {
  if (!modes_ || modes_->empty()) {
    throw Error(ErrorCode::kInvalidParameter, "controller needs at least one mode");
  }
  if (prior.size() != modes_->size()) {
    throw Error(ErrorCode::kInvalidPrior,
                "prior has " + std::to_string(prior.size()) + " entries for " +
                    std::to_string(modes_->size()) + " modes");
  }
  if (commit_length_ == 0) {
    throw Error(ErrorCode::kInvalidParameter, "commit_length must be >= 1");
  }
  for (const auto& m : *modes_) {
    if (!(m.io() == modes_->front().io())) {
      throw Error(ErrorCode::kInvalidParameter,
                  "mode '" + m.id() + "' uses different alphabets");
    }
  }
  posterior_ = PosteriorState::from_prior(prior);
}

std::vector<double> Controller::action_law() const {
  const auto w = posterior_.probabilities();
  std::vector<double> law(io().actions.size(), 0.0);
  for (std::size_t m = 0; m < modes_->size(); ++m) {
    if (w[m] == 0.0) continue;
    const auto row = (*modes_)[m].action_dist(history_).probs();
    for (std::size_t a = 0; a < law.size(); ++a) law[a] += w[m] * row[a];
  }
  return law;
}

ActionChoice Controller::select_action(Rng& rng) {
  if (action_mode_ == ActionMode::kExactMixture) {
    const auto law = action_law();
    return {sample_index(law, rng), std::nullopt};
  }
  const std::size_t t = history_.size();
  // A repeated selection within the drawing cycle redraws the mode.
  const bool committed = committed_mode_ && commit_start_ < t && t < commit_until_ &&
                         posterior_.log_weights[*committed_mode_] != kNegInf;
  if (!committed) {
    const auto w = posterior_.probabilities();
    committed_mode_ = sample_index(w, rng);
    commit_start_ = t;
    commit_until_ = t + commit_length_;
  }
  const std::size_t m = *committed_mode_;
  const auto& row = (*modes_)[m].action_dist(history_);
  return {sample_index(row.probs(), rng), m};
}

std::vector<double> Controller::update_posterior(
    std::size_t action, std::size_t observation,
    std::optional<std::size_t> sampled_mode) {
  const IoSpace& space = io();
  if (!space.actions.contains_index(action)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "action index " + std::to_string(action) + " out of range");
  }
  if (!space.observations.contains_index(observation)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "observation index " + std::to_string(observation) +
                    " out of range");
  }
  const std::size_t n = modes_->size();
  std::vector<double> loglik(n);
  bool any_possible = false;
  for (std::size_t m = 0; m < n; ++m) {
    const double p = (*modes_)[m].observation_dist(history_, action)[observation];
    loglik[m] = p > 0.0 ? std::log(p) : kNegInf;
    if (p > 0.0 && posterior_.log_weights[m] != kNegInf) any_possible = true;
  }
  if (!any_possible) {
    throw Error(ErrorCode::kImpossibleObservation,
                "observation '" + space.observations.symbol(observation) +
                    "' after action '" + space.actions.symbol(action) +
                    "' at cycle " + std::to_string(history_.size() + 1) +
                    " has probability zero under every live mode");
  }
  for (std::size_t m = 0; m < n; ++m) posterior_.log_weights[m] += loglik[m];
  posterior_.normalize();
  history_.push(Step{action, observation, true});
  if (action_mode_ == ActionMode::kSampleMode) {
    sampled_modes_.push_back(sampled_mode);
  }
  return loglik;
}

StepRecord Controller::step(const Plant& plant, Rng& rng) {
  if (!(plant.io() == io())) {
    throw Error(ErrorCode::kInvalidParameter,
                "plant and controller use different alphabets");
  }
  const ActionChoice choice = select_action(rng);
  const std::size_t o = plant.respond(history_, choice.action, rng);
  StepRecord record;
  record.obs_loglik = update_posterior(choice.action, o, choice.sampled_mode);
  record.t = history_.size();
  record.sampled_mode = choice.sampled_mode;
  record.action = choice.action;
  record.observation = o;
  record.posterior = posterior_.probabilities();
  return record;
}

std::size_t RunTrace::mode_index(std::string_view id) const {
  auto it = std::find(mode_ids.begin(), mode_ids.end(), id);
  if (it == mode_ids.end()) {
    throw Error(ErrorCode::kUnknownMode, "no mode '" + std::string(id) + "'");
  }
  return static_cast<std::size_t>(it - mode_ids.begin());
}

bool RunTrace::has_partition() const {
  return std::all_of(steps.begin(), steps.end(),
                     [](const StepRecord& r) { return r.sampled_mode.has_value(); });
}

History RunTrace::history() const {
  History h;
  h.reserve(steps.size());
  for (const auto& r : steps) h.push(Step{r.action, r.observation, true});
  return h;
}

RunTrace simulate_run(std::shared_ptr<const ModeSet> modes,
                      std::span<const double> prior, const Plant& plant,
                      std::size_t horizon, std::uint64_t seed,
                      ActionMode action_mode, std::size_t commit_length) {
  RunTrace trace;
  trace.seed = seed;
  trace.prior.assign(prior.begin(), prior.end());
  for (const auto& m : *modes) trace.mode_ids.push_back(m.id());
  Controller controller(std::move(modes), prior, action_mode, commit_length);
  Rng rng(seed);
  trace.steps.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    try {
      trace.steps.push_back(controller.step(plant, rng));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kImpossibleObservation) throw;
      trace.aborted = true;
      trace.abort_reason = e.what();
      break;
    }
  }
  return trace;
}

}  // namespace bcr
