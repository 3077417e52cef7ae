#include "bcr/modes.hpp"

#include <cmath>
#include <numeric>

#include "bcr/error.hpp"

namespace bcr {

Distribution Distribution::from_probs(std::vector<double> probs) {
  if (probs.empty()) {
    throw Error(ErrorCode::kInvalidDistribution, "empty probability row");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kInvalidDistribution,
                  "row entry " + std::to_string(p) + " is not a probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    throw Error(ErrorCode::kInvalidDistribution,
                "row sums to " + std::to_string(sum) + ", not 1");
  }
  if (sum != 1.0) {
    for (double& p : probs) p /= sum;
  }
  return Distribution(std::move(probs));
}

Distribution Distribution::point_mass(std::size_t size, std::size_t index) {
  if (index >= size) {
    throw Error(ErrorCode::kInvalidParameter, "point mass index out of range");
  }
  std::vector<double> probs(size, 0.0);
  probs[index] = 1.0;
  return Distribution(std::move(probs));
}

Distribution Distribution::uniform(std::size_t size) {
  if (size == 0) {
    throw Error(ErrorCode::kInvalidParameter, "uniform row over nothing");
  }
  return Distribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

OperationMode::OperationMode(std::string id, IoSpace io, StateMap state_map,
                             std::vector<Distribution> policy,
                             std::vector<Distribution> hypothesis)
    : id_(std::move(id)),
      io_(std::move(io)),
      state_map_(std::move(state_map)),
      policy_(std::move(policy)),
      hypothesis_(std::move(hypothesis)) {
  if (!state_map_.is_finite()) {
    throw Error(ErrorCode::kInvalidParameter,
                "mode '" + id_ + "': tabular modes need a finite state map");
  }
  const std::size_t n_states = state_map_.state_count();
  if (policy_.size() != n_states) {
    throw Error(ErrorCode::kIncompleteTable,
                "mode '" + id_ + "': policy has " +
                    std::to_string(policy_.size()) + " rows for " +
                    std::to_string(n_states) + " states");
  }
  if (hypothesis_.size() != n_states * io_.actions.size()) {
    throw Error(ErrorCode::kIncompleteTable,
                "mode '" + id_ + "': hypothesis table is not total");
  }
  for (const auto& row : policy_) {
    if (row.size() != io_.actions.size()) {
      throw Error(ErrorCode::kInvalidDistribution,
                  "mode '" + id_ + "': policy row length mismatch");
    }
  }
  for (const auto& row : hypothesis_) {
    if (row.size() != io_.observations.size()) {
      throw Error(ErrorCode::kInvalidDistribution,
                  "mode '" + id_ + "': hypothesis row length mismatch");
    }
  }
}

const Distribution& OperationMode::action_dist(const History& h) const {
  return policy_[state_map_.state_index(h)];
}

const Distribution& OperationMode::observation_dist(const History& h,
                                                    std::size_t action) const {
  if (!io_.actions.contains_index(action)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "action index " + std::to_string(action) + " out of range");
  }
  return hypothesis_[state_map_.state_index(h) * io_.actions.size() + action];
}

const Distribution& OperationMode::observation_dist(
    const History& h, std::string_view action) const {
  return observation_dist(h, io_.actions.index_of(action));
}

const Distribution& OperationMode::policy_row(std::size_t state) const {
  return policy_.at(state);
}

const Distribution& OperationMode::hypothesis_row(std::size_t state,
                                                  std::size_t action) const {
  if (action >= io_.actions.size()) {
    throw Error(ErrorCode::kInvalidSymbol, "action index out of range");
  }
  return hypothesis_.at(state * io_.actions.size() + action);
}

namespace {

Distribution bandit_policy_row(const IoSpace& io, const BanditPolicy& policy) {
  const std::size_t n = io.actions.size();
  switch (policy.kind) {
    case BanditPolicy::Kind::kUniform:
      return Distribution::uniform(n);
    case BanditPolicy::Kind::kGreedy:
      return Distribution::point_mass(n, io.actions.index_of(policy.arm));
    case BanditPolicy::Kind::kEpsilonGreedy: {
      if (!(policy.epsilon >= 0.0 && policy.epsilon <= 1.0)) {
        throw Error(ErrorCode::kInvalidParameter,
                    "epsilon " + std::to_string(policy.epsilon) +
                        " outside [0, 1]");
      }
      const std::size_t best = io.actions.index_of(policy.arm);
      if (n == 1) return Distribution::point_mass(1, 0);
      std::vector<double> row(n, policy.epsilon / static_cast<double>(n - 1));
      row[best] = 1.0 - policy.epsilon;
      return Distribution::from_probs(std::move(row));
    }
  }
  throw Error(ErrorCode::kInvalidParameter, "unknown bandit policy kind");
}

}  // namespace

OperationMode make_bernoulli_bandit_mode(std::string id, const IoSpace& io,
                                         std::span<const double> success_probs,
                                         const BanditPolicy& policy) {
  if (io.observations.size() != 2) {
    throw Error(ErrorCode::kInvalidParameter,
                "bandit mode '" + id + "' needs a two-symbol observation alphabet");
  }
  if (success_probs.size() != io.actions.size()) {
    throw Error(ErrorCode::kInvalidParameter,
                "bandit mode '" + id + "' needs one parameter per action");
  }
  std::vector<Distribution> hypothesis;
  for (std::size_t a = 0; a < success_probs.size(); ++a) {
    const double theta = success_probs[a];
    if (!(theta >= 0.0 && theta <= 1.0)) {
      throw Error(ErrorCode::kInvalidParameter,
                  "bandit mode '" + id + "': arm '" + io.actions.symbol(a) +
                      "' has theta " + std::to_string(theta) +
                      " outside [0, 1]");
    }
    hypothesis.push_back(Distribution::from_probs({theta, 1.0 - theta}));
  }
  std::vector<Distribution> policy_rows{bandit_policy_row(io, policy)};
  return OperationMode(std::move(id), io, StateMap::window(io, 0),
                       std::move(policy_rows), std::move(hypothesis));
}

OperationMode make_bernoulli_bandit_mode(
    std::string id, const std::vector<std::pair<std::string, double>>& arms,
    const BanditPolicy& policy) {
  std::vector<std::string> actions;
  std::vector<double> thetas;
  for (const auto& [arm, theta] : arms) {
    actions.push_back(arm);
    thetas.push_back(theta);
  }
  IoSpace io(std::move(actions), {"1", "0"});
  return make_bernoulli_bandit_mode(std::move(id), io, thetas, policy);
}

std::vector<Distribution> flatten_observation_table(
    const IoSpace& io, const StateMap& state_map, const HypothesisTable& table,
    std::string_view owner) {
  const std::string who(owner);
  const std::size_t n_states = state_map.state_count();
  const std::size_t n_actions = io.actions.size();
  for (const auto& [state, by_action] : table) {
    if (!state_map.find_state(state)) {
      throw Error(ErrorCode::kInvalidParameter,
                  who + ": observation row for unknown state '" + state + "'");
    }
    for (const auto& [action, row] : by_action) {
      if (!io.actions.find(action)) {
        throw Error(ErrorCode::kInvalidParameter,
                    who + ": observation row for unknown action '" + action +
                        "' in state '" + state + "'");
      }
    }
  }
  std::vector<Distribution> rows;
  rows.reserve(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    const std::string& state = state_map.state_name(s);
    auto by_action = table.find(state);
    for (std::size_t a = 0; a < n_actions; ++a) {
      const std::string& action = io.actions.symbol(a);
      if (by_action == table.end() || !by_action->second.contains(action)) {
        throw Error(ErrorCode::kIncompleteTable,
                    who + ": missing observation row for state '" + state +
                        "', action '" + action + "'");
      }
      const auto& row = by_action->second.at(action);
      if (row.size() != io.observations.size()) {
        throw Error(ErrorCode::kInvalidDistribution,
                    who + ": observation row for (" + state + ", " + action +
                        ") has " + std::to_string(row.size()) + " entries");
      }
      try {
        rows.push_back(Distribution::from_probs(row));
      } catch (const Error& e) {
        throw Error(ErrorCode::kInvalidDistribution,
                    who + ": observation row (" + state + ", " + action +
                        "): " + e.what());
      }
    }
  }
  return rows;
}

OperationMode make_tabular_mode(std::string id, const IoSpace& io,
                                StateMap state_map, const PolicyTable& policy,
                                const HypothesisTable& hypothesis) {
  const std::string who = "mode '" + id + "'";
  const std::size_t n_states = state_map.state_count();
  for (const auto& [state, row] : policy) {
    if (!state_map.find_state(state)) {
      throw Error(ErrorCode::kInvalidParameter,
                  who + ": policy row for unknown state '" + state + "'");
    }
  }
  std::vector<Distribution> policy_rows;
  policy_rows.reserve(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    const std::string& state = state_map.state_name(s);
    auto it = policy.find(state);
    if (it == policy.end()) {
      throw Error(ErrorCode::kIncompleteTable,
                  who + ": missing policy row for state '" + state + "'");
    }
    if (it->second.size() != io.actions.size()) {
      throw Error(ErrorCode::kInvalidDistribution,
                  who + ": policy row for state '" + state + "' has " +
                      std::to_string(it->second.size()) + " entries");
    }
    try {
      policy_rows.push_back(Distribution::from_probs(it->second));
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidDistribution,
                  who + ": policy row '" + state + "': " + e.what());
    }
  }
  auto hypothesis_rows =
      flatten_observation_table(io, state_map, hypothesis, who);
  return OperationMode(std::move(id), io, std::move(state_map),
                       std::move(policy_rows), std::move(hypothesis_rows));
}

}  // namespace bcr
