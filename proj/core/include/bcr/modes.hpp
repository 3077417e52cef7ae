#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bcr/core.hpp"

namespace bcr {

// Per-row normalization tolerance. Rows inside it are renormalized on
// construction; rows outside it are rejected.
inline constexpr double kRowTolerance = 1e-12;

// A finite probability row aligned to some alphabet's symbol order.
class Distribution {
 public:
  // Throws ErrorCode::kInvalidDistribution on negative, non-finite, or
  // non-normalized input.
  static Distribution from_probs(std::vector<double> probs);
  static Distribution point_mass(std::size_t size, std::size_t index);
  static Distribution uniform(std::size_t size);

  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  bool operator==(const Distribution&) const = default;

 private:
  explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

// state name -> row over actions
using PolicyTable = std::map<std::string, std::vector<double>>;
// state name -> action symbol -> row over observations
using HypothesisTable =
    std::map<std::string, std::map<std::string, std::vector<double>>>;

// A hypothesis-policy pair over a finite state map: P(a | m, s) and
// P(o | m, s, a). Immutable once built.
class OperationMode {
 public:
  // Rows are indexed [state] for the policy and [state * |A| + action] for
  // the hypothesis. Use make_tabular_mode for validated construction from
  // named tables.
  OperationMode(std::string id, IoSpace io, StateMap state_map,
                std::vector<Distribution> policy,
                std::vector<Distribution> hypothesis);

  const std::string& id() const { return id_; }
  const IoSpace& io() const { return io_; }
  const StateMap& state_map() const { return state_map_; }
  std::size_t state_count() const { return policy_.size(); }

  const Distribution& action_dist(const History& h) const;
  const Distribution& observation_dist(const History& h,
                                       std::size_t action) const;
  const Distribution& observation_dist(const History& h,
                                       std::string_view action) const;

  const Distribution& policy_row(std::size_t state) const;
  const Distribution& hypothesis_row(std::size_t state,
                                     std::size_t action) const;

 private:
  std::string id_;
  IoSpace io_;
  StateMap state_map_;
  std::vector<Distribution> policy_;
  std::vector<Distribution> hypothesis_;
};

using ModeSet = std::vector<OperationMode>;

struct BanditPolicy {
  enum class Kind { kGreedy, kEpsilonGreedy, kUniform };

  Kind kind = Kind::kUniform;
  std::string arm;  // greedy and epsilon-greedy
  double epsilon = 0.0;

  static BanditPolicy greedy(std::string arm) {
    return {Kind::kGreedy, std::move(arm), 0.0};
  }
  static BanditPolicy epsilon_greedy(std::string arm, double epsilon) {
    return {Kind::kEpsilonGreedy, std::move(arm), epsilon};
  }
  static BanditPolicy uniform() { return {}; }
};

// Memoryless (window 0) Bernoulli-arm mode. `success_probs` is aligned to
// io.actions and gives the probability of the first observation symbol;
// io.observations must have exactly two symbols. Epsilon-greedy puts 1 - eps
// on the chosen arm and spreads eps evenly over the others.
OperationMode make_bernoulli_bandit_mode(std::string id, const IoSpace& io,
                                         std::span<const double> success_probs,
                                         const BanditPolicy& policy);

// Convenience form with observation alphabet {"1", "0"} and the action
// alphabet taken from the arm order.
OperationMode make_bernoulli_bandit_mode(
    std::string id, const std::vector<std::pair<std::string, double>>& arms,
    const BanditPolicy& policy);

// Throws kIncompleteTable on a missing row, kInvalidDistribution on a bad
// row, kInvalidParameter on a row for an unknown state or action.
OperationMode make_tabular_mode(std::string id, const IoSpace& io,
                                StateMap state_map, const PolicyTable& policy,
                                const HypothesisTable& hypothesis);

// Shared by modes and plants: validates and flattens a hypothesis table into
// [state * |A| + action] rows.
std::vector<Distribution> flatten_observation_table(
    const IoSpace& io, const StateMap& state_map, const HypothesisTable& table,
    std::string_view owner);

}  // namespace bcr
