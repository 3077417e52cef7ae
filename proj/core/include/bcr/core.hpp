#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bcr {

enum class AlphabetRole { kAction, kObservation };

// Ordered set of distinct symbols. The order is part of an experiment's
// identity: inverse-CDF sampling and tie-breaking both walk it.
class Alphabet {
 public:
  Alphabet(AlphabetRole role, std::vector<std::string> symbols);

  AlphabetRole role() const { return role_; }
  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t index) const;
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::optional<std::size_t> find(std::string_view symbol) const;
  // Throws ErrorCode::kInvalidSymbol when absent.
  std::size_t index_of(std::string_view symbol) const;
  bool contains_index(std::size_t index) const { return index < symbols_.size(); }

  bool operator==(const Alphabet& other) const {
    return role_ == other.role_ && symbols_ == other.symbols_;
  }

 private:
  AlphabetRole role_;
  std::vector<std::string> symbols_;
};

// The pair of alphabets shared by every mode and plant of one experiment.
struct IoSpace {
  Alphabet actions;
  Alphabet observations;

  IoSpace(std::vector<std::string> action_symbols,
          std::vector<std::string> observation_symbols)
      : actions(AlphabetRole::kAction, std::move(action_symbols)),
        observations(AlphabetRole::kObservation,
                     std::move(observation_symbols)) {}

  bool operator==(const IoSpace&) const = default;
};

// One interaction cycle: the issued action, the plant's response, and
// whether the action was set by the controller (an intervention) rather
// than merely observed.
struct Step {
  std::size_t action = 0;
  std::size_t observation = 0;
  bool intervened = true;

  bool operator==(const Step&) const = default;
};

class History {
 public:
  History() = default;
  explicit History(std::vector<Step> steps) : steps_(std::move(steps)) {}

  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  std::span<const Step> steps() const { return steps_; }
  const Step& operator[](std::size_t i) const { return steps_[i]; }

  // In-place accretion for hot loops; indices are the caller's to validate.
  void push(Step step) { steps_.push_back(step); }
  void pop() { steps_.pop_back(); }
  void reserve(std::size_t n) { steps_.reserve(n); }

  bool operator==(const History&) const = default;

 private:
  std::vector<Step> steps_;
};

History append_step(const History& h, const IoSpace& io, std::string_view action,
                    std::string_view observation, bool intervened);
History append_step(const History& h, const IoSpace& io, std::size_t action,
                    std::size_t observation, bool intervened);

// Name of the state reached before any cycle has completed.
inline constexpr std::string_view kInitialStateKey = "s0";

enum class StateMapKind { kFullHistory, kWindow, kTable };

// The history-to-state mapping that makes tabular modes finite.
//
// Window and table maps key a history by concatenating the symbols of its
// last k cycles, oldest first, action before observation ("L1R0"). Histories
// with no cycle in the window key to "s0". Window maps use the key as the
// state; table maps look it up. Only symbol values feed the key; the
// intervention flag never does.
class StateMap {
 public:
  static StateMap full_history(const IoSpace& io);
  static StateMap window(const IoSpace& io, std::size_t k);
  // `entries` maps history keys to state names; states are indexed in order
  // of first appearance.
  static StateMap table(
      const IoSpace& io, std::size_t k,
      const std::vector<std::pair<std::string, std::string>>& entries);

  StateMapKind kind() const { return kind_; }
  std::size_t window_length() const { return k_; }
  bool is_finite() const { return kind_ != StateMapKind::kFullHistory; }

  std::string history_key(const History& h) const;
  std::string to_state(const History& h) const;

  // Dense indexing, available for finite kinds only.
  std::size_t state_count() const;
  std::size_t state_index(const History& h) const;
  const std::string& state_name(std::size_t index) const;
  std::optional<std::size_t> find_state(std::string_view name) const;

  const std::vector<std::string>& state_names() const { return names_; }
  const std::vector<std::pair<std::string, std::string>>& table_entries() const {
    return entries_;
  }

 private:
  StateMap(StateMapKind kind, std::size_t k, std::size_t n_actions,
           std::size_t n_observations, std::vector<std::string> action_symbols,
           std::vector<std::string> observation_symbols);

  std::size_t window_code(const History& h) const;

  StateMapKind kind_;
  std::size_t k_ = 0;
  std::size_t n_actions_ = 0;
  std::size_t n_observations_ = 0;
  std::vector<std::string> action_symbols_;
  std::vector<std::string> observation_symbols_;
  std::vector<std::string> names_;
  std::vector<std::size_t> offsets_;  // window kind: first index per length
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_map<std::string, std::size_t> key_to_index_;
  std::unordered_map<std::string, std::size_t> name_to_index_;
};

}  // namespace bcr
