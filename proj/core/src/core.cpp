#include "bcr/core.hpp"

#include <algorithm>
#include <unordered_set>

#include "bcr/error.hpp"

namespace bcr {

namespace {

constexpr std::size_t kMaxWindowStates = std::size_t{1} << 20;

std::string_view role_name(AlphabetRole role) {
  return role == AlphabetRole::kAction ? "action" : "observation";
}

}  // namespace

Alphabet::Alphabet(AlphabetRole role, std::vector<std::string> symbols)
    : role_(role), symbols_(std::move(symbols)) {
  if (symbols_.empty()) {
    throw Error(ErrorCode::kInvalidParameter,
                std::string(role_name(role_)) + " alphabet is empty");
  }
  std::unordered_set<std::string> seen;
  for (const auto& s : symbols_) {
    if (s.empty()) {
      throw Error(ErrorCode::kInvalidParameter,
                  std::string(role_name(role_)) + " alphabet has an empty symbol");
    }
    if (!seen.insert(s).second) {
      throw Error(ErrorCode::kInvalidParameter,
                  std::string(role_name(role_)) + " alphabet repeats symbol '" +
                      s + "'");
    }
  }
}

const std::string& Alphabet::symbol(std::size_t index) const {
  if (index >= symbols_.size()) {
    throw Error(ErrorCode::kInvalidSymbol,
                std::string(role_name(role_)) + " index " +
                    std::to_string(index) + " out of range");
  }
  return symbols_[index];
}

std::optional<std::size_t> Alphabet::find(std::string_view symbol) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - symbols_.begin());
}

std::size_t Alphabet::index_of(std::string_view symbol) const {
  if (auto i = find(symbol)) return *i;
  throw Error(ErrorCode::kInvalidSymbol, "'" + std::string(symbol) +
                                             "' is not in the " +
                                             std::string(role_name(role_)) +
                                             " alphabet");
}

History append_step(const History& h, const IoSpace& io, std::string_view action,
                    std::string_view observation, bool intervened) {
  return append_step(h, io, io.actions.index_of(action),
                     io.observations.index_of(observation), intervened);
}

History append_step(const History& h, const IoSpace& io, std::size_t action,
                    std::size_t observation, bool intervened) {
  if (!io.actions.contains_index(action)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "action index " + std::to_string(action) + " out of range");
  }
  if (!io.observations.contains_index(observation)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "observation index " + std::to_string(observation) +
                    " out of range");
  }
  History out = h;
  out.push(Step{action, observation, intervened});
  return out;
}

StateMap::StateMap(StateMapKind kind, std::size_t k, std::size_t n_actions,
                   std::size_t n_observations,
                   std::vector<std::string> action_symbols,
                   std::vector<std::string> observation_symbols)
    : kind_(kind),
      k_(k),
      n_actions_(n_actions),
      n_observations_(n_observations),
      action_symbols_(std::move(action_symbols)),
      observation_symbols_(std::move(observation_symbols)) {}

StateMap StateMap::full_history(const IoSpace& io) {
  return StateMap(StateMapKind::kFullHistory, 0, io.actions.size(),
                  io.observations.size(), io.actions.symbols(),
                  io.observations.symbols());
}

StateMap StateMap::window(const IoSpace& io, std::size_t k) {
  StateMap map(StateMapKind::kWindow, k, io.actions.size(),
               io.observations.size(), io.actions.symbols(),
               io.observations.symbols());
  const std::size_t cycle_codes = map.n_actions_ * map.n_observations_;
  std::size_t per_length = 1;
  std::size_t total = 0;
  for (std::size_t len = 0; len <= k; ++len) {
    map.offsets_.push_back(total);
    total += per_length;
    if (total > kMaxWindowStates) {
      throw Error(ErrorCode::kInvalidParameter,
                  "window length " + std::to_string(k) +
                      " yields too many states");
    }
    per_length *= cycle_codes;
  }
  map.names_.reserve(total);
  map.names_.emplace_back(kInitialStateKey);
  per_length = cycle_codes;
  for (std::size_t len = 1; len <= k; ++len) {
    for (std::size_t code = 0; code < per_length; ++code) {
      // Decode mixed radix, oldest cycle most significant.
      std::vector<std::size_t> digits(len);
      std::size_t rest = code;
      for (std::size_t i = len; i-- > 0;) {
        digits[i] = rest % cycle_codes;
        rest /= cycle_codes;
      }
      std::string key;
      for (std::size_t d : digits) {
        key += map.action_symbols_[d / map.n_observations_];
        key += map.observation_symbols_[d % map.n_observations_];
      }
      map.names_.push_back(std::move(key));
    }
    per_length *= cycle_codes;
  }
  for (std::size_t i = 0; i < map.names_.size(); ++i) {
    map.name_to_index_.emplace(map.names_[i], i);
  }
  return map;
}

StateMap StateMap::table(
    const IoSpace& io, std::size_t k,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  StateMap map(StateMapKind::kTable, k, io.actions.size(),
               io.observations.size(), io.actions.symbols(),
               io.observations.symbols());
  if (entries.empty()) {
    throw Error(ErrorCode::kInvalidParameter, "state table is empty");
  }
  map.entries_ = entries;
  for (const auto& [key, state] : entries) {
    auto [it, inserted] = map.name_to_index_.emplace(state, map.names_.size());
    if (inserted) map.names_.push_back(state);
    if (!map.key_to_index_.emplace(key, it->second).second) {
      throw Error(ErrorCode::kInvalidParameter,
                  "state table repeats history key '" + key + "'");
    }
  }
  return map;
}

std::string StateMap::history_key(const History& h) const {
  const std::size_t n = h.size();
  const std::size_t begin =
      kind_ == StateMapKind::kFullHistory ? 0 : (n > k_ ? n - k_ : 0);
  if (begin == n) return std::string(kInitialStateKey);
  std::string key;
  for (std::size_t i = begin; i < n; ++i) {
    key += action_symbols_.at(h[i].action);
    key += observation_symbols_.at(h[i].observation);
  }
  return key;
}

std::string StateMap::to_state(const History& h) const {
  if (kind_ == StateMapKind::kFullHistory) return history_key(h);
  return names_[state_index(h)];
}

std::size_t StateMap::state_count() const {
  if (kind_ == StateMapKind::kFullHistory) {
    throw Error(ErrorCode::kInvalidParameter,
                "full-history state maps have no finite state count");
  }
  return names_.size();
}

std::size_t StateMap::window_code(const History& h) const {
  const std::size_t n = h.size();
  const std::size_t len = std::min(n, k_);
  const std::size_t cycle_codes = n_actions_ * n_observations_;
  std::size_t code = 0;
  for (std::size_t i = n - len; i < n; ++i) {
    const Step& s = h[i];
    if (s.action >= n_actions_ || s.observation >= n_observations_) {
      throw Error(ErrorCode::kInvalidSymbol,
                  "history step " + std::to_string(i + 1) +
                      " holds a symbol outside the alphabets");
    }
    code = code * cycle_codes + s.action * n_observations_ + s.observation;
  }
  return offsets_[len] + code;
}

std::size_t StateMap::state_index(const History& h) const {
  switch (kind_) {
    case StateMapKind::kWindow:
      return window_code(h);
    case StateMapKind::kTable: {
      const std::string key = history_key(h);
      auto it = key_to_index_.find(key);
      if (it == key_to_index_.end()) {
        throw Error(ErrorCode::kUnmappedHistory,
                    "no state for history key '" + key + "'");
      }
      return it->second;
    }
    case StateMapKind::kFullHistory:
      break;
  }
  throw Error(ErrorCode::kInvalidParameter,
              "full-history state maps have no dense state index");
}

const std::string& StateMap::state_name(std::size_t index) const {
  if (index >= names_.size()) {
    throw Error(ErrorCode::kInvalidParameter,
                "state index " + std::to_string(index) + " out of range");
  }
  return names_[index];
}

std::optional<std::size_t> StateMap::find_state(std::string_view name) const {
  auto it = name_to_index_.find(std::string(name));
  if (it == name_to_index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace bcr
