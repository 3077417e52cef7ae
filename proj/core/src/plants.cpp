#include "bcr/plants.hpp"

#include "bcr/error.hpp"

namespace bcr {

Plant::Plant(IoSpace io, StateMap state_map, std::vector<Distribution> response,
             std::optional<std::string> source_mode)
    : io_(std::move(io)),
      state_map_(std::move(state_map)),
      response_(std::move(response)),
      source_mode_(std::move(source_mode)) {
  if (!state_map_.is_finite()) {
    throw Error(ErrorCode::kInvalidParameter,
                "tabular plants need a finite state map");
  }
  if (response_.size() != state_map_.state_count() * io_.actions.size()) {
    throw Error(ErrorCode::kIncompleteTable, "plant response table is not total");
  }
  for (const auto& row : response_) {
    if (row.size() != io_.observations.size()) {
      throw Error(ErrorCode::kInvalidDistribution,
                  "plant response row length mismatch");
    }
  }
}

const Distribution& Plant::response_row(std::size_t state,
                                        std::size_t action) const {
  return response_.at(state * io_.actions.size() + action);
}

const Distribution& Plant::response_dist(const History& h,
                                         std::size_t action) const {
  if (!io_.actions.contains_index(action)) {
    throw Error(ErrorCode::kInvalidSymbol,
                "action index " + std::to_string(action) + " out of range");
  }
  return response_row(state_map_.state_index(h), action);
}

std::size_t Plant::respond(const History& h, std::size_t action,
                           Rng& rng) const {
  return sample_index(response_dist(h, action).probs(), rng);
}

const std::string& Plant::respond(const History& h, std::string_view action,
                                  Rng& rng) const {
  return io_.observations.symbol(respond(h, io_.actions.index_of(action), rng));
}

Plant plant_from_mode(const OperationMode& m) {
  std::vector<Distribution> rows;
  const std::size_t n_states = m.state_count();
  rows.reserve(n_states * m.io().actions.size());
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < m.io().actions.size(); ++a) {
      rows.push_back(m.hypothesis_row(s, a));
    }
  }
  return Plant(m.io(), m.state_map(), std::move(rows), m.id());
}

Plant make_tabular_plant(const IoSpace& io, StateMap state_map,
                         const HypothesisTable& response) {
  auto rows = flatten_observation_table(io, state_map, response, "plant");
  return Plant(io, std::move(state_map), std::move(rows));
}

}  // namespace bcr
