#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcr/core.hpp"
#include "bcr/modes.hpp"
#include "bcr/random.hpp"

namespace bcr {

// The true environment Q(o | history, a), tabular over its own state map.
class Plant {
 public:
  Plant(IoSpace io, StateMap state_map, std::vector<Distribution> response,
        std::optional<std::string> source_mode = std::nullopt);

  const IoSpace& io() const { return io_; }
  const StateMap& state_map() const { return state_map_; }
  // Id of the mode this plant realizes, when built by plant_from_mode.
  const std::optional<std::string>& source_mode() const { return source_mode_; }

  const Distribution& response_dist(const History& h, std::size_t action) const;
  const Distribution& response_row(std::size_t state, std::size_t action) const;

  std::size_t respond(const History& h, std::size_t action, Rng& rng) const;
  const std::string& respond(const History& h, std::string_view action,
                             Rng& rng) const;

 private:
  IoSpace io_;
  StateMap state_map_;
  std::vector<Distribution> response_;
  std::optional<std::string> source_mode_;
};

// The plant whose true mode is m: hypothesis copied, policy dropped.
Plant plant_from_mode(const OperationMode& m);

Plant make_tabular_plant(const IoSpace& io, StateMap state_map,
                         const HypothesisTable& response);

}  // namespace bcr
