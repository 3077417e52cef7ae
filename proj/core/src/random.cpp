#include "bcr/random.hpp"

#include "bcr/error.hpp"

namespace bcr {

std::size_t sample_index(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  if (last_positive == probs.size()) {
    throw Error(ErrorCode::kInvalidDistribution,
                "cannot sample from a vector with no positive mass");
  }
  return last_positive;
}

}  // namespace bcr
