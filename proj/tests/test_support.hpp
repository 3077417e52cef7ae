#pragma once

#include <gtest/gtest.h>

#include <bcr/error.hpp>
#include <bcr/modes.hpp>

#include <cmath>
#include <memory>

#define EXPECT_BCR_ERROR(statement, expected_code)                      \
  do {                                                                  \
    try {                                                               \
      statement;                                                        \
      ADD_FAILURE() << "expected " << bcr::to_string(expected_code);    \
    } catch (const bcr::Error& e) {                                     \
      EXPECT_EQ(e.code(), expected_code) << e.what();                   \
    }                                                                   \
  } while (0)

namespace bcr::testing {

inline IoSpace bandit_io() { return IoSpace({"L", "R"}, {"1", "0"}); }

inline std::shared_ptr<const ModeSet> bandit_modes() {
  auto io = bandit_io();
  const double m1[] = {0.8, 0.3};
  const double m2[] = {0.3, 0.8};
  return std::make_shared<const ModeSet>(ModeSet{
      make_bernoulli_bandit_mode("m1", io, m1, BanditPolicy::greedy("L")),
      make_bernoulli_bandit_mode("m2", io, m2, BanditPolicy::greedy("R")),
  });
}

// |k/n - p| within 3 binomial standard deviations.
inline ::testing::AssertionResult within_3_sigma(std::size_t k, std::size_t n, double p) {
  const double freq = static_cast<double>(k) / static_cast<double>(n);
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  if (std::abs(freq - p) <= 3.0 * sigma) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure()
         << "frequency " << freq << " vs " << p << " (3 sigma = " << 3.0 * sigma << ")";
}

}  // namespace bcr::testing
