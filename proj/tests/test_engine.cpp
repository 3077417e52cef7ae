#include <bcr/engine.hpp>
#include <bcr/plants.hpp>

#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace bcr {
namespace {

using testing::bandit_io;
using testing::bandit_modes;
using testing::within_3_sigma;

std::shared_ptr<const ModeSet> likelihood_pair(double p1, double p2) {
  const auto io = bandit_io();
  const double a[] = {p1, 0.5};
  const double b[] = {p2, 0.5};
  return std::make_shared<const ModeSet>(
      ModeSet{make_bernoulli_bandit_mode("a", io, a, BanditPolicy::greedy("L")),
              make_bernoulli_bandit_mode("b", io, b, BanditPolicy::greedy("R"))});
}

TEST(Posterior, UniformInitialization) {
  const std::vector<double> prior(4, 0.25);
  const auto p = PosteriorState::from_prior(prior);
  for (double lw : p.log_weights) EXPECT_DOUBLE_EQ(lw, std::log(0.25));
}

TEST(Posterior, LogTransformOfPrior) {
  const std::vector<double> prior{0.7, 0.3};
  const auto p = PosteriorState::from_prior(prior);
  EXPECT_DOUBLE_EQ(p.log_weights[0], std::log(0.7));
  EXPECT_DOUBLE_EQ(p.log_weights[1], std::log(0.3));
}

TEST(Posterior, RejectsBadPriors) {
  EXPECT_BCR_ERROR(PosteriorState::from_prior(std::vector<double>{1.0, 0.0}),
                   ErrorCode::kInvalidPrior);
  EXPECT_BCR_ERROR(PosteriorState::from_prior(std::vector<double>{1.2, -0.2}),
                   ErrorCode::kInvalidPrior);
  EXPECT_BCR_ERROR(PosteriorState::from_prior(std::vector<double>{0.5, 0.6}),
                   ErrorCode::kInvalidPrior);
  const std::vector<double> three{0.2, 0.3, 0.5};
  EXPECT_BCR_ERROR(Controller(bandit_modes(), three), ErrorCode::kInvalidPrior);
}

TEST(Controller, DegeneratePosteriorFollowsThatMode) {
  auto modes = bandit_modes();
  const std::vector<double> prior{0.5, 0.5};
  Controller c(modes, prior);
  // 2000 successes on L push m2's weight below the smallest double
  for (int i = 0; i < 2000; ++i) c.update_posterior(0, 0);
  EXPECT_EQ(c.weights()[1], 0.0);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(c.select_action(rng).action, 0u);
}

TEST(Controller, MixtureMonteCarlo) {
  const auto io = bandit_io();
  const double theta[] = {0.5, 0.5};
  auto modes = std::make_shared<const ModeSet>(
      ModeSet{make_bernoulli_bandit_mode("l", io, theta, BanditPolicy::greedy("L")),
              make_bernoulli_bandit_mode("r", io, theta, BanditPolicy::greedy("R"))});
  const std::vector<double> prior{0.6, 0.4};
  for (auto mode : {ActionMode::kSampleMode, ActionMode::kExactMixture}) {
    Controller c(modes, prior, mode);
    const auto law = c.action_law();
    EXPECT_DOUBLE_EQ(law[0], 0.6);
    EXPECT_DOUBLE_EQ(law[1], 0.4);
    Rng rng(777);
    constexpr std::size_t n = 100000;
    std::size_t left = 0;
    for (std::size_t i = 0; i < n; ++i) left += c.select_action(rng).action == 0;
    EXPECT_TRUE(within_3_sigma(left, n, 0.6)) << to_string(mode);
  }
}

TEST(Controller, SingleUniformMode) {
  const auto io = bandit_io();
  const double theta[] = {0.5, 0.5};
  auto modes = std::make_shared<const ModeSet>(
      ModeSet{make_bernoulli_bandit_mode("u", io, theta, BanditPolicy::uniform())});
  const std::vector<double> prior{1.0};
  Controller c(modes, prior);
  Rng rng(8);
  constexpr std::size_t n = 100000;
  std::size_t left = 0;
  for (std::size_t i = 0; i < n; ++i) left += c.select_action(rng).action == 0;
  EXPECT_TRUE(within_3_sigma(left, n, 0.5));
}

TEST(Controller, SampleModeRecordsTheDrawnMode) {
  Controller c(bandit_modes(), std::vector<double>{0.5, 0.5});
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto choice = c.select_action(rng);
    ASSERT_TRUE(choice.sampled_mode.has_value());
    // greedy modes: the action reveals the sampled mode
    EXPECT_EQ(choice.action, *choice.sampled_mode);
  }
  Controller x(bandit_modes(), std::vector<double>{0.5, 0.5}, ActionMode::kExactMixture);
  EXPECT_FALSE(x.select_action(rng).sampled_mode.has_value());
}

TEST(Update, IndistinguishableModesKeepThePrior) {
  Controller c(likelihood_pair(0.4, 0.4), std::vector<double>{0.5, 0.5});
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t o = 0; o < 2; ++o) {
      c.update_posterior(a, o);
      EXPECT_DOUBLE_EQ(c.weights()[0], 0.5);
      EXPECT_DOUBLE_EQ(c.weights()[1], 0.5);
    }
  }
}

TEST(Update, BayesArithmetic) {
  Controller c(likelihood_pair(0.8, 0.2), std::vector<double>{0.5, 0.5});
  c.update_posterior(0, 0);
  // 0.4 / (0.4 + 0.1)
  EXPECT_NEAR(c.weights()[0], 0.8, 1e-12);
  EXPECT_NEAR(c.weights()[1], 0.2, 1e-12);

  Controller d(likelihood_pair(0.5, 0.1), std::vector<double>{0.25, 0.75});
  d.update_posterior(0, 0);
  // 0.125 / 0.2 and 0.075 / 0.2
  EXPECT_NEAR(d.weights()[0], 0.625, 1e-12);
  EXPECT_NEAR(d.weights()[1], 0.375, 1e-12);
}

TEST(Update, ImpossibleObservationLeavesStateUntouched) {
  Controller c(likelihood_pair(1.0, 1.0), std::vector<double>{0.5, 0.5});
  const auto before = c.posterior().log_weights;
  EXPECT_BCR_ERROR(c.update_posterior(0, 1), ErrorCode::kImpossibleObservation);
  EXPECT_EQ(c.posterior().log_weights, before);
  EXPECT_TRUE(c.history().empty());
}

TEST(Update, ZeroLikelihoodModeIsExcludedForGood) {
  Controller c(likelihood_pair(1.0, 0.5), std::vector<double>{0.5, 0.5});
  const auto ll = c.update_posterior(0, 1);  // "0" is impossible for mode a
  EXPECT_TRUE(std::isinf(ll[0]) && ll[0] < 0);
  EXPECT_EQ(c.weights()[0], 0.0);
  EXPECT_EQ(c.weights()[1], 1.0);
  c.update_posterior(0, 0);
  EXPECT_EQ(c.weights()[0], 0.0);
  EXPECT_EQ(c.weights()[1], 1.0);
}

TEST(Update, ActionsContributeNoLikelihood) {
  // Same observation likelihoods, opposite policies: the posterior must not
  // move whatever action is taken.
  Controller c(likelihood_pair(0.5, 0.5), std::vector<double>{0.3, 0.7});
  for (int i = 0; i < 20; ++i) c.update_posterior(i % 2, 0);
  EXPECT_NEAR(c.weights()[0], 0.3, 1e-12);
}

TEST(Update, InterventionInvariance) {
  auto modes = bandit_modes();
  Controller reads(modes, std::vector<double>{0.5, 0.5});
  Controller plain(modes, std::vector<double>{0.5, 0.5});
  Rng rng(12);
  Rng other(13);
  const std::vector<std::pair<std::size_t, std::size_t>> seq{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  for (auto [a, o] : seq) {
    for (int k = 0; k < 5; ++k) {
      (void)reads.action_law();
      (void)reads.weights();
      (void)reads.select_action(other);
    }
    reads.update_posterior(a, o);
    plain.update_posterior(a, o);
    EXPECT_EQ(reads.posterior().log_weights, plain.posterior().log_weights);
  }
  EXPECT_EQ(reads.history(), plain.history());
  for (const auto& s : plain.history().steps()) EXPECT_TRUE(s.intervened);
}

TEST(Step, SingleModeStaysCertain) {
  auto modes = std::make_shared<const ModeSet>(ModeSet{bandit_modes()->front()});
  const auto plant = plant_from_mode(modes->front());
  Controller c(modes, std::vector<double>{1.0});
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto rec = c.step(plant, rng);
    EXPECT_EQ(rec.posterior[0], 1.0);
  }
}

TEST(Step, RecordsAreDeterministic) {
  auto modes = bandit_modes();
  const auto plant = plant_from_mode((*modes)[0]);
  const auto a = simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 300, 17);
  const auto b = simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 300, 17);
  ASSERT_EQ(a.steps.size(), 300u);
  EXPECT_EQ(a.steps, b.steps);
  const auto c = simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 300, 18);
  EXPECT_NE(a.steps, c.steps);
}

TEST(Step, RejectsAPlantWithOtherAlphabets) {
  const IoSpace io({"L", "R"}, {"yes", "no"});
  const double theta[] = {0.8, 0.3};
  const auto plant =
      plant_from_mode(make_bernoulli_bandit_mode("x", io, theta, BanditPolicy::uniform()));
  Controller c(bandit_modes(), std::vector<double>{0.5, 0.5});
  Rng rng(1);
  EXPECT_BCR_ERROR(c.step(plant, rng), ErrorCode::kInvalidParameter);
}

// Independent single-loop recomputation in linear space with per-step
// normalization, from the stored actions and observations only.
TEST(Step, PosteriorMatchesRecomputationOracle) {
  auto modes = bandit_modes();
  const auto plant = plant_from_mode((*modes)[0]);
  const auto trace = simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 100, 4242);
  const double theta[2][2] = {{0.8, 0.3}, {0.3, 0.8}};
  double w[2] = {0.5, 0.5};
  for (const auto& s : trace.steps) {
    double z = 0.0;
    for (int m = 0; m < 2; ++m) {
      const double p1 = theta[m][s.action];
      w[m] *= s.observation == 0 ? p1 : 1.0 - p1;
      z += w[m];
    }
    for (int m = 0; m < 2; ++m) {
      w[m] /= z;
      EXPECT_NEAR(s.posterior[m], w[m], 1e-10) << "t=" << s.t;
    }
  }
}

TEST(Step, NormalizationHoldsEveryStep) {
  const auto io = IoSpace({"a", "b", "c"}, {"1", "0"});
  auto modes = std::make_shared<ModeSet>();
  const double th[4][3] = {{0.9, 0.1, 0.5}, {0.2, 0.7, 0.4}, {0.5, 0.5, 0.5}, {0.3, 0.3, 0.9}};
  for (int m = 0; m < 4; ++m) {
    modes->push_back(make_bernoulli_bandit_mode("m" + std::to_string(m), io, th[m],
                                                BanditPolicy::epsilon_greedy("b", 0.3)));
  }
  const auto plant = plant_from_mode((*modes)[1]);
  const auto trace = simulate_run(modes, std::vector<double>{0.1, 0.2, 0.3, 0.4}, plant,
                                  1000, 9);
  for (const auto& s : trace.steps) {
    double sum = 0.0;
    for (double w : s.posterior) sum += w;
    EXPECT_NEAR(sum, 1.0, kPosteriorTolerance);
    for (double ll : s.obs_loglik) EXPECT_LE(ll, 0.0);
  }
}

TEST(Step, SampleModeAndExactMixtureAgreeOnActionFrequencies) {
  // Fixed prefix, then 1e5 independent selections under each action mode.
  const auto io = IoSpace({"a", "b", "c"}, {"1", "0"});
  const double t1[] = {0.9, 0.1, 0.5};
  const double t2[] = {0.2, 0.7, 0.4};
  auto modes = std::make_shared<const ModeSet>(
      ModeSet{make_bernoulli_bandit_mode("x", io, t1, BanditPolicy::epsilon_greedy("a", 0.4)),
              make_bernoulli_bandit_mode("y", io, t2, BanditPolicy::uniform())});
  const std::vector<double> prior{0.5, 0.5};
  const std::vector<std::pair<std::size_t, std::size_t>> prefix{{0, 0}, {1, 0}, {2, 1}};
  Controller s(modes, prior, ActionMode::kSampleMode);
  Controller x(modes, prior, ActionMode::kExactMixture);
  for (auto [a, o] : prefix) {
    s.update_posterior(a, o, 0);
    x.update_posterior(a, o);
  }
  const auto law = x.action_law();
  constexpr std::size_t n = 100000;
  std::vector<std::size_t> cs(3, 0);
  std::vector<std::size_t> cx(3, 0);
  Rng rs(31);
  Rng rx(32);
  for (std::size_t i = 0; i < n; ++i) {
    ++cs[s.select_action(rs).action];
    ++cx[x.select_action(rx).action];
  }
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_TRUE(within_3_sigma(cs[a], n, law[a]));
    EXPECT_TRUE(within_3_sigma(cx[a], n, law[a]));
  }
}

TEST(Step, CommitLengthHoldsTheSampledMode) {
  auto modes = bandit_modes();
  const auto plant = plant_from_mode((*modes)[0]);
  const auto trace =
      simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 60, 3, ActionMode::kSampleMode, 4);
  for (std::size_t i = 0; i + 1 < trace.steps.size(); ++i) {
    if (i % 4 != 3) {
      const auto next = trace.steps[i + 1].sampled_mode;
      // a committed mode is kept unless its weight was driven to zero
      if (trace.steps[i].posterior[*trace.steps[i].sampled_mode] > 0.0) {
        EXPECT_EQ(next, trace.steps[i].sampled_mode) << "t=" << i + 1;
      }
    }
  }
  EXPECT_BCR_ERROR(Controller(modes, std::vector<double>{0.5, 0.5}, ActionMode::kSampleMode, 0),
                   ErrorCode::kInvalidParameter);
}

TEST(SimulateRun, MisspecifiedPlantAborts) {
  auto modes = likelihood_pair(1.0, 1.0);
  const IoSpace io = bandit_io();
  const auto plant = make_tabular_plant(io, StateMap::window(io, 0),
                                        {{"s0", {{"L", {0.0, 1.0}}, {"R", {0.0, 1.0}}}}});
  const auto trace = simulate_run(modes, std::vector<double>{0.5, 0.5}, plant, 10, 1);
  EXPECT_TRUE(trace.aborted);
  EXPECT_TRUE(trace.steps.empty());
  EXPECT_FALSE(trace.abort_reason.empty());
}

TEST(ActionModeNames, RoundTrip) {
  for (auto m : {ActionMode::kSampleMode, ActionMode::kExactMixture}) {
    EXPECT_EQ(parse_action_mode(to_string(m)), m);
  }
  EXPECT_BCR_ERROR(parse_action_mode("greedy"), ErrorCode::kInvalidParameter);
}

}  // namespace
}  // namespace bcr
