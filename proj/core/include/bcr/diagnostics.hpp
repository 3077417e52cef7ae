#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bcr/core.hpp"
#include "bcr/engine.hpp"
#include "bcr/modes.hpp"
#include "bcr/random.hpp"

namespace bcr {

// d_t(m* || m): running sum of ln P(o|m*,.) - ln P(o|m,.) over a trace, with
// the per-step sampled mode kept as the partition into policy time sets.
struct DivergenceTrace {
  std::size_t reference = 0;
  std::size_t target = 0;
  std::vector<double> increments;
  std::vector<double> cumulative;
  std::vector<std::optional<std::size_t>> partition;

  double final_value() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

// Reads the stored log-likelihoods; nothing is re-simulated. Throws
// kUnknownMode for a bad index and kIndeterminateIncrement when both modes
// gave the observed outcome probability zero.
DivergenceTrace divergence_process(const RunTrace& trace, std::size_t reference,
                                   std::size_t target);
DivergenceTrace divergence_process(const RunTrace& trace,
                                   std::string_view reference,
                                   std::string_view target);

// Splits a divergence process by the policy in control at each step.
struct SubdivergenceReport {
  std::map<std::size_t, double> per_policy;                   // g(m'; T_m')
  std::map<std::size_t, std::vector<std::size_t>> time_sets;  // 1-based steps
  std::map<std::size_t, std::vector<double>> contributions;   // aligned to time_sets

  // Re-merges the per-policy contributions in global step order. Equals the
  // divergence process's final value bit for bit when the time sets
  // partition 1..t.
  double total_in_step_order() const;
  // Sum of the per-policy totals in policy order (subject to rounding).
  double sum_of_parts() const;
  // g(m'; T_m' intersected with 1..t) for t = 1..n.
  std::vector<double> running_total(std::size_t policy, std::size_t n_steps) const;
};

// Throws kNoPartition when any step lacks a sampled mode (exact-mixture runs).
SubdivergenceReport decompose_subdivergences(const DivergenceTrace& d,
                                             std::size_t n_modes);

// The sampling law of a sub-divergence: actions from `policy`'s action model
// on the steps in T, observations from `reference`, increments scored as
// ln P(o|reference) - ln P(o|target).
struct SubdivergenceLaw {
  const OperationMode& reference;
  const OperationMode& target;
  const OperationMode& policy;
};

// How steps outside T are filled. By default whole trajectories are
// resimulated with `background` choosing actions (the target mode when
// null) and the reference generating observations. A clamped history
// instead replays its cycles verbatim on those steps.
struct Conditioning {
  const OperationMode* background = nullptr;
  std::optional<History> clamped;
};

struct ExpectedSubdivEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  // Exact value by enumeration, filled when the path count is small.
  std::optional<double> closed_form;
};

// G(m'; {tau}) at history h: sum over (a, o) of
// P(a|policy,h) P(o|reference,h,a) ln[P(o|reference,h,a) / P(o|target,h,a)].
double expected_single_step_subdivergence(const SubdivergenceLaw& law,
                                          const History& h);

// Exact G(m'; T) by enumerating every trajectory up to max(T). Throws
// kInvalidParameter when the enumeration would exceed `max_paths`.
double exact_expected_subdivergence(const SubdivergenceLaw& law,
                                    std::span<const std::size_t> steps,
                                    const Conditioning& conditioning = {},
                                    std::size_t max_paths = std::size_t{1} << 22);

// One draw of g(m'; T).
double sample_subdivergence(const SubdivergenceLaw& law,
                            std::span<const std::size_t> steps,
                            const Conditioning& conditioning, Rng& rng);

ExpectedSubdivEstimate estimate_expected_subdivergence(
    const SubdivergenceLaw& law, std::span<const std::size_t> steps,
    const Conditioning& conditioning, std::size_t n_samples, Rng& rng);

enum class VerdictKind { kBoundedness, kCoreMembership, kConsistency };

std::string_view to_string(VerdictKind kind);

// Verdicts are empirical surrogates of the formal definitions, never proofs.
struct TestVerdict {
  VerdictKind kind = VerdictKind::kBoundedness;
  bool passed = false;
  std::string label;
  double confidence = 0.95;  // 1 - delta
  bool diverged = false;     // some statistic is infinite
  std::vector<std::pair<std::string, double>> statistics;

  double stat(std::string_view name) const;
};

struct BoundednessOptions {
  std::size_t horizon = 200;
  std::size_t n_realizations = 200;
  double delta = 0.05;
  std::size_t ladder_points = 10;
  std::size_t random_subsets = 2;
  double subset_inclusion = 0.5;
  double slope_tol = 0.1;
  double burn_in_fraction = 0.5;
};

struct BoundednessCell {
  std::size_t target = 0;
  std::size_t policy = 0;
  std::vector<std::size_t> ladder;
  // Per ladder point: (1 - delta)-quantile of |g - G|, maximized over the
  // prefix set and the random subsets.
  std::vector<double> band;
  TestVerdict verdict;
};

struct BoundednessReport {
  std::size_t reference = 0;
  std::vector<BoundednessCell> cells;  // ordered by (target, policy)

  const BoundednessCell& cell(std::size_t target, std::size_t policy) const;
  // Largest band over all policies for one target mode.
  double c_hat(std::size_t target) const;
  bool all_passed() const;
};

// For every (m, m') pair: estimates the band C within which sub-divergences
// of d_t(m* || m) stay around their mean, on prefix sets and random subsets
// of 1..t over a ladder of t. A cell passes when the band's OLS slope over
// the post-burn-in ladder is at most slope_tol.
BoundednessReport check_boundedness(const ModeSet& modes, std::size_t reference,
                                    const BoundednessOptions& options, Rng& rng);

// lambda = min_m exp(-(|M| C_hat(m) + beta(m))), beta(m) = max(0, ln P(m)/P(m*)).
double fitted_lambda(const BoundednessReport& report,
                     std::span<const double> prior);

struct CoreOptions {
  double xi = 0.5;
  std::size_t horizon = 500;
  std::size_t n_realizations = 200;
  std::vector<double> c_grid{1.0, 5.0, 10.0};
  double delta = 0.05;
  // Policy on steps outside T; the tested mode's own when null.
  const OperationMode* background = nullptr;
  std::size_t curve_points = 20;
};

struct CoreResult {
  TestVerdict verdict;
  bool in_core = true;
  std::vector<std::size_t> ladder;
  std::vector<double> mean_curve;  // estimate of G(m*; T) along the ladder
  std::vector<double> se_curve;
  double final_mean = 0.0;
  double final_std_error = 0.0;
  double slope = 0.0;
};

// Each step joins T with probability xi and then follows the reference
// policy; other steps follow the background policy. Observations always come
// from the reference. G(m*; T) is accumulated from the exact per-step
// conditional expectations. NOT-IN-CORE when the lower (1 - delta) bound at
// the horizon exceeds every C in c_grid and the fitted slope is positive.
CoreResult test_core_membership(const OperationMode& reference,
                                const OperationMode& target,
                                const CoreOptions& options, Rng& rng);

struct ConsistencyOptions {
  double epsilon = 0.05;
  std::size_t t0 = 50;
  std::size_t n_histories = 100;
  std::size_t history_length = 0;  // 0 means 2 * t0
  CoreOptions core;
};

using HistorySampler = std::function<History(Rng&)>;

struct ConsistencyResult {
  TestVerdict verdict;
  bool in_core = true;
  bool vacuous = false;
  double max_gap = 0.0;
  CoreResult core;
};

// History of the given length under the mode's own policy and hypothesis.
History sample_history(const OperationMode& mode, std::size_t length, Rng& rng);

// Vacuously consistent when `mode` is not in the core of `reference`;
// otherwise the largest |P(a|mode,h) - P(a|reference,h)| over every prefix of
// length >= t0 of the sampled histories must stay below epsilon.
ConsistencyResult check_consistency(const OperationMode& mode,
                                    const OperationMode& reference,
                                    const ConsistencyOptions& options, Rng& rng,
                                    const HistorySampler& sampler = {});

double total_variation(std::span<const double> p, std::span<const double> q);

// TV distance between the controller's realized action law (posterior
// mixture) and the reference policy row, for t = 0..n (t = 0 uses the prior).
std::vector<double> realized_tv_curve(const ModeSet& modes, const RunTrace& trace,
                                      std::size_t reference);

struct TheoremOptions {
  double lambda = 1.0;
  double delta = 0.05;
  // Modes known not to be in the reference's core; all others when empty.
  std::optional<std::vector<std::size_t>> non_core;
};

struct ModeDecay {
  std::size_t mode = 0;
  double mean_terminal = 0.0;
  double median_terminal = 0.0;
  double max_terminal = 0.0;
  double mean_log_slope = 0.0;  // OLS slope of ln w over the second half
};

struct TheoremReport {
  std::size_t reference = 0;
  std::size_t n_runs = 0;
  double lambda = 1.0;
  double t1_threshold = 0.0;       // lambda / |M|
  double t1_fraction_pairs = 0.0;  // over (run, t), t = 0..n
  double t1_fraction_runs = 0.0;   // runs whose minimum stays above
  std::vector<double> t1_min_weight;
  std::vector<ModeDecay> t2;
  std::vector<double> t3_mean_tv;  // per t, over runs that reached t
  std::vector<double> t3_terminal_tv;
  double t3_mean_terminal_tv = 0.0;
};

TheoremReport theorem_checks(const ModeSet& modes, std::span<const RunTrace> traces,
                             std::size_t reference, const TheoremOptions& options);

}  // namespace bcr
