#include "bcr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcr/error.hpp"
#include "bcr/stats.hpp"

namespace bcr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -kInf;

double log_ratio(double numerator, double denominator) {
  if (numerator == denominator) return 0.0;
  if (denominator == 0.0) return kInf;
  if (numerator == 0.0) return kNegInf;
  return std::log(numerator) - std::log(denominator);
}

// Sorted, de-duplicated, 1-based step set.
std::vector<std::size_t> normalize_steps(std::span<const std::size_t> steps) {
  std::vector<std::size_t> out(steps.begin(), steps.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) {
    throw Error(ErrorCode::kInvalidParameter, "step set T is empty");
  }
  if (out.front() == 0) {
    throw Error(ErrorCode::kInvalidParameter, "step indices are 1-based");
  }
  return out;
}

void check_clamp(const Conditioning& c, std::size_t horizon) {
  if (c.clamped && c.clamped->size() < horizon) {
    throw Error(ErrorCode::kInvalidParameter,
                "clamped history is shorter than max(T)");
  }
}

Step draw_cycle(const OperationMode& actor, const OperationMode& generator,
                const History& h, Rng& rng) {
  const std::size_t a = sample_index(actor.action_dist(h).probs(), rng);
  const std::size_t o =
      sample_index(generator.observation_dist(h, a).probs(), rng);
  return Step{a, o, true};
}

std::vector<std::size_t> make_ladder(std::size_t horizon, std::size_t points) {
  if (horizon == 0) {
    throw Error(ErrorCode::kInvalidParameter, "horizon must be >= 1");
  }
  points = std::max<std::size_t>(1, std::min(points, horizon));
  std::vector<std::size_t> ladder;
  for (std::size_t j = 1; j <= points; ++j) {
    const auto t = static_cast<std::size_t>(std::llround(
        static_cast<double>(horizon) * static_cast<double>(j) /
        static_cast<double>(points)));
    const std::size_t clamped = std::max<std::size_t>(1, t);
    if (ladder.empty() || ladder.back() != clamped) ladder.push_back(clamped);
  }
  return ladder;
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

// OLS slope of ys on the ladder points at or past `from`.
double tail_slope(std::span<const std::size_t> ladder, std::span<const double> ys,
                  double from) {
  std::vector<double> xs_tail;
  std::vector<double> ys_tail;
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    if (static_cast<double>(ladder[j]) >= from) {
      xs_tail.push_back(static_cast<double>(ladder[j]));
      ys_tail.push_back(ys[j]);
    }
  }
  if (xs_tail.size() < 2 && ladder.size() >= 2) {
    xs_tail = {static_cast<double>(ladder[ladder.size() - 2]),
               static_cast<double>(ladder.back())};
    ys_tail = {ys[ys.size() - 2], ys.back()};
  }
  return stats::ols_slope(xs_tail, ys_tail);
}

}  // namespace

DivergenceTrace divergence_process(const RunTrace& trace, std::size_t reference,
                                   std::size_t target) {
  const std::size_t n_modes = trace.mode_ids.size();
  if (reference >= n_modes || target >= n_modes) {
    throw Error(ErrorCode::kUnknownMode,
                "mode index out of range for a trace over " +
                    std::to_string(n_modes) + " modes");
  }
  DivergenceTrace d;
  d.reference = reference;
  d.target = target;
  d.increments.reserve(trace.steps.size());
  d.cumulative.reserve(trace.steps.size());
  d.partition.reserve(trace.steps.size());
  double running = 0.0;
  for (const auto& step : trace.steps) {
    if (step.obs_loglik.size() != n_modes) {
      throw Error(ErrorCode::kInvalidParameter,
                  "step " + std::to_string(step.t) +
                      " lacks per-mode log-likelihoods");
    }
    double inc = 0.0;
    if (reference != target) {
      const double lr = step.obs_loglik[reference];
      const double lm = step.obs_loglik[target];
      if (lr == kNegInf && lm == kNegInf) {
        throw Error(ErrorCode::kIndeterminateIncrement,
                    "both modes assign probability zero at step " +
                        std::to_string(step.t));
      }
      inc = lr - lm;
    }
    running += inc;
    d.increments.push_back(inc);
    d.cumulative.push_back(running);
    d.partition.push_back(step.sampled_mode);
  }
  return d;
}

DivergenceTrace divergence_process(const RunTrace& trace,
                                   std::string_view reference,
                                   std::string_view target) {
  return divergence_process(trace, trace.mode_index(reference),
                            trace.mode_index(target));
}

SubdivergenceReport decompose_subdivergences(const DivergenceTrace& d,
                                             std::size_t n_modes) {
  SubdivergenceReport report;
  for (std::size_t m = 0; m < n_modes; ++m) {
    report.per_policy[m] = 0.0;
    report.time_sets[m] = {};
    report.contributions[m] = {};
  }
  for (std::size_t i = 0; i < d.increments.size(); ++i) {
    if (i >= d.partition.size() || !d.partition[i]) {
      throw Error(ErrorCode::kNoPartition,
                  "step " + std::to_string(i + 1) +
                      " has no sampled mode; exact-mixture runs cannot be "
                      "decomposed");
    }
    const std::size_t owner = *d.partition[i];
    report.per_policy[owner] += d.increments[i];
    report.time_sets[owner].push_back(i + 1);
    report.contributions[owner].push_back(d.increments[i]);
  }
  return report;
}

double SubdivergenceReport::total_in_step_order() const {
  std::size_t n = 0;
  for (const auto& [policy, steps] : time_sets) n += steps.size();
  std::vector<double> ordered(n);
  std::vector<bool> seen(n, false);
  for (const auto& [policy, steps] : time_sets) {
    const auto& values = contributions.at(policy);
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const std::size_t t = steps[k];
      if (t == 0 || t > n || seen[t - 1]) {
        throw Error(ErrorCode::kNoPartition,
                    "time sets do not partition 1.." + std::to_string(n));
      }
      seen[t - 1] = true;
      ordered[t - 1] = values[k];
    }
  }
  double total = 0.0;
  for (double x : ordered) total += x;
  return total;
}

double SubdivergenceReport::sum_of_parts() const {
  double total = 0.0;
  for (const auto& [policy, g] : per_policy) total += g;
  return total;
}

std::vector<double> SubdivergenceReport::running_total(std::size_t policy,
                                                       std::size_t n_steps) const {
  std::vector<double> out(n_steps, 0.0);
  auto ts = time_sets.find(policy);
  if (ts == time_sets.end()) return out;
  const auto& values = contributions.at(policy);
  double running = 0.0;
  std::size_t k = 0;
  for (std::size_t t = 1; t <= n_steps; ++t) {
    while (k < ts->second.size() && ts->second[k] == t) running += values[k++];
    out[t - 1] = running;
  }
  return out;
}

double expected_single_step_subdivergence(const SubdivergenceLaw& law,
                                          const History& h) {
  const auto actions = law.policy.action_dist(h).probs();
  double total = 0.0;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (actions[a] == 0.0) continue;
    const auto ref = law.reference.observation_dist(h, a).probs();
    const auto tgt = law.target.observation_dist(h, a).probs();
    double inner = 0.0;
    for (std::size_t o = 0; o < ref.size(); ++o) {
      if (ref[o] == 0.0) continue;
      inner += ref[o] * log_ratio(ref[o], tgt[o]);
    }
    total += actions[a] * inner;
  }
  return total;
}

namespace {

struct Enumerator {
  const SubdivergenceLaw& law;
  const std::vector<std::size_t>& steps;
  const Conditioning& conditioning;
  const OperationMode& background;
  std::size_t horizon;
  History h;
  double total = 0.0;

  void visit(std::size_t tau, std::size_t next_in_t, double weight, double g) {
    if (tau > horizon) {
      total += weight * g;
      return;
    }
    const bool in_t = next_in_t < steps.size() && steps[next_in_t] == tau;
    const std::size_t next = in_t ? next_in_t + 1 : next_in_t;
    if (!in_t && conditioning.clamped) {
      h.push((*conditioning.clamped)[tau - 1]);
      visit(tau + 1, next, weight, g);
      h.pop();
      return;
    }
    const OperationMode& actor = in_t ? law.policy : background;
    const auto actions = actor.action_dist(h).probs();
    for (std::size_t a = 0; a < actions.size(); ++a) {
      if (actions[a] == 0.0) continue;
      const auto ref = law.reference.observation_dist(h, a).probs();
      const auto tgt = law.target.observation_dist(h, a).probs();
      for (std::size_t o = 0; o < ref.size(); ++o) {
        if (ref[o] == 0.0) continue;
        const double inc = in_t ? log_ratio(ref[o], tgt[o]) : 0.0;
        h.push(Step{a, o, true});
        visit(tau + 1, next, weight * actions[a] * ref[o], g + inc);
        h.pop();
      }
    }
  }
};

bool path_count_within(const SubdivergenceLaw& law, std::size_t branching_steps,
                       std::size_t max_paths) {
  const std::size_t per_step =
      law.reference.io().actions.size() * law.reference.io().observations.size();
  std::size_t paths = 1;
  for (std::size_t i = 0; i < branching_steps; ++i) {
    if (paths > max_paths / per_step) return false;
    paths *= per_step;
  }
  return true;
}

std::size_t branching_steps(const std::vector<std::size_t>& steps,
                            const Conditioning& c) {
  return c.clamped ? steps.size() : steps.back();
}

}  // namespace

double exact_expected_subdivergence(const SubdivergenceLaw& law,
                                    std::span<const std::size_t> steps,
                                    const Conditioning& conditioning,
                                    std::size_t max_paths) {
  const auto t_set = normalize_steps(steps);
  check_clamp(conditioning, t_set.back());
  if (!path_count_within(law, branching_steps(t_set, conditioning), max_paths)) {
    throw Error(ErrorCode::kInvalidParameter,
                "trajectory enumeration exceeds " + std::to_string(max_paths) +
                    " paths");
  }
  const OperationMode& background =
      conditioning.background ? *conditioning.background : law.target;
  Enumerator e{law, t_set, conditioning, background, t_set.back(), {}, 0.0};
  e.visit(1, 0, 1.0, 0.0);
  return e.total;
}

double sample_subdivergence(const SubdivergenceLaw& law,
                            std::span<const std::size_t> steps,
                            const Conditioning& conditioning, Rng& rng) {
  const auto t_set = normalize_steps(steps);
  check_clamp(conditioning, t_set.back());
  const OperationMode& background =
      conditioning.background ? *conditioning.background : law.target;
  History h;
  h.reserve(t_set.back());
  double g = 0.0;
  std::size_t next = 0;
  for (std::size_t tau = 1; tau <= t_set.back(); ++tau) {
    const bool in_t = next < t_set.size() && t_set[next] == tau;
    if (in_t) {
      ++next;
      const Step s = draw_cycle(law.policy, law.reference, h, rng);
      g += log_ratio(law.reference.observation_dist(h, s.action)[s.observation],
                     law.target.observation_dist(h, s.action)[s.observation]);
      h.push(s);
    } else if (conditioning.clamped) {
      h.push((*conditioning.clamped)[tau - 1]);
    } else {
      h.push(draw_cycle(background, law.reference, h, rng));
    }
  }
  return g;
}

ExpectedSubdivEstimate estimate_expected_subdivergence(
    const SubdivergenceLaw& law, std::span<const std::size_t> steps,
    const Conditioning& conditioning, std::size_t n_samples, Rng& rng) {
  if (n_samples < 1) {
    throw Error(ErrorCode::kInvalidParameter, "n_samples must be >= 1");
  }
  const auto t_set = normalize_steps(steps);
  std::vector<double> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    samples.push_back(sample_subdivergence(law, t_set, conditioning, rng));
  }
  ExpectedSubdivEstimate est;
  est.n_samples = n_samples;
  est.mean = stats::mean(samples);
  est.std_error = all_finite(samples) ? stats::std_error(samples) : kInf;
  constexpr std::size_t kClosedFormPaths = std::size_t{1} << 16;
  if (path_count_within(law, branching_steps(t_set, conditioning),
                        kClosedFormPaths)) {
    est.closed_form = exact_expected_subdivergence(law, t_set, conditioning,
                                                   kClosedFormPaths);
  }
  return est;
}

std::string_view to_string(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::kBoundedness: return "boundedness";
    case VerdictKind::kCoreMembership: return "core-membership";
    case VerdictKind::kConsistency: return "consistency";
  }
  return "unknown";
}

double TestVerdict::stat(std::string_view name) const {
  for (const auto& [key, value] : statistics) {
    if (key == name) return value;
  }
  throw Error(ErrorCode::kInvalidParameter,
              "verdict has no statistic '" + std::string(name) + "'");
}

const BoundednessCell& BoundednessReport::cell(std::size_t target,
                                               std::size_t policy) const {
  for (const auto& c : cells) {
    if (c.target == target && c.policy == policy) return c;
  }
  throw Error(ErrorCode::kUnknownMode, "no boundedness cell for that pair");
}

double BoundednessReport::c_hat(std::size_t target) const {
  double c = 0.0;
  bool found = false;
  for (const auto& cell : cells) {
    if (cell.target != target) continue;
    found = true;
    c = std::max(c, cell.verdict.stat("c_hat"));
  }
  if (!found) throw Error(ErrorCode::kUnknownMode, "no boundedness cells for mode");
  return c;
}

bool BoundednessReport::all_passed() const {
  return std::all_of(cells.begin(), cells.end(),
                     [](const BoundednessCell& c) { return c.verdict.passed; });
}

BoundednessReport check_boundedness(const ModeSet& modes, std::size_t reference,
                                    const BoundednessOptions& options, Rng& rng) {
  if (reference >= modes.size()) {
    throw Error(ErrorCode::kUnknownMode, "reference mode index out of range");
  }
  if (!(options.delta > 0.0 && options.delta < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "delta must lie in (0, 1)");
  }
  if (options.n_realizations < 1) {
    throw Error(ErrorCode::kInvalidParameter, "n_realizations must be >= 1");
  }
  const OperationMode& ref = modes[reference];
  const auto ladder = make_ladder(options.horizon, options.ladder_points);
  const std::size_t horizon = ladder.back();
  BoundednessReport report;
  report.reference = reference;

  for (std::size_t target = 0; target < modes.size(); ++target) {
    for (std::size_t policy = 0; policy < modes.size(); ++policy) {
      Rng cell_rng(rng.derive_seed());
      const OperationMode& tgt = modes[target];
      const OperationMode& pol = modes[policy];

      // Family 0 is the prefix set; the rest are random subsets fixed across
      // realizations so that G(m'; T) is well defined per ladder point.
      std::vector<std::vector<bool>> masks;
      masks.emplace_back(horizon, true);
      for (std::size_t k = 0; k < options.random_subsets; ++k) {
        std::vector<bool> mask(horizon);
        for (std::size_t i = 0; i < horizon; ++i) {
          mask[i] = cell_rng.bernoulli(options.subset_inclusion);
        }
        masks.push_back(std::move(mask));
      }

      std::vector<double> band(ladder.size(), 0.0);
      std::vector<std::vector<double>> g_at(
          ladder.size(), std::vector<double>(options.n_realizations));
      for (const auto& mask : masks) {
        for (std::size_t r = 0; r < options.n_realizations; ++r) {
          History h;
          h.reserve(horizon);
          double g = 0.0;
          std::size_t j = 0;
          for (std::size_t tau = 1; tau <= horizon; ++tau) {
            const bool in_t = mask[tau - 1];
            const Step s = draw_cycle(in_t ? pol : tgt, ref, h, cell_rng);
            if (in_t && target != reference) {
              g += log_ratio(ref.observation_dist(h, s.action)[s.observation],
                             tgt.observation_dist(h, s.action)[s.observation]);
            }
            h.push(s);
            if (j < ladder.size() && ladder[j] == tau) g_at[j++][r] = g;
          }
        }
        for (std::size_t j = 0; j < ladder.size(); ++j) {
          const auto& gs = g_at[j];
          if (!all_finite(gs)) {
            band[j] = kInf;
            continue;
          }
          const double big_g = stats::mean(gs);
          std::vector<double> dev(gs.size());
          for (std::size_t r = 0; r < gs.size(); ++r) dev[r] = std::abs(gs[r] - big_g);
          band[j] = std::max(band[j], stats::quantile(dev, 1.0 - options.delta));
        }
      }

      BoundednessCell cell;
      cell.target = target;
      cell.policy = policy;
      cell.ladder = ladder;
      cell.band = band;
      cell.verdict.kind = VerdictKind::kBoundedness;
      cell.verdict.confidence = 1.0 - options.delta;
      const bool finite = all_finite(band);
      const double c_hat = *std::max_element(band.begin(), band.end());
      const double slope =
          finite ? tail_slope(ladder, band,
                              options.burn_in_fraction * static_cast<double>(horizon))
                 : kInf;
      cell.verdict.diverged = !finite;
      cell.verdict.passed = finite && slope <= options.slope_tol;
      cell.verdict.label = cell.verdict.passed ? "bounded" : "unbounded";
      cell.verdict.statistics = {{"c_hat", c_hat},
                                 {"slope", slope},
                                 {"slope_tol", options.slope_tol}};
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

double fitted_lambda(const BoundednessReport& report,
                     std::span<const double> prior) {
  const std::size_t n = prior.size();
  const std::size_t ref = report.reference;
  if (ref >= n) throw Error(ErrorCode::kUnknownMode, "reference outside prior");
  double lambda = 1.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double beta = std::max(0.0, std::log(prior[m] / prior[ref]));
    const double alpha = static_cast<double>(n) * report.c_hat(m) + beta;
    lambda = std::min(lambda, std::exp(-alpha));
  }
  return lambda;
}

CoreResult test_core_membership(const OperationMode& reference,
                                const OperationMode& target,
                                const CoreOptions& options, Rng& rng) {
  if (!(options.xi > 0.0 && options.xi <= 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "xi must lie in (0, 1]");
  }
  if (!(options.delta > 0.0 && options.delta < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "delta must lie in (0, 1)");
  }
  if (options.c_grid.empty()) {
    throw Error(ErrorCode::kInvalidParameter, "c_grid is empty");
  }
  if (options.n_realizations < 1) {
    throw Error(ErrorCode::kInvalidParameter, "n_realizations must be >= 1");
  }
  const OperationMode& background =
      options.background ? *options.background : target;
  const SubdivergenceLaw law{reference, target, reference};
  const auto ladder = make_ladder(options.horizon, options.curve_points);
  const std::size_t horizon = ladder.back();

  std::vector<std::vector<double>> at(ladder.size(),
                                      std::vector<double>(options.n_realizations));
  for (std::size_t r = 0; r < options.n_realizations; ++r) {
    History h;
    h.reserve(horizon);
    double big_g = 0.0;
    std::size_t j = 0;
    for (std::size_t tau = 1; tau <= horizon; ++tau) {
      const bool in_t = rng.bernoulli(options.xi);
      if (in_t) big_g += expected_single_step_subdivergence(law, h);
      h.push(draw_cycle(in_t ? reference : background, reference, h, rng));
      if (j < ladder.size() && ladder[j] == tau) at[j++][r] = big_g;
    }
  }

  CoreResult result;
  result.ladder = ladder;
  for (const auto& xs : at) {
    result.mean_curve.push_back(stats::mean(xs));
    result.se_curve.push_back(all_finite(xs) ? stats::std_error(xs) : kInf);
  }
  result.final_mean = result.mean_curve.back();
  result.final_std_error = result.se_curve.back();
  const bool finite = all_finite(result.mean_curve);
  result.slope = finite ? tail_slope(ladder, result.mean_curve,
                                     0.5 * static_cast<double>(horizon))
                        : kInf;
  const double z = stats::normal_quantile(1.0 - options.delta);
  const double lower = result.final_mean - z * result.final_std_error;
  const double c_max = *std::max_element(options.c_grid.begin(), options.c_grid.end());
  const bool not_in_core =
      result.final_mean == kInf || (lower > c_max && result.slope > 0.0);
  result.in_core = !not_in_core;

  TestVerdict& v = result.verdict;
  v.kind = VerdictKind::kCoreMembership;
  v.passed = result.in_core;
  v.label = result.in_core ? "in-core" : "not-in-core";
  v.confidence = 1.0 - options.delta;
  v.diverged = !finite;
  v.statistics = {{"g_final", result.final_mean},
                  {"std_error", result.final_std_error},
                  {"lower_bound", lower},
                  {"slope", result.slope},
                  {"c_max", c_max},
                  {"xi", options.xi}};
  return result;
}

History sample_history(const OperationMode& mode, std::size_t length, Rng& rng) {
  History h;
  h.reserve(length);
  for (std::size_t t = 0; t < length; ++t) h.push(draw_cycle(mode, mode, h, rng));
  return h;
}

ConsistencyResult check_consistency(const OperationMode& mode,
                                    const OperationMode& reference,
                                    const ConsistencyOptions& options, Rng& rng,
                                    const HistorySampler& sampler) {
  if (!(options.epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "epsilon must be > 0");
  }
  if (options.t0 < 1) {
    throw Error(ErrorCode::kInvalidParameter, "t0 must be >= 1");
  }
  ConsistencyResult result;
  result.core = test_core_membership(reference, mode, options.core, rng);
  result.in_core = result.core.in_core;
  TestVerdict& v = result.verdict;
  v.kind = VerdictKind::kConsistency;
  v.confidence = 1.0 - options.core.delta;

  if (!result.in_core) {
    result.vacuous = true;
    v.passed = true;
    v.label = "consistent";
    v.statistics = {{"max_gap", 0.0}, {"epsilon", options.epsilon}, {"vacuous", 1.0}};
    return result;
  }

  const std::size_t length =
      options.history_length > 0 ? options.history_length : 2 * options.t0;
  double max_gap = 0.0;
  for (std::size_t i = 0; i < options.n_histories; ++i) {
    const History sampled =
        sampler ? sampler(rng) : sample_history(reference, length, rng);
    History prefix;
    prefix.reserve(sampled.size());
    for (std::size_t t = 0; t <= sampled.size(); ++t) {
      if (t >= options.t0) {
        const auto p = mode.action_dist(prefix).probs();
        const auto q = reference.action_dist(prefix).probs();
        for (std::size_t a = 0; a < p.size(); ++a) {
          max_gap = std::max(max_gap, std::abs(p[a] - q[a]));
        }
      }
      if (t < sampled.size()) prefix.push(sampled[t]);
    }
  }
  result.max_gap = max_gap;
  v.passed = max_gap < options.epsilon;
  v.label = v.passed ? "consistent" : "inconsistent";
  v.statistics = {{"max_gap", max_gap}, {"epsilon", options.epsilon}, {"vacuous", 0.0}};
  return result;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kInvalidParameter, "TV distance of mismatched rows");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> realized_tv_curve(const ModeSet& modes, const RunTrace& trace,
                                      std::size_t reference) {
  if (reference >= modes.size()) {
    throw Error(ErrorCode::kUnknownMode, "reference mode index out of range");
  }
  if (trace.mode_ids.size() != modes.size()) {
    throw Error(ErrorCode::kInvalidParameter, "trace and mode set disagree");
  }
  std::vector<double> curve;
  curve.reserve(trace.steps.size() + 1);
  History h;
  h.reserve(trace.steps.size());
  std::vector<double> w = trace.prior;
  const std::size_t n_actions = modes.front().io().actions.size();
  for (std::size_t t = 0;; ++t) {
    std::vector<double> law(n_actions, 0.0);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if (w[m] == 0.0) continue;
      const auto row = modes[m].action_dist(h).probs();
      for (std::size_t a = 0; a < n_actions; ++a) law[a] += w[m] * row[a];
    }
    curve.push_back(total_variation(law, modes[reference].action_dist(h).probs()));
    if (t == trace.steps.size()) break;
    const auto& s = trace.steps[t];
    h.push(Step{s.action, s.observation, true});
    w = s.posterior;
  }
  return curve;
}

TheoremReport theorem_checks(const ModeSet& modes, std::span<const RunTrace> traces,
                             std::size_t reference, const TheoremOptions& options) {
  const std::size_t n = modes.size();
  if (reference >= n) {
    throw Error(ErrorCode::kUnknownMode, "reference mode index out of range");
  }
  TheoremReport report;
  report.reference = reference;
  report.n_runs = traces.size();
  report.lambda = options.lambda;
  report.t1_threshold = options.lambda / static_cast<double>(n);

  std::vector<std::size_t> non_core;
  if (options.non_core) {
    non_core = *options.non_core;
  } else {
    for (std::size_t m = 0; m < n; ++m) {
      if (m != reference) non_core.push_back(m);
    }
  }

  std::size_t pairs = 0;
  std::size_t pairs_ok = 0;
  std::size_t runs_ok = 0;
  std::vector<std::vector<double>> terminal(n);
  std::vector<std::vector<double>> slopes(n);
  std::vector<double> tv_sum;
  std::vector<std::size_t> tv_count;

  for (const auto& trace : traces) {
    if (trace.mode_ids.size() != n || trace.prior.size() != n) {
      throw Error(ErrorCode::kInvalidParameter, "trace and mode set disagree");
    }
    // T1: the prior counts as t = 0.
    double min_w = trace.prior[reference];
    ++pairs;
    if (min_w >= report.t1_threshold) ++pairs_ok;
    for (const auto& s : trace.steps) {
      const double w = s.posterior[reference];
      min_w = std::min(min_w, w);
      ++pairs;
      if (w >= report.t1_threshold) ++pairs_ok;
    }
    report.t1_min_weight.push_back(min_w);
    if (min_w >= report.t1_threshold) ++runs_ok;

    // T2
    for (std::size_t m : non_core) {
      terminal[m].push_back(trace.steps.empty() ? trace.prior[m]
                                                : trace.steps.back().posterior[m]);
      std::vector<double> xs;
      std::vector<double> ys;
      const std::size_t half = trace.steps.size() / 2;
      for (std::size_t i = half; i < trace.steps.size(); ++i) {
        const double w = trace.steps[i].posterior[m];
        if (w > 0.0) {
          xs.push_back(static_cast<double>(trace.steps[i].t));
          ys.push_back(std::log(w));
        }
      }
      slopes[m].push_back(stats::ols_slope(xs, ys));
    }

    // T3
    const auto tv = realized_tv_curve(modes, trace, reference);
    if (tv_sum.size() < tv.size()) {
      tv_sum.resize(tv.size(), 0.0);
      tv_count.resize(tv.size(), 0);
    }
    for (std::size_t t = 0; t < tv.size(); ++t) {
      tv_sum[t] += tv[t];
      ++tv_count[t];
    }
    report.t3_terminal_tv.push_back(tv.back());
  }

  report.t1_fraction_pairs =
      pairs ? static_cast<double>(pairs_ok) / static_cast<double>(pairs) : 1.0;
  report.t1_fraction_runs =
      traces.empty() ? 1.0
                     : static_cast<double>(runs_ok) / static_cast<double>(traces.size());
  for (std::size_t m : non_core) {
    ModeDecay d;
    d.mode = m;
    if (!terminal[m].empty()) {
      d.mean_terminal = stats::mean(terminal[m]);
      d.median_terminal = stats::quantile(terminal[m], 0.5);
      d.max_terminal = *std::max_element(terminal[m].begin(), terminal[m].end());
      d.mean_log_slope = stats::mean(slopes[m]);
    }
    report.t2.push_back(d);
  }
  for (std::size_t t = 0; t < tv_sum.size(); ++t) {
    report.t3_mean_tv.push_back(tv_sum[t] / static_cast<double>(tv_count[t]));
  }
  report.t3_mean_terminal_tv = stats::mean(report.t3_terminal_tv);
  return report;
}

}  // namespace bcr
