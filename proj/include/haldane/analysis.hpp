#pragma once

// Monte Carlo experiments over the Cannings frequency process.
//
// Trial i of an experiment with seed S always draws from RandomStream(S, i).
// Workers take contiguous trial ranges and return integer tallies, which are
// summed, so results do not depend on the worker count.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "haldane/branching.hpp"
#include "haldane/cannings.hpp"
#include "haldane/errors.hpp"
#include "haldane/paintbox.hpp"
#include "haldane/random.hpp"
#include "haldane/stats.hpp"

namespace haldane {

struct TrialTally {
  std::uint64_t trials = 0;
  std::uint64_t fixations = 0;
  std::uint64_t losses = 0;
  std::uint64_t truncated = 0;
  std::uint64_t tau_fixation_sum = 0;
  std::uint64_t tau_loss_sum = 0;
  /// Trials that crossed each requested level, in the order given.
  std::vector<std::uint64_t> level_hits;

  void add(const AbsorptionRecord& rec, std::span<const std::uint64_t> levels) {
    ++trials;
    switch (rec.outcome) {
      case Outcome::fixation:
        ++fixations;
        tau_fixation_sum += rec.tau;
        break;
      case Outcome::loss:
        ++losses;
        tau_loss_sum += rec.tau;
        break;
      case Outcome::truncated:
        ++truncated;
        break;
    }
    level_hits.resize(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (rec.passage(levels[i])) ++level_hits[i];
    }
  }

  void merge(const TrialTally& other) {
    trials += other.trials;
    fixations += other.fixations;
    losses += other.losses;
    truncated += other.truncated;
    tau_fixation_sum += other.tau_fixation_sum;
    tau_loss_sum += other.tau_loss_sum;
    level_hits.resize(std::max(level_hits.size(), other.level_hits.size()));
    for (std::size_t i = 0; i < other.level_hits.size(); ++i) {
      level_hits[i] += other.level_hits[i];
    }
  }
};

/// Runs `trials` absorption runs of `config` on `parallelism` threads.
inline TrialTally farm_trials(const CanningsConfig& config,
                              std::uint64_t trials, std::uint64_t seed,
                              unsigned parallelism,
                              std::span<const std::uint64_t> levels = {}) {
  config.validate();
  if (trials == 0) throw DomainError("trials must be >= 1");
  if (parallelism == 0) {
    parallelism = std::max(1u, std::thread::hardware_concurrency());
  }
  const auto workers = static_cast<std::uint64_t>(
      std::min<std::uint64_t>(parallelism, trials));
  const std::vector<std::uint64_t> level_list(levels.begin(), levels.end());

  auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    TrialTally tally;
    tally.level_hits.assign(level_list.size(), 0);
    for (std::uint64_t i = begin; i < end; ++i) {
      RandomStream rng(seed, i);
      tally.add(run_to_absorption(config, level_list, rng), level_list);
    }
    return tally;
  };

  std::vector<TrialTally> partial(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto bounds = [&](std::uint64_t w) {
    return std::pair{trials * w / workers, trials * (w + 1) / workers};
  };
  if (workers == 1) {
    partial[0] = run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint64_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const auto [b, e] = bounds(w);
          partial[w] = run_range(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  TrialTally total;
  total.level_hits.assign(level_list.size(), 0);
  for (const auto& p : partial) total.merge(p);
  return total;
}

struct FixationEstimate {
  std::uint64_t trials = 0;
  std::uint64_t fixations = 0;
  std::uint64_t losses = 0;
  std::uint64_t truncated = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double level = 0.99;
  double s = 0.0;
  double rho2 = 1.0;
  /// 2 s / rho^2.
  double haldane = 0.0;
  /// p_hat * rho^2 / (2 s); absent when s = 0.
  std::optional<double> ratio;
  /// Mean generations to fixation over fixed trials; absent if none fixed.
  std::optional<double> mean_tau_fixation;

  std::optional<double> ratio_low() const { return scaled(ci_low); }
  std::optional<double> ratio_high() const { return scaled(ci_high); }

 private:
  std::optional<double> scaled(double p) const {
    if (s == 0.0) return std::nullopt;
    return p * rho2 / (2.0 * s);
  }
};

inline FixationEstimate summarize_fixation(const CanningsConfig& config,
                                           const TrialTally& tally,
                                           double level) {
  FixationEstimate est;
  est.trials = tally.trials;
  est.fixations = tally.fixations;
  est.losses = tally.losses;
  est.truncated = tally.truncated;
  est.level = level;
  est.p_hat =
      static_cast<double>(tally.fixations) / static_cast<double>(tally.trials);
  const auto ci = wilson_interval(tally.fixations, tally.trials, level);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.s = config.s();
  est.rho2 = config.paintbox.reference_offspring_variance(config.N);
  est.haldane = haldane_ref(est.s, est.rho2);
  if (est.s > 0.0) est.ratio = est.p_hat * est.rho2 / (2.0 * est.s);
  if (tally.fixations > 0) {
    est.mean_tau_fixation = static_cast<double>(tally.tau_fixation_sum) /
                            static_cast<double>(tally.fixations);
  }
  return est;
}

/// Fixation probability from x0 with a Wilson interval at `level`.
inline FixationEstimate estimate_fixation(const CanningsConfig& config,
                                          std::uint64_t trials,
                                          std::uint64_t seed,
                                          unsigned parallelism = 1,
                                          double level = 0.99) {
  const auto tally = farm_trials(config, trials, seed, parallelism);
  return summarize_fixation(config, tally, level);
}

struct PhaseReport {
  std::uint64_t level1 = 0;  // ceil(N^(b+delta))
  std::uint64_t level2 = 0;  // floor(eps N)
  std::uint64_t trials = 0;
  std::uint64_t reached_level1 = 0;
  std::uint64_t reached_level2 = 0;
  std::uint64_t fixations = 0;
  double p1 = 0.0, p2 = 0.0, p3 = 0.0;
  Interval p1_ci, p2_ci, p3_ci;
  double p_hat = 0.0;
  Interval p_hat_ci;
  double product = 0.0;
  /// |p1 p2 p3 - p_hat| within the half-width of the p_hat interval.
  bool consistent = false;
  double s = 0.0;
  double b = 0.0;
  double rho2 = 1.0;
  double haldane = 0.0;
  /// p1 * rho^2 / (2 s); absent when s = 0.
  std::optional<double> p1_ratio;
};

/// Growth phases of the frequency process: from x0 to ceil(N^(b+delta)),
/// from there to floor(eps N), and from there to fixation. When s = 0 the
/// exponent b is taken as 0.
inline PhaseReport phase_diagnostics(const CanningsConfig& config,
                                     double delta, double eps,
                                     std::uint64_t trials, std::uint64_t seed,
                                     unsigned parallelism = 1,
                                     double level = 0.99) {
  config.validate();
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("eps must lie in (0, 1/2)");
  const double s = config.s();
  const double b = s > 0.0 ? config.b() : 0.0;
  if (!(b + delta < 0.5)) throw ConfigError("phases need b + delta < 1/2");
  const double nn = static_cast<double>(config.N);
  PhaseReport r;
  r.level1 = static_cast<std::uint64_t>(std::ceil(std::pow(nn, b + delta)));
  r.level2 = eps_level(config.N, eps);
  if (r.level2 == 0 || r.level1 > r.level2) {
    throw ConfigError("phase levels out of order: need ceil(N^(b+delta)) <= "
                      "floor(eps N)");
  }
  const std::uint64_t levels[] = {r.level1, r.level2};
  const auto tally = farm_trials(config, trials, seed, parallelism, levels);

  r.trials = tally.trials;
  r.reached_level1 = tally.level_hits[0];
  r.reached_level2 = tally.level_hits[1];
  r.fixations = tally.fixations;
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  auto interval = [level](std::uint64_t num, std::uint64_t den) {
    return den ? wilson_interval(num, den, level) : Interval{0.0, 1.0};
  };
  r.p1 = ratio(r.reached_level1, r.trials);
  r.p2 = ratio(r.reached_level2, r.reached_level1);
  r.p3 = ratio(r.fixations, r.reached_level2);
  r.p1_ci = interval(r.reached_level1, r.trials);
  r.p2_ci = interval(r.reached_level2, r.reached_level1);
  r.p3_ci = interval(r.fixations, r.reached_level2);
  r.p_hat = ratio(r.fixations, r.trials);
  r.p_hat_ci = interval(r.fixations, r.trials);
  r.product = r.p1 * r.p2 * r.p3;
  const double half = 0.5 * (r.p_hat_ci.high - r.p_hat_ci.low);
  r.consistent = std::abs(r.product - r.p_hat) <= half + 1e-15;
  r.s = s;
  r.b = b;
  r.rho2 = config.paintbox.reference_offspring_variance(config.N);
  r.haldane = haldane_ref(s, r.rho2);
  if (s > 0.0) r.p1_ratio = r.p1 * r.rho2 / (2.0 * s);
  return r;
}

/// 1 - E[(N-k)...(N-k-A+1) / (N...(N-A+1))] averaged over the samples of A.
inline double duality_fixation(std::uint64_t n, std::uint64_t k,
                               std::span<const std::uint64_t> samples) {
  if (k > n) throw DomainError("duality_fixation: k must lie in [0, N]");
  if (samples.empty()) throw DomainError("duality_fixation: no samples");
  double total = 0.0;
  for (const auto a : samples) {
    if (a < 1 || a > n) {
      throw DomainError("duality_fixation: sample outside [1, N]");
    }
    if (k == 0) {
      total += 1.0;
      continue;
    }
    if (a > n - k) continue;  // a zero factor
    const double kk = static_cast<double>(k);
    double log_ratio = 0.0;
    for (std::uint64_t j = 0; j < a; ++j) {
      log_ratio += std::log1p(-kk / static_cast<double>(n - j));
      if (log_ratio < -760.0) break;  // exp underflows
    }
    total += std::exp(log_ratio);
  }
  return 1.0 - total / static_cast<double>(samples.size());
}

/// 1 - E[(1-eps)^A].
inline double duality_lower_bound(double eps,
                                  std::span<const std::uint64_t> samples) {
  if (samples.empty()) throw DomainError("duality_lower_bound: no samples");
  double total = 0.0;
  for (const auto a : samples) {
    total += std::exp(static_cast<double>(a) * std::log1p(-eps));
  }
  return 1.0 - total / static_cast<double>(samples.size());
}

/// One nonnegative integer per line; blank lines are skipped.
inline std::vector<std::uint64_t> read_aeq_samples(std::istream& in) {
  std::vector<std::uint64_t> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
      throw ConfigError("A_eq file line " + std::to_string(line_no) +
                        ": expected a nonnegative integer");
    }
    samples.push_back(value);
  }
  return samples;
}

inline std::vector<std::uint64_t> read_aeq_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open A_eq file '" + path + "'");
  return read_aeq_samples(in);
}

struct CounterexampleReport {
  FixationEstimate estimate;
  double s = 0.0;
  /// E[W_1^2] of the spiked paintbox.
  double second_moment = 0.0;
  /// 2 s / (N (N-1) E[W_1^2]).
  double naive_prediction = 0.0;
  double neutral_floor = 0.0;
  bool violation = false;
};

/// Fixation of a single mutant under the spiked paintbox against the
/// prediction built from its offspring variance.
inline CounterexampleReport counterexample_check(std::uint64_t n, double gamma,
                                                 double b, std::uint64_t trials,
                                                 std::uint64_t seed,
                                                 unsigned parallelism = 1,
                                                 double level = 0.99) {
  const SpikedSpec spec{gamma};
  spec.validate();
  if (!(b > 0.0)) throw ConfigError("b must be > 0");
  if (!(gamma < b / 2.0)) {
    throw ConfigError("counterexample needs gamma < b/2");
  }
  CanningsConfig config;
  config.N = n;
  config.selection = Selection::exponent(b);
  config.paintbox = Paintbox(spec);
  config.x0 = 1;
  config.validate();

  CounterexampleReport r;
  r.estimate = estimate_fixation(config, trials, seed, parallelism, level);
  r.s = config.s();
  r.second_moment = spec.second_moment(n);
  const double nn = static_cast<double>(n);
  r.naive_prediction = 2.0 * r.s / (nn * (nn - 1.0) * r.second_moment);
  r.neutral_floor = 1.0 / nn;
  r.violation = r.estimate.ci_low > std::max(2.0 * r.naive_prediction, 0.0);
  return r;
}

}  // namespace haldane
