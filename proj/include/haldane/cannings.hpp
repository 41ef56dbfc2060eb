#pragma once

// The selective Cannings frequency process.
//
// Given k beneficial individuals, which by exchangeability may be taken to
// occupy weight slots 1..k, the next generation holds
// Bin(N, A / (A + (1-s) B)) beneficial individuals, where A and B are the
// paintbox masses of slots 1..k and k+1..N. A fresh paintbox is drawn in
// every generation.

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "haldane/errors.hpp"
#include "haldane/paintbox.hpp"
#include "haldane/random.hpp"
#include "haldane/stats.hpp"

namespace haldane {

/// Selection strength, given either directly or as an exponent b with
/// s = N^-b.
class Selection {
 public:
  static Selection coefficient(double s) {
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("s must lie in [0, 1)");
    return Selection(false, s);
  }
  static Selection exponent(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("b must be > 0");
    return Selection(true, b);
  }

  bool is_exponent() const { return is_exponent_; }
  double value() const { return value_; }

  double s(std::uint64_t n) const {
    return is_exponent_ ? std::pow(static_cast<double>(n), -value_) : value_;
  }
  /// -ln s / ln N; infinite when s = 0.
  double b(std::uint64_t n) const {
    if (is_exponent_) return value_;
    if (value_ == 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(value_) / std::log(static_cast<double>(n));
  }

  bool operator==(const Selection&) const = default;

 private:
  Selection(bool is_exponent, double value)
      : is_exponent_(is_exponent), value_(value) {}

  bool is_exponent_ = false;
  double value_ = 0.0;
};

struct CanningsConfig {
  std::uint64_t N = 2;
  Selection selection = Selection::coefficient(0.0);
  Paintbox paintbox;
  std::uint64_t x0 = 1;
  /// Optional cap on generations; hitting it yields a truncated record.
  std::optional<std::uint64_t> max_generations;

  double s() const { return selection.s(N); }
  double b() const { return selection.b(N); }

  /// Moderately strong selection: N^(-1/2+eta) <= s <= N^-eta for some
  /// eta > 0, i.e. 0 < b < 1/2. Reported, never enforced.
  bool moderately_strong() const {
    const double bn = b();
    return bn > 0.0 && bn < 0.5;
  }

  void validate() const {
    if (N < 2) throw ConfigError("population size N must be >= 2");
    if (x0 > N) throw ConfigError("initial count x0 must lie in [0, N]");
    const double sn = s();
    if (!(sn >= 0.0 && sn < 1.0)) throw ConfigError("s must lie in [0, 1)");
    if (const auto* spec = paintbox.spiked()) spec->validate();
  }

  bool operator==(const CanningsConfig&) const = default;
};

enum class Outcome { fixation, loss, truncated };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::fixation: return "fixation";
    case Outcome::loss: return "loss";
    case Outcome::truncated: return "truncated";
  }
  return "?";
}

struct LevelPassage {
  std::uint64_t level = 0;
  /// First generation g with X_g >= level; empty if never crossed.
  std::optional<std::uint64_t> generation;
};

struct AbsorptionRecord {
  Outcome outcome = Outcome::loss;
  std::uint64_t tau = 0;
  std::uint64_t final_count = 0;
  std::uint64_t max_count = 0;
  /// Sorted by level.
  std::vector<LevelPassage> first_passage;

  std::optional<std::uint64_t> passage(std::uint64_t level) const {
    for (const auto& p : first_passage) {
      if (p.level == level) return p.generation;
    }
    return std::nullopt;
  }
};

/// A / (A + (1-s) B) for beneficial mass A and wildtype mass B.
inline double success_probability(double beneficial_mass, double wild_mass,
                                  double s) {
  if (wild_mass <= 0.0) return 1.0;
  if (beneficial_mass <= 0.0) return 0.0;
  return beneficial_mass / (beneficial_mass + (1.0 - s) * wild_mass);
}

/// Probability that a child is beneficial, beneficial parents in slots 1..k.
inline double success_probability(const WeightVector& weights, std::size_t k,
                                  double s) {
  if (k > weights.size()) {
    throw DomainError("success_probability: k exceeds population size");
  }
  if (k == 0) return 0.0;
  if (k == weights.size()) return 1.0;
  return success_probability(weights.head_mass(k), weights.tail_mass(k), s);
}

namespace detail {

template <class Rng>
std::uint64_t binomial(std::uint64_t trials, double p, Rng& rng) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  boost::random::binomial_distribution<std::int64_t, double> dist(
      static_cast<std::int64_t>(trials), p);
  return static_cast<std::uint64_t>(dist(rng));
}

template <class Rng>
std::uint64_t poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  boost::random::poisson_distribution<std::int64_t, double> dist(mean);
  return static_cast<std::uint64_t>(dist(rng));
}

}  // namespace detail

/// One generation of the frequency process from k beneficial individuals.
template <class Rng>
std::uint64_t step(std::uint64_t k, const CanningsConfig& config, Rng& rng) {
  const std::uint64_t n = config.N;
  if (k > n) throw DomainError("step: k exceeds population size");
  if (k == 0 || k == n) return k;
  const auto masses =
      config.paintbox.sample_block_masses<2>(n, {k, n - k}, rng);
  const double p = success_probability(masses[0], masses[1], config.s());
  return detail::binomial(n, p, rng);
}

/// The same transition, drawing the full weight vector W_1..W_N.
template <class Rng>
std::uint64_t step_full_paintbox(std::uint64_t k, const CanningsConfig& config,
                                 Rng& rng) {
  const std::uint64_t n = config.N;
  if (k > n) throw DomainError("step: k exceeds population size");
  if (k == 0 || k == n) return k;
  const auto weights = config.paintbox.sample(n, rng);
  return detail::binomial(n, success_probability(weights, k, config.s()), rng);
}

/// Iterates step() from x0 until 0 or N, recording first passages of the
/// given levels.
template <class Rng>
AbsorptionRecord run_to_absorption(const CanningsConfig& config,
                                   std::span<const std::uint64_t> thresholds,
                                   Rng& rng) {
  config.validate();
  AbsorptionRecord rec;
  std::vector<std::uint64_t> levels(thresholds.begin(), thresholds.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  rec.first_passage.reserve(levels.size());
  for (const auto level : levels) rec.first_passage.push_back({level, {}});

  std::size_t next_level = 0;  // first level not yet crossed
  auto record_passages = [&](std::uint64_t x, std::uint64_t g) {
    while (next_level < rec.first_passage.size() &&
           x >= rec.first_passage[next_level].level) {
      rec.first_passage[next_level++].generation = g;
    }
  };

  const double s = config.s();
  const std::uint64_t n = config.N;
  std::uint64_t x = config.x0;
  std::uint64_t g = 0;
  rec.max_count = x;
  record_passages(x, g);
  while (x != 0 && x != n) {
    if (config.max_generations && g >= *config.max_generations) {
      rec.outcome = Outcome::truncated;
      rec.tau = g;
      rec.final_count = x;
      return rec;
    }
    const auto masses =
        config.paintbox.sample_block_masses<2>(n, {x, n - x}, rng);
    x = detail::binomial(n, success_probability(masses[0], masses[1], s), rng);
    ++g;
    rec.max_count = std::max(rec.max_count, x);
    record_passages(x, g);
  }
  rec.outcome = x == n ? Outcome::fixation : Outcome::loss;
  rec.tau = g;
  rec.final_count = x;
  return rec;
}

/// floor(eps * N), the top of the comparison process's binomial regime.
inline std::uint64_t eps_level(std::uint64_t n, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0,1)");
  return static_cast<std::uint64_t>(std::floor(eps * static_cast<double>(n)));
}

struct GrowthFactor {
  double value = 1.0;
  double std_error = 0.0;
  bool exact = false;
};

/// q_N = N E[W_1 / (1 - s * sum_{i > floor(eps N)} W_i)].
///
/// Exact for s = 0 and for the deterministic paintbox; Monte Carlo otherwise.
template <class Rng>
GrowthFactor growth_factor_qn(const CanningsConfig& config, double eps,
                              std::uint64_t trials, Rng& rng) {
  config.validate();
  if (trials == 0) throw DomainError("growth_factor_qn: trials must be >= 1");
  const std::uint64_t n = config.N;
  const std::uint64_t m = eps_level(n, eps);
  const double s = config.s();
  if (s == 0.0) return {1.0, 0.0, true};
  const auto* law = config.paintbox.law();
  if (law && std::holds_alternative<Deterministic>(law->family())) {
    const double tail = static_cast<double>(n - m) / static_cast<double>(n);
    return {1.0 / (1.0 - s * tail), 0.0, true};
  }
  RunningStats acc;
  const double nn = static_cast<double>(n);
  for (std::uint64_t t = 0; t < trials; ++t) {
    if (m == 0) {
      const auto w = config.paintbox.sample_block_masses<2>(n, {1, n - 1}, rng);
      acc.add(nn * w[0] / (1.0 - s));
    } else {
      const auto w =
          config.paintbox.sample_block_masses<3>(n, {1, m - 1, n - m}, rng);
      acc.add(nn * w[0] / (1.0 - s * w[2]));
    }
  }
  return {acc.mean(), acc.std_error(), false};
}

/// One transition of the comparison process X~.
///
/// At or below floor(eps N): Bin(N, sum_{i<=k} W_i / (1 - s sum_{i>eps N} W_i)).
/// Above it: a branching step with Pois(Y_i q_N) offspring, which needs a
/// Dirichlet-type paintbox and q_N (estimated with 10^5 draws if absent).
template <class Rng>
std::uint64_t step_tilde(std::uint64_t k, const CanningsConfig& config,
                         double eps, Rng& rng,
                         std::optional<double> qn = std::nullopt) {
  const std::uint64_t n = config.N;
  const std::uint64_t m = eps_level(n, eps);
  if (k == 0) return 0;
  const double s = config.s();
  if (k <= m) {
    const auto w =
        config.paintbox.sample_block_masses<3>(n, {k, m - k, n - m}, rng);
    const double p = std::min(1.0, w[0] / (1.0 - s * w[2]));
    return detail::binomial(n, p, rng);
  }
  const auto* law = config.paintbox.law();
  if (!law) {
    throw ConfigError(
        "comparison process above eps*N needs a Dirichlet-type paintbox");
  }
  if (!qn) {
    auto side = RandomStream(rng());
    qn = growth_factor_qn(config, eps, 100000, side).value;
  }
  return detail::poisson(*qn * law->sample_sum(k, rng), rng);
}

}  // namespace haldane
