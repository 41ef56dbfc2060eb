#pragma once

// Galton-Watson processes: the bounding offspring laws of the frequency
// process, exact survival probabilities from the offspring generating
// function, the immortal-skeleton transform and hitting-time statistics.

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "haldane/cannings.hpp"
#include "haldane/errors.hpp"
#include "haldane/y_law.hpp"

namespace haldane {

/// Offspring Pois(Y m).
struct MixedPoisson {
  YLaw law;
  double m = 1.0;
  bool operator==(const MixedPoisson&) const = default;
};

/// Offspring Bin(M, min(Y m / N, 1)).
struct MixedBinomial {
  YLaw law;
  std::uint64_t M = 1;
  double m = 1.0;
  std::uint64_t N = 1;
  bool operator==(const MixedBinomial&) const = default;
};

/// Offspring 1 with probability 1 - beta_s, 2 otherwise. Never dies out.
struct TwoPointImmortal {
  double beta_s = 0.0;
  bool operator==(const TwoPointImmortal&) const = default;
};

/// Offspring 0 with probability 1 - p, 2 otherwise.
struct Binary {
  double p = 0.5;
  bool operator==(const Binary&) const = default;
};

struct PlainPoisson {
  double m = 1.0;
  bool operator==(const PlainPoisson&) const = default;
};

class GWModel {
 public:
  using Law = std::variant<MixedPoisson, MixedBinomial, TwoPointImmortal,
                           Binary, PlainPoisson>;

  static GWModel mixed_poisson(YLaw law, double m) {
    return GWModel(MixedPoisson{std::move(law), m});
  }
  static GWModel mixed_binomial(YLaw law, std::uint64_t trials, double m,
                                std::uint64_t scale) {
    return GWModel(MixedBinomial{std::move(law), trials, m, scale});
  }
  static GWModel two_point_immortal(double beta_s) {
    return GWModel(TwoPointImmortal{beta_s});
  }
  /// beta * s; beta in (0,1] approaching 1 recovers the tight bound.
  static GWModel two_point_immortal_from_selection(double s,
                                                   double beta = 1.0) {
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw ConfigError("beta must lie in (0, 1]");
    }
    return two_point_immortal(beta * s);
  }
  static GWModel binary(double p) { return GWModel(Binary{p}); }
  static GWModel plain_poisson(double m) { return GWModel(PlainPoisson{m}); }

  /// Upper bounding law for a Cannings phase-one step: Pois(Y / (1-s)).
  /// 1/(1-s) = 1 + s + s^2/(1-s) bounds the per capita success
  /// probability sum W_i / (1-s); a factor of exactly 1 + s does not.
  static GWModel upper_bound(const YLaw& law, double s) {
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("s must lie in [0, 1)");
    return mixed_poisson(law, 1.0 / (1.0 - s));
  }
  /// Lower bounding law: Bin(N - level, Y (1+s) / N).
  static GWModel lower_bound(const YLaw& law, double s, std::uint64_t n,
                             std::uint64_t level) {
    if (level >= n) throw ConfigError("lower bound level must be below N");
    return mixed_binomial(law, n - level, 1.0 + s, n);
  }

  explicit GWModel(Law law) : law_(std::move(law)) { validate(); }

  const Law& law() const { return law_; }

  std::string name() const {
    return std::visit(
        [](const auto& l) -> std::string {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, MixedPoisson>) return "mixed-poisson";
          if constexpr (std::is_same_v<T, MixedBinomial>) {
            return "mixed-binomial";
          }
          if constexpr (std::is_same_v<T, TwoPointImmortal>) {
            return "two-point-immortal";
          }
          if constexpr (std::is_same_v<T, Binary>) return "binary";
          return "poisson";
        },
        law_);
  }

  bool operator==(const GWModel&) const = default;

 private:
  void validate() const {
    auto probability = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(std::string(what) + " must lie in [0, 1]");
      }
    };
    auto positive = [](double m, const char* what) {
      if (!(m > 0.0) || !std::isfinite(m)) {
        throw ConfigError(std::string(what) + " must be > 0");
      }
    };
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, MixedPoisson>) {
            positive(l.m, "mean factor m");
          } else if constexpr (std::is_same_v<T, MixedBinomial>) {
            positive(l.m, "mean factor m");
            if (l.M == 0 || l.N == 0) {
              throw ConfigError("mixed binomial needs M >= 1 and N >= 1");
            }
          } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
            probability(l.beta_s, "beta*s");
          } else if constexpr (std::is_same_v<T, Binary>) {
            probability(l.p, "p");
          } else {
            positive(l.m, "Poisson mean");
          }
        },
        law_);
  }

  Law law_;
};

/// Counts mixed-binomial draws whose success probability Y m / N exceeded 1.
struct ClampCounter {
  std::uint64_t draws = 0;
  std::uint64_t clamped = 0;
};

namespace detail {

/// E[f(Y)] for the normalized law. Exact for atomic laws, adaptive
/// tanh-sinh quadrature against the density for gamma. `kink` marks a point
/// where f is not smooth.
template <class F>
double expect_over(const YLaw& law, F f,
                   double kink = std::numeric_limits<double>::infinity()) {
  const auto& family = law.family();
  if (std::holds_alternative<Deterministic>(family)) return f(1.0);
  if (const auto* tp = std::get_if<TwoPoint>(&family)) {
    return (1.0 - tp->p) * f(tp->low / law.scale()) +
           tp->p * f(tp->high / law.scale());
  }
  if (const auto* g = std::get_if<Gamma>(&family)) {
    const double kappa = g->shape;
    const boost::math::gamma_distribution<double> dist(kappa, 1.0 / kappa);
    // mass above `top` is below 1e-17 and f is bounded by 1 for our callers
    const double top = boost::math::quantile(complement(dist, 1e-17));
    const double log_norm = kappa * std::log(kappa) - std::lgamma(kappa);
    auto integrand = [&](double y) {
      if (y <= 0.0) return 0.0;
      return f(y) *
             std::exp(log_norm + (kappa - 1.0) * std::log(y) - kappa * y);
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double tol = 1e-14;
    const double split = std::min(kink, top);
    double total = integrator.integrate(integrand, 0.0, split, tol);
    if (split < top) total += integrator.integrate(integrand, split, top, tol);
    return total;
  }
  throw UnsupportedLawError(
      "log-normal Y has no closed form for this expectation");
}

}  // namespace detail

/// Offspring mean E[Z_1].
inline double offspring_mean(const GWModel& model) {
  return std::visit(
      [](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MixedPoisson>) {
          return l.m;
        } else if constexpr (std::is_same_v<T, MixedBinomial>) {
          const double c = l.m / static_cast<double>(l.N);
          return static_cast<double>(l.M) *
                 detail::expect_over(
                     l.law, [c](double y) { return std::min(c * y, 1.0); },
                     1.0 / c);
        } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
          return 1.0 + l.beta_s;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return 2.0 * l.p;
        } else {
          return l.m;
        }
      },
      model.law());
}

/// Offspring variance Var[Z_1].
inline double offspring_variance(const GWModel& model) {
  return std::visit(
      [](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MixedPoisson>) {
          // Var(E[Z|Y]) + E[Var(Z|Y)]
          return l.m * l.m * l.law.variance() + l.m;
        } else if constexpr (std::is_same_v<T, MixedBinomial>) {
          const double c = l.m / static_cast<double>(l.N);
          const double trials = static_cast<double>(l.M);
          const double kink = 1.0 / c;
          const double p1 = detail::expect_over(
              l.law, [c](double y) { return std::min(c * y, 1.0); }, kink);
          const double p2 = detail::expect_over(
              l.law,
              [c](double y) {
                const double p = std::min(c * y, 1.0);
                return p * p;
              },
              kink);
          return trials * (p1 - p2) + trials * trials * (p2 - p1 * p1);
        } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
          return l.beta_s * (1.0 - l.beta_s);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return 4.0 * l.p * (1.0 - l.p);
        } else {
          return l.m;
        }
      },
      model.law());
}

/// Offspring generating function f(q) = E[q^{Z_1}] on [0,1].
inline double pgf(const GWModel& model, double q) {
  return std::visit(
      [q](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MixedPoisson>) {
          return l.law.mgf(l.m * (q - 1.0));
        } else if constexpr (std::is_same_v<T, MixedBinomial>) {
          const double c = l.m / static_cast<double>(l.N);
          const double trials = static_cast<double>(l.M);
          return detail::expect_over(
              l.law,
              [&](double y) {
                const double p = std::min(c * y, 1.0);
                return std::exp(trials * std::log1p(-p * (1.0 - q)));
              },
              1.0 / c);
        } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
          return (1.0 - l.beta_s) * q + l.beta_s * q * q;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return (1.0 - l.p) + l.p * q * q;
        } else {
          return std::exp(l.m * (q - 1.0));
        }
      },
      model.law());
}

/// Sum of z i.i.d. offspring counts.
template <class Rng>
std::uint64_t gw_step(const GWModel& model, std::uint64_t z, Rng& rng,
                      ClampCounter* clamps = nullptr) {
  if (z == 0) return 0;
  return std::visit(
      [&](const auto& l) -> std::uint64_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MixedPoisson>) {
          return detail::poisson(l.m * l.law.sample_sum(z, rng), rng);
        } else if constexpr (std::is_same_v<T, MixedBinomial>) {
          const double c = l.m / static_cast<double>(l.N);
          std::uint64_t total = 0;
          for (std::uint64_t i = 0; i < z; ++i) {
            double p = c * l.law.sample(rng);
            if (clamps) ++clamps->draws;
            if (p > 1.0) {
              p = 1.0;
              if (clamps) ++clamps->clamped;
            }
            total += detail::binomial(l.M, p, rng);
          }
          return total;
        } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
          return z + detail::binomial(z, l.beta_s, rng);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return 2 * detail::binomial(z, l.p, rng);
        } else {
          return detail::poisson(l.m * static_cast<double>(z), rng);
        }
      },
      model.law());
}

struct SurvivalResult {
  /// Survival probability 1 - q.
  double phi = 0.0;
  /// Smallest fixed point of the generating function in [0,1].
  double q = 1.0;
  std::uint64_t iterations = 0;
  /// |f(q) - q| at the returned q.
  double residual = 0.0;
  bool converged = true;
};

/// Smallest root of q = f(q) by monotone iteration q <- f(q) from 0.
inline SurvivalResult extinction_q(const GWModel& model, double tol = 1e-12,
                                   std::uint64_t max_iterations = 1000000) {
  if (!(tol > 0.0)) throw DomainError("extinction_q: tol must be > 0");
  SurvivalResult result;
  const double f0 = pgf(model, 0.0);
  if (f0 == 0.0) {
    result.phi = 1.0;
    result.q = 0.0;
    return result;
  }
  if (offspring_mean(model) <= 1.0) {
    result.phi = 0.0;
    result.q = 1.0;
    result.residual = std::abs(pgf(model, 1.0) - 1.0);
    return result;
  }
  double q = 0.0;
  double next = f0;
  std::uint64_t it = 1;
  while (std::abs(next - q) > tol && it < max_iterations) {
    q = next;
    next = pgf(model, q);
    ++it;
  }
  result.converged = std::abs(next - q) <= tol;
  result.q = next;
  result.phi = 1.0 - next;
  result.iterations = it;
  result.residual = std::abs(pgf(model, next) - next);
  return result;
}

/// 2 s / sigma^2, clamped to [0, 1].
inline double haldane_ref(double s, double sigma2) {
  if (!(s >= 0.0)) throw DomainError("haldane_ref: s must be >= 0");
  if (!(sigma2 > 0.0)) throw DomainError("haldane_ref: sigma^2 must be > 0");
  return std::clamp(2.0 * s / sigma2, 0.0, 1.0);
}

/// The offspring pmf P(Z_1 = 0), P(Z_1 = 1), ..., cut where the remaining
/// mass drops below tail_mass.
inline std::vector<double> offspring_pmf(const GWModel& model,
                                         double tail_mass = 1e-12) {
  auto poisson_mixture = [tail_mass](std::span<const double> rates,
                                     std::span<const double> probs) {
    std::vector<double> pmf;
    std::vector<double> term(rates.size());
    for (std::size_t j = 0; j < rates.size(); ++j) {
      term[j] = std::exp(-rates[j]);
    }
    double cumulative = 0.0;
    for (std::uint64_t k = 0;; ++k) {
      if (k > 0) {
        for (std::size_t j = 0; j < rates.size(); ++j) {
          term[j] *= rates[j] / static_cast<double>(k);
        }
      }
      double v = 0.0;
      for (std::size_t j = 0; j < rates.size(); ++j) v += probs[j] * term[j];
      pmf.push_back(v);
      cumulative += v;
      if (1.0 - cumulative < tail_mass && k > 0) break;
      if (k > 100000000) throw DomainError("offspring_pmf: tail too heavy");
    }
    return pmf;
  };
  auto binomial_mixture = [tail_mass](std::uint64_t trials,
                                      std::span<const double> ps,
                                      std::span<const double> probs) {
    std::vector<double> pmf;
    double cumulative = 0.0;
    for (std::uint64_t k = 0; k <= trials; ++k) {
      double v = 0.0;
      for (std::size_t j = 0; j < ps.size(); ++j) {
        const double p = ps[j];
        double term;
        if (p >= 1.0) {
          term = k == trials ? 1.0 : 0.0;
        } else if (p <= 0.0) {
          term = k == 0 ? 1.0 : 0.0;
        } else {
          const double n = static_cast<double>(trials);
          const double kk = static_cast<double>(k);
          term = std::exp(std::lgamma(n + 1) - std::lgamma(kk + 1) -
                          std::lgamma(n - kk + 1) + kk * std::log(p) +
                          (n - kk) * std::log1p(-p));
        }
        v += probs[j] * term;
      }
      pmf.push_back(v);
      cumulative += v;
      if (1.0 - cumulative < tail_mass && k > 0) break;
    }
    return pmf;
  };
  // Atoms of the normalized Y law, or empty for continuous laws.
  auto atoms = [](const YLaw& law, std::vector<double>& values,
                  std::vector<double>& probs) {
    if (std::holds_alternative<Deterministic>(law.family())) {
      values = {1.0};
      probs = {1.0};
      return true;
    }
    if (const auto* tp = std::get_if<TwoPoint>(&law.family())) {
      values = {tp->low / law.scale(), tp->high / law.scale()};
      probs = {1.0 - tp->p, tp->p};
      return true;
    }
    return false;
  };

  return std::visit(
      [&](const auto& l) -> std::vector<double> {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MixedPoisson>) {
          std::vector<double> values, probs;
          if (atoms(l.law, values, probs)) {
            for (auto& v : values) v *= l.m;
            return poisson_mixture(values, probs);
          }
          if (const auto* g = std::get_if<Gamma>(&l.law.family())) {
            // negative binomial with r = kappa, odds m / kappa
            const double kappa = g->shape;
            const double ratio = l.m / (kappa + l.m);
            std::vector<double> pmf;
            double term = std::exp(kappa * std::log(kappa / (kappa + l.m)));
            double cumulative = 0.0;
            for (std::uint64_t k = 0;; ++k) {
              if (k > 0) {
                term *= (static_cast<double>(k) - 1.0 + kappa) /
                        static_cast<double>(k) * ratio;
              }
              pmf.push_back(term);
              cumulative += term;
              if (1.0 - cumulative < tail_mass && k > 0) break;
            }
            return pmf;
          }
          throw UnsupportedLawError("log-normal mixed Poisson pmf");
        } else if constexpr (std::is_same_v<T, MixedBinomial>) {
          std::vector<double> values, probs;
          if (!atoms(l.law, values, probs)) {
            throw UnsupportedLawError(
                "mixed binomial pmf needs an atomic Y law");
          }
          const double c = l.m / static_cast<double>(l.N);
          for (auto& v : values) v = std::min(c * v, 1.0);
          return binomial_mixture(l.M, values, probs);
        } else if constexpr (std::is_same_v<T, TwoPointImmortal>) {
          return {0.0, 1.0 - l.beta_s, l.beta_s};
        } else if constexpr (std::is_same_v<T, Binary>) {
          return {1.0 - l.p, 0.0, l.p};
        } else {
          const double rate[] = {l.m};
          const double one[] = {1.0};
          return poisson_mixture(rate, one);
        }
      },
      model.law());
}

/// P(Z*_1 = k) for the immortal skeleton of a process with offspring pmf
/// `base` and survival probability phi.
inline double conditioned_pmf(std::span<const double> base, double phi,
                              std::uint64_t k) {
  if (!(phi > 0.0 && phi <= 1.0)) {
    throw DomainError("conditioned_pmf: phi must lie in (0, 1]");
  }
  if (k == 0) throw DomainError("conditioned_pmf: k must be >= 1");
  if (base.empty()) throw DomainError("conditioned_pmf: empty base pmf");
  double mass = 0.0;
  for (const double p : base) {
    if (!(p >= 0.0)) throw DomainError("conditioned_pmf: negative mass");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw DomainError("conditioned_pmf: base pmf must sum to 1");
  }
  if (k >= base.size()) return 0.0;
  if (phi == 1.0) return base[k];
  const double kk = static_cast<double>(k);
  const double log_phi = std::log(phi);
  const double log_rest = std::log1p(-phi);
  double total = 0.0;
  for (std::size_t z = k; z < base.size(); ++z) {
    if (base[z] == 0.0) continue;
    const double zz = static_cast<double>(z);
    const double log_choose =
        std::lgamma(zz + 1) - std::lgamma(kk + 1) - std::lgamma(zz - kk + 1);
    total += base[z] *
             std::exp(log_choose + (kk - 1.0) * log_phi + (zz - kk) * log_rest);
  }
  return total;
}

struct HittingStats {
  std::uint64_t trials = 0;
  std::uint64_t reached_upper = 0;
  std::uint64_t hit_zero = 0;
  std::uint64_t still_inside = 0;

  double reached_upper_frequency() const { return frac(reached_upper); }
  double hit_zero_frequency() const { return frac(hit_zero); }
  double still_inside_frequency() const { return frac(still_inside); }

 private:
  double frac(std::uint64_t c) const {
    return trials ? static_cast<double>(c) / static_cast<double>(trials) : 0.0;
  }
};

/// Starts each trial from one individual and classifies it by its first exit
/// from {1, ..., upper - 1} within `horizon` generations.
template <class Rng>
HittingStats gw_hitting_stats(const GWModel& model, std::uint64_t upper,
                              std::uint64_t horizon, std::uint64_t trials,
                              Rng& rng) {
  if (upper < 2) throw DomainError("gw_hitting_stats: upper must be >= 2");
  if (horizon < 1) throw DomainError("gw_hitting_stats: horizon must be >= 1");
  HittingStats stats;
  stats.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::uint64_t z = 1;
    bool exited = false;
    for (std::uint64_t g = 0; g < horizon; ++g) {
      z = gw_step(model, z, rng);
      if (z == 0) {
        ++stats.hit_zero;
        exited = true;
        break;
      }
      if (z >= upper) {
        ++stats.reached_upper;
        exited = true;
        break;
      }
    }
    if (!exited) ++stats.still_inside;
  }
  return stats;
}

}  // namespace haldane
