#pragma once

// Offspring-potential laws Y for Dirichlet-type paintboxes.
//
// Every law is stored mean-normalized: draws are Y / E[Y_raw], so E[Y] = 1
// and E[Y^2] is the asymptotic neutral offspring variance. The raw mean is
// kept as scale() for reporting.

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "haldane/errors.hpp"
#include "haldane/format.hpp"

namespace haldane {

struct Deterministic {
  double value = 1.0;
  bool operator==(const Deterministic&) const = default;
};

/// Gamma with shape kappa and unit scale.
struct Gamma {
  double shape = 1.0;
  bool operator==(const Gamma&) const = default;
};

/// Y = high with probability p, otherwise low.
struct TwoPoint {
  double low = 0.5;
  double high = 1.5;
  double p = 0.5;
  bool operator==(const TwoPoint&) const = default;
};

/// exp(N(mu, sigma^2)); has no exponential moment.
struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;
  bool operator==(const LogNormal&) const = default;
};

class YLaw {
 public:
  using Family = std::variant<Deterministic, Gamma, TwoPoint, LogNormal>;

  YLaw() : YLaw(Deterministic{1.0}) {}

  static YLaw deterministic(double value = 1.0) {
    return YLaw(Deterministic{value});
  }
  static YLaw gamma(double shape) { return YLaw(Gamma{shape}); }
  static YLaw two_point(double low, double high, double p) {
    return YLaw(TwoPoint{low, high, p});
  }
  static YLaw lognormal(double mu, double sigma) {
    return YLaw(LogNormal{mu, sigma});
  }

  explicit YLaw(Family family) : family_(family) {
    std::visit([](const auto& f) { validate(f); }, family_);
    scale_ = std::visit([](const auto& f) { return raw_mean(f); }, family_);
  }

  const Family& family() const { return family_; }

  /// Mean of the law before normalization.
  double scale() const { return scale_; }

  /// E[Y^n] of the normalized law.
  double moment(int n) const {
    return std::visit(
        [this, n](const auto& f) -> double { return normalized_moment(f, n); },
        family_);
  }

  double variance() const { return moment(2) - 1.0; }

  /// True when E[exp(hY)] < infinity for some h > 0.
  bool conforming() const {
    return !std::holds_alternative<LogNormal>(family_);
  }

  bool has_mgf() const { return conforming(); }

  /// E[exp(tY)] of the normalized law.
  double mgf(double t) const {
    if (std::holds_alternative<Deterministic>(family_)) return std::exp(t);
    if (const auto* g = std::get_if<Gamma>(&family_)) {
      // normalized: shape kappa, scale 1/kappa
      if (t >= g->shape) return std::numeric_limits<double>::infinity();
      return std::exp(-g->shape * std::log1p(-t / g->shape));
    }
    if (const auto* tp = std::get_if<TwoPoint>(&family_)) {
      return (1.0 - tp->p) * std::exp(t * tp->low / scale_) +
             tp->p * std::exp(t * tp->high / scale_);
    }
    throw UnsupportedLawError("log-normal law has no closed-form MGF");
  }

  /// One normalized draw; always strictly positive.
  template <class Rng>
  double sample(Rng& rng) const {
    return std::visit(
        [&](const auto& f) -> double { return draw(f, rng) / scale_; },
        family_);
  }

  /// An exact draw of Y_1 + ... + Y_n (normalized). O(1) for every family
  /// except log-normal, which sums n draws.
  template <class Rng>
  double sample_sum(std::uint64_t n, Rng& rng) const {
    if (n == 0) return 0.0;
    if (std::holds_alternative<Deterministic>(family_)) {
      return static_cast<double>(n);
    }
    if (const auto* g = std::get_if<Gamma>(&family_)) {
      boost::random::gamma_distribution<double> dist(
          g->shape * static_cast<double>(n), 1.0);
      return dist(rng) / g->shape;
    }
    if (const auto* tp = std::get_if<TwoPoint>(&family_)) {
      boost::random::binomial_distribution<std::int64_t, double> dist(
          static_cast<std::int64_t>(n), tp->p);
      const auto highs = static_cast<double>(dist(rng));
      return (tp->high * highs + tp->low * (static_cast<double>(n) - highs)) /
             scale_;
    }
    double total = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) total += sample(rng);
    return total;
  }

  /// "deterministic", "gamma:1", "two-point:0.5,1.5,0.5", "lognormal:0,0.5"
  std::string to_string() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Deterministic>) {
            os << "deterministic";
            if (f.value != 1.0) os << ':' << shortest(f.value);
          } else if constexpr (std::is_same_v<T, Gamma>) {
            os << "gamma:" << shortest(f.shape);
          } else if constexpr (std::is_same_v<T, TwoPoint>) {
            os << "two-point:" << shortest(f.low) << ',' << shortest(f.high)
               << ',' << shortest(f.p);
          } else {
            os << "lognormal:" << shortest(f.mu) << ',' << shortest(f.sigma);
          }
        },
        family_);
    return os.str();
  }

  static YLaw parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto name = text.substr(0, colon);
    std::vector<double> params;
    if (colon != std::string_view::npos) {
      auto rest = text.substr(colon + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        params.push_back(parse_number(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
    }
    auto expect = [&](std::size_t lo, std::size_t hi) {
      if (params.size() < lo || params.size() > hi) {
        throw ConfigError("wrong number of parameters for Y law '" +
                          std::string(text) + "'");
      }
    };
    if (name == "deterministic" || name == "wright-fisher") {
      expect(0, 1);
      return deterministic(params.empty() ? 1.0 : params[0]);
    }
    if (name == "gamma" || name == "dirichlet") {
      expect(0, 1);
      return gamma(params.empty() ? 1.0 : params[0]);
    }
    if (name == "two-point") {
      expect(3, 3);
      return two_point(params[0], params[1], params[2]);
    }
    if (name == "lognormal") {
      expect(2, 2);
      return lognormal(params[0], params[1]);
    }
    throw ConfigError("unknown Y law '" + std::string(text) + "'");
  }

  bool operator==(const YLaw& other) const { return family_ == other.family_; }

 private:
  static double parse_number(std::string_view s) {
    double value = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
      throw ConfigError("not a number: '" + std::string(s) + "'");
    }
    return value;
  }

  static void validate(const Deterministic& d) {
    if (!(d.value > 0.0)) throw ConfigError("deterministic Y needs value > 0");
  }
  static void validate(const Gamma& g) {
    if (!(g.shape > 0.0) || !std::isfinite(g.shape)) {
      throw ConfigError("gamma Y needs shape > 0");
    }
  }
  static void validate(const TwoPoint& t) {
    if (!(t.low > 0.0) || !(t.high > 0.0)) {
      throw ConfigError("two-point Y needs positive support points");
    }
    if (!(t.p > 0.0 && t.p < 1.0)) {
      throw ConfigError("two-point Y needs p in (0,1)");
    }
  }
  static void validate(const LogNormal& l) {
    if (!(l.sigma > 0.0) || !std::isfinite(l.mu)) {
      throw ConfigError("log-normal Y needs sigma > 0");
    }
  }

  static double raw_mean(const Deterministic& d) { return d.value; }
  static double raw_mean(const Gamma& g) { return g.shape; }
  static double raw_mean(const TwoPoint& t) {
    return (1.0 - t.p) * t.low + t.p * t.high;
  }
  static double raw_mean(const LogNormal& l) {
    return std::exp(l.mu + 0.5 * l.sigma * l.sigma);
  }

  double normalized_moment(const Deterministic&, int) const { return 1.0; }
  double normalized_moment(const Gamma& g, int n) const {
    double m = 1.0;
    for (int i = 0; i < n; ++i) m *= (g.shape + i) / g.shape;
    return m;
  }
  double normalized_moment(const TwoPoint& t, int n) const {
    return (1.0 - t.p) * std::pow(t.low / scale_, n) +
           t.p * std::pow(t.high / scale_, n);
  }
  double normalized_moment(const LogNormal& l, int n) const {
    return std::exp(0.5 * l.sigma * l.sigma * n * (n - 1));
  }

  template <class Rng>
  static double draw(const Deterministic& d, Rng&) {
    return d.value;
  }
  template <class Rng>
  static double draw(const Gamma& g, Rng& rng) {
    boost::random::gamma_distribution<double> dist(g.shape, 1.0);
    // tiny shapes can underflow to zero in double precision
    return std::max(dist(rng), std::numeric_limits<double>::min());
  }
  template <class Rng>
  static double draw(const TwoPoint& t, Rng& rng) {
    boost::random::bernoulli_distribution<double> coin(t.p);
    return coin(rng) ? t.high : t.low;
  }
  template <class Rng>
  static double draw(const LogNormal& l, Rng& rng) {
    boost::random::normal_distribution<double> dist(l.mu, l.sigma);
    return std::exp(dist(rng));
  }

  Family family_;
  double scale_ = 1.0;
};

}  // namespace haldane
