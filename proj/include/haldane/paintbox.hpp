#pragma once

// Paintboxes: random weight vectors W_1..W_N that drive one generation of a
// Cannings model. Dirichlet-type paintboxes normalize i.i.d. draws of a YLaw;
// the spiked paintbox gives one uniformly chosen slot weight N^-gamma.

#include <boost/random/uniform_int_distribution.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "haldane/errors.hpp"
#include "haldane/format.hpp"
#include "haldane/stats.hpp"
#include "haldane/y_law.hpp"

namespace haldane {

/// Neumaier-compensated sum.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

class WeightVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  WeightVector() = default;

  explicit WeightVector(std::vector<double> weights)
      : weights_(std::move(weights)) {
    if (weights_.empty()) throw DomainError("weight vector must be nonempty");
    for (const double w : weights_) {
      if (!(w >= 0.0)) throw DomainError("weights must be nonnegative");
    }
    if (std::abs(compensated_sum(weights_) - 1.0) > kSumTolerance) {
      throw DomainError("weights must sum to 1");
    }
  }

  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

  /// W_1 + ... + W_k.
  double head_mass(std::size_t k) const {
    return compensated_sum(std::span(weights_).first(k));
  }
  /// W_{k+1} + ... + W_N.
  double tail_mass(std::size_t k) const {
    return compensated_sum(std::span(weights_).subspan(k));
  }

 private:
  std::vector<double> weights_;
};

struct SpikedSpec {
  double gamma = 0.1;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 0.5)) {
      throw ConfigError("spiked paintbox needs gamma in (0, 1/2)");
    }
  }

  double spike_weight(std::uint64_t n) const {
    return std::pow(static_cast<double>(n), -gamma);
  }
  double other_weight(std::uint64_t n) const {
    return (1.0 - spike_weight(n)) / static_cast<double>(n - 1);
  }
  /// E[W_1^2] in closed form.
  double second_moment(std::uint64_t n) const {
    const double nn = static_cast<double>(n);
    const double other = other_weight(n);
    const double spike = spike_weight(n);
    return spike * spike / nn + (1.0 - 1.0 / nn) * other * other;
  }

  bool operator==(const SpikedSpec&) const = default;
};

template <class Rng>
std::vector<double> sample_y(const YLaw& law, std::size_t n, Rng& rng) {
  if (n == 0) throw DomainError("sample_y: n must be >= 1");
  std::vector<double> y(n);
  for (auto& v : y) v = law.sample(rng);
  return y;
}

inline WeightVector weights_from_y(std::span<const double> y) {
  if (y.empty()) throw DomainError("weights_from_y: empty input");
  for (const double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("weights_from_y: entries must be positive and finite");
    }
  }
  const double total = compensated_sum(y);
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] / total;
  return WeightVector(std::move(w));
}

template <class Rng>
WeightVector spiked_weights(std::size_t n, const SpikedSpec& spec, Rng& rng) {
  spec.validate();
  if (n < 2) throw DomainError("spiked_weights: N must be >= 2");
  std::vector<double> w(n, spec.other_weight(n));
  boost::random::uniform_int_distribution<std::size_t> pick(0, n - 1);
  w[pick(rng)] = spec.spike_weight(n);
  return WeightVector(std::move(w));
}

/// E[Y^2] / E[Y]^2.
inline double rho_squared(const YLaw& law) { return law.moment(2); }

/// A paintbox: Dirichlet-type over a YLaw, or the spiked counterexample.
class Paintbox {
 public:
  using Source = std::variant<YLaw, SpikedSpec>;

  Paintbox() = default;
  Paintbox(YLaw law) : source_(std::move(law)) {}  // NOLINT: implicit
  Paintbox(SpikedSpec spec) : source_(spec) {      // NOLINT: implicit
    spec.validate();
  }

  const Source& source() const { return source_; }
  bool dirichlet_type() const { return std::holds_alternative<YLaw>(source_); }
  const YLaw* law() const { return std::get_if<YLaw>(&source_); }
  const SpikedSpec* spiked() const { return std::get_if<SpikedSpec>(&source_); }

  /// Dirichlet-type over a law with an exponential moment.
  bool conforming() const { return dirichlet_type() && law()->conforming(); }

  /// The offspring variance entering 2s/rho^2: E[Y^2] for Dirichlet-type
  /// weights, N(N-1)E[W_1^2] for the spiked paintbox.
  double reference_offspring_variance(std::uint64_t n) const {
    if (const auto* l = law()) return rho_squared(*l);
    const double nn = static_cast<double>(n);
    return nn * (nn - 1.0) * spiked()->second_moment(n);
  }

  /// A full weight vector of length n.
  template <class Rng>
  WeightVector sample(std::size_t n, Rng& rng) const {
    if (const auto* l = law()) {
      const auto y = sample_y(*l, n, rng);
      return weights_from_y(y);
    }
    return spiked_weights(n, *spiked(), rng);
  }

  /// Total weight of K consecutive index blocks whose sizes sum to n.
  ///
  /// Distributionally identical to sampling a full vector and summing each
  /// block, but costs O(K) for every family except log-normal.
  template <std::size_t K, class Rng>
  std::array<double, K> sample_block_masses(
      std::uint64_t n, const std::array<std::uint64_t, K>& sizes,
      Rng& rng) const {
    std::array<double, K> masses{};
    if (const auto* l = law()) {
      double total = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        masses[j] = l->sample_sum(sizes[j], rng);
        total += masses[j];
      }
      for (auto& m : masses) m /= total;
      return masses;
    }
    const auto& spec = *spiked();
    const double other = spec.other_weight(n);
    boost::random::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
    const std::uint64_t spike = pick(rng);
    std::uint64_t start = 0;
    for (std::size_t j = 0; j < K; ++j) {
      masses[j] = static_cast<double>(sizes[j]) * other;
      if (spike >= start && spike < start + sizes[j]) {
        masses[j] += spec.spike_weight(n) - other;
      }
      start += sizes[j];
    }
    return masses;
  }

  std::string to_string() const {
    if (const auto* l = law()) return l->to_string();
    return "spiked:" + shortest(spiked()->gamma);
  }

  static Paintbox parse(std::string_view text) {
    if (text.starts_with("spiked")) {
      if (text.size() <= 7 || text[6] != ':') {
        throw ConfigError("spiked paintbox needs an exponent, e.g. spiked:0.1");
      }
      const auto rest = text.substr(7);
      double gamma = 0.0;
      const auto [ptr, ec] =
          std::from_chars(rest.data(), rest.data() + rest.size(), gamma);
      if (ec != std::errc{} || ptr != rest.data() + rest.size()) {
        throw ConfigError("bad spiked exponent '" + std::string(rest) + "'");
      }
      return Paintbox(SpikedSpec{gamma});
    }
    return Paintbox(YLaw::parse(text));
  }

  bool operator==(const Paintbox&) const = default;

 private:
  Source source_{YLaw{}};
};

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
};

/// Monte Carlo estimate of E[W_1^p] for a Dirichlet-type paintbox.
template <class Rng>
MomentEstimate estimate_weight_moment(const YLaw& law, std::uint64_t n, int p,
                                      std::uint64_t trials, Rng& rng) {
  if (trials == 0) throw DomainError("estimate_weight_moment: trials >= 1");
  if (n < 1) throw DomainError("estimate_weight_moment: N >= 1");
  if (p < 1) throw DomainError("estimate_weight_moment: p >= 1");
  const Paintbox box(law);
  RunningStats acc;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const double w1 =
        box.sample_block_masses<2>(n, {1, n - 1}, rng)[0];
    acc.add(std::pow(w1, p));
  }
  return {acc.mean(), acc.std_error(), trials};
}

}  // namespace haldane
