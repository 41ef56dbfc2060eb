// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "haldane/analysis.hpp"
#include "haldane/branching.hpp"
#include "haldane/cannings.hpp"
#include "haldane/cli.hpp"
#include "haldane/paintbox.hpp"
#include "haldane/random.hpp"
#include "oracles.hpp"

using namespace haldane;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("Criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

CanningsConfig config(std::uint64_t n, Selection sel, Paintbox box) {
  CanningsConfig c;
  c.N = n;
  c.selection = sel;
  c.paintbox = std::move(box);
  c.x0 = 1;
  return c;
}

void exact_survival() {
  const auto gamma = extinction_q(GWModel::mixed_poisson(YLaw::gamma(1), 1.1));
  const double err1 = std::abs(gamma.phi - 1.0 / 11.0);
  const auto plain = extinction_q(GWModel::plain_poisson(1.1));
  const double ref = 1.0 - oracle::smallest_fixed_point(
                               [](double q) { return oracle::poisson_pgf(1.1, q); });
  const double err2 = std::abs(plain.phi - ref);
  report(1, err1 <= 1e-10 && err2 <= 1e-6,
         fmt("gamma phi=%.15f |err|=%.2e; poisson phi=%.12f |err|=%.2e", gamma.phi,
             err1, plain.phi, err2));
}

void gw_haldane_ratio() {
  const double s_values[] = {0.2, 0.1, 0.05, 0.01};
  std::string detail;
  double previous = 0.0;
  bool pass = true;
  for (double s : s_values) {
    const auto model = GWModel::plain_poisson(1.0 + s);
    const double ratio =
        extinction_q(model).phi * offspring_variance(model) / (2.0 * s);
    pass = pass && ratio > previous && ratio < 1.0;
    previous = ratio;
    detail += fmt("s=%g:%.9f ", s, ratio);
  }
  pass = pass && previous >= 0.99;
  report(2, pass, detail);
}

void neutral_fixation() {
  const auto est = estimate_fixation(
      config(100, Selection::coefficient(0.0), YLaw::deterministic()), 1000000, 3,
      workers(), 0.99);
  report(3, est.ci_low <= 0.01 && 0.01 <= est.ci_high,
         fmt("p_hat=%.6f 99%% CI [%.6f, %.6f]", est.p_hat, est.ci_low,
             est.ci_high));
}

std::vector<std::string> small_n_args(unsigned parallelism) {
  return {"fixation",  "--N",     "2",    "--s",        "0.5",
          "--paintbox", "deterministic", "--x0", "1", "--trials",
          "1000000",   "--seed",  "4",    "--parallelism",
          std::to_string(parallelism)};
}

cli::Json run_record(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  if (cli::run_command(args, out, err) != 0) {
    throw std::runtime_error("command failed: " + err.str());
  }
  return cli::Json::parse(out.str());
}

void small_n_oracle() {
  const auto rec = run_record(small_n_args(1));
  const double p = rec["results"]["p_hat"].get<double>();
  // Oracle: h = p^2 + 2 p (1-p) h with p = 1/(1 + (1-s)) = 2/3 gives 0.8.
  const double exact = oracle::wright_fisher_fixation(2, 0.5)[1];
  const double sigma = std::sqrt(exact * (1.0 - exact) / 1e6);
  report(4, std::abs(p - exact) <= 3.0 * sigma,
         fmt("p_hat=%.6f oracle=%.6f z=%.2f", p, exact, (p - exact) / sigma));
}

void haldane_trend() {
  const std::uint64_t sizes[] = {100, 1000, 10000};
  const double z = oracle::z99;
  std::vector<double> ratio, se;
  std::string detail;
  for (auto n : sizes) {
    const auto est = estimate_fixation(
        config(n, Selection::exponent(0.25), YLaw::gamma(1)), 200000, 5,
        workers(), 0.99);
    const double factor = est.rho2 / (2.0 * est.s);
    ratio.push_back(*est.ratio);
    se.push_back(factor * std::sqrt(est.p_hat * (1.0 - est.p_hat) /
                                    static_cast<double>(est.trials)));
    detail += fmt("N=%llu:%.4f[%.4f,%.4f] ", static_cast<unsigned long long>(n),
                  *est.ratio, *est.ratio_low(), *est.ratio_high());
  }
  bool pass = ratio.back() >= 0.8 && ratio.back() <= 1.2;
  for (std::size_t i = 0; i + 1 < ratio.size(); ++i) {
    pass = pass && std::abs(ratio[i + 1] - 1.0) <=
                       std::abs(ratio[i] - 1.0) +
                           z * std::hypot(se[i], se[i + 1]);
  }
  report(5, pass, detail);
}

void weight_moments() {
  const std::uint64_t n = 1000;
  RandomStream rng(6);
  const auto est = estimate_weight_moment(YLaw::gamma(1), n, 2, 200000, rng);
  const double scale = static_cast<double>(n) * static_cast<double>(n);
  const double m = scale * est.mean, se = scale * est.std_error;
  report(6, std::abs(m - 2.0) <= 3.0 * se,
         fmt("N^2 E[W^2]=%.5f se=%.5f (%.2f se from 2)", m, se, (m - 2.0) / se));
}

void phases() {
  const auto rep =
      phase_diagnostics(config(10000, Selection::exponent(0.25), YLaw::gamma(1)),
                        0.05, 0.1, 200000, 7, workers(), 0.99);
  report(7, rep.p2 >= 0.95 && rep.p3 >= 0.95 && rep.consistent,
         fmt("levels %llu/%llu p1=%.5f p2=%.4f p3=%.4f product=%.6f p_hat=%.6f "
             "[%.6f, %.6f]",
             static_cast<unsigned long long>(rep.level1),
             static_cast<unsigned long long>(rep.level2), rep.p1, rep.p2, rep.p3,
             rep.product, rep.p_hat, rep.p_hat_ci.low, rep.p_hat_ci.high));
}

void sandwich() {
  const std::uint64_t n = 10000;
  const double b = 0.3, delta = 0.05;
  const auto level = static_cast<std::uint64_t>(
      std::ceil(std::pow(static_cast<double>(n), b + delta)));
  const auto cfg = config(n, Selection::exponent(b), YLaw::gamma(1));
  const double s = cfg.s();
  const auto lower = GWModel::lower_bound(YLaw::gamma(1), s, n, level);
  const auto upper = GWModel::upper_bound(YLaw::gamma(1), s);
  const std::size_t samples = 100000;
  const double crit = oracle::ks_critical(0.01, samples, samples);
  bool pass = true;
  std::string detail = fmt("D_crit=%.5f ", crit);
  std::uint64_t stream = 0;
  for (std::uint64_t k : {std::uint64_t{1}, std::uint64_t{10}, level}) {
    std::vector<std::uint64_t> lo(samples), mid(samples), hi(samples);
    RandomStream r1(8, stream++), r2(8, stream++), r3(8, stream++);
    for (std::size_t i = 0; i < samples; ++i) {
      lo[i] = gw_step(lower, k, r1);
      mid[i] = step(k, cfg, r2);
      hi[i] = gw_step(upper, k, r3);
    }
    const double d_low = oracle::ks_one_sided(mid, lo);
    const double d_high = oracle::ks_one_sided(hi, mid);
    pass = pass && d_low <= crit && d_high <= crit;
    detail += fmt("k=%llu:%.5f/%.5f ", static_cast<unsigned long long>(k), d_low,
                  d_high);
  }
  report(8, pass, detail);
}

void counterexample() {
  const std::uint64_t n = 1000;
  const auto rep = counterexample_check(n, 0.1, 0.45, 1000000, 9, workers(), 0.99);
  const double low = rep.estimate.ci_low;
  report(9,
         low >= 2.0 * rep.naive_prediction && low >= 0.9 / static_cast<double>(n) &&
             rep.violation,
         fmt("p_hat=%.6f ci_low=%.6f naive=%.4e violation=%s", rep.estimate.p_hat,
             low, rep.naive_prediction, rep.violation ? "true" : "false"));
}

void determinism() {
  std::vector<std::string> dumps;
  for (unsigned p : {1u, 4u, 16u}) {
    auto rec = run_record(small_n_args(p));
    rec.erase("wall_clock_seconds");
    dumps.push_back(rec.dump());
  }
  report(10, dumps[0] == dumps[1] && dumps[0] == dumps[2],
         fmt("%zu-byte records at parallelism 1/4/16", dumps[0].size()));
}

}  // namespace

int main() {
  const std::vector<void (*)()> criteria = {
      exact_survival, gw_haldane_ratio, neutral_fixation, small_n_oracle,
      haldane_trend,  weight_moments,   phases,           sandwich,
      counterexample, determinism};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, std::string("error: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
