#pragma once

// Batch experiment front end for the `haldane` tool.
//
// Every experiment writes one record per line. A json-lines record is
//   {"command", "version", "config", "results", "wall_clock_seconds"}
// where "config" is the resolved ExperimentSpec. Worker count, output path
// and format are run options and stay out of the record, so a record depends
// only on the experiment and its seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "haldane/analysis.hpp"
#include "haldane/branching.hpp"
#include "haldane/cannings.hpp"
#include "haldane/errors.hpp"
#include "haldane/paintbox.hpp"
#include "haldane/random.hpp"
#include "haldane/version.hpp"
#include "haldane/y_law.hpp"

namespace haldane::cli {

using Json = nlohmann::ordered_json;

/// Environment variable holding the default worker count.
inline constexpr const char* kThreadsVariable = "HALDANE_THREADS";

struct ExperimentSpec {
  std::string command;
  std::optional<std::uint64_t> N;
  std::vector<std::uint64_t> N_list;
  std::optional<double> s;
  std::optional<double> b;
  std::vector<double> s_list;
  std::optional<std::string> paintbox;
  std::optional<std::uint64_t> x0;
  std::optional<std::uint64_t> max_generations;
  std::optional<double> delta;
  std::optional<double> eps;
  std::optional<double> gamma;
  std::optional<std::string> model;
  std::optional<std::string> y;
  std::optional<double> m;
  std::optional<std::uint64_t> M;
  std::optional<double> p;
  std::optional<double> beta;
  std::optional<double> tol;
  std::optional<std::string> file;
  std::optional<std::uint64_t> k;
  std::vector<int> orders;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> level;

  bool operator==(const ExperimentSpec&) const = default;
};

enum class Format { jsonl, csv };

struct RunOptions {
  unsigned parallelism = 1;
  std::optional<std::string> out;
  Format format = Format::jsonl;
};

namespace detail {

template <class T>
void put(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}
template <class T>
void put(Json& j, const char* key, const std::vector<T>& v) {
  if (!v.empty()) j[key] = v;
}

template <class T>
void get(const Json& j, const char* key, std::optional<T>& v) {
  if (const auto it = j.find(key); it != j.end()) {
    v = it->template get<T>();
  } else {
    v.reset();
  }
}
template <class T>
void get(const Json& j, const char* key, std::vector<T>& v) {
  if (const auto it = j.find(key); it != j.end()) {
    v = it->template get<std::vector<T>>();
  } else {
    v.clear();
  }
}

}  // namespace detail

inline Json to_json(const ExperimentSpec& spec) {
  using detail::put;
  Json j;
  j["command"] = spec.command;
  put(j, "N", spec.N);
  put(j, "N_list", spec.N_list);
  put(j, "s", spec.s);
  put(j, "b", spec.b);
  put(j, "s_list", spec.s_list);
  put(j, "paintbox", spec.paintbox);
  put(j, "x0", spec.x0);
  put(j, "max_generations", spec.max_generations);
  put(j, "delta", spec.delta);
  put(j, "eps", spec.eps);
  put(j, "gamma", spec.gamma);
  put(j, "model", spec.model);
  put(j, "y", spec.y);
  put(j, "m", spec.m);
  put(j, "M", spec.M);
  put(j, "p", spec.p);
  put(j, "beta", spec.beta);
  put(j, "tol", spec.tol);
  put(j, "file", spec.file);
  put(j, "k", spec.k);
  put(j, "orders", spec.orders);
  put(j, "trials", spec.trials);
  put(j, "seed", spec.seed);
  put(j, "level", spec.level);
  return j;
}

inline ExperimentSpec spec_from_json(const Json& j) {
  using detail::get;
  ExperimentSpec spec;
  try {
    spec.command = j.at("command").get<std::string>();
    get(j, "N", spec.N);
    get(j, "N_list", spec.N_list);
    get(j, "s", spec.s);
    get(j, "b", spec.b);
    get(j, "s_list", spec.s_list);
    get(j, "paintbox", spec.paintbox);
    get(j, "x0", spec.x0);
    get(j, "max_generations", spec.max_generations);
    get(j, "delta", spec.delta);
    get(j, "eps", spec.eps);
    get(j, "gamma", spec.gamma);
    get(j, "model", spec.model);
    get(j, "y", spec.y);
    get(j, "m", spec.m);
    get(j, "M", spec.M);
    get(j, "p", spec.p);
    get(j, "beta", spec.beta);
    get(j, "tol", spec.tol);
    get(j, "file", spec.file);
    get(j, "k", spec.k);
    get(j, "orders", spec.orders);
    get(j, "trials", spec.trials);
    get(j, "seed", spec.seed);
    get(j, "level", spec.level);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return spec;
}

/// CSV column order. Each cell comes from the record's results, then its
/// config, then its top level; missing keys leave the cell empty.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "command", "version", "N", "s", "b", "paintbox", "x0",
      "max_generations", "delta", "eps", "gamma", "model", "y", "m", "M", "p",
      "beta", "tol", "k", "file", "order", "trials", "seed", "level",
      "moderately_strong", "fixations", "losses", "truncated", "p_hat",
      "ci_low", "ci_high", "rho2", "haldane", "ratio", "ratio_low",
      "ratio_high", "mean_tau_fixation", "level1", "level2", "reached_level1",
      "reached_level2", "p1", "p1_ci_low", "p1_ci_high", "p2", "p2_ci_low",
      "p2_ci_high", "p3", "p3_ci_low", "p3_ci_high", "product", "consistent",
      "p1_ratio", "phi", "q", "iterations", "residual", "converged",
      "offspring_mean", "offspring_variance", "samples",
      "fixation_probability", "lower_bound", "second_moment",
      "naive_prediction", "neutral_floor", "violation", "scaled_moment",
      "std_error", "limit", "wall_clock_seconds"};
  return columns;
}

inline std::string csv_cell(const Json& v) {
  if (v.is_null() || v.is_array() || v.is_object()) return {};
  if (!v.is_string()) return v.dump();
  const auto text = v.get<std::string>();
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string quoted = "\"";
  for (const char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

inline std::string csv_header() {
  std::string line;
  for (const auto& c : csv_columns()) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line;
}

inline std::string csv_row(const Json& record) {
  std::string line;
  bool first = true;
  for (const auto& c : csv_columns()) {
    if (!first) line += ',';
    first = false;
    const Json* value = nullptr;
    for (const char* section : {"results", "config"}) {
      const auto& part = record.at(section);
      if (const auto it = part.find(c); it != part.end()) {
        value = &*it;
        break;
      }
    }
    if (!value) {
      if (const auto it = record.find(c); it != record.end()) value = &*it;
    }
    if (value) line += csv_cell(*value);
  }
  return line;
}

/// Appends records to a file or writes them to a stream, one per line.
class RecordSink {
 public:
  RecordSink(const RunOptions& options, std::ostream& fallback)
      : format_(options.format) {
    if (options.out) {
      namespace fs = std::filesystem;
      std::error_code ec;
      const bool fresh =
          !fs::exists(*options.out, ec) || fs::file_size(*options.out, ec) == 0;
      file_.open(*options.out, std::ios::app);
      if (!file_) {
        throw ConfigError("cannot open output file '" + *options.out + "'");
      }
      stream_ = &file_;
      need_header_ = fresh;
      destination_ = *options.out;
    } else {
      stream_ = &fallback;
      need_header_ = true;
      destination_ = "stdout";
    }
  }

  void write(const Json& record) {
    if (format_ == Format::csv) {
      if (need_header_) *stream_ << csv_header() << '\n';
      need_header_ = false;
      *stream_ << csv_row(record) << '\n';
    } else {
      *stream_ << record.dump() << '\n';
    }
    stream_->flush();
    ++count_;
  }

  std::size_t count() const { return count_; }
  const std::string& destination() const { return destination_; }

 private:
  Format format_;
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
  bool need_header_ = false;
  std::size_t count_ = 0;
  std::string destination_;
};

inline Json make_record(const ExperimentSpec& spec, Json results,
                        double seconds) {
  Json record;
  record["command"] = spec.command;
  record["version"] = std::string(version);
  record["config"] = to_json(spec);
  record["results"] = std::move(results);
  record["wall_clock_seconds"] = seconds;
  return record;
}

/// Fills in defaults for the fields a command uses and checks the
/// combination. Throws ConfigError.
inline ExperimentSpec resolve(ExperimentSpec spec) {
  const auto& cmd = spec.command;
  auto need = [&](bool present, const char* flag) {
    if (!present) throw ConfigError(cmd + " needs " + flag);
  };
  auto default_to = [](auto& field, auto value) {
    if (!field) field = value;
  };
  auto check_level = [&] {
    default_to(spec.level, 0.99);
    if (!(*spec.level > 0.0 && *spec.level < 1.0)) {
      throw ConfigError("--level must lie in (0, 1)");
    }
  };
  auto monte_carlo = [&](std::uint64_t trials) {
    default_to(spec.trials, trials);
    default_to(spec.seed, std::uint64_t{1});
    if (*spec.trials == 0) throw ConfigError("--trials must be >= 1");
  };
  auto selection = [&] {
    if (spec.s && spec.b) throw ConfigError("--s and --b are exclusive");
    need(spec.s || spec.b, "--s or --b");
  };
  auto canonical_paintbox = [&] {
    default_to(spec.paintbox, std::string("deterministic"));
    spec.paintbox = Paintbox::parse(*spec.paintbox).to_string();
  };

  if (cmd == "fixation" || cmd == "phases" || cmd == "sweep") {
    if (cmd == "sweep") {
      need(!spec.N_list.empty(), "--N-list");
    } else {
      need(spec.N.has_value(), "--N");
    }
    selection();
    canonical_paintbox();
    default_to(spec.x0, std::uint64_t{1});
    monte_carlo(10000);
    check_level();
    if (cmd == "phases") {
      default_to(spec.delta, 0.05);
      default_to(spec.eps, 0.1);
    }
  } else if (cmd == "counterexample") {
    need(spec.N.has_value(), "--N");
    need(spec.gamma.has_value(), "--gamma");
    need(spec.b.has_value(), "--b");
    monte_carlo(100000);
    check_level();
  } else if (cmd == "gw-survival") {
    need(spec.model.has_value(), "--model");
    const auto& model = *spec.model;
    if (model == "plain-poisson") spec.model = "poisson";
    const int rates = (spec.m ? 1 : 0) + (spec.s ? 1 : 0) +
                      (spec.s_list.empty() ? 0 : 1);
    if (rates > 1) throw ConfigError("--m, --s and --s-list are exclusive");
    if (*spec.model == "mixed-poisson" || *spec.model == "mixed-binomial") {
      need(spec.y.has_value(), "--y");
      spec.y = YLaw::parse(*spec.y).to_string();
      need(rates == 1, "one of --m, --s, --s-list");
      if (*spec.model == "mixed-binomial") {
        need(spec.M.has_value(), "--M");
        need(spec.N.has_value(), "--N");
      }
    } else if (*spec.model == "poisson") {
      need(rates == 1, "one of --m, --s, --s-list");
    } else if (*spec.model == "two-point-immortal") {
      if (spec.m) throw ConfigError("two-point-immortal takes --s, not --m");
      need(rates == 1, "--s or --s-list");
      default_to(spec.beta, 1.0);
    } else if (*spec.model == "binary") {
      if (rates > 0) throw ConfigError("binary takes --p only");
      need(spec.p.has_value(), "--p");
    } else {
      throw ConfigError("unknown model '" + model + "'");
    }
    default_to(spec.tol, 1e-12);
    if (!(*spec.tol > 0.0)) throw ConfigError("--tol must be > 0");
  } else if (cmd == "duality") {
    need(spec.N.has_value(), "--N");
    need(spec.k.has_value(), "--k");
    need(spec.file.has_value(), "--file");
    if (*spec.k > *spec.N) throw ConfigError("--k must lie in [0, N]");
    if (spec.eps && !(*spec.eps > 0.0 && *spec.eps < 1.0)) {
      throw ConfigError("--eps must lie in (0, 1)");
    }
  } else if (cmd == "moments") {
    if (spec.N && !spec.N_list.empty()) {
      throw ConfigError("--N and --N-list are exclusive");
    }
    need(spec.N || !spec.N_list.empty(), "--N or --N-list");
    canonical_paintbox();
    if (!Paintbox::parse(*spec.paintbox).dirichlet_type()) {
      throw ConfigError("moments needs a Dirichlet-type paintbox");
    }
    if (spec.orders.empty()) spec.orders = {2};
    for (const int p : spec.orders) {
      if (p < 1) throw ConfigError("--order values must be >= 1");
    }
    monte_carlo(100000);
  } else {
    throw ConfigError("unknown command '" + cmd + "'");
  }
  return spec;
}

inline CanningsConfig cannings_config(const ExperimentSpec& spec,
                                      std::uint64_t n) {
  CanningsConfig config;
  config.N = n;
  config.selection = spec.b ? Selection::exponent(*spec.b)
                            : Selection::coefficient(spec.s.value_or(0.0));
  config.paintbox = Paintbox::parse(spec.paintbox.value_or("deterministic"));
  config.x0 = spec.x0.value_or(1);
  config.max_generations = spec.max_generations;
  config.validate();
  return config;
}

namespace detail {

inline void put_selection(Json& r, const CanningsConfig& config) {
  r["N"] = config.N;
  r["s"] = config.s();
  if (const double b = config.b(); std::isfinite(b)) r["b"] = b;
  r["moderately_strong"] = config.moderately_strong();
}

inline Json fixation_results(const CanningsConfig& config,
                             const FixationEstimate& est) {
  Json r;
  put_selection(r, config);
  r["trials"] = est.trials;
  r["fixations"] = est.fixations;
  r["losses"] = est.losses;
  r["truncated"] = est.truncated;
  r["p_hat"] = est.p_hat;
  r["ci_low"] = est.ci_low;
  r["ci_high"] = est.ci_high;
  r["rho2"] = est.rho2;
  r["haldane"] = est.haldane;
  if (est.ratio) {
    r["ratio"] = *est.ratio;
    r["ratio_low"] = *est.ratio_low();
    r["ratio_high"] = *est.ratio_high();
  }
  if (est.mean_tau_fixation) r["mean_tau_fixation"] = *est.mean_tau_fixation;
  return r;
}

inline Json phase_results(const CanningsConfig& config, const PhaseReport& rep) {
  Json r;
  put_selection(r, config);
  r["trials"] = rep.trials;
  r["level1"] = rep.level1;
  r["level2"] = rep.level2;
  r["reached_level1"] = rep.reached_level1;
  r["reached_level2"] = rep.reached_level2;
  r["fixations"] = rep.fixations;
  auto phase = [&](const char* name, double value, const Interval& ci) {
    r[name] = value;
    r[std::string(name) + "_ci_low"] = ci.low;
    r[std::string(name) + "_ci_high"] = ci.high;
  };
  phase("p1", rep.p1, rep.p1_ci);
  phase("p2", rep.p2, rep.p2_ci);
  phase("p3", rep.p3, rep.p3_ci);
  r["p_hat"] = rep.p_hat;
  r["ci_low"] = rep.p_hat_ci.low;
  r["ci_high"] = rep.p_hat_ci.high;
  r["product"] = rep.product;
  r["consistent"] = rep.consistent;
  r["rho2"] = rep.rho2;
  r["haldane"] = rep.haldane;
  if (rep.p1_ratio) r["p1_ratio"] = *rep.p1_ratio;
  return r;
}

inline GWModel gw_model(const ExperimentSpec& spec, std::optional<double> s) {
  const auto& name = *spec.model;
  const double m = spec.m ? *spec.m : 1.0 + s.value_or(0.0);
  if (name == "mixed-poisson") return GWModel::mixed_poisson(YLaw::parse(*spec.y), m);
  if (name == "mixed-binomial") {
    return GWModel::mixed_binomial(YLaw::parse(*spec.y), *spec.M, m, *spec.N);
  }
  if (name == "poisson") return GWModel::plain_poisson(m);
  if (name == "two-point-immortal") {
    return GWModel::two_point_immortal_from_selection(*s, *spec.beta);
  }
  return GWModel::binary(*spec.p);
}

inline Json gw_results(const GWModel& model, std::optional<double> s,
                       double tol) {
  Json r;
  if (s) r["s"] = *s;
  const auto sol = extinction_q(model, tol);
  r["phi"] = sol.phi;
  r["q"] = sol.q;
  r["iterations"] = sol.iterations;
  r["residual"] = sol.residual;
  r["converged"] = sol.converged;
  const double mean = offspring_mean(model);
  const double var = offspring_variance(model);
  r["offspring_mean"] = mean;
  r["offspring_variance"] = var;
  const double excess = std::max(mean - 1.0, 0.0);
  if (var > 0.0) {
    r["haldane"] = haldane_ref(excess, var);
    if (excess > 0.0) r["ratio"] = sol.phi * var / (2.0 * excess);
  }
  return r;
}

}  // namespace detail

/// Runs a resolved experiment, handing each record to `emit`.
inline void execute(const ExperimentSpec& spec, const RunOptions& options,
                    const std::function<void(const Json&)>& emit) {
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  const auto& cmd = spec.command;
  const unsigned workers = options.parallelism;

  if (cmd == "fixation" || cmd == "sweep") {
    std::vector<std::uint64_t> sizes = spec.N_list;
    if (cmd == "fixation") sizes = {*spec.N};
    std::vector<CanningsConfig> configs;
    for (const auto n : sizes) configs.push_back(cannings_config(spec, n));
    for (const auto& config : configs) {
      const auto t0 = Clock::now();
      const auto est = estimate_fixation(config, *spec.trials, *spec.seed,
                                         workers, *spec.level);
      emit(make_record(spec, detail::fixation_results(config, est),
                       seconds_since(t0)));
    }
  } else if (cmd == "phases") {
    const auto config = cannings_config(spec, *spec.N);
    const auto t0 = Clock::now();
    const auto rep = phase_diagnostics(config, *spec.delta, *spec.eps,
                                       *spec.trials, *spec.seed, workers,
                                       *spec.level);
    emit(make_record(spec, detail::phase_results(config, rep),
                     seconds_since(t0)));
  } else if (cmd == "counterexample") {
    const auto t0 = Clock::now();
    const auto rep =
        counterexample_check(*spec.N, *spec.gamma, *spec.b, *spec.trials,
                             *spec.seed, workers, *spec.level);
    Json r;
    r["N"] = *spec.N;
    r["s"] = rep.s;
    r["trials"] = rep.estimate.trials;
    r["fixations"] = rep.estimate.fixations;
    r["p_hat"] = rep.estimate.p_hat;
    r["ci_low"] = rep.estimate.ci_low;
    r["ci_high"] = rep.estimate.ci_high;
    r["rho2"] = rep.estimate.rho2;
    r["haldane"] = rep.estimate.haldane;
    r["second_moment"] = rep.second_moment;
    r["naive_prediction"] = rep.naive_prediction;
    r["neutral_floor"] = rep.neutral_floor;
    r["violation"] = rep.violation;
    emit(make_record(spec, std::move(r), seconds_since(t0)));
  } else if (cmd == "gw-survival") {
    std::vector<std::optional<double>> rates;
    if (!spec.s_list.empty()) {
      for (const double s : spec.s_list) rates.emplace_back(s);
    } else {
      rates.push_back(spec.s);
    }
    std::vector<GWModel> models;
    for (const auto& s : rates) models.push_back(detail::gw_model(spec, s));
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto t0 = Clock::now();
      auto r = detail::gw_results(models[i], rates[i], *spec.tol);
      emit(make_record(spec, std::move(r), seconds_since(t0)));
    }
  } else if (cmd == "duality") {
    const auto t0 = Clock::now();
    const auto samples = read_aeq_samples(*spec.file);
    Json r;
    r["N"] = *spec.N;
    r["k"] = *spec.k;
    r["samples"] = samples.size();
    r["fixation_probability"] = duality_fixation(*spec.N, *spec.k, samples);
    if (spec.eps) r["lower_bound"] = duality_lower_bound(*spec.eps, samples);
    emit(make_record(spec, std::move(r), seconds_since(t0)));
  } else if (cmd == "moments") {
    std::vector<std::uint64_t> sizes = spec.N_list;
    if (spec.N) sizes = {*spec.N};
    const YLaw law = *Paintbox::parse(*spec.paintbox).law();
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const auto n = sizes[i];
      if (n < 1) throw ConfigError("--N must be >= 1");
      for (const int order : spec.orders) {
        const auto t0 = Clock::now();
        RandomStream rng(*spec.seed, i, static_cast<std::uint64_t>(order));
        const auto est =
            estimate_weight_moment(law, n, order, *spec.trials, rng);
        const double scale = std::pow(static_cast<double>(n), order);
        Json r;
        r["N"] = n;
        r["order"] = order;
        r["trials"] = est.trials;
        r["scaled_moment"] = scale * est.mean;
        r["std_error"] = scale * est.std_error;
        if (law.conforming()) r["limit"] = law.moment(order);
        emit(make_record(spec, std::move(r), seconds_since(t0)));
      }
    }
  }
}

inline unsigned default_parallelism() {
  const char* env = std::getenv(kThreadsVariable);
  if (!env || !*env) return std::max(1u, std::thread::hardware_concurrency());
  unsigned value = 0;
  const std::string_view text(env);
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(std::string(kThreadsVariable) +
                      " must be a nonnegative integer");
  }
  return value == 0 ? std::max(1u, std::thread::hardware_concurrency())
                    : value;
}

/// Entry point of the tool. `args` excludes the program name.
/// Returns 0 on success, 2 on a configuration error, 1 on a runtime failure.
inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Fixation experiments for Cannings models with selection",
               "haldane"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));

  ExperimentSpec spec;
  std::optional<unsigned> parallelism;
  std::optional<std::string> out_path;
  std::string format = "jsonl";

  auto run_flags = [&](CLI::App* sub) {
    sub->add_option("--parallelism", parallelism,
                    "Worker threads (default: $HALDANE_THREADS or all cores)");
    sub->add_option("--out", out_path, "Append records to this file");
    sub->add_option("--format", format, "Record format")
        ->check(CLI::IsMember({"jsonl", "csv"}));
  };
  auto monte_carlo = [&](CLI::App* sub) {
    sub->add_option("--trials", spec.trials, "Independent trials");
    sub->add_option("--seed", spec.seed, "Base seed");
  };
  auto level_flag = [&](CLI::App* sub) {
    sub->add_option("--level", spec.level, "Confidence level (default 0.99)");
  };
  auto cannings = [&](CLI::App* sub, bool sweep) {
    if (sweep) {
      sub->add_option("--N-list", spec.N_list, "Population sizes")
          ->delimiter(',');
    } else {
      sub->add_option("--N", spec.N, "Population size");
    }
    auto* s = sub->add_option("--s", spec.s, "Selection coefficient");
    auto* b = sub->add_option("--b", spec.b, "Selection exponent, s = N^-b");
    s->excludes(b);
    sub->add_option("--paintbox", spec.paintbox,
                    "deterministic | gamma:k | two-point:lo,hi,p | "
                    "lognormal:mu,sigma | spiked:gamma");
    sub->add_option("--x0", spec.x0, "Initial beneficial count");
    sub->add_option("--max-generations", spec.max_generations,
                    "Truncate runs after this many generations");
    monte_carlo(sub);
    level_flag(sub);
    run_flags(sub);
  };

  auto* fixation = app.add_subcommand("fixation", "Estimate fixation probability");
  cannings(fixation, false);

  auto* phases = app.add_subcommand("phases", "Three-phase growth diagnostics");
  cannings(phases, false);
  phases->add_option("--delta", spec.delta, "Level offset (default 0.05)");
  phases->add_option("--eps", spec.eps, "Fraction for the second level (default 0.1)");

  auto* sweep = app.add_subcommand("sweep", "Fixation across population sizes");
  cannings(sweep, true);

  auto* counter = app.add_subcommand(
      "counterexample", "Fixation under the spiked paintbox");
  counter->add_option("--N", spec.N, "Population size");
  counter->add_option("--gamma", spec.gamma, "Spike exponent");
  counter->add_option("--b", spec.b, "Selection exponent");
  monte_carlo(counter);
  level_flag(counter);
  run_flags(counter);

  auto* gw = app.add_subcommand("gw-survival",
                                "Galton-Watson survival probability");
  gw->add_option("--model", spec.model,
                 "mixed-poisson | mixed-binomial | poisson | "
                 "two-point-immortal | binary");
  gw->add_option("--y", spec.y, "Y law of mixed models");
  gw->add_option("--m", spec.m, "Mean factor");
  gw->add_option("--s", spec.s, "Selection coefficient, m = 1 + s");
  gw->add_option("--s-list", spec.s_list, "Selection coefficients")
      ->delimiter(',');
  gw->add_option("--M", spec.M, "Binomial trial count");
  gw->add_option("--N", spec.N, "Binomial scale");
  gw->add_option("--p", spec.p, "Binary branching probability");
  gw->add_option("--beta", spec.beta, "Immortal bound factor (default 1)");
  gw->add_option("--tol", spec.tol, "Fixed-point tolerance (default 1e-12)");
  run_flags(gw);

  auto* duality = app.add_subcommand("duality",
                                     "Fixation from A_eq samples");
  duality->add_option("--N", spec.N, "Population size");
  duality->add_option("--k", spec.k, "Beneficial count");
  duality->add_option("--file", spec.file, "A_eq samples, one per line");
  duality->add_option("--eps", spec.eps, "Also report 1 - E[(1-eps)^A]");
  run_flags(duality);

  auto* moments = app.add_subcommand("moments", "Paintbox weight moments");
  auto* moments_n = moments->add_option("--N", spec.N, "Population size");
  auto* moments_list =
      moments->add_option("--N-list", spec.N_list, "Population sizes")
          ->delimiter(',');
  moments_n->excludes(moments_list);
  moments->add_option("--paintbox", spec.paintbox, "Dirichlet-type paintbox");
  moments->add_option("--order", spec.orders, "Moment orders (default 2)")
      ->delimiter(',');
  monte_carlo(moments);
  run_flags(moments);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "haldane: " << e.what() << '\n';
    return 2;
  }

  for (const auto* sub : app.get_subcommands()) spec.command = sub->get_name();

  try {
    spec = resolve(std::move(spec));
    RunOptions options;
    options.parallelism = parallelism ? *parallelism : default_parallelism();
    if (options.parallelism == 0) {
      options.parallelism = std::max(1u, std::thread::hardware_concurrency());
    }
    options.out = out_path;
    options.format = format == "csv" ? Format::csv : Format::jsonl;

    RecordSink sink(options, out);
    const auto t0 = std::chrono::steady_clock::now();
    execute(spec, options,
            [&](const Json& record) { sink.write(record); });
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    err << spec.command << ": " << sink.count() << " record(s) to "
        << sink.destination() << " in " << secs << " s\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "haldane: " << e.what() << '\n';
    return 2;
  } catch (const UnsupportedLawError& e) {
    err << "haldane: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "haldane: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace haldane::cli
