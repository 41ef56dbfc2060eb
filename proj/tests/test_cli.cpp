#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "haldane/cli.hpp"

using namespace haldane::cli;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<Json> records(const std::string& text) {
  std::vector<Json> list;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) list.push_back(Json::parse(line));
  }
  return list;
}

std::string without_clock(Json record) {
  record.erase("wall_clock_seconds");
  return record.dump();
}

std::filesystem::path temp_file(const std::string& name) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(path);
  return path;
}

}  // namespace

TEST(Cli, NeutralFixationRecord) {
  const auto r = run({"fixation", "--N", "100", "--s", "0", "--paintbox",
                      "deterministic", "--x0", "1", "--trials", "1000", "--seed",
                      "7", "--parallelism", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = records(r.out);
  ASSERT_EQ(recs.size(), 1u);
  const auto& rec = recs[0];
  EXPECT_EQ(rec["command"], "fixation");
  EXPECT_EQ(rec["version"], std::string(haldane::version));
  EXPECT_EQ(rec["results"]["haldane"], 0.0);
  EXPECT_FALSE(rec["results"].contains("ratio"));
  EXPECT_EQ(rec["config"]["seed"], 7);
  EXPECT_EQ(rec["config"]["trials"], 1000);
  EXPECT_TRUE(rec["wall_clock_seconds"].is_number());
  EXPECT_EQ(rec.items().begin().key(), "command");
  EXPECT_EQ(std::prev(rec.end()).key(), "wall_clock_seconds");
  EXPECT_NE(r.err.find("fixation"), std::string::npos);
}

TEST(Cli, ExclusiveSelectionFlags) {
  const auto r = run({"fixation", "--N", "100", "--s", "0.5", "--b", "0.3"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, ConfigurationErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100"}).code, 2);            // no s or b
  EXPECT_EQ(run({"fixation", "--s", "0.1"}).code, 2);            // no N
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "0.1", "--paintbox", "beta"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "1.5"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "0.1", "--x0", "101"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "0.1", "--unknown"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "0.1", "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"fixation", "--N", "100", "--s", "0.1", "--level", "1.2"}).code, 2);
  EXPECT_EQ(run({"phases", "--N", "10000", "--b", "0.48"}).code, 2);
  EXPECT_EQ(run({"counterexample", "--N", "1000", "--gamma", "0.3", "--b", "0.45"}).code, 2);
  EXPECT_EQ(run({"gw-survival", "--model", "mixed-poisson", "--m", "1.1"}).code, 2);
  EXPECT_EQ(run({"gw-survival", "--model", "poisson", "--m", "1.1", "--s", "0.1"}).code, 2);
  EXPECT_EQ(run({"gw-survival", "--model", "mixed-poisson", "--y", "lognormal:0,1",
                 "--m", "1.1"}).code, 2);
  EXPECT_EQ(run({"sweep", "--b", "0.25"}).code, 2);
  EXPECT_EQ(run({"moments", "--N", "10", "--paintbox", "spiked:0.1"}).code, 2);
  EXPECT_EQ(run({"duality", "--N", "10", "--k", "1", "--file", "/nonexistent"}).code, 2);
}

TEST(Cli, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(haldane::version) + "\n");
}

TEST(Cli, GwSurvivalRecord) {
  const auto r = run({"gw-survival", "--model", "mixed-poisson", "--y", "gamma:1",
                      "--m", "1.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = records(r.out).at(0);
  EXPECT_NEAR(rec["results"]["phi"].get<double>(), 1.0 / 11.0, 1e-10);
  EXPECT_NEAR(rec["results"]["haldane"].get<double>(), 0.0865801, 1e-7);
  EXPECT_NEAR(rec["results"]["offspring_variance"].get<double>(), 2.31, 1e-12);
}

TEST(Cli, GwSurvivalTable) {
  const auto r = run({"gw-survival", "--model", "poisson", "--s-list",
                      "0.2,0.1,0.05,0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = records(r.out);
  ASSERT_EQ(recs.size(), 4u);
  double previous = 0.0;
  for (const auto& rec : recs) {
    const double ratio = rec["results"]["ratio"].get<double>();
    EXPECT_GT(ratio, previous);
    previous = ratio;
  }
  for (const char* model : {"two-point-immortal", "plain-poisson"}) {
    EXPECT_EQ(run({"gw-survival", "--model", model, "--s", "0.1"}).code, 0) << model;
  }
  EXPECT_EQ(run({"gw-survival", "--model", "binary", "--p", "0.6"}).code, 0);
  EXPECT_EQ(run({"gw-survival", "--model", "mixed-binomial", "--y", "gamma:1",
                 "--M", "990", "--N", "1000", "--s", "0.1"}).code, 0);
}

TEST(Cli, ByteIdenticalAcrossParallelism) {
  std::vector<std::string> seen;
  for (const char* p : {"1", "4", "16"}) {
    const auto r = run({"fixation", "--N", "50", "--s", "0.1", "--paintbox",
                        "gamma:1", "--trials", "3000", "--seed", "5",
                        "--parallelism", p});
    ASSERT_EQ(r.code, 0);
    seen.push_back(without_clock(records(r.out).at(0)));
  }
  EXPECT_EQ(seen[0], seen[1]);
  EXPECT_EQ(seen[0], seen[2]);
}

TEST(Cli, ParallelismFromEnvironment) {
  ::setenv(kThreadsVariable, "3", 1);
  EXPECT_EQ(default_parallelism(), 3u);
  ::setenv(kThreadsVariable, "lots", 1);
  EXPECT_THROW(default_parallelism(), haldane::ConfigError);
  EXPECT_EQ(run({"fixation", "--N", "10", "--s", "0.1", "--trials", "10"}).code, 2);
  ::unsetenv(kThreadsVariable);
  EXPECT_GE(default_parallelism(), 1u);
}

TEST(Cli, ConfigRoundTrip) {
  const std::vector<std::vector<std::string>> argvs = {
      {"fixation", "--N", "100", "--b", "0.3", "--paintbox", "two-point:0.5,1.5,0.5",
       "--trials", "200", "--max-generations", "100000"},
      {"phases", "--N", "2000", "--b", "0.25", "--paintbox", "dirichlet", "--trials",
       "200", "--delta", "0.1"},
      {"sweep", "--N-list", "50,100", "--b", "0.25", "--trials", "100"},
      {"counterexample", "--N", "200", "--gamma", "0.1", "--b", "0.45", "--trials",
       "100"},
      {"gw-survival", "--model", "mixed-poisson", "--y", "wright-fisher", "--s-list",
       "0.1,0.2"},
      {"moments", "--N-list", "10,100", "--paintbox", "gamma:2", "--order", "2,3",
       "--trials", "100"},
  };
  for (const auto& argv : argvs) {
    const auto r = run(argv);
    ASSERT_EQ(r.code, 0) << argv[0] << ": " << r.err;
    for (const auto& rec : records(r.out)) {
      const auto spec = spec_from_json(rec["config"]);
      EXPECT_EQ(to_json(spec).dump(), rec["config"].dump()) << argv[0];
      EXPECT_EQ(resolve(spec), spec) << argv[0];
    }
  }
}

TEST(Cli, SweepResolvesSelectionPerPoint) {
  const auto r = run({"sweep", "--N-list", "100,10000", "--b", "0.25", "--paintbox",
                      "gamma:1", "--trials", "500"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = records(r.out);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["results"]["N"], 100);
  EXPECT_NEAR(recs[0]["results"]["s"].get<double>(), std::pow(100.0, -0.25), 1e-15);
  EXPECT_NEAR(recs[1]["results"]["s"].get<double>(), 0.1, 1e-15);
}

TEST(Cli, MomentsTable) {
  const auto r = run({"moments", "--N", "1000", "--paintbox", "gamma:1", "--order",
                      "2,3", "--trials", "20000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = records(r.out);
  ASSERT_EQ(recs.size(), 2u);
  const auto& m2 = recs[0]["results"];
  EXPECT_EQ(m2["order"], 2);
  EXPECT_NEAR(m2["scaled_moment"].get<double>(), 2.0,
              4.0 * m2["std_error"].get<double>());
  EXPECT_EQ(recs[1]["results"]["limit"], 6.0);
}

TEST(Cli, DualityFromFile) {
  const auto path = temp_file("haldane_aeq_test.txt");
  std::ofstream(path) << "2\n2\n";
  const auto r = run({"duality", "--N", "4", "--k", "2", "--file", path.string(),
                      "--eps", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = records(r.out).at(0);
  EXPECT_NEAR(rec["results"]["fixation_probability"].get<double>(), 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(rec["results"]["lower_bound"].get<double>(), 0.75, 1e-15);
  EXPECT_EQ(rec["results"]["samples"], 2);

  std::ofstream(path) << "2\n9\n";
  EXPECT_EQ(run({"duality", "--N", "4", "--k", "2", "--file", path.string()}).code, 1);
  std::filesystem::remove(path);
}

TEST(Cli, AppendsCsvWithSingleHeader) {
  const auto path = temp_file("haldane_cli_test.csv");
  for (int i = 0; i < 2; ++i) {
    const auto r = run({"fixation", "--N", "30", "--s", "0.1", "--trials", "100",
                        "--format", "csv", "--out", path.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
  }
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], csv_header());
  const auto cells = [](const std::string& line) {
    return std::count(line.begin(), line.end(), ',');
  };
  EXPECT_EQ(cells(lines[1]), cells(lines[0]));
  EXPECT_EQ(lines[1].substr(0, 15), "fixation,0.1.0,");
  std::filesystem::remove(path);
}

TEST(Cli, CsvQuoting) {
  EXPECT_EQ(csv_cell(Json("a,b")), "\"a,b\"");
  EXPECT_EQ(csv_cell(Json("say \"hi\"")), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_cell(Json(nullptr)), "");
  EXPECT_EQ(csv_cell(Json(true)), "true");
  EXPECT_EQ(csv_cell(Json(0.5)), "0.5");
}

TEST(Cli, JsonlAppendsToFile) {
  const auto path = temp_file("haldane_cli_test.jsonl");
  for (int i = 0; i < 2; ++i) {
    ASSERT_EQ(run({"gw-survival", "--model", "binary", "--p", "0.6", "--out",
                   path.string()}).code, 0);
  }
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(records(text.str()).size(), 2u);
  std::filesystem::remove(path);
}
