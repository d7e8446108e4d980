#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mixfda_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MIXFDA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

json sim_block(int subjects) { return {{"subjects", subjects}, {"heldout", 4}}; }

// Simulates a small dataset on disk and returns a data-driven config for it.
json fixture_config(const fs::path& dir, int subjects, int n_iter) {
  write(dir / "sim.json", {{"spec_version", 1}, {"seed", 3}, {"simulation", sim_block(subjects)}});
  EXPECT_EQ(run("simulate --config " + (dir / "sim.json").string() + " --out " + (dir / "sim").string()), 0);
  return {{"spec_version", 1},
          {"seed", 11},
          {"data", {{"path", (dir / "sim" / "data.csv").string()}, {"domain", {0, 1}}}},
          {"responses", {{{"id", 1}, {"kind", "gaussian"}}, {{"id", 2}, {"kind", "binary"}}}},
          {"model",
           {{"random_effects", {{"mode", "predetermined"}, {"basis", {{"family", "bspline"}, {"order", 4}, {"breaks", 2}}}}},
            {"sigma_prior", "diagonal"}}},
          {"chain", {{"n_iter", n_iter}, {"burn_in", n_iter / 4}}}};
}

}  // namespace

TEST(Cli, MissingDatasetIsConfigExit) {
  const auto dir = scratch("missing");
  write(dir / "run.json", {{"spec_version", 1},
                           {"data", {{"path", "nope.csv"}, {"domain", {0, 1}}}},
                           {"responses", {{{"id", 1}, {"kind", "gaussian"}}}}});
  EXPECT_EQ(run("fit --config " + (dir / "run.json").string() + " --out " + (dir / "out").string()), 2);
  EXPECT_EQ(run("fit --config " + (dir / "absent.json").string()), 2);
  EXPECT_EQ(run("bogus --config x"), 2);
  EXPECT_EQ(run("fit"), 2);
}

TEST(Cli, FullSigmaPriorWithTooFewSubjectsIsConfigExit) {
  const auto dir = scratch("few");
  json cfg = fixture_config(dir, 5, 50);
  cfg["model"].erase("sigma_prior");
  write(dir / "run.json", cfg);
  EXPECT_EQ(run("fit --config " + (dir / "run.json").string() + " --out " + (dir / "out").string()), 2);
}

TEST(Cli, InvalidConfigIsConfigExit) {
  const auto dir = scratch("invalid");
  write(dir / "run.json", {{"spec_version", 1}, {"simulation", sim_block(5)}, {"chain", {{"thin", 0}}}});
  EXPECT_EQ(run("fit --config " + (dir / "run.json").string() + " --out " + (dir / "out").string()), 2);
}

TEST(Cli, FitWritesParsableArtifacts) {
  const auto dir = scratch("fit");
  write(dir / "run.json", fixture_config(dir, 5, 200));
  ASSERT_EQ(run("fit --config " + (dir / "run.json").string() + " --out " + (dir / "out").string()), 0);

  const auto draws = read_csv(dir / "out" / "draws.csv");
  ASSERT_EQ(draws.size(), 1u + 150u);
  EXPECT_EQ(draws[0][0], "iteration");
  EXPECT_EQ(draws[1][0], "50");

  const auto summary = read_csv(dir / "out" / "summary.csv");
  ASSERT_EQ(summary.size(), 1u + 2u * 101u);
  EXPECT_EQ(summary[0], (std::vector<std::string>{"response_id", "t", "mean", "variance", "median", "lower", "upper"}));
  for (std::size_t r = 1; r < summary.size(); ++r) {
    const double lo = std::stod(summary[r][5]), md = std::stod(summary[r][4]), hi = std::stod(summary[r][6]);
    EXPECT_LE(lo, md);
    EXPECT_LE(md, hi);
  }

  const json dic = json::parse(slurp(dir / "out" / "dic.json"));
  for (const char* key : {"DIC", "Dbar", "D_at_mean", "pD"}) EXPECT_TRUE(dic[key].is_number()) << key;
  EXPECT_NEAR(dic["DIC"].get<double>(), dic["Dbar"].get<double>() + dic["pD"].get<double>(), 1e-8);
  const json manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "fit");
  EXPECT_EQ(manifest["seed"], 11);
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, DeterministicDrawsAcrossRunsThreadsAndManifest) {
  const auto dir = scratch("determinism");
  write(dir / "run.json", fixture_config(dir, 6, 120));
  const std::string cfg = (dir / "run.json").string();
  ASSERT_EQ(run("fit --config " + cfg + " --out " + (dir / "a").string() + " --threads 1"), 0);
  ASSERT_EQ(run("fit --config " + cfg + " --out " + (dir / "b").string() + " --threads 3"), 0);
  ASSERT_EQ(run("fit --config " + (dir / "a" / "manifest.json").string() + " --out " + (dir / "c").string()), 0);
  const std::string a = slurp(dir / "a" / "draws.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "draws.csv"));
  EXPECT_EQ(a, slurp(dir / "c" / "draws.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "c" / "summary.csv"));

  ASSERT_EQ(run("fit --config " + cfg + " --out " + (dir / "d").string() + " --seed 12"), 0);
  EXPECT_NE(a, slurp(dir / "d" / "draws.csv"));
}

TEST(Cli, CovWritesFourBlocks) {
  const auto dir = scratch("cov");
  write(dir / "run.json", {{"spec_version", 1}, {"seed", 4}, {"simulation", sim_block(60)}});
  ASSERT_EQ(run("cov --config " + (dir / "run.json").string() + " --out " + dir.string()), 0);
  for (const char* name : {"cov_1_1.csv", "cov_1_2.csv", "cov_2_1.csv", "cov_2_2.csv"}) {
    const auto rows = read_csv(dir / name);
    ASSERT_EQ(rows.size(), 102u) << name;
    EXPECT_EQ(rows[0][0], "t");
    for (const auto& r : rows) EXPECT_EQ(r.size(), 102u) << name;
  }
}

TEST(Cli, FpcaCumulativeCrossesAtSelectedCount) {
  const auto dir = scratch("fpca");
  write(dir / "run.json", {{"spec_version", 1},
                           {"seed", 5},
                           {"simulation", sim_block(80)},
                           {"model", {{"random_effects", {{"mode", "fpca"}, {"P1", 0.99}}}}}});
  ASSERT_EQ(run("fpca --config " + (dir / "run.json").string() + " --out " + dir.string()), 0);
  const json info = json::parse(slurp(dir / "fpca.json"));
  const int M = info["components"][0].get<int>();
  const auto rows = read_csv(dir / "eigenvalues.csv");
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"k", "eigenvalue", "proportion", "cumulative"}));
  int first = 0;
  for (std::size_t r = 1; r < rows.size() && first == 0; ++r)
    if (std::stod(rows[r][3]) >= 0.99) first = std::stoi(rows[r][0]);
  EXPECT_EQ(first, M);
  const auto ef = read_csv(dir / "eigenfunctions.csv");
  // All positive eigenfunctions are written; the first M are the retained ones.
  EXPECT_EQ(ef[0].size(), 2u + info["positive_eigenvalues"][0].get<std::size_t>());
  EXPECT_EQ(rows.size(), 1u + info["positive_eigenvalues"][0].get<std::size_t>());
  EXPECT_EQ(ef.size(), 1u + 2u * 101u);
}

TEST(Cli, StudyOneRepTableLayout) {
  const auto dir = scratch("study");
  write(dir / "run.json", {{"spec_version", 1},
                           {"seed", 6},
                           {"simulation", {{"subjects", 25}, {"heldout", 4}}},
                           {"chain", {{"n_iter", 60}, {"burn_in", 20}}},
                           {"prediction", {{"refinement_sweeps", 2}}},
                           {"study", {{"reps", 1}}}});
  ASSERT_EQ(run("study --config " + (dir / "run.json").string() + " --out " + dir.string()), 0);
  const auto rows = read_csv(dir / "study.csv");
  ASSERT_EQ(rows.size(), 1u + 4u * 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"model", "response", "mise", "mise_hundredths", "coverage_percent",
                                               "ci_length", "ci_length_hundredths", "mspe", "mspe_hundredths",
                                               "replications", "failures"}));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_EQ(rows[r][9], "1");
    EXPECT_EQ(rows[r][10], "0");
  }
  EXPECT_TRUE(json::parse(slurp(dir / "study.json")).is_object() || json::parse(slurp(dir / "study.json")).is_array());
}

TEST(Cli, SimulateThenPredictFromStoredDraws) {
  const auto dir = scratch("predict");
  json cfg = fixture_config(dir, 8, 100);
  cfg["prediction"] = {{"heldout", (dir / "sim" / "heldout_observed.csv").string()},
                       {"targets", (dir / "sim" / "heldout_targets.csv").string()},
                       {"refinement_sweeps", 2}};
  write(dir / "fit.json", cfg);
  ASSERT_EQ(run("fit --config " + (dir / "fit.json").string() + " --out " + (dir / "fit").string()), 0);
  cfg["prediction"]["draws"] = (dir / "fit" / "draws.csv").string();
  write(dir / "predict.json", cfg);
  ASSERT_EQ(run("predict --config " + (dir / "predict.json").string() + " --out " + (dir / "pred").string()), 0);
  const auto rows = read_csv(dir / "pred" / "predictions.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"subject_id", "response_id", "t", "prediction", "lower", "upper"}));
  const auto targets = read_csv(dir / "sim" / "heldout_targets.csv");
  EXPECT_EQ(rows.size(), targets.size());
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r][1] == "2") {
      EXPECT_GE(std::stod(rows[r][3]), 0.0);
      EXPECT_LE(std::stod(rows[r][3]), 1.0);
    }
  ASSERT_EQ(run("metrics --config " + (dir / "fit.json").string() + " --out " + (dir / "metrics").string()), 0);
  const json m = json::parse(slurp(dir / "metrics" / "metrics.json"));
  EXPECT_EQ(m["mspe"].size(), 2u);
}
