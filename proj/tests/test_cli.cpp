#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = DCCFR_CLI_PATH;

fs::path work_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("dccfr_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small training setup so the end-to-end tests stay fast.
fs::path tiny_config(const fs::path& dir) {
  const auto p = dir / "tiny.json";
  std::ofstream(p) << R"({"episode": {"steps": 96}, "ppo": {"rollout_len": 96, "minibatch": 32, "hidden": [8]}})";
  return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("synth --days 0 --out " + work_dir("bad").string()), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("train --combo XYZ --days 7 --iterations 1 --out " + work_dir("badcombo").string()), 2);
  EXPECT_EQ(run("report " + work_dir("norun").string()), 2);
}

TEST(Cli, SynthIsByteStable) {
  const auto a = work_dir("synth_a"), b = work_dir("synth_b");
  ASSERT_EQ(run("synth --profile WA --days 3 --seed 4 --out " + a.string()), 0);
  ASSERT_EQ(run("synth --profile WA --days 3 --seed 4 --out " + b.string()), 0);
  for (const char* f : {"weather.csv", "ci.csv", "workload.csv", "tou.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto c = work_dir("synth_c");
  ASSERT_EQ(run("synth --profile WA --days 3 --seed 5 --out " + c.string()), 0);
  EXPECT_NE(slurp(a / "ci.csv"), slurp(c / "ci.csv"));
}

TEST(Cli, TrainEvaluateReportExtract) {
  const auto d = work_dir("e2e");
  const auto cfg = tiny_config(d).string();
  const auto common = " --config " + cfg + " ";
  ASSERT_EQ(run(common + "train --profile NY --days 7 --combo LS+BAT --seeds 1,2 --iterations 1 --out " + (d / "train").string()), 0);
  for (const char* s : {"seed_1", "seed_2"}) {
    EXPECT_TRUE(fs::exists(d / "train" / s / "run.json"));
    EXPECT_TRUE(fs::exists(d / "train" / s / "ls.json"));
    EXPECT_TRUE(fs::exists(d / "train" / s / "bat.json"));
    EXPECT_FALSE(fs::exists(d / "train" / s / "eo.json"));
    EXPECT_TRUE(fs::exists(d / "train" / s / "train_log.jsonl"));
  }
  const auto eval = [&](const std::string& out) {
    return run(common + "evaluate --profile NY --days 7 --trace-metrics --checkpoints " + (d / "train" / "seed_1").string() +
               " --out " + (d / out).string());
  };
  ASSERT_EQ(eval("eval_a"), 0);
  ASSERT_EQ(eval("eval_b"), 0);
  EXPECT_EQ(slurp(d / "eval_a" / "metrics.json"), slurp(d / "eval_b" / "metrics.json"));

  ASSERT_EQ(run("report --format csv --out " + (d / "report.csv").string() + " " + (d / "eval_a").string()), 0);
  const auto csv = slurp(d / "report.csv");
  EXPECT_EQ(csv.rfind("location,combo,metric,baseline,run,reduction_pct,std\n", 0), 0u);
  EXPECT_NE(csv.find("NY,LS+BAT,co2,"), std::string::npos);

  ASSERT_EQ(run("extract --window 96 --trace " + (d / "eval_a").string() + " --out " + (d / "fig").string()), 0);
  for (const char* f : {"battery.csv", "workload.csv", "hvac.csv"}) EXPECT_TRUE(fs::exists(d / "fig" / f)) << f;
  EXPECT_NE(run("extract --trace " + (d / "train").string() + " --out " + (d / "fig2").string()), 0);
}

TEST(Cli, HeuristicBatteryEvaluation) {
  const auto d = work_dir("heur");
  ASSERT_EQ(run("evaluate --profile NY --days 30 --combo BAT --bat-heuristic --out " + d.string()), 0);
  const auto m = slurp(d / "metrics.json");
  EXPECT_NE(m.find("\"combo\": \"BAT\""), std::string::npos);
  EXPECT_NE(m.find("\"energy\": 0.0"), std::string::npos);
}
