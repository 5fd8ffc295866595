#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dccfr/config.hpp"
#include "dccfr/harness.hpp"

using namespace dccfr;
namespace fs = std::filesystem;

namespace {

EvaluationSummary summary(const std::string& loc, const std::string& combo, double base, double run) {
  return {loc, combo, {base, base, base}, {run, run, run}};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const EnvConfig& year_cfg() {
  static const EnvConfig cfg = RunSettings{}.env_config(synth_bundle(Profile::NY, 365, 7));
  return cfg;
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("dccfr_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Report, ReductionFormula) {
  const auto rows = build_report({summary("NY", "ALL", 100.0, 86.0)});
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(fixed2(r.reduction_pct), "14.00");
    EXPECT_EQ(fixed2(r.std), "0.00");
    EXPECT_EQ(r.seeds, 1);
  }
  EXPECT_EQ(reduction_pct(100.0, 100.0), 0.0);
}

TEST(Report, MeanAndSampleStdOverSeeds) {
  const auto rows = build_report({summary("NY", "EO", 100.0, 90.0), summary("NY", "EO", 100.0, 94.0)});
  EXPECT_DOUBLE_EQ(rows[0].reduction_pct, 8.0);
  EXPECT_NEAR(rows[0].std, std::sqrt(8.0), 1e-12);
  EXPECT_DOUBLE_EQ(rows[0].run_value, 92.0);
}

TEST(Report, SortedByLocationThenCombo) {
  const auto rows = build_report({summary("WA", "LS", 10, 9), summary("AZ", "LS", 10, 9), summary("AZ", "ALL", 10, 9)});
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0].location + rows[0].combo, "AZALL");
  EXPECT_EQ(rows[3].location + rows[3].combo, "AZLS");
  EXPECT_EQ(rows[6].location, "WA");
  const auto csv = lines(report_csv(rows));
  EXPECT_EQ(csv[0], "location,combo,metric,baseline,run,reduction_pct,std");
  EXPECT_EQ(csv.size(), 10u);
  EXPECT_NE(report_text(rows).find("10.00 \xC2\xB1 0.00"), std::string::npos);
}

TEST(Report, MissingRuns) {
  try {
    build_report({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingRuns);
  }
  EXPECT_THROW(collect_evaluations({temp_dir("empty")}), Error);
}

TEST(Report, CollectedMetricsRecomputeExactly) {
  const auto dir = temp_dir("collect");
  EvaluationResult r;
  r.location = "NY";
  r.combo = "BAT";
  r.baseline = {123.456789, 2000.5, 99999.25};
  r.run = {120.0, 2000.5, 99000.0};
  fs::create_directories(dir / "seed_0");
  std::ofstream(dir / "seed_0" / "metrics.json") << r.to_json().dump(2);
  const auto evals = collect_evaluations({dir});
  ASSERT_EQ(evals.size(), 1u);
  const auto rows = build_report(evals);
  const double expected = 100.0 * (123.456789 - 120.0) / 123.456789;
  EXPECT_NEAR(rows[0].reduction_pct, expected, 1e-9);
  EXPECT_EQ(rows[1].reduction_pct, 0.0);
}

TEST(Evaluate, BaselineAgainstItselfIsZero) {
  const auto& cfg = year_cfg();
  Controllers base;
  base.thresholds = ci_thresholds(cfg.bundle.ci, base.baseline);
  const auto r = evaluate(cfg, base, BaselineSpec{});
  EXPECT_EQ(r.steps, 35040u);
  const auto j = r.to_json();
  EXPECT_EQ(j["reduction_pct"]["co2"].get<double>(), 0.0);
  EXPECT_EQ(j["reduction_pct"]["energy"].get<double>(), 0.0);
  EXPECT_EQ(j["reduction_pct"]["cost"].get<double>(), 0.0);
  double co2 = 0.0;
  for (const auto& m : r.run_trace) co2 += m.ci * m.e_grid / 1000.0;
  EXPECT_NEAR(r.run.co2_tonnes, co2 / 1000.0, 1e-9 * r.run.co2_tonnes);
}

TEST(Evaluate, DeterministicBytes) {
  const auto& cfg = year_cfg();
  Controllers h;
  h.baseline.bat = BatteryRule::CiThreshold;
  h.thresholds = ci_thresholds(cfg.bundle.ci, h.baseline);
  EXPECT_EQ(evaluate(cfg, h, BaselineSpec{}).to_json().dump(), evaluate(cfg, h, BaselineSpec{}).to_json().dump());
}

TEST(Extract, WindowAndIdentity) {
  const auto& cfg = year_cfg();
  Controllers base;
  base.thresholds = ci_thresholds(cfg.bundle.ci, base.baseline);
  const auto trace = run_episode(cfg, base);
  const auto fx = extract_figures(trace, trace, 100, 96);
  for (const auto* csv : {&fx.battery, &fx.workload, &fx.hvac}) EXPECT_EQ(lines(*csv).size(), 97u);
  const auto hv = lines(fx.hvac);
  EXPECT_EQ(hv[1], "100,0,0");
  const auto tail = extract_figures(trace, trace, trace.size() - 10, 96);
  EXPECT_EQ(lines(tail.battery).size(), 11u);
}

TEST(Extract, HeuristicChargesOnlyBelowLowPercentile) {
  const auto& cfg = year_cfg();
  Controllers h;
  h.baseline.bat = BatteryRule::CiThreshold;
  h.thresholds = ci_thresholds(cfg.bundle.ci, h.baseline);
  const auto run = run_episode(cfg, h);
  bool charged = false;
  for (const auto& m : run) {
    if (m.a_bat == static_cast<int>(BatteryAction::Charge)) {
      charged = true;
      ASSERT_LT(m.ci, h.thresholds.low);
    }
  }
  EXPECT_TRUE(charged);
  const auto fx = extract_figures(run, run, 0, 672);
  EXPECT_EQ(lines(fx.battery)[0], "t,soc,ci,bat_action");
}

TEST(Extract, NoTraceAndLengthMismatch) {
  EXPECT_THROW(extract_figures({}, {}, 0, 10), Error);
  std::vector<StepMetrics> a(3), b(4);
  EXPECT_THROW(extract_figures(a, b, 0, 10), Error);
  try {
    read_metrics_jsonl(temp_dir("notrace") / "run_trace.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoTrace);
  }
}

TEST(MetricsTrace, JsonlRoundTrip) {
  const auto dir = temp_dir("jsonl");
  std::vector<StepMetrics> ms(5);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    ms[i].t = i;
    ms[i].co2_kg = 0.1 * static_cast<double>(i);
  }
  write_metrics_jsonl(dir / "t.jsonl", ms);
  const auto back = read_metrics_jsonl(dir / "t.jsonl");
  ASSERT_EQ(back.size(), 5u);
  EXPECT_EQ(back[3].co2_kg, ms[3].co2_kg);
}

TEST(Config, ParsesKeysAndRejectsBadValues) {
  const auto s = parse_settings(nlohmann::json::parse(R"({
    "load_shift": {"deadline_hours": "inf", "flex_fraction": 0.2},
    "baseline": {"hvac": "track", "bat": "ci_threshold"},
    "ppo": {"lr": 0.001},
    "train": {"iterations": 7, "reward_scaling": "standardize", "ou": {"sigma": 0.1}},
    "episode": {"steps": 96}
  })"));
  EXPECT_TRUE(std::isinf(s.ls.deadline_hours));
  EXPECT_EQ(s.ls.flex_fraction, 0.2);
  EXPECT_EQ(s.baseline.hvac, HvacRule::OutdoorTracking);
  EXPECT_EQ(s.baseline.bat, BatteryRule::CiThreshold);
  EXPECT_EQ(s.ppo.lr, 0.001);
  EXPECT_EQ(s.train.iterations, 7);
  EXPECT_EQ(s.train.reward_scaling, RewardScaling::Standardize);
  EXPECT_EQ(s.train.weather_noise.sigma, 0.1);
  EXPECT_EQ(s.train.episode_steps, 96u);
  EXPECT_EQ(RunSettings{}.train.iterations, 105);
  for (const char* bad : {R"({"baseline": {"hvac": "off"}})", R"({"ppo": {"clip": 0}})", R"({"train": {"iterations": -1}})",
                          R"({"load_shift": {"deadline_hours": "soon"}})", R"([1, 2])", R"({"scales": {"co2_kg": "x"}})"}) {
    try {
      parse_settings(nlohmann::json::parse(bad));
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << bad;
    }
  }
}
