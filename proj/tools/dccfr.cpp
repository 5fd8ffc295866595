// dccfr: synthesize traces, train agent combinations, evaluate them against
// the rule-based baseline and tabulate reductions.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dccfr/config.hpp"
#include "dccfr/harness.hpp"

namespace fs = std::filesystem;
using namespace dccfr;

namespace {

struct DataSource {
  std::string profile = "NY";
  int days = 365;
  std::uint64_t data_seed = 7;

  bool synthetic() const { return profile == "AZ" || profile == "NY" || profile == "WA"; }

  std::string location() const { return synthetic() ? profile : fs::path(profile).filename().string(); }

  TraceBundle bundle() const {
    if (synthetic()) return synth_bundle(parse_profile(profile), days, data_seed);
    if (!fs::is_directory(profile)) throw Error(ErrorCode::ConfigInvalid, "profile must be AZ, NY, WA or a trace directory: " + profile);
    return load_bundle(profile);
  }
};

void add_source_options(CLI::App* cmd, DataSource& src) {
  cmd->add_option("--profile", src.profile, "AZ, NY, WA or a directory with weather.csv, ci.csv, workload.csv, tou.json")
      ->capture_default_str();
  cmd->add_option("--days", src.days, "days for synthetic profiles")->capture_default_str();
  cmd->add_option("--data-seed", src.data_seed, "seed of the synthetic traces")->capture_default_str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + p.string());
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, p.string() + ": " + e.what());
  }
}

std::string agent_file(Agent a) {
  switch (a) {
    case Agent::LS: return "ls.json";
    case Agent::E: return "eo.json";
    case Agent::BAT: return "bat.json";
  }
  return {};
}

void apply_baseline_flag(const std::string& flag, BaselineSpec& spec) {
  if (flag.empty()) return;
  if (flag == "fixed22") {
    spec.hvac = HvacRule::FixedSetpoint;
    spec.fixed_setpoint = 22.0;
  } else if (flag == "track") {
    spec.hvac = HvacRule::OutdoorTracking;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "--baseline must be fixed22 or track");
  }
}

// Trains one seed and writes seed_<s>/{run.json, ls.json, eo.json, bat.json, train_log.jsonl}.
TrainResult train_seed(const RunSettings& settings, const EnvConfig& cfg, const Combo& combo, std::uint64_t seed,
                       const std::string& location, const fs::path& dir) {
  fs::create_directories(dir);
  TrainOptions opt = settings.train;
  opt.seed = seed;
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw Error(ErrorCode::IoError, "cannot write " + (dir / "train_log.jsonl").string());
  const auto on_iter = [&](const IterationLog& l, const TrainResult&) {
    log << nlohmann::json(l).dump() << '\n';
    log.flush();
    std::fprintf(stderr, "[%s seed %llu] iter %d/%d steps %zu co2 %.3f t\n", combo.label().c_str(),
                 static_cast<unsigned long long>(seed), l.iteration + 1, opt.iterations, l.env_steps, l.co2_tonnes);
  };
  TrainResult r = train(cfg, settings.ppo, opt, combo, settings.baseline, on_iter);
  for (Agent a : kAgents) {
    const auto& ag = r.agents[index_of(a)];
    if (ag) write_file(dir / agent_file(a), checkpoint_to_json(a, *ag, seed, opt.iterations).dump() + "\n");
  }
  const nlohmann::json run{{"combo", combo.label()}, {"location", location}, {"seed", seed}, {"iterations", opt.iterations}};
  write_file(dir / "run.json", run.dump(2) + "\n");
  return r;
}

struct EvalRequest {
  std::string combo;
  std::string location;
  std::uint64_t seed = 0;
  std::array<std::optional<PpoAgent>, 3> agents;
  bool bat_heuristic = false;
};

void evaluate_and_write(const EnvConfig& cfg, const BaselineSpec& reference, EvalRequest& req,
                        const fs::path& out_dir, bool trace) {
  Controllers run;
  run.baseline = reference;
  if (req.bat_heuristic) run.baseline.bat = BatteryRule::CiThreshold;
  run.thresholds = ci_thresholds(cfg.bundle.ci, run.baseline);
  for (Agent a : kAgents) {
    auto& ag = req.agents[index_of(a)];
    if (ag) run.agents[index_of(a)] = &*ag;
  }
  EvaluationResult r = evaluate(cfg, run, reference);
  r.location = req.location;
  r.combo = req.combo;
  r.seed = req.seed;
  fs::create_directories(out_dir);
  write_file(out_dir / "metrics.json", r.to_json().dump(2) + "\n");
  if (trace) {
    write_metrics_jsonl(out_dir / "run_trace.jsonl", r.run_trace);
    write_metrics_jsonl(out_dir / "baseline_trace.jsonl", r.baseline_trace);
  }
  const auto red = r.to_json().at("reduction_pct");
  std::printf("%s %s seed %llu: co2 %.2f%% energy %.2f%% cost %.2f%%\n", req.location.c_str(), req.combo.c_str(),
              static_cast<unsigned long long>(req.seed), red.at("co2").get<double>(), red.at("energy").get<double>(),
              red.at("cost").get<double>());
}

std::vector<fs::path> checkpoint_sets(const fs::path& root) {
  if (fs::exists(root / "run.json")) return {root};
  std::vector<fs::path> out;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "run.json")) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::MissingRuns, "no checkpoint set (run.json) under " + root.string());
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-agent carbon-aware data center control: simulator, trainer and evaluation harness"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "write synthetic weather, CI, workload and tariff traces");
  std::string synth_profile = "NY";
  int synth_days = 365;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "data";
  synth->add_option("--profile", synth_profile, "AZ, NY or WA")->capture_default_str();
  synth->add_option("--days", synth_days, "number of days")->capture_default_str();
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a combination of agents");
  DataSource train_src;
  std::string train_combo = "ALL";
  std::vector<std::uint64_t> train_seeds{0};
  std::string train_out = "runs/train";
  int train_iterations = -1;
  add_source_options(train_cmd, train_src);
  train_cmd->add_option("--combo", train_combo, "LS, EO, BAT, LS+EO, LS+BAT, EO+BAT or ALL")->capture_default_str();
  train_cmd->add_option("--seeds", train_seeds, "training seeds")->delimiter(',')->capture_default_str();
  train_cmd->add_option("--seed", train_seeds, "alias for a single training seed");
  train_cmd->add_option("--out", train_out, "output directory")->capture_default_str();
  train_cmd->add_option("--iterations", train_iterations, "learning iterations (overrides the config)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate checkpoints or heuristics over the trace year");
  DataSource eval_src;
  std::string eval_ckpt;
  std::string eval_combo;
  std::string eval_out = "runs/eval";
  std::string eval_baseline;
  bool eval_bat_heuristic = false;
  bool eval_trace = false;
  add_source_options(eval_cmd, eval_src);
  eval_cmd->add_option("--checkpoints", eval_ckpt, "seed directory or training output with seed_* subdirectories");
  eval_cmd->add_option("--combo", eval_combo, "label for a checkpoint-free run (BASELINE or BAT with --bat-heuristic)");
  eval_cmd->add_option("--out", eval_out, "output directory")->capture_default_str();
  eval_cmd->add_option("--baseline", eval_baseline, "reference HVAC rule: fixed22 or track");
  eval_cmd->add_flag("--bat-heuristic", eval_bat_heuristic, "drive an untrained BAT slot with the CI-threshold rule");
  eval_cmd->add_flag("--trace-metrics", eval_trace, "also write per-step run_trace.jsonl and baseline_trace.jsonl");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate all seven combinations");
  DataSource abl_src;
  std::vector<std::uint64_t> abl_seeds{0, 1, 2};
  std::string abl_out = "runs/ablate";
  int abl_iterations = -1;
  std::vector<std::string> abl_combos;
  bool abl_trace = false;
  add_source_options(ablate, abl_src);
  ablate->add_option("--seeds", abl_seeds, "training seeds")->delimiter(',')->capture_default_str();
  ablate->add_option("--out", abl_out, "output directory")->capture_default_str();
  ablate->add_option("--iterations", abl_iterations, "learning iterations (overrides the config)");
  ablate->add_option("--combo", abl_combos, "restrict to these combinations")->delimiter(',');
  ablate->add_flag("--trace-metrics", abl_trace, "write per-step traces");

  // report
  auto* report = app.add_subcommand("report", "tabulate reductions from evaluation outputs");
  std::vector<std::string> report_runs;
  std::string report_format = "text";
  std::string report_out;
  report->add_option("runs", report_runs, "run directories (searched for metrics.json)")->required();
  report->add_option("--format", report_format, "csv or text")->check(CLI::IsMember({"csv", "text"}))->capture_default_str();
  report->add_option("--out", report_out, "write the table to this file instead of stdout");

  // extract
  auto* extract = app.add_subcommand("extract", "write plot-ready CSV extracts from traced metrics");
  std::string extract_trace;
  std::string extract_out = "figures";
  std::size_t extract_window = 96 * 7;
  std::size_t extract_start = 0;
  extract->add_option("--trace", extract_trace, "evaluation directory containing run_trace.jsonl and baseline_trace.jsonl")
      ->required();
  extract->add_option("--out", extract_out, "output directory")->capture_default_str();
  extract->add_option("--window", extract_window, "number of steps")->capture_default_str();
  extract->add_option("--start", extract_start, "first step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const RunSettings settings = config_path.empty() ? RunSettings{} : load_settings(config_path);

  if (*synth) {
    const TraceBundle b = synth_bundle(parse_profile(synth_profile), synth_days, synth_seed);
    write_bundle(b, synth_out);
    std::printf("wrote %zu steps to %s\n", b.size(), synth_out.c_str());
    return 0;
  }

  if (*train_cmd) {
    const Combo combo = parse_combo(train_combo);
    if (!combo.any()) throw Error(ErrorCode::ConfigInvalid, "train needs a non-empty combination");
    if (train_seeds.empty()) throw Error(ErrorCode::ConfigInvalid, "at least one seed is required");
    RunSettings s = settings;
    if (train_iterations >= 0) s.train.iterations = train_iterations;
    const EnvConfig cfg = s.env_config(train_src.bundle());
    for (std::uint64_t seed : train_seeds) {
      train_seed(s, cfg, combo, seed, train_src.location(), fs::path(train_out) / ("seed_" + std::to_string(seed)));
    }
    return 0;
  }

  if (*eval_cmd) {
    BaselineSpec reference = settings.baseline;
    reference.bat = BatteryRule::AlwaysIdle;
    apply_baseline_flag(eval_baseline, reference);
    const EnvConfig cfg = settings.env_config(eval_src.bundle());
    if (eval_ckpt.empty()) {
      EvalRequest req;
      req.combo = eval_combo.empty() ? (eval_bat_heuristic ? "BAT" : "BASELINE") : eval_combo;
      req.location = eval_src.location();
      req.bat_heuristic = eval_bat_heuristic;
      evaluate_and_write(cfg, reference, req, eval_out, eval_trace);
      return 0;
    }
    const auto sets = checkpoint_sets(eval_ckpt);
    for (const auto& dir : sets) {
      const auto run = read_json(dir / "run.json");
      EvalRequest req;
      req.combo = run.at("combo").get<std::string>();
      req.seed = run.at("seed").get<std::uint64_t>();
      req.location = eval_src.location();
      req.bat_heuristic = eval_bat_heuristic;
      const Combo combo = parse_combo(req.combo);
      for (Agent a : kAgents) {
        if (combo.has(a)) req.agents[index_of(a)] = checkpoint_from_json(read_json(dir / agent_file(a)), a);
      }
      const fs::path out = sets.size() == 1 && sets[0] == fs::path(eval_ckpt) ? fs::path(eval_out)
                                                                              : fs::path(eval_out) / dir.filename();
      evaluate_and_write(cfg, reference, req, out, eval_trace);
    }
    return 0;
  }

  if (*ablate) {
    RunSettings s = settings;
    if (abl_iterations >= 0) s.train.iterations = abl_iterations;
    if (abl_seeds.empty()) throw Error(ErrorCode::ConfigInvalid, "at least one seed is required");
    std::vector<std::string> combos = abl_combos;
    if (combos.empty()) combos.assign(combo_labels().begin(), combo_labels().end());
    const EnvConfig cfg = s.env_config(abl_src.bundle());
    BaselineSpec reference = s.baseline;
    reference.bat = BatteryRule::AlwaysIdle;
    for (const auto& label : combos) {
      const Combo combo = parse_combo(label);
      for (std::uint64_t seed : abl_seeds) {
        const fs::path dir = fs::path(abl_out) / abl_src.location() / combo.label() / ("seed_" + std::to_string(seed));
        TrainResult tr = train_seed(s, cfg, combo, seed, abl_src.location(), dir);
        EvalRequest req;
        req.combo = combo.label();
        req.location = abl_src.location();
        req.seed = seed;
        req.agents = std::move(tr.agents);
        evaluate_and_write(cfg, reference, req, dir, abl_trace);
      }
    }
    const auto rows = build_report(collect_evaluations({fs::path(abl_out)}));
    write_file(fs::path(abl_out) / "report.csv", report_csv(rows));
    std::fputs(report_text(rows).c_str(), stdout);
    return 0;
  }

  if (*report) {
    std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
    const auto rows = build_report(collect_evaluations(dirs));
    const std::string table = report_format == "csv" ? report_csv(rows) : report_text(rows);
    if (report_out.empty()) std::fputs(table.c_str(), stdout);
    else write_file(report_out, table);
    return 0;
  }

  if (*extract) {
    const fs::path dir(extract_trace);
    const auto run = read_metrics_jsonl(dir / "run_trace.jsonl");
    const auto base = read_metrics_jsonl(dir / "baseline_trace.jsonl");
    const auto ex = extract_figures(run, base, extract_start, extract_window);
    write_file(fs::path(extract_out) / "battery.csv", ex.battery);
    write_file(fs::path(extract_out) / "workload.csv", ex.workload);
    write_file(fs::path(extract_out) / "hvac.csv", ex.hvac);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
