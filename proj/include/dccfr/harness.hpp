#pragma once

// Evaluation, reduction reports and figure extracts.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "dccfr/baselines.hpp"
#include "dccfr/env.hpp"
#include "dccfr/train.hpp"

namespace dccfr {

/// One controller per agent slot: a trained policy (greedy) or the baseline.
struct Controllers {
  std::array<const PpoAgent*, 3> agents{nullptr, nullptr, nullptr};
  BaselineSpec baseline;
  CiThresholds thresholds;

  JointAction act(const CoupledEnv& env) const {
    JointAction a{};
    for (Agent ag : kAgents) {
      const std::size_t i = index_of(ag);
      if (agents[i]) {
        const auto obs = env.observe(ag);
        a[i] = agents[i]->act_greedy(obs, env.mask(ag));
      } else {
        a[i] = baseline_action(ag, env, baseline, thresholds);
      }
    }
    return a;
  }
};

inline std::vector<StepMetrics> run_episode(const EnvConfig& cfg, const Controllers& ctl) {
  CoupledEnv env(cfg);
  std::vector<StepMetrics> out;
  out.reserve(cfg.effective_episode_steps());
  while (!env.done()) out.push_back(env.step(ctl.act(env)).metrics);
  return out;
}

inline double reduction_pct(double baseline, double run) { return 100.0 * (baseline - run) / baseline; }

inline nlohmann::json totals_json(const EpisodeTotals& t) {
  return nlohmann::json{{"co2_tonnes", t.co2_tonnes}, {"energy_mwh", t.energy_mwh}, {"cost_usd", t.cost_usd}};
}

inline EpisodeTotals totals_from_json(const nlohmann::json& j) {
  return {j.at("co2_tonnes").get<double>(), j.at("energy_mwh").get<double>(), j.at("cost_usd").get<double>()};
}

struct EvaluationResult {
  std::string location;
  std::string combo;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  EpisodeTotals baseline;
  EpisodeTotals run;
  std::vector<StepMetrics> baseline_trace;
  std::vector<StepMetrics> run_trace;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"location", location},
        {"combo", combo},
        {"seed", seed},
        {"steps", steps},
        {"baseline", totals_json(baseline)},
        {"run", totals_json(run)},
        {"reduction_pct",
         {{"co2", reduction_pct(baseline.co2_tonnes, run.co2_tonnes)},
          {"energy", reduction_pct(baseline.energy_mwh, run.energy_mwh)},
          {"cost", reduction_pct(baseline.cost_usd, run.cost_usd)}}}};
  }
};

/// Runs the evaluation episode for `run` and for the pure baseline on the same config.
inline EvaluationResult evaluate(const EnvConfig& cfg, const Controllers& run, const BaselineSpec& reference) {
  Controllers base;
  base.baseline = reference;
  base.thresholds = ci_thresholds(cfg.bundle.ci, reference);
  EvaluationResult r;
  r.baseline_trace = run_episode(cfg, base);
  r.run_trace = run_episode(cfg, run);
  r.baseline = episode_totals(r.baseline_trace);
  r.run = episode_totals(r.run_trace);
  r.steps = r.run_trace.size();
  return r;
}

inline void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<StepMetrics>& ms) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& m : ms) out << nlohmann::json(m).dump() << '\n';
}

inline std::vector<StepMetrics> read_metrics_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NoTrace, "missing metrics trace " + path.string());
  std::vector<StepMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<StepMetrics>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::NoTrace, "empty metrics trace " + path.string());
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string location;
  std::string combo;
  std::string metric;  // co2 | energy | cost
  double baseline_value = 0.0;
  double run_value = 0.0;
  double reduction_pct = 0.0;  // mean over seeds
  double std = 0.0;            // sample standard deviation over seeds
  int seeds = 0;
};

struct EvaluationSummary {
  std::string location;
  std::string combo;
  EpisodeTotals baseline;
  EpisodeTotals run;
};

inline std::vector<ReportRow> build_report(const std::vector<EvaluationSummary>& evals) {
  if (evals.empty()) throw Error(ErrorCode::MissingRuns, "no completed evaluations to report");
  std::map<std::pair<std::string, std::string>, std::vector<const EvaluationSummary*>> cells;
  for (const auto& e : evals) cells[{e.location, e.combo}].push_back(&e);

  std::vector<ReportRow> rows;
  for (const auto& [key, group] : cells) {
    using Getter = double (*)(const EpisodeTotals&);
    const std::array<std::pair<const char*, Getter>, 3> metrics{{
        {"co2", [](const EpisodeTotals& t) { return t.co2_tonnes; }},
        {"energy", [](const EpisodeTotals& t) { return t.energy_mwh; }},
        {"cost", [](const EpisodeTotals& t) { return t.cost_usd; }},
    }};
    for (const auto& [name, get] : metrics) {
      ReportRow row{key.first, key.second, name};
      std::vector<double> reds;
      for (const auto* e : group) {
        row.baseline_value += get(e->baseline);
        row.run_value += get(e->run);
        reds.push_back(reduction_pct(get(e->baseline), get(e->run)));
      }
      const double n = static_cast<double>(group.size());
      row.baseline_value /= n;
      row.run_value /= n;
      double mean = 0.0;
      for (double r : reds) mean += r;
      mean /= n;
      double var = 0.0;
      for (double r : reds) var += (r - mean) * (r - mean);
      row.reduction_pct = mean;
      row.std = reds.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
      row.seeds = static_cast<int>(group.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline std::vector<EvaluationSummary> collect_evaluations(const std::vector<std::filesystem::path>& dirs) {
  std::vector<std::filesystem::path> files;
  for (const auto& d : dirs) {
    if (std::filesystem::is_regular_file(d)) {
      files.push_back(d);
      continue;
    }
    if (!std::filesystem::is_directory(d)) throw Error(ErrorCode::MissingRuns, "no such run directory " + d.string());
    for (const auto& entry : std::filesystem::recursive_directory_iterator(d)) {
      if (entry.is_regular_file() && entry.path().filename() == "metrics.json") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<EvaluationSummary> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      in >> j;
      out.push_back({j.at("location").get<std::string>(), j.at("combo").get<std::string>(), totals_from_json(j.at("baseline")),
                     totals_from_json(j.at("run"))});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRow, f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::MissingRuns, "no metrics.json found under the given run directories");
  return out;
}

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "location,combo,metric,baseline,run,reduction_pct,std\n";
  for (const auto& r : rows) {
    out << r.location << ',' << r.combo << ',' << r.metric << ',' << detail::format_double(r.baseline_value) << ','
        << detail::format_double(r.run_value) << ',' << fixed2(r.reduction_pct) << ',' << fixed2(r.std) << '\n';
  }
  return out.str();
}

inline std::string report_text(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-8s %-7s %14s %14s %16s\n", "location", "combo", "metric", "baseline", "run", "reduction %");
  out << buf;
  for (const auto& r : rows) {
    const std::string red = fixed2(r.reduction_pct) + " \xC2\xB1 " + fixed2(r.std);
    std::snprintf(buf, sizeof buf, "%-10s %-8s %-7s %14.3f %14.3f %17s\n", r.location.c_str(), r.combo.c_str(), r.metric.c_str(),
                  r.baseline_value, r.run_value, red.c_str());
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Figure extracts

struct FigureExtracts {
  std::string battery;   // t,soc,ci,bat_action
  std::string workload;  // t,u_exec_run,u_exec_baseline
  std::string hvac;      // t,spending_kwh,savings_kwh
};

inline FigureExtracts extract_figures(const std::vector<StepMetrics>& run, const std::vector<StepMetrics>& base,
                                      std::size_t start, std::size_t window) {
  if (run.empty() || base.empty()) throw Error(ErrorCode::NoTrace, "figure extraction needs traced metrics");
  if (run.size() != base.size()) throw Error(ErrorCode::LengthMismatch, "run and baseline traces differ in length");
  const std::size_t end = std::min(run.size(), start + window);
  std::ostringstream bat, wl, hv;
  bat << "t,soc,ci,bat_action\n";
  wl << "t,u_exec_run,u_exec_baseline\n";
  hv << "t,spending_kwh,savings_kwh\n";
  const auto f = detail::format_double;
  for (std::size_t i = start; i < end; ++i) {
    const auto& r = run[i];
    const auto& b = base[i];
    bat << r.t << ',' << f(r.soc) << ',' << f(r.ci) << ',' << r.a_bat << '\n';
    wl << r.t << ',' << f(r.u_exec) << ',' << f(b.u_exec) << '\n';
    hv << r.t << ',' << f(r.e_hvac - b.e_hvac) << ',' << f((b.e_it + b.e_hvac) - (r.e_it + r.e_hvac)) << '\n';
  }
  return {bat.str(), wl.str(), hv.str()};
}

}  // namespace dccfr
