#pragma once

// Exogenous drivers: weather, grid carbon intensity, workload and tariff.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dccfr/error.hpp"
#include "dccfr/timeutil.hpp"

namespace dccfr {

enum class SeriesKind { Weather_C, CarbonIntensity_gPerKwh, WorkloadFraction };

inline std::string_view to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::Weather_C: return "Weather_C";
    case SeriesKind::CarbonIntensity_gPerKwh: return "CarbonIntensity_gPerKwh";
    case SeriesKind::WorkloadFraction: return "WorkloadFraction";
  }
  return "?";
}

struct TimeSeries {
  Timestamp start_time{};
  int step_minutes = 15;
  std::vector<double> values;
  SeriesKind kind = SeriesKind::Weather_C;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  Timestamp time_at(std::size_t i) const {
    return start_time + std::chrono::minutes{static_cast<std::int64_t>(step_minutes) * static_cast<std::int64_t>(i)};
  }

  void validate() const {
    if (step_minutes <= 0) throw Error(ErrorCode::ConfigInvalid, "step_minutes must be positive");
    if (values.empty()) throw Error(ErrorCode::EmptyFile, "series has no values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      if (!std::isfinite(v)) throw Error(ErrorCode::MalformedRow, "non-finite value at index " + std::to_string(i));
      if (kind == SeriesKind::WorkloadFraction && (v < 0.0 || v > 1.0)) {
        throw Error(ErrorCode::OutOfRange, "workload fraction " + std::to_string(v) + " outside [0,1] at index " + std::to_string(i));
      }
      if (kind == SeriesKind::CarbonIntensity_gPerKwh && v < 0.0) {
        throw Error(ErrorCode::OutOfRange, "negative carbon intensity at index " + std::to_string(i));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses a `timestamp,value` CSV. Single-row files get a 15-minute step.
inline TimeSeries parse_trace(std::istream& in, SeriesKind kind) {
  std::string line;
  bool saw_header = false;
  std::vector<Timestamp> times;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = detail::trim(line);
    if (!saw_header) {
      if (row.size() >= 3 && static_cast<unsigned char>(row[0]) == 0xEF) row.remove_prefix(3);  // BOM
      if (row.empty()) continue;
      if (row != "timestamp,value") throw Error(ErrorCode::MalformedRow, "expected header 'timestamp,value'");
      saw_header = true;
      continue;
    }
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": missing comma");
    const auto ts = parse_timestamp(detail::trim(row.substr(0, comma)));
    if (!ts) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": bad timestamp");
    double v = 0.0;
    if (!detail::parse_double(row.substr(comma + 1), v)) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": non-numeric value");
    }
    times.push_back(*ts);
    values.push_back(v);
  }
  if (values.empty()) throw Error(ErrorCode::EmptyFile, "no data rows");

  TimeSeries s;
  s.kind = kind;
  s.start_time = times.front();
  s.values = std::move(values);
  if (times.size() >= 2) {
    const auto step = times[1] - times[0];
    if (step.count() <= 0 || step.count() % 60 != 0) throw Error(ErrorCode::NonUniformSpacing, "timestamps must increase by whole minutes");
    for (std::size_t i = 2; i < times.size(); ++i) {
      if (times[i] - times[i - 1] != step) {
        throw Error(ErrorCode::NonUniformSpacing, "spacing changes at row " + std::to_string(i + 1));
      }
    }
    s.step_minutes = static_cast<int>(step.count() / 60);
  }
  s.validate();
  return s;
}

inline TimeSeries parse_trace(const std::filesystem::path& path, SeriesKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_trace(in, kind);
}

inline void write_trace(std::ostream& out, const TimeSeries& s) {
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_timestamp(s.time_at(i)) << ',' << detail::format_double(s.values[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Resampling

/// Refines a series onto a finer grid. Weather is interpolated linearly
/// between knots, the other kinds are step-held; the last knot is held.
inline TimeSeries resample(const TimeSeries& series, int target_step) {
  if (target_step <= 0 || series.step_minutes % target_step != 0) {
    throw Error(ErrorCode::IncompatibleStep,
                std::to_string(target_step) + " does not divide " + std::to_string(series.step_minutes));
  }
  const std::size_t factor = static_cast<std::size_t>(series.step_minutes / target_step);
  TimeSeries out;
  out.kind = series.kind;
  out.start_time = series.start_time;
  out.step_minutes = target_step;
  out.values.reserve(series.size() * factor);
  const std::size_t n = series.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = series.values[i];
    const bool interpolate = series.kind == SeriesKind::Weather_C && i + 1 < n;
    for (std::size_t j = 0; j < factor; ++j) {
      if (interpolate) {
        const double b = series.values[i + 1];
        out.values.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(factor));
      } else {
        out.values.push_back(a);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck noise

struct OuParams {
  double theta = 0.1;  // mean reversion per step
  double sigma = 0.4;  // per sqrt(step)
  double mu = 0.0;

  void validate() const {
    if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "OU theta must lie in (0,1]");
    if (!(sigma >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "OU sigma must be >= 0");
  }
};

/// Discrete OU path: x[0] = 0, x[t+1] = x[t] + theta (mu - x[t]) + sigma z[t].
inline std::vector<double> ou_path(std::size_t n, const OuParams& p, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  double state = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = state;
    state = state + p.theta * (p.mu - state) + p.sigma * normal(rng);
  }
  return x;
}

inline TimeSeries ou_augment(const TimeSeries& series, const OuParams& p, std::uint64_t seed) {
  if (series.kind != SeriesKind::Weather_C) throw Error(ErrorCode::WrongKind, "OU augmentation applies to weather only");
  TimeSeries out = series;
  const auto noise = ou_path(series.size(), p, seed);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += noise[i];
  return out;
}

// ---------------------------------------------------------------------------
// Time-of-use tariff

struct TouBand {
  int hour_start = 0;  // inclusive
  int hour_end = 24;   // exclusive
  bool weekend = false;
  double price = 0.0;  // $/kWh
};

struct TouSchedule {
  std::vector<TouBand> bands;

  void validate() const {
    for (const auto& b : bands) {
      if (b.hour_start < 0 || b.hour_start > 23 || b.hour_end < 1 || b.hour_end > 24 || b.hour_start >= b.hour_end) {
        throw Error(ErrorCode::ConfigInvalid, "ToU band hours out of range");
      }
      if (!(b.price >= 0.0) || !std::isfinite(b.price)) throw Error(ErrorCode::ConfigInvalid, "ToU price must be >= 0");
    }
    for (int wk = 0; wk < 2; ++wk) {
      for (int h = 0; h < 24; ++h) {
        int matches = 0;
        for (const auto& b : bands) {
          if (b.weekend == (wk == 1) && h >= b.hour_start && h < b.hour_end) ++matches;
        }
        if (matches != 1) {
          throw Error(ErrorCode::ConfigInvalid, "ToU schedule must cover hour " + std::to_string(h) +
                                                    (wk ? " (weekend)" : " (weekday)") + " exactly once");
        }
      }
    }
  }

  static TouSchedule flat(double price) {
    return TouSchedule{{TouBand{0, 24, false, price}, TouBand{0, 24, true, price}}};
  }

  /// Weekday peak 08-20 at the high price, everything else at the low price.
  static TouSchedule two_band(double off_peak = 0.10, double peak = 0.25) {
    return TouSchedule{{TouBand{0, 8, false, off_peak}, TouBand{8, 20, false, peak}, TouBand{20, 24, false, off_peak},
                        TouBand{0, 24, true, off_peak}}};
  }
};

inline double price_at(const TouSchedule& tou, Timestamp t) {
  const int hour = static_cast<int>(std::floor(hour_of_day(t)));
  const bool weekend = is_weekend(t);
  for (const auto& b : tou.bands) {
    if (b.weekend == weekend && hour >= b.hour_start && hour < b.hour_end) return b.price;
  }
  throw Error(ErrorCode::ConfigInvalid, "no ToU band covers " + format_timestamp(t));
}

inline void to_json(nlohmann::json& j, const TouBand& b) {
  j = nlohmann::json{{"hour_start", b.hour_start}, {"hour_end", b.hour_end}, {"weekend", b.weekend}, {"price", b.price}};
}

inline void from_json(const nlohmann::json& j, TouBand& b) {
  j.at("hour_start").get_to(b.hour_start);
  j.at("hour_end").get_to(b.hour_end);
  j.at("weekend").get_to(b.weekend);
  j.at("price").get_to(b.price);
}

inline TouSchedule parse_tou(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ConfigInvalid, "ToU JSON must be an array of bands");
  TouSchedule s;
  try {
    s.bands = j.get<std::vector<TouBand>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("ToU JSON: ") + e.what());
  }
  s.validate();
  return s;
}

inline TouSchedule parse_tou(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return parse_tou(j);
}

// ---------------------------------------------------------------------------
// Lookahead

/// CI at t, t+1h, ..., t+n_hours h; offsets past the end repeat the last value.
inline std::vector<double> ci_window(const TimeSeries& ci, std::size_t t_index, int n_hours) {
  const std::size_t per_hour = static_cast<std::size_t>(std::max(1, 60 / ci.step_minutes));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_hours) + 1);
  const std::size_t last = ci.size() - 1;
  for (int k = 0; k <= n_hours; ++k) {
    out.push_back(ci.values[std::min(last, t_index + per_hour * static_cast<std::size_t>(k))]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundles

struct TraceBundle {
  TimeSeries weather;
  TimeSeries ci;
  TimeSeries workload;
  TouSchedule tou;

  std::size_t size() const { return weather.size(); }
  int step_minutes() const { return weather.step_minutes; }
  Timestamp time_at(std::size_t i) const { return weather.time_at(i); }

  void validate() const {
    weather.validate();
    ci.validate();
    workload.validate();
    tou.validate();
    if (weather.kind != SeriesKind::Weather_C || ci.kind != SeriesKind::CarbonIntensity_gPerKwh ||
        workload.kind != SeriesKind::WorkloadFraction) {
      throw Error(ErrorCode::WrongKind, "bundle series kinds are mislabelled");
    }
    const auto same = [&](const TimeSeries& s) {
      return s.start_time == weather.start_time && s.step_minutes == weather.step_minutes && s.size() == weather.size();
    };
    if (!same(ci) || !same(workload)) {
      throw Error(ErrorCode::LengthMismatch, "weather, CI and workload must share start, step and length");
    }
  }
};

enum class Profile { AZ, NY, WA };

inline Profile parse_profile(std::string_view s) {
  if (s == "AZ") return Profile::AZ;
  if (s == "NY") return Profile::NY;
  if (s == "WA") return Profile::WA;
  throw Error(ErrorCode::ConfigInvalid, "unknown profile '" + std::string(s) + "' (expected AZ, NY or WA)");
}

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::AZ: return "AZ";
    case Profile::NY: return "NY";
    case Profile::WA: return "WA";
  }
  return "?";
}

struct ProfileConstants {
  double temp_mean;
  double temp_amp;  // annual; the diurnal swing is half of this
  double ci_mean;
};

inline ProfileConstants profile_constants(Profile p) {
  switch (p) {
    case Profile::AZ: return {24.0, 10.0, 450.0};
    case Profile::NY: return {12.0, 12.0, 350.0};
    case Profile::WA: return {11.0, 7.0, 150.0};
  }
  return {12.0, 12.0, 350.0};
}

namespace detail {

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/// Deterministic synthetic traces at 15-minute resolution starting 2023-01-01.
inline TraceBundle synth_bundle(Profile profile, int year_days, std::uint64_t seed) {
  using std::numbers::pi;
  if (year_days < 1 || year_days > 366) throw Error(ErrorCode::BadDays, "days must lie in [1, 366], got " + std::to_string(year_days));

  const auto pc = profile_constants(profile);
  constexpr int kStep = 15;
  const std::size_t n = static_cast<std::size_t>(year_days) * (24 * 60 / kStep);
  const Timestamp start = std::chrono::sys_days{std::chrono::year{2023} / std::chrono::January / 1};

  TraceBundle b;
  b.weather = TimeSeries{start, kStep, std::vector<double>(n), SeriesKind::Weather_C};
  b.ci = TimeSeries{start, kStep, std::vector<double>(n), SeriesKind::CarbonIntensity_gPerKwh};
  b.workload = TimeSeries{start, kStep, std::vector<double>(n), SeriesKind::WorkloadFraction};
  b.tou = TouSchedule::two_band();

  const auto ci_noise = ou_path(n, OuParams{0.1, 0.02 * pc.ci_mean, 0.0}, detail::stream_seed(seed, 2));
  const auto load_noise = ou_path(n, OuParams{0.2, 0.015, 0.0}, detail::stream_seed(seed, 3));

  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp t = b.weather.time_at(i);
    const double h = hour_of_day(t);
    const double d = static_cast<double>(day_of_year(t)) + h / 24.0;

    const double annual = -std::cos(2.0 * pi * (d - 15.0) / 365.0);  // coldest mid-January
    const double diurnal = std::cos(2.0 * pi * (h - 15.0) / 24.0);   // warmest 15:00
    b.weather.values[i] = pc.temp_mean + pc.temp_amp * annual + 0.5 * pc.temp_amp * diurnal;

    const double ci_shape = -std::cos(2.0 * pi * (h - 13.0) / 24.0);  // trough 13:00
    b.ci.values[i] = std::max(20.0, pc.ci_mean * (1.0 + 0.3 * ci_shape) + ci_noise[i]);

    const double hump = std::exp(-0.5 * std::pow((h - 14.0) / 3.5, 2.0)) * (is_weekend(t) ? 0.6 : 1.0);
    b.workload.values[i] = std::clamp(0.25 + 0.6 * hump + load_noise[i], 0.25, 0.85);
  }
  b.weather = ou_augment(b.weather, OuParams{}, detail::stream_seed(seed, 1));
  b.validate();
  return b;
}

// ---------------------------------------------------------------------------
// Directory I/O: weather.csv, ci.csv, workload.csv, tou.json

inline void write_bundle(const TraceBundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const auto write_csv = [&](const TimeSeries& s, const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    write_trace(out, s);
  };
  write_csv(b.weather, "weather.csv");
  write_csv(b.ci, "ci.csv");
  write_csv(b.workload, "workload.csv");
  std::ofstream out(dir / "tou.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "tou.json").string());
  out << nlohmann::json(b.tou.bands).dump(2) << '\n';
}

/// Loads a trace directory and refines every series onto `target_step`.
inline TraceBundle load_bundle(const std::filesystem::path& dir, int target_step = 15) {
  TraceBundle b;
  b.weather = resample(parse_trace(dir / "weather.csv", SeriesKind::Weather_C), target_step);
  b.ci = resample(parse_trace(dir / "ci.csv", SeriesKind::CarbonIntensity_gPerKwh), target_step);
  b.workload = resample(parse_trace(dir / "workload.csv", SeriesKind::WorkloadFraction), target_step);
  b.tou = parse_tou(dir / "tou.json");
  b.validate();
  return b;
}

}  // namespace dccfr
