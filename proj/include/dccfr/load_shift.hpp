#pragma once

// Flexible-workload queue. Work is tracked in integer quanta so that the
// lifetime balance cum_arrived == cum_executed + queued holds exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>

#include "dccfr/error.hpp"

namespace dccfr {

struct LsParams {
  double flex_fraction = 0.10;
  double u_max = 0.95;
  double deadline_hours = 24.0;  // may be +inf
  double w_pen = 0.1;

  void validate() const {
    if (!(flex_fraction >= 0.0 && flex_fraction < 1.0)) throw Error(ErrorCode::ConfigInvalid, "load_shift: flex_fraction must lie in [0,1)");
    if (!(u_max > 0.0 && u_max <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "load_shift: u_max must lie in (0,1]");
    if (!(deadline_hours > 0.0)) throw Error(ErrorCode::ConfigInvalid, "load_shift: deadline_hours must be > 0");
    if (!(w_pen >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "load_shift: w_pen must be >= 0");
  }
};

/// Amount of work in utilization-steps, stored as integer quanta of 1e-12.
class WorkAmount {
 public:
  static constexpr double kQuantaPerUnit = 1e12;

  constexpr WorkAmount() = default;
  static constexpr WorkAmount from_quanta(std::int64_t q) { return WorkAmount(q); }
  static WorkAmount from_units(double u) { return WorkAmount(std::llround(u * kQuantaPerUnit)); }

  constexpr std::int64_t quanta() const { return q_; }
  constexpr double units() const { return static_cast<double>(q_) / kQuantaPerUnit; }

  constexpr WorkAmount& operator+=(WorkAmount o) { q_ += o.q_; return *this; }
  constexpr WorkAmount& operator-=(WorkAmount o) { q_ -= o.q_; return *this; }
  friend constexpr WorkAmount operator+(WorkAmount a, WorkAmount b) { return a += b; }
  friend constexpr WorkAmount operator-(WorkAmount a, WorkAmount b) { return a -= b; }
  friend constexpr auto operator<=>(WorkAmount, WorkAmount) = default;

 private:
  constexpr explicit WorkAmount(std::int64_t q) : q_(q) {}
  std::int64_t q_ = 0;
};

inline WorkAmount min(WorkAmount a, WorkAmount b) { return a < b ? a : b; }

struct FlexEntry {
  WorkAmount amount;
  std::int64_t arrival_step = 0;
  std::int64_t deadline_step = 0;
};

struct FlexQueue {
  std::deque<FlexEntry> entries;
  WorkAmount cum_arrived;
  WorkAmount cum_executed;

  WorkAmount total() const {
    WorkAmount s;
    for (const auto& e : entries) s += e.amount;
    return s;
  }
  bool empty() const { return entries.empty(); }
  bool balanced() const { return cum_arrived == cum_executed + total(); }
};

enum class LsAction { Assign = 0, Idle = 1 };

struct FlexSplit {
  double base_u;
  double flex_arrival;
};

inline FlexSplit split_arrivals(double u_raw, const LsParams& p) {
  if (!(u_raw >= 0.0 && u_raw <= 1.0)) throw Error(ErrorCode::BadUtilization, "utilization " + std::to_string(u_raw) + " outside [0,1]");
  return {(1.0 - p.flex_fraction) * u_raw, p.flex_fraction * u_raw};
}

inline WorkAmount overdue_amount(const FlexQueue& q, std::int64_t now) {
  WorkAmount s;
  for (const auto& e : q.entries) {
    if (e.deadline_step <= now) s += e.amount;
  }
  return s;
}

struct QueueStepResult {
  FlexQueue queue;
  double u_exec = 0.0;
  WorkAmount executed;
  WorkAmount overdue;  // overdue work present before execution
  double penalty = 0.0;
};

/// One step of the flexible queue. Assign drains oldest-first up to the
/// headroom u_max - base_u; Idle still force-runs entries whose deadline
/// has been reached, headroom permitting.
inline QueueStepResult queue_step(FlexQueue q, LsAction a, double base_u, double flex_arrival, std::int64_t now,
                                  const LsParams& p, int steps_per_hour = 4) {
  const WorkAmount arrival = WorkAmount::from_units(flex_arrival);
  if (arrival.quanta() > 0) {
    std::int64_t deadline = std::numeric_limits<std::int64_t>::max();
    const double horizon = p.deadline_hours * steps_per_hour;
    if (std::isfinite(horizon) && horizon < 1e15) deadline = now + static_cast<std::int64_t>(std::ceil(horizon));
    q.entries.push_back(FlexEntry{arrival, now, deadline});
    q.cum_arrived += arrival;
  }

  QueueStepResult r;
  r.overdue = overdue_amount(q, now);
  WorkAmount budget = WorkAmount::from_units(std::max(0.0, p.u_max - base_u));

  for (auto it = q.entries.begin(); it != q.entries.end() && budget.quanta() > 0;) {
    const bool eligible = a == LsAction::Assign || it->deadline_step <= now;
    if (!eligible) {
      ++it;
      continue;
    }
    const WorkAmount take = min(it->amount, budget);
    it->amount -= take;
    budget -= take;
    r.executed += take;
    if (it->amount.quanta() == 0) {
      it = q.entries.erase(it);
    } else {
      ++it;
    }
  }
  q.cum_executed += r.executed;

  r.u_exec = std::min(p.u_max, base_u + r.executed.units());
  r.u_exec = std::max(r.u_exec, base_u);
  r.penalty = p.w_pen * q.total().units();
  r.queue = std::move(q);
  return r;
}

}  // namespace dccfr
