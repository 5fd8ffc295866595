#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "dccfr/load_shift.hpp"

using namespace dccfr;

namespace {

FlexQueue queue_of(std::initializer_list<std::pair<double, std::int64_t>> items) {
  FlexQueue q;
  std::int64_t arrival = 0;
  for (const auto& [amount, deadline] : items) {
    const auto w = WorkAmount::from_units(amount);
    q.entries.push_back(FlexEntry{w, arrival++, deadline});
    q.cum_arrived += w;
  }
  return q;
}

}  // namespace

TEST(Split, HandArithmetic) {
  const LsParams p;
  const auto s = split_arrivals(0.8, p);
  EXPECT_NEAR(s.base_u, 0.72, 1e-15);
  EXPECT_NEAR(s.flex_arrival, 0.08, 1e-15);
  const auto z = split_arrivals(0.0, p);
  EXPECT_EQ(z.base_u, 0.0);
  EXPECT_EQ(z.flex_arrival, 0.0);
  EXPECT_THROW(split_arrivals(1.5, p), Error);
}

TEST(Split, DailyShareIsTheFlexFraction) {
  const LsParams p;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.25, 0.85);
  double flex = 0.0, raw = 0.0;
  for (int i = 0; i < 96; ++i) {
    const double x = u(rng);
    flex += split_arrivals(x, p).flex_arrival;
    raw += x;
  }
  EXPECT_NEAR(flex / raw, 0.10, 1e-14);
}

TEST(QueueStep, AssignDrainsHeadroom) {
  const LsParams p;
  const auto r = queue_step(queue_of({{2.0, 1000}}), LsAction::Assign, 0.6, 0.0, 0, p);
  EXPECT_NEAR(r.executed.units(), 0.35, 1e-12);
  EXPECT_NEAR(r.u_exec, 0.95, 1e-12);
  EXPECT_NEAR(r.queue.total().units(), 1.65, 1e-12);
  EXPECT_NEAR(r.penalty, 0.165, 1e-12);
}

TEST(QueueStep, IdleQueuesArrival) {
  const LsParams p;
  const auto r = queue_step(FlexQueue{}, LsAction::Idle, 0.6, 0.08, 0, p);
  EXPECT_EQ(r.u_exec, 0.6);
  EXPECT_NEAR(r.queue.total().units(), 0.08, 1e-12);
  EXPECT_NEAR(r.penalty, 0.008, 1e-12);
  EXPECT_EQ(r.queue.entries.front().deadline_step, 96);
}

TEST(QueueStep, IdleForceRunsOverdueWork) {
  const LsParams p;
  const auto r = queue_step(queue_of({{0.3, 5}}), LsAction::Idle, 0.5, 0.0, 10, p);
  EXPECT_NEAR(r.executed.units(), 0.3, 1e-12);
  EXPECT_NEAR(r.u_exec, 0.8, 1e-12);
  EXPECT_EQ(r.penalty, 0.0);
  EXPECT_TRUE(r.queue.empty());
}

TEST(Overdue, ThresholdFilterInclusive) {
  EXPECT_EQ(overdue_amount(FlexQueue{}, 5).quanta(), 0);
  const auto q = queue_of({{0.2, 10}, {0.3, 20}});
  EXPECT_NEAR(overdue_amount(q, 15).units(), 0.2, 1e-12);
  EXPECT_NEAR(overdue_amount(q, 20).units(), 0.5, 1e-12);
}

TEST(QueueStep, FuzzedConservationAndBounds) {
  LsParams p;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> act(0, 1);
  FlexQueue q;
  for (std::int64_t t = 0; t < 100000; ++t) {
    const auto split = split_arrivals(u(rng), p);
    const auto r = queue_step(std::move(q), static_cast<LsAction>(act(rng)), split.base_u, split.flex_arrival, t, p);
    ASSERT_TRUE(r.queue.balanced()) << "at step " << t;
    ASSERT_LE(r.u_exec, p.u_max);
    ASSERT_GE(r.u_exec, split.base_u);
    ASSERT_EQ(r.penalty == 0.0, r.queue.empty());
    q = r.queue;
  }
}

TEST(QueueStep, AssignDrainsOldestFirst) {
  LsParams p;
  FlexQueue q;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  // Build a backlog, then drain with partial headroom and check order.
  for (std::int64_t t = 0; t < 50; ++t) {
    const auto split = split_arrivals(u(rng), p);
    q = queue_step(std::move(q), LsAction::Idle, split.base_u, split.flex_arrival, t, p).queue;
  }
  for (std::int64_t t = 50; t < 120; ++t) {
    const auto before = q.entries;
    const auto split = split_arrivals(u(rng), p);
    q = queue_step(std::move(q), LsAction::Assign, split.base_u, split.flex_arrival, t, p).queue;
    for (std::size_t i = 1; i < q.entries.size(); ++i) ASSERT_LE(q.entries[i - 1].arrival_step, q.entries[i].arrival_step);
    // Any entry left partially drained must be the oldest one.
    for (std::size_t i = 1; i < q.entries.size(); ++i) {
      for (const auto& b : before) {
        if (b.arrival_step == q.entries[i].arrival_step) {
          ASSERT_EQ(b.amount, q.entries[i].amount);
        }
      }
    }
  }
}

TEST(QueueStep, InfiniteDeadlinePerpetualIdleAccumulatesAllArrivals) {
  LsParams p;
  p.deadline_hours = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FlexQueue q;
  WorkAmount arrived;
  for (std::int64_t t = 0; t < 5000; ++t) {
    const auto split = split_arrivals(u(rng), p);
    arrived += WorkAmount::from_units(split.flex_arrival);
    const auto r = queue_step(std::move(q), LsAction::Idle, split.base_u, split.flex_arrival, t, p);
    ASSERT_EQ(r.executed.quanta(), 0);
    q = r.queue;
  }
  EXPECT_EQ(q.total(), arrived);
}

TEST(WorkAmount, ArithmeticIsExact) {
  WorkAmount a = WorkAmount::from_units(0.1);
  WorkAmount s;
  for (int i = 0; i < 10; ++i) s += a;
  EXPECT_EQ(s, WorkAmount::from_units(1.0));
  EXPECT_EQ((s - a - a).quanta(), WorkAmount::from_units(0.8).quanta());
}
