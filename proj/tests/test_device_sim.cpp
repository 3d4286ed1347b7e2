#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "exotune/datastore.hpp"
#include "exotune/device_sim.hpp"
#include "oracles.hpp"

using namespace exotune;

namespace {

SimConfig literal() { return SimConfig{}; }

SimConfig offset() {
  SimConfig c;
  c.speed_law = SpeedLaw::kOffset;
  return c;
}

VirtualUserConfig quiet_user(Task task) {
  auto u = VirtualUserConfig::for_task(task);
  u.noise_std = 0.0;
  return u;
}

}  // namespace

TEST(JointSpeed, WorkedExamples) {
  EXPECT_EQ(joint_speed(60, 10, {30, 30}, literal()), 50.0);
  EXPECT_EQ(joint_speed(40, 25, {20, 20}, literal()), 0.0);
  SimConfig fast;
  fast.k_p = 3.0;
  EXPECT_EQ(joint_speed(10, 80, {30, 25}, fast), -100.0);
  EXPECT_EQ(joint_speed(60, 10, {30, 30}, offset()), 20.0);
}

TEST(JointSpeed, EffortTieIsIdle) {
  for (double e = 0; e <= 100; e += 12.5) EXPECT_EQ(joint_speed(e, e, {20, 20}, literal()), 0.0);
}

TEST(JointSpeed, ThresholdBoundaryIsIdle) {
  EXPECT_EQ(joint_speed(50, 20, {30, 45}, literal()), 0.0);  // dE == th_b
  EXPECT_GT(joint_speed(50, 20.0 - 1e-9, {30, 45}, literal()), 0.0);
}

TEST(JointSpeed, JumpAtThresholdDependsOnLaw) {
  const double th = 30.0, eps = 1e-9;
  // paper-literal jumps from 0 to k_p * th; offset is continuous.
  EXPECT_NEAR(joint_speed(th + eps, 0, {th, th}, literal()), th, 1e-6);
  EXPECT_NEAR(joint_speed(th + eps, 0, {th, th}, offset()), 0.0, 1e-6);
  SimConfig fast = literal();
  fast.k_p = 2.0;
  EXPECT_NEAR(joint_speed(th + eps, 0, {th, th}, fast), 2.0 * th, 1e-6);
}

TEST(JointSpeed, RegionsMatchOracleAndAreAntisymmetric) {
  for (auto cfg : {literal(), offset()}) {
    const bool off = cfg.speed_law == SpeedLaw::kOffset;
    for (int eb = 0; eb <= 100; eb += 3) {
      for (int et = 0; et <= 100; et += 3) {
        for (int tb = 20; tb <= 50; tb += 10) {
          for (int tt = 20; tt <= 50; tt += 15) {
            const double s = joint_speed(eb, et, {double(tb), double(tt)}, cfg);
            EXPECT_EQ(s, oracle::speed(eb, et, tb, tt, 1.0, off));
            EXPECT_EQ(joint_speed(et, eb, {double(tt), double(tb)}, cfg), -s);
            EXPECT_LE(std::abs(s), 100.0);
          }
        }
      }
    }
  }
}

TEST(JointSpeed, RejectsNonFiniteEffort) {
  EXPECT_THROW(joint_speed(std::nan(""), 0, {20, 20}, literal()), std::invalid_argument);
}

TEST(StepSim, IntegratesAndClamps) {
  SimState s;
  s.obs.angle = 60.0;
  auto n = step_sim(s, {30, 30}, 60, 10, literal());  // speed +50
  EXPECT_NEAR(n.obs.angle - 60.0, 0.9, 1e-12);
  EXPECT_EQ(n.obs.effort_biceps, 60.0);
  EXPECT_EQ(n.obs.effort_triceps, 10.0);
  EXPECT_DOUBLE_EQ(n.time, 0.02);

  n = step_sim(s, {30, 30}, 40, 25, literal());  // idle
  EXPECT_EQ(n.obs.angle, 60.0);

  s.obs.angle = 130.0;
  EXPECT_EQ(step_sim(s, {20, 20}, 100, 0, literal()).obs.angle, 130.0);
  s.obs.angle = 0.0;
  EXPECT_EQ(step_sim(s, {20, 20}, 0, 100, literal()).obs.angle, 0.0);
}

TEST(VirtualUser, DeadbandAndDirectFormula) {
  VirtualUserConfig u = quiet_user(Task::kVertical);
  u.co_contraction = 10.0;
  u.gain = 2.0;
  SimState s;
  // desired(0) = angle_low; put the arm 20 degrees below / above it.
  const double desired = u.trajectory.desired_angle(0.0);
  VirtualUser person(u, 0);
  s.obs.angle = desired;
  auto [eb0, et0] = person.efforts(s, 0.0);
  EXPECT_EQ(eb0, 10.0);
  EXPECT_EQ(et0, 10.0);
  s.obs.angle = desired - 20.0;
  auto [eb1, et1] = person.efforts(s, 0.0);
  EXPECT_DOUBLE_EQ(eb1, 50.0);
  EXPECT_EQ(et1, 10.0);
  s.obs.angle = desired + 20.0;
  auto [eb2, et2] = person.efforts(s, 0.0);
  EXPECT_EQ(eb2, 10.0);
  EXPECT_DOUBLE_EQ(et2, 50.0);
  s.obs.angle = desired - 1.5;  // inside the 2 degree deadband
  auto [eb3, et3] = person.efforts(s, 0.0);
  EXPECT_EQ(eb3, 10.0);
  EXPECT_EQ(et3, 10.0);
}

TEST(VirtualUser, EffortsClippedAndDeterministic) {
  VirtualUserConfig u = VirtualUserConfig::for_task(Task::kHorizontal);
  u.noise_std = 30.0;
  u.gain = 10.0;
  VirtualUser a(u, 5), b(u, 5);
  SimState s;
  for (int i = 0; i < 2000; ++i) {
    s.obs.angle = (i * 7) % 131;
    const auto ea = a.efforts(s, i * 0.02);
    const auto eb = b.efforts(s, i * 0.02);
    EXPECT_EQ(ea, eb);
    EXPECT_GE(ea.first, 0.0);
    EXPECT_LE(ea.first, 100.0);
    EXPECT_GE(ea.second, 0.0);
    EXPECT_LE(ea.second, 100.0);
  }
}

TEST(VirtualUser, TaskDeterminesDominantMuscle) {
  const SimConfig sim;
  const RewardConfig rc;
  auto mean_efforts = [&](Task task) {
    const auto log = rollout_episode(ThresholdAction{30, 30}, VirtualUserConfig::for_task(task), sim, rc, 40.0, 3);
    double b = 0.0, t = 0.0;
    for (const auto& s : log.steps) {
      b += s.state.effort_biceps;
      t += s.state.effort_triceps;
    }
    return std::pair(b, t);
  };
  const auto [vb, vt] = mean_efforts(Task::kVertical);
  EXPECT_GT(vb, vt);
  const auto [hb, ht] = mean_efforts(Task::kHorizontal);
  EXPECT_GT(ht, hb);
}

TEST(Trajectory, PeriodicAndBounded) {
  for (Task task : {Task::kVertical, Task::kHorizontal}) {
    for (bool smooth : {false, true}) {
      Trajectory tr = default_trajectory(task);
      tr.smooth = smooth;
      EXPECT_DOUBLE_EQ(tr.desired_angle(0.0), tr.angle_low);
      EXPECT_NEAR(tr.desired_angle(tr.rise_seconds), tr.angle_high, 1e-9);
      for (double t = 0; t < 3 * tr.period(); t += 0.137) {
        EXPECT_GE(tr.desired_angle(t), tr.angle_low - 1e-12);
        EXPECT_LE(tr.desired_angle(t), tr.angle_high + 1e-12);
        EXPECT_NEAR(tr.desired_angle(t), tr.desired_angle(t + tr.period()), 1e-9);
      }
    }
  }
}

TEST(Rollout, LengthDoneFlagAndDeterminism) {
  const SimConfig sim;
  const RewardConfig rc;
  const auto user = VirtualUserConfig::for_task(Task::kVertical);
  const auto a = rollout_episode(ThresholdAction{25, 35}, user, sim, rc, 40.0, 9);
  const auto b = rollout_episode(ThresholdAction{25, 35}, user, sim, rc, 40.0, 9);
  ASSERT_EQ(a.steps.size(), 2000u);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].done, i + 1 == a.steps.size());
    EXPECT_EQ(a.steps[i].state, b.steps[i].state);
    EXPECT_EQ(a.steps[i].next_state, b.steps[i].next_state);
    EXPECT_EQ(a.steps[i].reward, b.steps[i].reward);
    EXPECT_EQ(a.steps[i].step, static_cast<std::int64_t>(i));
    if (i > 0) EXPECT_EQ(a.steps[i].state, a.steps[i - 1].next_state);
  }
  const auto c = rollout_episode(ThresholdAction{25, 35}, user, sim, rc, 40.0, 10);
  EXPECT_NE(a.steps[10].state, c.steps[10].state);
}

TEST(Rollout, WeakUserWithHighThresholdsNeverMoves) {
  auto user = quiet_user(Task::kVertical);
  user.gain = 0.4;  // max dE = 0.4 * 90 < 50
  const auto log = rollout_episode(ThresholdAction{50, 50}, user, SimConfig{}, RewardConfig{}, 40.0, 1);
  const double start = log.steps.front().state.angle;
  for (const auto& s : log.steps) {
    EXPECT_EQ(s.speed, 0.0);
    EXPECT_EQ(s.next_state.angle, start);
  }
}

TEST(Rollout, AngleStaysWithinLimits) {
  SimConfig sim;
  sim.k_p = 5.0;
  auto user = VirtualUserConfig::for_task(Task::kHorizontal);
  user.trajectory.angle_low = 0.0;
  user.trajectory.angle_high = 130.0;
  user.noise_std = 10.0;
  const auto log = rollout_episode(ThresholdAction{20, 20}, user, sim, RewardConfig{}, 30.0, 4);
  for (const auto& s : log.steps) {
    EXPECT_GE(s.next_state.angle, sim.angle_min);
    EXPECT_LE(s.next_state.angle, sim.angle_max);
  }
}

TEST(Rollout, PolicySeesCurrentState) {
  const auto user = VirtualUserConfig::for_task(Task::kVertical);
  std::vector<double> seen;
  const auto log = rollout_episode(
      [&](const SimState& s) {
        seen.push_back(s.obs.angle);
        return ThresholdAction{20.0 + std::fmod(s.time * 10.0, 30.0), 35.0};
      },
      user, SimConfig{}, RewardConfig{}, 2.0, 2);
  ASSERT_EQ(seen.size(), log.steps.size());
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], log.steps[i].state.angle);
}

TEST(Grid, ValuesAndParsing) {
  EXPECT_EQ(GridSpec{}.values(), (std::vector<double>{20, 25, 30, 35, 40, 45, 50}));
  EXPECT_EQ(GridSpec{}.cell_count(), 49u);
  const auto g = GridSpec::parse("20:50:15");
  EXPECT_EQ(g.values(), (std::vector<double>{20, 35, 50}));
  EXPECT_EQ(g.cell_count(), 9u);
  EXPECT_EQ(GridSpec::parse(g.to_string()).values(), g.values());
  EXPECT_EQ(GridSpec::parse("30:30:5").cell_count(), 1u);
  EXPECT_THROW(GridSpec::parse("20:50"), std::invalid_argument);
  EXPECT_THROW(GridSpec::parse("a:b:c"), std::invalid_argument);
  EXPECT_THROW(GridSpec::parse("10:50:5"), std::invalid_argument);
  EXPECT_THROW(GridSpec::parse("20:50:0"), std::invalid_argument);
}

TEST(Oracle, SingleCellIsArgmax) {
  const auto t = static_oracle(VirtualUserConfig::for_task(Task::kVertical), GridSpec::parse("25:25:5"),
                               SimConfig{}, RewardConfig{}, 2, 5.0, 1);
  ASSERT_EQ(t.cells.size(), 1u);
  EXPECT_EQ(t.best_index, 0u);
  EXPECT_EQ(t.best().action, (ThresholdAction{25, 25}));
}

TEST(Oracle, TiesGoToLexicographicallySmallerCell) {
  std::vector<OracleCell> cells(3);
  cells[0] = {{30, 20}, 0.5, 0, 0};
  cells[1] = {{25, 45}, 0.5, 0, 0};
  cells[2] = {{25, 40}, 0.4, 0, 0};
  EXPECT_EQ(best_cell(cells), 1u);
  cells[2].mean_reward = 0.5;
  EXPECT_EQ(best_cell(cells), 2u);
}

TEST(Oracle, DeterministicAndMatchesManualRollouts) {
  const auto user = VirtualUserConfig::for_task(Task::kHorizontal);
  const auto grid = GridSpec::parse("20:50:15");
  const RewardConfig rc;
  const auto a = static_oracle(user, grid, SimConfig{}, rc, 3, 4.0, 77);
  const auto b = static_oracle(user, grid, SimConfig{}, rc, 3, 4.0, 77);
  ASSERT_EQ(a.cells.size(), 9u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i].mean_reward, b.cells[i].mean_reward);
  // Independent recomputation of one cell: mean of per-step rewards.
  const auto& cell = a.cells[4];
  double total = 0.0;
  std::size_t n = 0;
  for (int e = 0; e < 3; ++e) {
    const auto log = rollout_episode(cell.action, user, SimConfig{}, rc, 4.0, episode_seed(77, e));
    double ep = 0.0;
    for (const auto& s : log.steps) {
      ep += oracle::reward(s.state.effort_biceps, s.state.effort_triceps, s.action.biceps, s.action.triceps, 10.0);
    }
    total += ep / static_cast<double>(log.steps.size());
    ++n;
  }
  EXPECT_NEAR(cell.mean_reward, total / static_cast<double>(n), 1e-12);
}

TEST(Oracle, VerticalFavoursLowBicepsThreshold) {
  const auto t = static_oracle(VirtualUserConfig::for_task(Task::kVertical), GridSpec{}, SimConfig{},
                               RewardConfig{}, 10, 40.0, 2024);
  EXPECT_LE(t.best().action.biceps, 30.0);
}

TEST(Oracle, HorizontalFavoursLowTricepsThreshold) {
  const auto t = static_oracle(VirtualUserConfig::for_task(Task::kHorizontal), GridSpec{}, SimConfig{},
                               RewardConfig{}, 10, 40.0, 2024);
  EXPECT_LE(t.best().action.triceps, 30.0);
}

TEST(Seeds, CellAndEpisodeSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t c = 0; c < 49; ++c) {
    for (std::uint64_t e = 0; e < 10; ++e) seen.insert(episode_seed(cell_seed(7, c), e));
  }
  EXPECT_EQ(seen.size(), 490u);
}
