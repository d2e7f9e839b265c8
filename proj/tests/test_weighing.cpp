#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "eskin/weighing.hpp"

using namespace eskin;
using namespace eskin::weighing;

TEST(Epsilon, HandFixtures) {
  std::vector<double> a{0.0, 0.5, 0.5, 1.0};
  EXPECT_NEAR(epsilon(a, 1), 0.5, 1e-12);
  std::vector<double> b{0.0, 0.2, 0.4, 0.6};
  EXPECT_NEAR(epsilon(b, 2), 0.4, 1e-12);
}

TEST(Epsilon, ConstantTraceHasNoNonzeroDifferences) {
  std::vector<double> c{1.0, 1.0, 1.0};
  EXPECT_THROW(epsilon(c, 1), NoNonzeroDifferences);
}

TEST(Epsilon, RejectsBadInterval) {
  std::vector<double> c{0.0, 1.0};
  EXPECT_THROW(epsilon(c, 0), std::invalid_argument);
  EXPECT_THROW(epsilon(c, 2), std::invalid_argument);
}

TEST(Step, FlatSpoonReleasesNothing) {
  std::mt19937_64 rng(1);
  for (const auto& m : {flour(), sugar(), sesame()}) {
    SpoonState s{0.0, grams_to_ug(5.0)};
    for (double v : {0.0, 0.5, 1.0}) {
      auto r = step(s, m, v, 0.05, rng);
      EXPECT_EQ(r.released_ug, 0) << m.name;
      EXPECT_EQ(r.state.load_ug, s.load_ug);
    }
  }
}

TEST(Step, ConservesMassExactlyAndEmptiesSpoon) {
  std::mt19937_64 rng(2);
  for (const auto& m : {flour(), sugar(), sesame()}) {
    SpoonState s{90.0, grams_to_ug(5.0)};
    std::int64_t out = 0;
    for (int i = 0; i < 20000 && s.load_ug > 0; ++i) {
      auto r = step(s, m, 0.3, 0.05, rng);
      ASSERT_GE(r.released_ug, 0);
      ASSERT_EQ(r.released_ug + r.state.load_ug, s.load_ug);
      out += r.released_ug;
      s = r.state;
    }
    EXPECT_EQ(out, grams_to_ug(5.0)) << m.name;
    EXPECT_EQ(s.load_ug, 0);
  }
}

TEST(Step, RejectsNonPositiveDt) {
  std::mt19937_64 rng(0);
  EXPECT_THROW(step(SpoonState{45.0, 1000}, flour(), 0.0, 0.0, rng), std::invalid_argument);
}

TEST(Flow, MonotoneInTiltAndVibration) {
  for (const auto& m : {flour(), sugar(), sesame()}) {
    double prev = -1.0;
    for (double t = 0.0; t <= 90.0; t += 5.0) {
      double f = continuous_flow_gps(m, t, 0.5);
      EXPECT_GE(f, prev);
      prev = f;
    }
    prev = -1.0;
    double prev_clump = 1e300;
    for (double v = 0.0; v <= 1.0; v += 0.1) {
      double f = continuous_flow_gps(m, 60.0, v);
      double c = clump_rate(m, 60.0, v);
      EXPECT_GE(f, prev);
      EXPECT_LE(c, prev_clump);
      prev = f;
      prev_clump = c;
    }
    EXPECT_EQ(clump_rate(m, m.angle_of_repose_deg, 0.0), 0.0);
  }
}

TEST(Materials, DefaultsAndLookup) {
  EXPECT_DOUBLE_EQ(flour().angle_of_repose_deg, 45.0);
  EXPECT_DOUBLE_EQ(sesame().angle_of_repose_deg, 25.0);
  EXPECT_GT(flour().clump_rate_no_vib, sugar().clump_rate_no_vib);
  EXPECT_EQ(material_by_name("sugar").name, "sugar");
  EXPECT_THROW(material_by_name("salt"), std::invalid_argument);
  auto bad = flour();
  bad.angle_of_repose_deg = 95.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Tilt, RampHold) {
  auto t = TiltSchedule::ramp_hold(60.0, 2.0);
  EXPECT_DOUBLE_EQ(t.at(0.0), 0.0);
  EXPECT_DOUBLE_EQ(t.at(1.0), 30.0);
  EXPECT_DOUBLE_EQ(t.at(10.0), 60.0);
  EXPECT_THROW(TiltSchedule({{0.0, 10.0}, {0.0, 20.0}}), std::invalid_argument);
  EXPECT_THROW(TiltSchedule({{0.0, 100.0}}), std::invalid_argument);
}

TEST(Trial, ZeroLoadIsAllZero) {
  auto tr = run_trial(TiltSchedule::ramp_hold(90.0, 1.0), {}, flour(), 0.0, 1, 5.0);
  for (double m : tr.masses) EXPECT_EQ(m, 0.0);
}

TEST(Trial, DeterministicNondecreasingStartsAtZero) {
  auto prog = actuation::preset("n-motors", {4, 0.5, 0.0, 60000.0});
  auto a = run_trial(TiltSchedule::ramp_hold(90.0, 20.0), prog, flour(), 2.0, 9, 40.0);
  auto b = run_trial(TiltSchedule::ramp_hold(90.0, 20.0), prog, flour(), 2.0, 9, 40.0);
  EXPECT_EQ(a.masses, b.masses);
  ASSERT_FALSE(a.masses.empty());
  EXPECT_EQ(a.masses[0], 0.0);
  for (std::size_t i = 1; i < a.masses.size(); ++i) EXPECT_GE(a.masses[i], a.masses[i - 1]);
  EXPECT_EQ(a.masses.size(), 801u);
}

TEST(Trial, TimeToReach) {
  WeighTrace t{0.5, {0.0, 0.2, 0.6, 1.0}};
  EXPECT_DOUBLE_EQ(*t.time_to_reach(0.5), 1.0);
  EXPECT_FALSE(t.time_to_reach(2.0).has_value());
}

TEST(Trial, FlourClumpsShowAsJumps) {
  ResolutionConfig cfg;
  auto r = resolution_experiment(flour(), 20, cfg);
  double half = flour().clump_mass_mean_g / 2.0;
  std::size_t with_jump = 0;
  for (double m : r.max_step_still) with_jump += m >= half;
  EXPECT_EQ(with_jump, 20u);
}

TEST(Resolution, VibrationShrinksEpsilonAndLargestStep) {
  auto r = resolution_experiment(flour(), 20);
  EXPECT_GE(r.ratio(), 5.0);
  EXPECT_GE(r.smaller_max_step_count(), 18u);
  for (double e : r.eps_still) EXPECT_GT(e, 0.0);
}

TEST(Resolution, SerialMatchesParallel) {
  auto a = resolution_experiment(flour(), 4, {}, Exec::serial);
  auto b = resolution_experiment(flour(), 4, {}, Exec::parallel);
  EXPECT_EQ(a.eps_still, b.eps_still);
  EXPECT_EQ(a.eps_vibrated, b.eps_vibrated);
}

TEST(NineCombo, LabelsAndShape) {
  auto f = nine_combo_experiment(sugar(), 2);
  ASSERT_EQ(f.size(), 9u);
  const double tilts[] = {30, 45, 50};
  const std::size_t motors[] = {2, 4, 8};
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(f[i].label, static_cast<int>(i + 1));
    EXPECT_EQ(f[i].tilt_deg, tilts[i / 3]);
    EXPECT_EQ(f[i].motors, motors[i % 3]);
    EXPECT_EQ(f[i].traces.size(), 2u);
  }
  EXPECT_LT(f[8].mean_t50(), f[0].mean_t50());
  EXPECT_THROW(nine_combo_experiment(sugar(), 0), std::invalid_argument);
}

TEST(NineCombo, TrendsHoldForSugarAndSesame) {
  for (const auto& m : {sugar(), sesame()}) {
    auto f = nine_combo_experiment(m, 20);
    auto rep = check_trends(f);
    EXPECT_TRUE(rep.ok) << m.name << ": " << (rep.failures.empty() ? "" : rep.failures[0]);
  }
}

TEST(NineCombo, JsonlHasOneLinePerTrial) {
  auto f = nine_combo_experiment(sesame(), 2);
  std::ostringstream out;
  write_combo_jsonl(out, f);
  std::istringstream in(out.str());
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 18u);
}
