#include <gtest/gtest.h>

#include "eskin/duplex/scripted.hpp"

using namespace eskin::duplex;

TEST(Scripted, HappyPathReachesTarget) {
  RunConfig cfg;
  cfg.seed = 1;
  auto r = run_script(happy_path_script(1.0), cfg);
  EXPECT_TRUE(r.completed);
  EXPECT_EQ(r.final_stage, Stage::confirm);
  EXPECT_TRUE(r.within_tolerance(0.05)) << r.final_mass_g;
  EXPECT_TRUE(r.auto_stopped);
  EXPECT_FALSE(r.safe_stopped);
  EXPECT_TRUE(r.replay_matches);
  EXPECT_EQ(r.decode_errors, 0u);
  EXPECT_GE(r.collisions_in_active_stage, 1u);
  EXPECT_EQ(r.cues_received, r.collisions_in_active_stage);
}

TEST(Scripted, SameSeedSameLog) {
  RunConfig cfg;
  cfg.seed = 77;
  auto a = run_script(happy_path_script(1.5), cfg);
  auto b = run_script(happy_path_script(1.5), cfg);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.final_mass_g, b.final_mass_g);
}

TEST(Scripted, DisconnectSafeStops) {
  auto script = parse_script(R"({"steps":[
    {"op":"target","grams":1.0},
    {"op":"slide","from":0,"to":1},
    {"op":"disconnect"},
    {"op":"wait","ms":500}]})");
  auto r = run_script(script, RunConfig{});
  EXPECT_TRUE(r.safe_stopped);
  EXPECT_TRUE(r.robot_halted);
  EXPECT_EQ(r.final_stage, Stage::approach);
}

TEST(Scripted, AwaitTimeoutReportsStep) {
  auto script = parse_script(R"({"steps":[{"op":"await","stage":6,"timeout_ms":200}]})");
  auto r = run_script(script, RunConfig{});
  EXPECT_FALSE(r.completed);
  ASSERT_TRUE(r.failed_step);
  EXPECT_EQ(*r.failed_step, 0u);
}

TEST(ScriptJson, RejectsUnknownKeys) {
  EXPECT_THROW(parse_script(R"({"steps":[],"speed":2})"), std::invalid_argument);
  EXPECT_THROW(parse_script(R"({"steps":[{"op":"press","region":1,"force":3}]})"), std::invalid_argument);
  EXPECT_THROW(parse_script(R"({"steps":[{"op":"jump"}]})"), std::invalid_argument);
  EXPECT_THROW(parse_script(R"({"steps":[{"op":"press","region":1,"repeat":0}]})"), std::invalid_argument);
}

TEST(ScriptJson, RoundTrip) {
  auto s = happy_path_script(2.0);
  auto again = parse_script(script_to_json(s));
  EXPECT_EQ(script_to_json(again), script_to_json(s));
  EXPECT_EQ(again.steps.size(), s.steps.size());
}

TEST(ScriptJson, RepeatExpands) {
  auto s = parse_script(R"({"steps":[{"op":"press","region":2,"repeat":4}]})");
  ASSERT_EQ(s.steps.size(), 4u);
  EXPECT_EQ(std::get<PressStep>(s.steps[3]).region, 2u);
}
