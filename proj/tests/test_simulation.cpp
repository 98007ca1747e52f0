#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "visbench/errors.hpp"
#include "visbench/simulation.hpp"

using namespace visbench;
using namespace visbench::simulation;

TEST(DeviceSpec, ParsesAllOptions) {
  const auto d = parse_device_spec("logistic:0.3:15,cs=0.02,cs_slope=500,hue=2.5,lapse=0.01,guess=0.2,label=vp");
  EXPECT_EQ(d.kind, observer::ObserverKind::Logistic);
  EXPECT_EQ(d.acuity_threshold, 0.3);
  EXPECT_EQ(d.acuity_slope, 15.0);
  EXPECT_EQ(d.contrast_threshold, 0.02);
  EXPECT_EQ(d.contrast_slope, 500.0);
  EXPECT_EQ(d.hue_sigma, 2.5);
  EXPECT_EQ(d.lapse_rate, 0.01);
  EXPECT_EQ(d.guess_rate, 0.2);
  EXPECT_EQ(d.label, "vp");
  EXPECT_EQ(parse_device_spec("step:0.1").label, "step:0.1");
}

TEST(DeviceSpec, RejectsMalformed) {
  for (const char* bad : {"step", "walk:0.1", "step:x", "step:0.1,bogus=1", "step:0.1,cs", "step:0.1,cs=1.5",
                          "step:0.1,hue=-1", "logistic:0.1:0", "step:0.1,label="}) {
    EXPECT_THROW(parse_device_spec(bad), ValidationError) << bad;
  }
}

TEST(LightSpec, ParsesAndValidates) {
  const auto l = parse_light_spec("low:117:0.1");
  EXPECT_EQ(l.light.label, "low");
  EXPECT_EQ(l.light.illuminance_lux, 117.0);
  EXPECT_EQ(l.shift, 0.1);
  EXPECT_EQ(parse_light_spec("normal:572").shift, 0.0);
  EXPECT_THROW(parse_light_spec("dark:0"), ValidationError);
  EXPECT_THROW(parse_light_spec(":5"), ValidationError);
  EXPECT_THROW(parse_light_spec("a:1:2:3"), ValidationError);
}

TEST(Observers, LightShiftWorsensEveryMetric) {
  const auto d = parse_device_spec("step:0.2,cs=0.02,hue=2");
  const auto base = observers_for(d, parse_light_spec("n:500"), 0.0, 1);
  const auto dim = observers_for(d, parse_light_spec("l:100:0.1"), 0.0, 1);
  EXPECT_NEAR(dim.acuity.true_threshold - base.acuity.true_threshold, 0.1, 1e-12);
  EXPECT_NEAR(dim.contrast.true_threshold / base.contrast.true_threshold, std::pow(10.0, 0.1), 1e-12);
  EXPECT_NEAR(dim.hue_sigma / base.hue_sigma, std::pow(10.0, 0.1), 1e-12);
  EXPECT_EQ(base.acuity.guess_rate, 0.25);
  EXPECT_EQ(base.contrast.guess_rate, 0.01);
  EXPECT_NE(base.acuity.seed, base.contrast.seed);
}

TEST(Simulate, DeterministicForSeed) {
  SimulationConfig c;
  c.devices = {parse_device_spec("logistic:0.2,label=a"), parse_device_spec("logistic:0.5,cs=0.05,label=b")};
  c.lights = {parse_light_spec("normal:572"), parse_light_spec("low:117:0.1")};
  c.sessions = 4;
  c.seed = 9;
  c.participant_sd = 0.05;
  const auto x = simulate(c), y = simulate(c);
  EXPECT_EQ(x.rows, y.rows);
  ASSERT_EQ(x.sessions.size(), 4u);
  for (std::size_t i = 0; i < x.sessions.size(); ++i) EXPECT_EQ(x.sessions[i].records, y.sessions[i].records);
  // 2 devices x 3 tests per session.
  EXPECT_EQ(x.rows.size(), 4u * 2u * 3u);
  EXPECT_EQ(x.sessions[0].plan.conditions.front().light_level.label, "normal");
  EXPECT_EQ(x.sessions[1].plan.conditions.front().light_level.label, "low");
  c.seed = 10;
  EXPECT_NE(simulate(c).rows, x.rows);
}

TEST(Simulate, StepObserverAcuityIsAccurate) {
  SimulationConfig c;
  c.devices = {parse_device_spec("step:0.3,guess=0")};
  c.tests = {session::TestKind::Acuity};
  c.sessions = 20;
  c.seed = 7;
  const auto out = simulate(c);
  ASSERT_EQ(out.rows.size(), 20u);
  for (const auto& r : out.rows) {
    EXPECT_EQ(r.metric, "logMAR");
    EXPECT_NEAR(r.value, 0.3, 0.02);
  }
}

TEST(Simulate, InvalidConfig) {
  SimulationConfig c;
  EXPECT_THROW(simulate(c), ValidationError);
  c.devices = {parse_device_spec("step:0.1,label=x"), parse_device_spec("step:0.2,label=x")};
  EXPECT_THROW(simulate(c), ValidationError);
  c.devices.pop_back();
  c.sessions = 0;
  EXPECT_THROW(simulate(c), ValidationError);
}
