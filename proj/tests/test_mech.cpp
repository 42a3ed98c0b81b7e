#include <gtest/gtest.h>

#include <cmath>

#include "geocon/mech.hpp"
#include "support.hpp"

using namespace geocon;

namespace {

ConnectionSpec polar() {
  return ConnectionSpec::parse({"r", "theta"}, {"vr", "vtheta"},
                               {{{"0", "0"}, {"0", "-r"}}, {{"0", "1/r"}, {"1/r", "0"}}});
}

std::vector<double> polar_spray_closed_form(const Point& y) {
  const double r = y[0], vr = y[2], vt = y[3];
  return {vr, vt, r * vt * vt, -2.0 * vr * vt / r};
}

std::vector<double> to_cartesian(const Point& y) {
  const double r = y[0], th = y[1], vr = y[2], vt = y[3];
  return {r * std::cos(th), r * std::sin(th), vr * std::cos(th) - r * vt * std::sin(th),
          vr * std::sin(th) + r * vt * std::cos(th)};
}

}  // namespace

TEST(Spray, FlatConnectionIsFreeMotion) {
  const VectorField Z = spray_from_christoffel(ConnectionSpec::flat({"x1", "x2"}, {"v1", "v2"}));
  EXPECT_LE(oracle::max_abs_diff(Z.eval<double>({0.1, 0.2, 1.5, -0.5}), {1.5, -0.5, 0, 0}), 0.0);
  EXPECT_TRUE(Z[2].is_zero());
  EXPECT_TRUE(Z[3].is_zero());
}

TEST(Spray, PolarMatchesClosedForm) {
  const VectorField Z = spray_from_christoffel(polar());
  oracle::Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Point y{oracle::uniform(rng, 0.5, 2), oracle::uniform(rng, -3, 3), oracle::uniform(rng, -1, 1),
                  oracle::uniform(rng, -1, 1)};
    EXPECT_LE(oracle::max_abs_diff(Z.eval<double>(y), polar_spray_closed_form(y)), 1e-14);
  }
}

TEST(Spray, PolarGeodesicsAreStraightLines) {
  const VectorField Z = spray_from_christoffel(polar());
  const Point y0{1.0, 0.3, 0.2, 0.5};
  const auto c0 = to_cartesian(y0);
  for (double T : {0.5, 1.0, 2.0}) {
    const Point y = flow<double>(Z, T, y0, 1e-3);
    const auto c = to_cartesian(y);
    EXPECT_NEAR(c[0], c0[0] + T * c0[2], 1e-6);
    EXPECT_NEAR(c[1], c0[1] + T * c0[3], 1e-6);
    EXPECT_NEAR(c[2], c0[2], 1e-6);
    EXPECT_NEAR(c[3], c0[3], 1e-6);
    EXPECT_LE(oracle::max_abs_diff(y, oracle::reference_flow(Z, T, y0)), 1e-8);
  }
}

TEST(Spray, PolarSpeedPreserved) {
  const VectorField Z = spray_from_christoffel(polar());
  auto speed2 = [](const Point& y) { return y[2] * y[2] + y[0] * y[0] * y[3] * y[3]; };
  const Point y0{1.2, -0.4, -0.3, 0.7};
  for (double T : {0.25, 0.75, 1.5}) EXPECT_NEAR(speed2(flow<double>(Z, T, y0, 1e-3)), speed2(y0), 1e-6);
}

TEST(VerticalLift, LiftsCommute) {
  oracle::Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    const VectorField a = vertical_lift(oracle::random_field(rng, 2));
    const VectorField b = vertical_lift(oracle::random_field(rng, 2));
    ASSERT_EQ(a.dim(), 4u);
    const Point y = oracle::random_point(rng, 4);
    EXPECT_LE(norm_inf(lie_bracket(a, b).eval<double>(y)), 1e-12);
    EXPECT_LE(norm_inf(oracle::fd_bracket(a, b, y)), 1e-7);
  }
}

TEST(VerticalLift, RejectsVelocityDependence) {
  EXPECT_THROW(vertical_lift(VectorField::parse({"x1", "x3"}, {"x1", "x2", "x3"})), InvalidArgument);
}

TEST(AccSystem, DoubleIntegrator) {
  const auto sys = build_acc_system(ConnectionSpec::flat({"x"}, {"v"}), {VectorField::parse({"1"}, {"x"})}, {"u"});
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({1.0}), {0.0, 1.0}, 0, 1);
  for (double t : {0.25, 0.5, 1.0}) {
    const Point y = state_at(sys, ref, t);
    EXPECT_NEAR(y[0], t + 0.5 * t * t, 1e-8);
    EXPECT_NEAR(y[1], 1.0 + t, 1e-8);
  }
}

TEST(AccSystem, InputDimensionMismatch) {
  EXPECT_THROW(build_acc_system(ConnectionSpec::flat({"x", "y"}, {"u", "w"}), {VectorField::parse({"1"}, {"x"})}),
               DimensionError);
}

TEST(Connection, AsymmetricChristoffelRejected) {
  EXPECT_THROW(ConnectionSpec::parse({"q1", "q2"}, {"w1", "w2"}, {{{"0", "q1"}, {"0", "0"}}, {{"0", "0"}, {"0", "0"}}}),
               InvalidArgument);
  EXPECT_THROW(ConnectionSpec::parse({"q1", "q2"}, {"w1", "w2"}, {{{"0", "0"}}, {{"0", "0"}, {"0", "0"}}}),
               DimensionError);
}

TEST(Generators, FlatConnectionIdentities) {
  const auto sys = build_acc_system(ConnectionSpec::flat({"x1", "x2"}, {"v1", "v2"}),
                                    {VectorField::parse({"1", "0"}, {"x1", "x2"})}, {"u1"});
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({0.0}), {0, 0, 1, 0.5}, 0, 1);
  const auto rep = mechanical_generators(sys, ref, 0.5);
  ASSERT_EQ(rep.identities.size(), 4u);
  for (const auto& c : rep.identities) EXPECT_LE(c.error, 1e-4) << c.name;
  EXPECT_LE(oracle::max_abs_diff(rep.z1[0].eval<double>(rep.point), {-1, 0, 0, 0}), 0.0);
  EXPECT_FALSE(rep.reductions.empty());
  EXPECT_TRUE(rep.all_pass());
}

TEST(Generators, PolarIdentities) {
  const auto sys = build_acc_system(polar(), {VectorField::parse({"1", "0"}, {"r", "theta"})}, {"u1"});
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({0.3}), {1, 0, 0.2, 0.5}, 0, 1);
  const auto rep = mechanical_generators(sys, ref, 0.5);
  for (const auto& c : rep.identities) EXPECT_LE(c.error, 1e-4) << c.name;
  EXPECT_TRUE(rep.all_pass());
}

TEST(Property, ReductionAtRandomPoints) {
  oracle::Rng rng(55);
  const auto sys = build_acc_system(polar(), {VectorField::parse({"1", "0"}, {"r", "theta"}),
                                              VectorField::parse({"0", "r"}, {"r", "theta"})},
                                    {"u1", "u2"});
  for (int i = 0; i < 10; ++i) {
    const Point y0{oracle::uniform(rng, 0.8, 1.5), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -0.3, 0.3),
                   oracle::uniform(rng, -0.3, 0.3)};
    const Control u{oracle::uniform(rng, -0.2, 0.2), oracle::uniform(rng, -0.2, 0.2)};
    const Trajectory ref = simulate_reference(sys, ControlSchedule::constant(u), y0, 0, 0.5);
    const auto rep = mechanical_generators(sys, ref, 0.25);
    ASSERT_FALSE(rep.reductions.empty());
    for (const auto& r : rep.reductions) EXPECT_LE(std::fabs(r.with_xi0 - r.with_spray), 1e-9);
  }
}
