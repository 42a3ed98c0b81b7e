#include <gtest/gtest.h>

#include <cmath>

#include "geocon/cone.hpp"
#include "geocon/ocp.hpp"
#include "support.hpp"

using namespace geocon;

namespace {

const std::vector<std::string> kXYZ{"x1", "x2", "x3"};

ControlAffineSystem martinet() {
  return ControlAffineSystem(kXYZ, {"u1", "u2"}, VectorField::zero(3),
                             {VectorField::parse({"1", "0", "0"}, kXYZ), VectorField::parse({"0", "1", "x1^2"}, kXYZ)},
                             {});
}

ControlAffineSystem linear1d() {
  return ControlAffineSystem({"x"}, {}, VectorField::parse({"x"}, {"x"}), {}, {});
}

Trajectory martinet_reference() {
  return simulate_reference(martinet(), ControlSchedule::constant({0, 1}), {0, 0, 0}, 0, 1);
}

Biextremal martinet_biextremal(const std::vector<double>& lambda0, const std::vector<double>& stops = {}) {
  return integrate_biextremal(HamiltonianModel(martinet()), {0, 0, 0}, lambda0, ControlSchedule::constant({0, 1}), 0,
                              1, kDefaultStep, stops);
}

Cone martinet_cone() {
  return assemble_cone(martinet(), martinet_reference(), 0.5, {0.1, 0.3, 0.5});
}

const AuditCondition& condition(const AuditReport& rep, const std::string& id) {
  for (const auto& c : rep.conditions)
    if (c.id == id) return c;
  throw std::runtime_error("missing condition " + id);
}

}  // namespace

TEST(ControlAffineSystem, Validation) {
  EXPECT_NO_THROW(martinet());
  EXPECT_NO_THROW(linear1d());
  EXPECT_THROW(ControlAffineSystem(kXYZ, {}, VectorField::zero(3), {VectorField::parse({"1", "0"}, {"a", "b"})}, {}),
               DimensionError);
  EXPECT_THROW(ControlAffineSystem({"x"}, {}, VectorField::zero(1), {VectorField::parse({"1"}, {"x"})},
                                   {Bounds{1.0, -1.0}}),
               InvalidArgument);
  const ControlAffineSystem boxed({"x"}, {}, VectorField::zero(1), {VectorField::parse({"1"}, {"x"})},
                                  {Bounds{-1.0, 1.0}});
  EXPECT_TRUE(boxed.contains_zero());
  EXPECT_FALSE(boxed.admissible({1.0}));
}

TEST(ExtendedSystem, CostComponent) {
  const auto time_opt = ExtendedSystem::parse(martinet(), "1");
  const Point x{0.2, 0.3, 0.4};
  EXPECT_DOUBLE_EQ(time_opt.cost_value(x, {0.5, -0.5}), 1.0);
  const auto quad = ExtendedSystem::parse(martinet(), "0.5*(u1^2 + u2^2)");
  EXPECT_DOUBLE_EQ(quad.cost_value(x, {1.0, 2.0}), 2.5);
  EXPECT_EQ(quad.dim(), 4u);
  const auto a = quad.eval(std::vector<double>{5.0, 0.2, 0.3, 0.4}, {1.0, 2.0});
  const auto b = quad.eval(std::vector<double>{0.0, 0.2, 0.3, 0.4}, {1.0, 2.0});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
  EXPECT_DOUBLE_EQ(a[0], 2.5);
}

TEST(Hamiltonian, Examples) {
  EXPECT_DOUBLE_EQ(hamiltonian(Covector{{0, 0, 0}, {0, 0, 1}}, {0, 0, 0}, {0, 1}, martinet()), 0.0);
  EXPECT_DOUBLE_EQ(hamiltonian(Covector{{0, 0, 0}, {0, 0, 0}}, {0.3, 0.1, 0}, {1, 1}, martinet()), 0.0);
  const HamiltonianModel ext(ExtendedSystem::parse(martinet(), "0.5*(u1^2 + u2^2)"));
  EXPECT_DOUBLE_EQ(ext.hamiltonian(std::vector<double>{-1, 0, 0, 0}, std::vector<double>{0, 0, 0}, {1, 0}), -0.5);
}

TEST(HamiltonRhs, Examples) {
  const std::vector<std::string> xs{"x", "y"};
  const HamiltonianModel drift(ControlAffineSystem(xs, {}, VectorField::parse({"1", "0"}, xs), {}, {}));
  const auto d = hamilton_rhs(drift, {0.3, 0.4, 2.0, -1.0}, {});
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  EXPECT_DOUBLE_EQ(d[2], 0.0);
  EXPECT_DOUBLE_EQ(d[3], 0.0);
  const auto l = hamilton_rhs(HamiltonianModel(linear1d()), {2.0, 3.0}, {});
  EXPECT_DOUBLE_EQ(l[0], 2.0);
  EXPECT_DOUBLE_EQ(l[1], -3.0);
  const HamiltonianModel ext(ExtendedSystem::parse(martinet(), "0.5*(u1^2 + (1 + x1)^2*u2^2)"));
  const auto e = hamilton_rhs(ext, {0.0, 0.3, 0.1, 0.2, -1.0, 0.4, 0.5, 0.6}, {0.7, 0.8});
  EXPECT_EQ(e[4], 0.0);
}

TEST(IntegrateBiextremal, MartinetAbnormalLine) {
  const Biextremal bx = martinet_biextremal({0, 0, 1});
  ASSERT_FALSE(bx.times.empty());
  for (std::size_t i = 0; i < bx.times.size(); ++i) {
    EXPECT_NEAR(bx.states[i][0], 0.0, 1e-14);
    EXPECT_NEAR(bx.states[i][1], bx.times[i], 1e-12);
    EXPECT_NEAR(bx.states[i][2], 0.0, 1e-14);
    EXPECT_NEAR(bx.momenta[i][0], 0.0, 1e-14);
    EXPECT_NEAR(bx.momenta[i][1], 0.0, 1e-14);
    EXPECT_NEAR(bx.momenta[i][2], 1.0, 1e-14);
  }
  EXPECT_DOUBLE_EQ(bx.times.back(), 1.0);
}

TEST(IntegrateBiextremal, ZeroDuration) {
  const Biextremal bx = integrate_biextremal(HamiltonianModel(martinet()), {0, 0, 0}, {0.3, 0.2, 1},
                                             ControlSchedule::constant({0, 1}), 0.5, 0.5);
  ASSERT_EQ(bx.times.size(), 1u);
  EXPECT_EQ(bx.momenta[0], (std::vector<double>{0.3, 0.2, 1}));
}

TEST(IntegrateBiextremal, LinearAdjointClosedForm) {
  const Biextremal bx =
      integrate_biextremal(HamiltonianModel(linear1d()), {1.0}, {1.0}, ControlSchedule::constant({}), 0, 1);
  EXPECT_NEAR(bx.momenta.back()[0], std::exp(-1.0), 1e-9);
  EXPECT_NEAR(bx.states.back()[0], std::exp(1.0), 1e-9);
}

TEST(IntegrateBiextremal, LandsOnBreakpointsAndStops) {
  const auto sched = ControlSchedule::piecewise({{0.0, {0, 1}}, {0.3333, {1, 0}}});
  const Biextremal bx = integrate_biextremal(HamiltonianModel(martinet()), {0, 0, 0}, {0, 0, 1}, sched, 0, 1,
                                             kDefaultStep, {0.77777});
  EXPECT_TRUE(bx.sample_at(0.3333));
  EXPECT_TRUE(bx.sample_at(0.77777));
}

TEST(IntegrateBiextremal, Errors) {
  EXPECT_THROW(martinet_biextremal({0, 0, 0}), DegeneracyError);
  const HamiltonianModel ext(ExtendedSystem::parse(martinet(), "0.5*(u1^2 + u2^2)"));
  EXPECT_THROW(integrate_biextremal(ext, {0, 0, 0}, {1, 0, 0, 1}, ControlSchedule::constant({0, 1}), 0, 1),
               InvariantViolation);
  EXPECT_THROW(martinet_biextremal({0, 1}), DimensionError);
}

TEST(IntegrateBiextremal, ExtendedCostMultiplierExactlyConstant) {
  const HamiltonianModel ext(ExtendedSystem::parse(martinet(), "0.5*(u1^2 + (1 + x1)^2*u2^2)"));
  const Biextremal bx = integrate_biextremal(ext, {0.1, 0.2, 0.3}, {-0.7, 0.2, -0.4, 0.9},
                                             ControlSchedule::constant({0.5, 1}), 0, 1);
  ASSERT_EQ(bx.states.front().size(), 4u);
  for (const auto& lam : bx.momenta) EXPECT_EQ(lam[0], -0.7);
}

TEST(ClassifyExtremal, Kinds) {
  const HamiltonianModel ext(ExtendedSystem::parse(martinet(), "0.5*(u1^2 + u2^2)"));
  const auto sched = ControlSchedule::constant({0, 1});
  const auto normal = classify_extremal(integrate_biextremal(ext, {0, 0, 0}, {-1, 0, 1, 0}, sched, 0, 1));
  EXPECT_EQ(normal.kind, ExtremalKind::Normal);
  EXPECT_EQ(normal.verdict, "normal");
  const auto abnormal = classify_extremal(integrate_biextremal(ext, {0, 0, 0}, {0, 0, 0, 1}, sched, 0, 1));
  EXPECT_EQ(abnormal.kind, ExtremalKind::Abnormal);
  EXPECT_EQ(abnormal.verdict, "abnormal");
  EXPECT_THROW(classify_extremal(martinet_biextremal({0, 0, 1})), InvalidArgument);
}

TEST(ClassifyExtremal, NormalLiftSearchFlatVersusWeightedCost) {
  const Trajectory ref = martinet_reference();
  const auto sched = ControlSchedule::constant({0, 1});

  const ExtendedSystem flat = ExtendedSystem::parse(martinet(), "0.5*(u1^2 + u2^2)");
  const auto found = search_normal_lift(flat, ref);
  EXPECT_EQ(found.points_per_axis, 10u);
  EXPECT_EQ(found.tried, 1000u);
  EXPECT_GT(found.satisfying, 0u);
  ASSERT_TRUE(found.witness);
  EXPECT_EQ((*found.witness)[0], -1.0);
  const auto c1 = classify_extremal(integrate_biextremal(HamiltonianModel(flat), {0, 0, 0}, {0, 0, 0, 1}, sched, 0, 1),
                                    found);
  EXPECT_EQ(c1.verdict, "abnormal; normal lift found (not strictly abnormal)");
  EXPECT_FALSE(c1.inconclusive);

  const ExtendedSystem weighted = ExtendedSystem::parse(martinet(), "0.5*(u1^2 + (1 + x1)^2*u2^2)");
  const auto none = search_normal_lift(weighted, ref);
  EXPECT_EQ(none.tried, 1000u);
  EXPECT_EQ(none.satisfying, 0u);
  EXPECT_FALSE(none.witness);
  const auto c2 = classify_extremal(
      integrate_biextremal(HamiltonianModel(weighted), {0, 0, 0}, {0, 0, 0, 1}, sched, 0, 1), none);
  EXPECT_EQ(c2.verdict, "abnormal; normal lift not found (inconclusive)");
  EXPECT_TRUE(c2.inconclusive);
}

TEST(Audit, MartinetAbnormalPasses) {
  const Cone cone = martinet_cone();
  for (double sign : {1.0, -1.0}) {
    const Biextremal bx = martinet_biextremal({0, 0, sign}, {0.5});
    const AuditReport rep = audit_necessary_conditions(HamiltonianModel(martinet()), bx, cone, 0.5);
    ASSERT_EQ(rep.conditions.size(), 5u);
    EXPECT_TRUE(rep.all_pass()) << "sign " << sign;
    EXPECT_NEAR(rep.h_min, 0.0, 1e-9);
    EXPECT_NEAR(rep.h_max, 0.0, 1e-9);
  }
}

TEST(Audit, WrongCovectorFailsStationarity) {
  const Biextremal bx = martinet_biextremal({1, 0, 0}, {0.5});
  const AuditReport rep = audit_necessary_conditions(HamiltonianModel(martinet()), bx, martinet_cone(), 0.5);
  EXPECT_FALSE(condition(rep, "ii").pass);
  EXPECT_NEAR(condition(rep, "ii").value, 1.0, 1e-12);
  EXPECT_FALSE(condition(rep, "iii").pass);
  EXPECT_FALSE(rep.all_pass());
}

TEST(Audit, GridMaximizationOptional) {
  const Biextremal bx = martinet_biextremal({0, 0, 1}, {0.5});
  AuditOptions opt;
  opt.max_check_grid = std::vector<double>{-1, 0, 1};
  const AuditReport rep = audit_necessary_conditions(HamiltonianModel(martinet()), bx, martinet_cone(), 0.5, opt);
  ASSERT_TRUE(rep.grid_maximization);
  EXPECT_TRUE(rep.grid_maximization->pass);
}

TEST(Property, HamiltonianConservation) {
  oracle::Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = oracle::random_system(rng, 0, 0, true);
    Control u(sys.k());
    for (auto& v : u) v = oracle::uniform(rng, -1, 1);
    const Point x0 = oracle::random_point(rng, sys.m(), 0.2);
    std::vector<double> lam(sys.m());
    for (auto& v : lam) v = oracle::uniform(rng, -1, 1);
    const HamiltonianModel model(sys);
    const Biextremal bx = integrate_biextremal(model, x0, lam, ControlSchedule::constant(u), 0, 1);
    const double H0 = model.hamiltonian(bx.momenta.front(), bx.states.front(), u);
    double drift = 0.0;
    for (std::size_t i = 0; i < bx.times.size(); ++i)
      drift = std::max(drift, std::fabs(model.hamiltonian(bx.momenta[i], bx.states[i], u) - H0));
    EXPECT_LE(drift, 1e-8);
  }
}

TEST(Property, AdjointPairingInvariant) {
  oracle::Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = oracle::random_system(rng, 0, 0, true);
    Control u(sys.k());
    for (auto& v : u) v = oracle::uniform(rng, -1, 1);
    const Point x0 = oracle::random_point(rng, sys.m(), 0.2);
    std::vector<double> lam(sys.m()), w(sys.m());
    for (auto& v : lam) v = oracle::uniform(rng, -1, 1);
    for (auto& v : w) v = oracle::uniform(rng, -1, 1);
    const Biextremal bx = integrate_biextremal(HamiltonianModel(sys), x0, lam, ControlSchedule::constant(u), 0, 1);
    const TangentVector wt = pushforward_along_flow(sys.slice(u), 1.0, TangentVector{x0, w});
    EXPECT_NEAR(dot(bx.momenta.back(), wt.components), dot(lam, w), 1e-7);
  }
}

TEST(Property, DriftlessAbnormalHamiltonianVanishes) {
  const Biextremal bx = martinet_biextremal({0, 0, 1});
  const HamiltonianModel model(martinet());
  for (std::size_t i = 0; i < bx.times.size(); ++i)
    EXPECT_LE(std::fabs(model.hamiltonian(bx.momenta[i], bx.states[i], {0, 1})), 1e-9);
}
