#include <gtest/gtest.h>

#include <cmath>

#include "geocon/cone.hpp"
#include "geocon/lp.hpp"
#include "support.hpp"

using namespace geocon;

namespace {

Cone make_cone(std::size_t m, const std::vector<std::vector<double>>& gens) {
  Cone c(Point(m, 0.0));
  for (const auto& g : gens) c.add(g);
  return c;
}

std::vector<std::vector<double>> random_generators(oracle::Rng& rng, std::size_t m, std::size_t count) {
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> g(m);
    for (auto& v : g) v = nd(rng);
    out.push_back(g);
  }
  return out;
}

ControlAffineSystem martinet() {
  const std::vector<std::string> xs{"x1", "x2", "x3"};
  return ControlAffineSystem(xs, {"u1", "u2"}, VectorField::zero(3),
                             {VectorField::parse({"1", "0", "0"}, xs), VectorField::parse({"0", "1", "x1^2"}, xs)}, {});
}

}  // namespace

TEST(Lp, SmallMaximization) {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6.
  const auto r = lp::maximize({1, 1}, {{1, 2}, {3, 1}}, {4, 6});
  ASSERT_EQ(r.status, lp::Status::Optimal);
  EXPECT_NEAR(r.value, 2.8, 1e-12);
  EXPECT_NEAR(r.x[0], 1.6, 1e-12);
  EXPECT_NEAR(r.x[1], 1.2, 1e-12);
}

TEST(Lp, Unbounded) {
  EXPECT_EQ(lp::maximize({1, 0}, {{0, 1}}, {1}).status, lp::Status::Unbounded);
}

TEST(Cone, AddDeduplicatesAndSkipsZero) {
  Cone c(Point{0, 0});
  EXPECT_TRUE(c.add({1, 0}));
  EXPECT_FALSE(c.add({2, 0}));
  EXPECT_FALSE(c.add({0, 0}));
  EXPECT_TRUE(c.add({-1, 0}));
  EXPECT_EQ(c.size(), 2u);
  EXPECT_THROW(c.add({1, 0, 0}), DimensionError);
}

TEST(FindSupportingCovector, OrthogonalComplementTieBreak) {
  const auto rep = find_supporting_covector(make_cone(3, {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}}));
  ASSERT_TRUE(rep.feasible);
  ASSERT_TRUE(rep.covector);
  const auto& l = rep.covector->components;
  EXPECT_NEAR(l[0], 0.0, 1e-12);
  EXPECT_NEAR(l[1], 0.0, 1e-12);
  EXPECT_NEAR(l[2], 1.0, 1e-12);
  EXPECT_LE(std::fabs(rep.max_pairing), 1e-12);
  EXPECT_FALSE(rep.separating_margin);
}

TEST(FindSupportingCovector, PositiveSpanIsInfeasible) {
  for (std::size_t m = 1; m <= 4; ++m) {
    std::vector<std::vector<double>> gens;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> e(m, 0.0);
      e[i] = 1.0;
      gens.push_back(e);
      e[i] = -1.0;
      gens.push_back(e);
    }
    const auto rep = find_supporting_covector(make_cone(m, gens));
    EXPECT_FALSE(rep.feasible);
    EXPECT_FALSE(rep.covector);
  }
}

TEST(FindSupportingCovector, EmptyConeAnyCovector) {
  const auto rep = find_supporting_covector(Cone(Point{0, 0}));
  ASSERT_TRUE(rep.feasible);
  EXPECT_DOUBLE_EQ(norm_inf(rep.covector->components), 1.0);
}

TEST(FindSupportingCovector, DecreaseDirectionMaximizesMargin) {
  const Cone c = make_cone(2, {{1, 0}});
  const auto rep = find_supporting_covector(c, std::vector<double>{-1, 0});
  ASSERT_TRUE(rep.feasible);
  ASSERT_TRUE(rep.separating_margin);
  EXPECT_NEAR(*rep.separating_margin, 1.0, 1e-12);
  EXPECT_NEAR(rep.covector->components[0], -1.0, 1e-12);
}

TEST(AssembleCone, MartinetAbnormalLine) {
  const auto sys = martinet();
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({0, 1}), {0, 0, 0}, 0, 1);
  const Cone cone = assemble_cone(sys, ref, 1.0, {0.25, 0.5, 0.75, 1.0});
  ASSERT_FALSE(cone.empty());
  for (std::size_t i = 0; i < cone.size(); ++i) {
    EXPECT_EQ(cone.provenance()[i].order, 1);
    EXPECT_NEAR(cone.generators()[i][2], 0.0, 1e-9);
  }
  EXPECT_NEAR(cone.base()[1], 1.0, 1e-12);
  const auto rep = find_supporting_covector(cone);
  ASSERT_TRUE(rep.feasible);
  const auto& l = rep.covector->components;
  EXPECT_NEAR(l[0], 0.0, 1e-9);
  EXPECT_NEAR(l[1], 0.0, 1e-9);
  EXPECT_NEAR(std::fabs(l[2]), 1.0, 1e-9);
  EXPECT_LE(rep.max_pairing, 1e-9);
}

TEST(AssembleCone, ConstantDriftLeavesGeneratorsUnchanged) {
  const std::vector<std::string> xs{"x", "y"};
  const ControlAffineSystem sys(xs, {"u"}, VectorField::parse({"1", "0"}, xs), {VectorField::parse({"0", "1"}, xs)},
                                {});
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({0.0}), {0, 0}, 0, 1);
  const Cone early = assemble_cone(sys, ref, 1.0, {0.2});
  const Cone late = assemble_cone(sys, ref, 1.0, {1.0});
  ASSERT_EQ(early.size(), late.size());
  for (std::size_t i = 0; i < early.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(early.generators()[i][j], late.generators()[i][j], 1e-12);
}

TEST(AssembleCone, RejectsSampleTimesOutsideWindow) {
  const auto sys = martinet();
  const Trajectory ref = simulate_reference(sys, ControlSchedule::constant({0, 1}), {0, 0, 0}, 0, 1);
  EXPECT_THROW(assemble_cone(sys, ref, 0.5, {0.0}), InvalidArgument);
  EXPECT_THROW(assemble_cone(sys, ref, 0.5, {0.7}), InvalidArgument);
}

TEST(IsSupporting, Examples) {
  const Cone c = make_cone(2, {{1, 0}});
  const auto zero = is_supporting(Covector{{0, 0}, {0, 0}}, c);
  EXPECT_TRUE(zero.zero_covector);
  EXPECT_FALSE(zero.supporting);
  const auto neg = is_supporting(Covector{{0, 0}, {-1, 0}}, c);
  EXPECT_TRUE(neg.supporting);
  EXPECT_DOUBLE_EQ(neg.max_pairing, -1.0);
  const auto pos = is_supporting(Covector{{0, 0}, {1, 0}}, c);
  EXPECT_FALSE(pos.supporting);
  EXPECT_DOUBLE_EQ(pos.max_pairing, 1.0);
}

TEST(ConeContains, Membership) {
  const Cone c = make_cone(2, {{1, 0}, {0, 1}});
  EXPECT_TRUE(cone_contains(c, {1, 1}));
  EXPECT_TRUE(cone_contains(c, {3, 0}));
  EXPECT_FALSE(cone_contains(c, {-1, 0.5}));
  oracle::Rng rng(3);
  const auto gens = random_generators(rng, 3, 4);
  const Cone r = make_cone(3, gens);
  std::vector<double> sum(3, 0.0);
  for (const auto& g : gens)
    for (std::size_t i = 0; i < 3; ++i) sum[i] += 0.7 * g[i];
  EXPECT_TRUE(cone_contains(r, sum));
}

TEST(Property, ScaleInvariance) {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 3));
    auto gens = random_generators(rng, m, static_cast<std::size_t>(oracle::uniform_int(rng, 1, 5)));
    const auto a = find_supporting_covector(make_cone(m, gens));
    for (auto& g : gens) {
      const double k = oracle::uniform(rng, 0.1, 10.0);
      for (auto& v : g) v *= k;
    }
    const auto b = find_supporting_covector(make_cone(m, gens));
    ASSERT_EQ(a.feasible, b.feasible);
    if (a.feasible) {
      EXPECT_GE(oracle::cosine(a.covector->components, b.covector->components), 1.0 - 1e-9);
    }
  }
}

TEST(Property, Monotonicity) {
  oracle::Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = static_cast<std::size_t>(oracle::uniform_int(rng, 2, 3));
    const auto gens = random_generators(rng, m, 5);
    const std::vector<std::vector<double>> subset(gens.begin(), gens.begin() + 3);
    const auto big = find_supporting_covector(make_cone(m, gens));
    if (!big.feasible) continue;
    EXPECT_TRUE(is_supporting(*big.covector, make_cone(m, subset)).supporting);
    EXPECT_TRUE(find_supporting_covector(make_cone(m, subset)).feasible);
  }
}

TEST(Property, AgreesWithBruteForce) {
  oracle::Rng rng(2024);
  int disagreements = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = static_cast<std::size_t>(oracle::uniform_int(rng, 1, 3));
    const auto gens = random_generators(rng, m, static_cast<std::size_t>(oracle::uniform_int(rng, 1, 6)));
    const bool lp = find_supporting_covector(make_cone(m, gens)).feasible;
    if (lp != oracle::brute_force_supported(gens, m)) ++disagreements;
  }
  EXPECT_EQ(disagreements, 0);
}
