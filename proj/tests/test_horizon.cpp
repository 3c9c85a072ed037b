#include <gtest/gtest.h>

#include "splitmpc/errors.hpp"
#include "splitmpc/horizon.hpp"
#include "support.hpp"

namespace splitmpc {
namespace {

using testing::Rng;
using testing::vec;

Matrix diag(std::initializer_list<double> xs) { return vec(xs).asDiagonal(); }

TEST(AdaptWeights, DoublesForTwiceTheSamplingTime) {
  const auto [Q, R] = adapt_weights(diag({1, 5}), diag({0.01, 0.01}), 0.4, 0.2);
  EXPECT_TRUE(Q.isApprox(diag({2, 10}), 1e-15));
  EXPECT_TRUE(R.isApprox(diag({0.02, 0.02}), 1e-15));
}

TEST(AdaptWeights, UnitRatioAndZeroMatrix) {
  const Matrix Q = diag({1, 0, 5, 0});
  const Matrix R = diag({0.1, 0.1});
  const auto [Q1, R1] = adapt_weights(Q, R, 0.2, 0.2);
  EXPECT_EQ(Q1, Q);
  EXPECT_EQ(R1, R);
  const auto [Q0, R0] = adapt_weights(Matrix::Zero(2, 2), Matrix::Zero(2, 2), 0.7, 0.2);
  EXPECT_TRUE(Q0.isZero(0.0));
  EXPECT_TRUE(R0.isZero(0.0));
}

TEST(AdaptWeights, RejectsNonpositiveSamplingTime) {
  EXPECT_THROW(adapt_weights(diag({1}), diag({1}), 0.0, 0.2), InvalidParameter);
  EXPECT_THROW(adapt_weights(diag({1}), diag({1}), 0.4, -0.2), InvalidParameter);
}

TEST(AdaptWeights, PreservesSymmetryAndSemidefiniteness) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.integer(1, 5);
    const Matrix Q = rng.psd(n, rng.integer(1, n));
    const Matrix R = rng.psd(n, n);
    const auto [Qa, Ra] = adapt_weights(Q, R, rng.uniform(0.01, 2), rng.uniform(0.01, 2));
    for (const Matrix* M : {&Qa, &Ra}) {
      EXPECT_EQ(*M, M->transpose());
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(*M).eigenvalues().minCoeff(), -1e-12);
    }
  }
}

TEST(StageCost, Examples) {
  const QuadraticCost s{diag({1, 0, 5, 0}), diag({0.1, 0.1}), vec({20, 0, 0, 0})};
  EXPECT_EQ(stage_cost(s, vec({20, 0, 0, 0}), Vector::Zero(2)), 0.0);
  EXPECT_NEAR(stage_cost(s, vec({19, 1, 1, 0}), vec({1, 1})), 6.2, 1e-12);

  const QuadraticCost f{diag({1, 5}), diag({0.01, 0.01}), vec({20, 0})};
  EXPECT_NEAR(stage_cost(f, vec({20, 2}), Vector::Zero(2)), 20.0, 1e-12);
  EXPECT_THROW(stage_cost(f, vec({20, 2, 0}), Vector::Zero(2)), DimensionMismatch);
}

TEST(TerminalCost, Examples) {
  const QuadraticCost s{diag({1, 0, 5, 0}), diag({0.1, 0.1}), vec({20, 0, 0, 0})};
  EXPECT_EQ(terminal_cost(s, vec({20, 0, 0, 0})), 0.0);
  EXPECT_NEAR(terminal_cost(s, vec({19, 0, 0, 0})), 1.0, 1e-12);

  const QuadraticCost f{diag({2, 10}), diag({0.02, 0.02}), vec({20, 0})};
  EXPECT_NEAR(terminal_cost(f, vec({18, 1})), 18.0, 1e-12);
  EXPECT_THROW(terminal_cost(f, Vector::Zero(4)), DimensionMismatch);
}

TEST(StageCost, NonnegativeAndZeroExactlyOnNullspace) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(1, 5);
    const int m = rng.integer(1, 3);
    const int rq = rng.integer(1, n);
    const Matrix F = rng.matrix(n, rq, -1, 1);
    const Matrix Q = F * F.transpose();
    const Matrix R = rng.psd(m, m);
    const QuadraticCost c{Q, R, rng.vector(n, -5, 5)};
    const Vector x = rng.vector(n, -5, 5);
    const Vector u = rng.vector(m, -3, 3);
    const double l = stage_cost(c, x, u);
    EXPECT_GE(l, 0.0);
    const Vector dx = x - c.ref;
    EXPECT_NEAR(l, dx.dot(Q * dx) + u.dot(R * u), 1e-10 * (1.0 + l));

    // Directions orthogonal to range(F) are free when the input is zero.
    if (rq < n) {
      const Matrix N = F.transpose().fullPivLu().kernel();
      const Vector xn = c.ref + N * rng.vector(static_cast<int>(N.cols()), -3, 3);
      EXPECT_NEAR(stage_cost(c, xn, Vector::Zero(m)), 0.0, 1e-10);
    }
  }
}

class PlanTest : public ::testing::Test {
 protected:
  Scenario scenario = Scenario::defaults();
  HorizonPlan plan(std::string_view tag) { return build_plan(SchemeSpec::parse(tag), scenario); }
};

TEST_F(PlanTest, ProposedSegments) {
  const HorizonPlan p = plan("proposed");
  ASSERT_EQ(p.segments.size(), 2u);
  EXPECT_EQ(p.first().model.kind, ModelKind::detailed);
  EXPECT_EQ(p.first().steps, 10);
  EXPECT_DOUBLE_EQ(p.first().model.dt, 0.2);
  EXPECT_EQ(p.last().model.kind, ModelKind::coarse);
  EXPECT_EQ(p.last().steps, 3);
  EXPECT_DOUBLE_EQ(p.last().model.dt, 0.4);
  EXPECT_TRUE(p.projection.has_value());
  EXPECT_TRUE(p.boundary_ci().has_value());
  EXPECT_TRUE(p.last().terminal_set.has_value());
  // Adapted stage weights on the coarse segment, unadapted terminal weight.
  EXPECT_TRUE(p.last().cost.Q.isApprox(diag({2, 10})));
  EXPECT_TRUE(p.last().cost.R.isApprox(diag({0.02, 0.02})));
  EXPECT_TRUE(p.last().terminal_cost->Q.isApprox(diag({1, 5})));
  EXPECT_EQ(p.last().cost.ref, vec({20, 0}));
}

TEST_F(PlanTest, StandardSegments) {
  const HorizonPlan p = plan("standard");
  ASSERT_EQ(p.segments.size(), 1u);
  EXPECT_EQ(p.first().steps, 10);
  EXPECT_DOUBLE_EQ(p.first().model.dt, 0.2);
  EXPECT_TRUE(p.first().terminal_set.has_value());
  EXPECT_TRUE(p.first().terminal_cost.has_value());

  const HorizonPlan q = plan("standard-8@0.4");
  EXPECT_EQ(q.first().steps, 8);
  EXPECT_DOUBLE_EQ(q.first().model.dt, 0.4);
  EXPECT_EQ(plan("standard-16").first().steps, 16);
}

TEST_F(PlanTest, GranularSegments) {
  const HorizonPlan p = plan("granular");
  ASSERT_EQ(p.segments.size(), 2u);
  EXPECT_EQ(p.first().steps, 10);
  EXPECT_EQ(p.last().model.kind, ModelKind::coarse);
  EXPECT_EQ(p.last().steps, 6);
  EXPECT_DOUBLE_EQ(p.last().model.dt, 0.2);
  EXPECT_FALSE(p.boundary_ci().has_value());
  EXPECT_TRUE(p.first().terminal_cost.has_value());
  EXPECT_TRUE(p.last().terminal_set.has_value());
  EXPECT_TRUE(p.last().cost.Q.isApprox(diag({1, 5})));
}

TEST_F(PlanTest, NushSecondSegmentWeightsScaleExactly) {
  const HorizonPlan p = plan("nush");
  ASSERT_EQ(p.segments.size(), 2u);
  EXPECT_EQ(p.last().model.kind, ModelKind::detailed);
  EXPECT_EQ(p.last().steps, 3);
  EXPECT_DOUBLE_EQ(p.last().model.dt, 0.4);
  const double ratio = scenario.dt2 / scenario.dt1;
  EXPECT_EQ(p.last().cost.Q, p.first().cost.Q * ratio);
  EXPECT_EQ(p.last().cost.R, p.first().cost.R * ratio);
}

TEST_F(PlanTest, DecisionCountsAndSpans) {
  EXPECT_EQ(count_decision_variables(plan("proposed")), 28);
  EXPECT_EQ(count_decision_variables(plan("granular")), 34);
  EXPECT_EQ(count_decision_variables(plan("standard")), 20);
  EXPECT_NEAR(horizon_span(plan("proposed")), 3.2, 1e-12);
  EXPECT_NEAR(horizon_span(plan("granular")), 3.2, 1e-12);
  EXPECT_NEAR(horizon_span(plan("standard")), 2.0, 1e-12);
  EXPECT_NEAR(horizon_span(plan("proposed")), horizon_span(plan("granular")), 1e-12);
  EXPECT_LT(count_decision_variables(plan("proposed")),
            count_decision_variables(plan("granular")));
}

TEST_F(PlanTest, UnknownTagAndMissingProjection) {
  EXPECT_THROW(SchemeSpec::parse("fancy"), ConfigError);
  EXPECT_THROW(SchemeSpec::parse("standard-0"), ConfigError);
  EXPECT_THROW(SchemeSpec::parse("standard-8@-1"), ConfigError);
  HorizonPlan p = plan("proposed");
  p.projection.reset();
  EXPECT_THROW(validate_plan(p), InvalidParameter);
  HorizonPlan q = plan("proposed");
  q.segments.front().terminal_set.reset();
  EXPECT_THROW(validate_plan(q), InvalidParameter);
}

TEST_F(PlanTest, TagRoundTrip) {
  for (const SchemeSpec& spec : all_table_schemes()) {
    EXPECT_EQ(SchemeSpec::parse(spec.to_string()), spec);
  }
  EXPECT_EQ(all_table_schemes().size(), 7u);
}

}  // namespace
}  // namespace splitmpc
