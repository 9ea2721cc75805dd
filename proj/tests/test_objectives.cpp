#include "elastic/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace elastic;

namespace {

QuadraticSpec quad(Eigen::Index d, Eigen::Index m, double c, double L, double spread, std::uint64_t seed) {
  QuadraticSpec q;
  q.d = d;
  q.m = m;
  q.c = c;
  q.L = L;
  q.spread = spread;
  q.seed = seed;
  return q;
}

ParamVector random_point(Eigen::Index d, std::mt19937_64& rng, double scale = 2.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ParamVector x(d);
  for (auto& v : x) v = normal(rng);
  return x;
}

ParamVector brute_full_gradient(const Objective& obj, const ParamVector& x) {
  ParamVector sum = ParamVector::Zero(obj.dimension());
  for (Eigen::Index i = 0; i < obj.sample_count(); ++i) sum += sample_gradient(obj, i, x);
  return sum / static_cast<double>(obj.sample_count());
}

}  // namespace

TEST(Quadratic, IdentityHessianSingleSample) {
  const auto obj = make_quadratic(quad(2, 1, 1, 1, 0, 5));
  ParamVector x(2);
  x << 3, 4;
  EXPECT_NEAR(eval(obj, x), 12.5, 1e-12);
  ParamVector y(2);
  y << 1, 2;
  EXPECT_LE((full_gradient(obj, y) - y).norm(), 1e-12);
  EXPECT_LE(obj.optimum()->norm(), 0.0);
  EXPECT_EQ(obj.constants().sigma2, 0.0);
}

TEST(Quadratic, ZeroSpreadHasZeroVariance) {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    auto q = quad(5, 12, 0.5, 2, 0, seed);
    q.center = 3.0;
    const auto obj = make_quadratic(q);
    EXPECT_LE(obj.constants().sigma2, 1e-24) << seed;
  }
}

TEST(Quadratic, VarianceMatchesBruteForceAtOptimum) {
  const auto obj = make_quadratic(quad(4, 32, 0.5, 2, 1, 7));
  const ParamVector& bbar = *obj.optimum();
  double direct = 0.0;
  for (Eigen::Index i = 0; i < 32; ++i) direct += (obj.hessian() * (bbar - obj.centers().col(i))).squaredNorm();
  direct /= 32.0;
  EXPECT_NEAR(obj.constants().sigma2, direct, 1e-10);
  EXPECT_NEAR(obj.gradient_variance(bbar), direct, 1e-10);
}

TEST(Quadratic, SpectrumGivesExactConstants) {
  const auto obj = make_quadratic(quad(6, 8, 0.5, 2, 1, 3));
  EXPECT_EQ(obj.constants().L, 2.0);
  EXPECT_EQ(obj.constants().c, 0.5);
  EXPECT_FALSE(obj.constants().estimated);
  Eigen::SelfAdjointEigenSolver<Matrix> es(obj.hessian());
  EXPECT_NEAR(es.eigenvalues().minCoeff(), 0.5, 1e-12);
  EXPECT_NEAR(es.eigenvalues().maxCoeff(), 2.0, 1e-12);
}

TEST(Quadratic, RejectsBadSpecs) {
  EXPECT_THROW(make_quadratic(quad(2, 1, 2, 1, 0, 0)), ConfigError);
  EXPECT_THROW(make_quadratic(quad(2, 0, 1, 1, 0, 0)), ConfigError);
  EXPECT_THROW(make_quadratic(quad(0, 1, 1, 1, 0, 0)), ConfigError);
  EXPECT_THROW(make_quadratic(quad(2, 1, 0, 1, 0, 0)), ConfigError);
  EXPECT_THROW(make_quadratic(quad(2, 1, 1, 1, -1, 0)), ConfigError);
}

TEST(Quadratic, EvalIsMeanOfSampleLosses) {
  const auto obj = make_quadratic(quad(5, 20, 0.5, 2, 1.5, 4));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const auto x = random_point(5, rng);
    double mean = 0.0;
    for (Eigen::Index i = 0; i < 20; ++i) mean += obj.sample_loss(i, x);
    mean /= 20.0;
    EXPECT_NEAR(eval(obj, x), mean, 1e-12 * std::max(1.0, std::abs(mean)));
  }
}

TEST(Quadratic, OptimumBeatsRandomProbes) {
  const auto obj = make_quadratic(quad(4, 16, 0.5, 2, 1, 9));
  const double best = eval(obj, *obj.optimum());
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10000; ++k) {
    ASSERT_GE(eval(obj, *obj.optimum() + random_point(4, rng, 0.5)), best);
  }
  EXPECT_LE(full_gradient(obj, *obj.optimum()).norm(), 1e-12);
  EXPECT_GE(best, obj.constants().f_star - 1e-12);
}

TEST(Quadratic, FiniteSumAndUnbiasedness) {
  const auto obj = make_quadratic(quad(6, 24, 0.5, 2, 1, 5));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_point(6, rng);
    ASSERT_LE((full_gradient(obj, x) - brute_full_gradient(obj, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Quadratic, SingleSampleStochasticEqualsFull) {
  const auto obj = make_quadratic(quad(3, 1, 0.5, 2, 1, 5));
  std::mt19937_64 rng(4);
  const auto x = random_point(3, rng);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(stochastic_gradient(obj, x, rng), full_gradient(obj, x));
}

TEST(Quadratic, SmoothnessStrongConvexityAndCoercivity) {
  const auto obj = make_quadratic(quad(5, 16, 0.5, 2, 1, 8));
  const double L = obj.constants().L, c = obj.constants().c;
  const ParamVector& xs = *obj.optimum();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_point(5, rng), y = random_point(5, rng);
    const ParamVector gx = full_gradient(obj, x), gy = full_gradient(obj, y);
    ASSERT_LE((gx - gy).norm(), L * (x - y).norm() * (1 + 1e-12));
    ASSERT_GE((x - y).dot(gx - gy), c * (x - y).squaredNorm() * (1 - 1e-12));
    ASSERT_GE(gx.dot(x - xs), (gx.squaredNorm() / (2 * L) + 0.5 * c * (x - xs).squaredNorm()) * (1 - 1e-12));
  }
}

TEST(Quadratic, SecondMomentDominatesVariance) {
  const auto obj = make_quadratic(quad(4, 16, 0.5, 2, 1, 2));
  EXPECT_GE(obj.constants().M2, obj.constants().sigma2);
  // The extremal probe makes M2 the supremum over the region ball.
  const double R = obj.constants().region_radius;
  EXPECT_NEAR(obj.constants().M2, 4.0 * R * R + obj.constants().sigma2, 1e-9);
}

TEST(Logistic, BalancedLossAtOriginIsLn2) {
  LogisticSpec s;
  s.d = 3;
  s.m = 16;
  s.seed = 3;
  const auto obj = make_logistic(s);
  EXPECT_NEAR(eval(obj, ParamVector::Zero(3)), std::log(2.0), 1e-15);
  EXPECT_EQ(obj.constants().c, 0.0);
  EXPECT_TRUE(obj.constants().estimated);
  EXPECT_FALSE(obj.optimum().has_value());
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  LogisticSpec s;
  s.d = 3;
  s.m = 16;
  s.seed = 3;
  s.l2 = 0.1;
  const auto obj = make_logistic(s);
  std::mt19937_64 rng(6);
  const double h = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const auto x = random_point(3, rng, 1.0);
    const ParamVector g = full_gradient(obj, x);
    ParamVector fd(3);
    for (Eigen::Index j = 0; j < 3; ++j) {
      ParamVector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      fd[j] = (eval(obj, xp) - eval(obj, xm)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm() / std::max(g.norm(), 1e-8), 1e-6);
    EXPECT_LE((g - brute_full_gradient(obj, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Logistic, ProbesRespectMomentOrder) {
  LogisticSpec s;
  s.d = 3;
  s.m = 16;
  s.seed = 3;
  const auto obj = make_logistic(s);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_point(3, rng, 1.0);
    ASSERT_GE(obj.gradient_second_moment(x), obj.gradient_variance(x));
  }
  EXPECT_GE(obj.constants().M2, obj.constants().sigma2);
}

TEST(Logistic, RejectsBadSpecs) {
  LogisticSpec s;
  s.d = 0;
  EXPECT_THROW(make_logistic(s), ConfigError);
  s.d = 2;
  s.m = 1;
  EXPECT_THROW(make_logistic(s), ConfigError);
}

TEST(CosineQuadratic, IsNonConvexWithClosedFormL) {
  auto q = quad(4, 8, 0.5, 2, 1, 5);
  q.amplitude = 0.25;
  q.frequency = 2.0;
  const auto obj = make_cosine_quadratic(q);
  EXPECT_DOUBLE_EQ(obj.constants().L, 3.0);
  EXPECT_EQ(obj.constants().c, 0.0);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_point(4, rng), y = random_point(4, rng);
    ASSERT_LE((full_gradient(obj, x) - full_gradient(obj, y)).norm(), 3.0 * (x - y).norm() * (1 + 1e-12));
    ASSERT_LE((full_gradient(obj, x) - brute_full_gradient(obj, x)).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_GE(eval(obj, x), obj.constants().f_star);
  }
}

TEST(Objective, DimensionMismatchThrows) {
  const auto obj = make_quadratic(quad(3, 2, 1, 1, 0, 0));
  EXPECT_THROW(eval(obj, ParamVector::Zero(2)), DimensionMismatch);
  EXPECT_THROW(full_gradient(obj, ParamVector::Zero(4)), DimensionMismatch);
}
