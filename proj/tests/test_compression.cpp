#include "elastic/compression.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace elastic;

namespace {

ParamVector vec(std::initializer_list<double> v) {
  ParamVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(TopK, KeepsLargestMagnitude) {
  EXPECT_EQ(topk(vec({3, -1, 2}), 1), vec({3, 0, 0}));
  EXPECT_EQ(topk(vec({1, -4, 2}), 2), vec({0, -4, 2}));
}

TEST(TopK, FullKIsIdentity) {
  const auto w = vec({0.5, -2, 7, 1e-3});
  EXPECT_EQ(topk(w, 4), w);
}

TEST(TopK, TiesGoToLowestIndex) {
  EXPECT_EQ(topk(vec({1, -1, 1, 1}), 2), vec({1, -1, 0, 0}));
}

TEST(TopK, RejectsOutOfRangeK) {
  EXPECT_THROW(topk(vec({1, 2}), 0), ConfigError);
  EXPECT_THROW(topk(vec({1, 2}), 3), ConfigError);
  EXPECT_THROW(Compressor::topk(4, 5), ConfigError);
}

TEST(OneBit, ClassMeans) {
  EXPECT_EQ(onebit(vec({2, 4, -3})), vec({3, 3, -3}));
  EXPECT_EQ(onebit(vec({1, 1})), vec({1, 1}));
  EXPECT_EQ(onebit(ParamVector::Zero(5)), ParamVector::Zero(5));
  EXPECT_EQ(onebit(vec({0, -2, -4})), vec({0, -3, -3}));
}

TEST(Compressor, GammaValues) {
  EXPECT_DOUBLE_EQ(Compressor::identity(8).gamma(), 0.0);
  EXPECT_DOUBLE_EQ(Compressor::topk(32, 8).gamma(), 24.0 / 32.0);
  EXPECT_DOUBLE_EQ(Compressor::onebit(10).gamma(), 0.9);
}

TEST(Compressor, ParseSpec) {
  EXPECT_EQ(parse_compressor("topk:8"), (CompressorSpec{CompressorKind::topk, 8}));
  EXPECT_EQ(parse_compressor("onebit").kind, CompressorKind::onebit);
  EXPECT_EQ(to_string(parse_compressor("topk:3")), "topk:3");
  EXPECT_THROW(parse_compressor("topk:"), ConfigError);
  EXPECT_THROW(parse_compressor("topk:0"), ConfigError);
  EXPECT_THROW(parse_compressor("gzip"), ConfigError);
}

TEST(Compressor, TopKContractionOnRandomVectors) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  const auto q = Compressor::topk(32, 8);
  for (int k = 0; k < 10000; ++k) {
    ParamVector w(32);
    for (auto& x : w) x = normal(rng);
    ASSERT_LE((q(w) - w).squaredNorm(), q.gamma() * w.squaredNorm() * (1 + 1e-15));
  }
}

TEST(ErrorFeedback, SimpleTopK) {
  const auto q = Compressor::topk(2, 1);
  const auto r = ef_update(vec({0, 0}), vec({1, 0}), 0.1, q);
  EXPECT_EQ(r.payload, vec({0.1, 0}));
  EXPECT_EQ(r.new_error, vec({0, 0}));
}

TEST(ErrorFeedback, CarriesResidual) {
  const auto q = Compressor::topk(2, 1);
  const auto r = ef_update(vec({0.05, 0.02}), vec({0.1, 0.3}), 1.0, q);
  EXPECT_NEAR(r.payload[0], 0.0, 0.0);
  EXPECT_NEAR(r.payload[1], 0.32, 1e-15);
  EXPECT_NEAR(r.new_error[0], 0.15, 1e-15);
  EXPECT_NEAR(r.new_error[1], 0.0, 1e-15);
}

TEST(ErrorFeedback, IdentityLeavesNoResidual) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  const auto q = Compressor::identity(6);
  for (int k = 0; k < 100; ++k) {
    ParamVector g(6);
    for (auto& x : g) x = normal(rng);
    const auto r = ef_update(ParamVector::Zero(6), g, 0.3, q);
    ASSERT_EQ(r.new_error, ParamVector::Zero(6));
  }
}

TEST(ErrorFeedback, OneBitExample) {
  const auto r = ef_update(vec({0, 0, 0}), vec({2, 4, -3}), 1.0, Compressor::onebit(3));
  EXPECT_EQ(r.payload, vec({3, 3, -3}));
  EXPECT_EQ(r.new_error, vec({-1, 1, 0}));
}

TEST(ErrorFeedback, DimensionMismatchThrows) {
  EXPECT_THROW(ef_update(vec({0, 0}), vec({1, 2, 3}), 1.0, Compressor::identity(2)), DimensionMismatch);
}
