#include "smoothsparse/spaces.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace smoothsparse;

TEST(GroupPartition, SizesAndRanges) {
  const GroupPartition p(std::vector<Index>{2, 1});
  EXPECT_EQ(p.dim(), 3);
  EXPECT_EQ(p.num_groups(), 2);
  const auto r = group_slices(p);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (GroupRange{0, 2}));
  EXPECT_EQ(r[1], (GroupRange{2, 1}));
  EXPECT_EQ(p.group_of(1), 0);
  EXPECT_EQ(p.group_of(2), 1);
}

TEST(GroupPartition, TrivialAndSingle) {
  const auto t = group_slices(GroupPartition::trivial(3));
  ASSERT_EQ(t.size(), 3u);
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(t[static_cast<std::size_t>(j)], (GroupRange{j, 1}));
  const auto s = group_slices(GroupPartition(std::vector<Index>{5}));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (GroupRange{0, 5}));
  EXPECT_TRUE(GroupPartition::trivial(4).is_trivial());
  EXPECT_FALSE(GroupPartition::equal(4, 2).is_trivial());
}

TEST(GroupPartition, EqualSplitCoversAll) {
  const auto p = GroupPartition::equal(100, 20);
  EXPECT_EQ(p.num_groups(), 20);
  for (Index j = 0; j < 20; ++j) EXPECT_EQ(p.size(j), 5);
  const auto q = GroupPartition::equal(7, 3);
  EXPECT_EQ(q.sizes(), (std::vector<Index>{3, 2, 2}));
}

TEST(GroupPartition, RejectsInvalid) {
  EXPECT_THROW(GroupPartition(std::vector<Index>{}), std::invalid_argument);
  EXPECT_THROW(GroupPartition(std::vector<Index>{2, 0}), std::invalid_argument);
  EXPECT_THROW(GroupPartition::equal(3, 4), std::invalid_argument);
}

TEST(LqNormPow, Examples) {
  EXPECT_DOUBLE_EQ(lq_norm_pow(Vector{{3.0, 4.0}}, 1.0), 7.0);
  EXPECT_NEAR(lq_norm_pow(Vector{{8.0, -8.0}}, 2.0 / 3.0), 8.0, 1e-12);
  const double expect = std::pow(0.5, 0.4) + std::pow(1.25, 0.4);
  EXPECT_NEAR(lq_norm_pow(Vector{{0.5, -1.25, 0.0}}, 0.4), expect, 1e-15);
  EXPECT_EQ(lq_norm_pow(Vector::Zero(3), 0.5), 0.0);
}

TEST(LqNormPow, RejectsNonPositiveQ) {
  EXPECT_THROW(lq_norm_pow(Vector::Ones(2), 0.0), std::invalid_argument);
  EXPECT_THROW(lq_norm_pow(Vector::Ones(2), -1.0), std::invalid_argument);
}

TEST(LpqReg, Examples) {
  RegSpec one{2.0, 1.0, {}, 1.0, GroupPartition(std::vector<Index>{2})};
  EXPECT_NEAR(lpq_reg(Vector{{3.0, 4.0}}, one), 5.0, 1e-15);
  RegSpec two{2.0, 1.0, {1.0, 1.0}, 1.0, GroupPartition(std::vector<Index>{2, 2})};
  EXPECT_NEAR(lpq_reg(Vector{{3.0, 4.0, 0.0, 0.0}}, two), 5.0, 1e-15);
  RegSpec frac{2.0, 2.0 / 3.0, {}, 1.0, GroupPartition(std::vector<Index>{2, 2})};
  EXPECT_NEAR(lpq_reg(Vector::Ones(4), frac), 2.0 * std::pow(std::sqrt(2.0), 2.0 / 3.0), 1e-14);
}

TEST(LpqReg, DimensionMismatch) {
  RegSpec r{1.0, 1.0, {}, 1.0, GroupPartition::trivial(3)};
  EXPECT_THROW(lpq_reg(Vector::Ones(2), r), std::invalid_argument);
}

TEST(RegSpec, Validation) {
  RegSpec ok{2.0, 1.0, {}, 1.0, GroupPartition::trivial(2)};
  EXPECT_NO_THROW(ok.validate());
  RegSpec bad = ok;
  bad.q = 3.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.weights = {1.0, -1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.lambda = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SpacesProperties, HomogeneityReductionMonotonicity) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    Vector b(5);
    for (Index i = 0; i < 5; ++i) b[i] = u(gen);
    const double q = 0.2 + 1.8 * (u(gen) + 3.0) / 6.0;
    const double c = u(gen);
    EXPECT_NEAR(lq_norm_pow(c * b, q), std::pow(std::abs(c), q) * lq_norm_pow(b, q), 1e-12 * (1.0 + lq_norm_pow(b, q)));
    RegSpec r{q, q, {}, 1.0, GroupPartition::trivial(5)};
    EXPECT_EQ(lpq_reg(b, r), lq_norm_pow(b, q));
    RegSpec g{2.0, q, {}, 1.0, GroupPartition(std::vector<Index>{2, 3})};
    Vector bigger = b;
    bigger[t % 5] *= 1.5;
    EXPECT_GE(lpq_reg(bigger, g), lpq_reg(b, g));
  }
}

TEST(GroupNorms, Values) {
  const Vector n = group_norms(Vector{{3.0, 4.0, -2.0}}, GroupPartition(std::vector<Index>{2, 1}));
  EXPECT_DOUBLE_EQ(n[0], 5.0);
  EXPECT_DOUBLE_EQ(n[1], 2.0);
}
