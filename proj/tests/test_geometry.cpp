#include <gtest/gtest.h>

#include <random>

#include "refocus/geometry.hpp"
#include "test_support.hpp"

namespace refocus {
namespace {

Layout make_layout(std::initializer_list<BBox> boxes) {
  Layout l;
  int i = 0;
  for (const auto& b : boxes) {
    const auto name = "obj" + std::to_string(i++);
    l.objects.push_back({name, "a " + name, b});
  }
  return l;
}

TEST(ValidateLayout, SingleValidBox) { EXPECT_TRUE(validate_layout(make_layout({{0.1, 0.1, 0.9, 0.9}})).empty()); }

TEST(ValidateLayout, InvertedExtent) {
  const auto v = validate_layout(make_layout({{0.5, 0.5, 0.4, 0.9}}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{ViolationKind::InvertedExtent, 0, std::nullopt}));
}

TEST(ValidateLayout, ContainedBoxIsCompleteOverlap) {
  const auto v = validate_layout(make_layout({{0.1, 0.1, 0.9, 0.9}, {0.2, 0.2, 0.3, 0.3}}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{ViolationKind::CompleteOverlap, 0, 1}));
}

TEST(ValidateLayout, OtherRules) {
  auto l = make_layout({{-0.1, 0.0, 0.5, 0.5}, {0.6, 0.6, 0.605, 0.9}});
  l.objects[1].label = "";
  const auto v = validate_layout(l);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].kind, ViolationKind::OutOfRange);
  EXPECT_EQ(v[1].kind, ViolationKind::EmptyLabel);
  EXPECT_EQ(v[2].kind, ViolationKind::TooSmall);
  EXPECT_EQ(v[2].index, 1u);
}

TEST(ValidateLayout, IdenticalBoxesOverlap) {
  const auto v = validate_layout(make_layout({{0.2, 0.2, 0.6, 0.6}, {0.2, 0.2, 0.6, 0.6}}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::CompleteOverlap);
}

TEST(ShrinkBox, TwoPercentOfFullFrame) {
  const auto b = shrink_box({0, 0, 1, 1}, 0.02);
  EXPECT_DOUBLE_EQ(b.x_min, 0.02);
  EXPECT_DOUBLE_EQ(b.y_min, 0.02);
  EXPECT_DOUBLE_EQ(b.x_max, 0.98);
  EXPECT_DOUBLE_EQ(b.y_max, 0.98);
}

TEST(ShrinkBox, ZeroMarginIsIdentity) { EXPECT_EQ(shrink_box({0.2, 0.2, 0.8, 0.8}, 0.0), (BBox{0.2, 0.2, 0.8, 0.8})); }

TEST(ShrinkBox, MarginScalesWithBoxSize) {
  const auto b = shrink_box({0.0, 0.5, 0.5, 1.0}, 0.04);
  EXPECT_NEAR(b.x_min, 0.02, 1e-15);
  EXPECT_NEAR(b.y_min, 0.52, 1e-15);
  EXPECT_NEAR(b.x_max, 0.48, 1e-15);
  EXPECT_NEAR(b.y_max, 0.98, 1e-15);
}

TEST(ShrinkBox, RejectsMarginOutsideRange) {
  EXPECT_THROW(shrink_box({0, 0, 1, 1}, 0.25), Error);
  EXPECT_THROW(shrink_box({0, 0, 1, 1}, -0.01), Error);
  EXPECT_THROW(shrink_box({0.5, 0.5, 0.4, 0.9}, 0.02), Error);
}

TEST(ShrinkBox, ContainmentCenterAndAreaLaw) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.001, 0.2499);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto box = testing_support::random_box(rng);
    const double delta = d(rng);
    const auto s = shrink_box(box, delta);
    EXPECT_GT(s.x_min, box.x_min);
    EXPECT_GT(s.y_min, box.y_min);
    EXPECT_LT(s.x_max, box.x_max);
    EXPECT_LT(s.y_max, box.y_max);
    EXPECT_NEAR(s.center().first, box.center().first, 1e-12);
    EXPECT_NEAR(s.center().second, box.center().second, 1e-12);
    EXPECT_NEAR(s.area(), box.area() * (1 - 2 * delta) * (1 - 2 * delta), 1e-12);
    const auto larger = shrink_box(box, std::min(delta + 0.01, 0.2499));
    EXPECT_LE(larger.area(), s.area());
  }
}

TEST(RegularizeLayout, DisjointLayoutIsJustShrunk) {
  const auto l = make_layout({{0.05, 0.1, 0.45, 0.9}, {0.55, 0.2, 0.95, 0.8}});
  const auto r = regularize_layout(l, 0.02);
  ASSERT_EQ(r.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.objects[i].label, l.objects[i].label);
    EXPECT_EQ(r.objects[i].box, shrink_box(l.objects[i].box, 0.02));
  }
}

TEST(RegularizeLayout, ContainedBoxIsMovedOut) {
  const auto l = make_layout({{0.1, 0.1, 0.9, 0.9}, {0.4, 0.4, 0.6, 0.6}});
  const auto r = regularize_layout(l, 0.02);
  EXPECT_TRUE(validate_layout(r).empty());
  EXPECT_EQ(r.objects[0].box, shrink_box(l.objects[0].box, 0.02));
  EXPECT_NEAR(r.objects[1].box.width(), shrink_box(l.objects[1].box, 0.02).width(), 1e-12);
}

TEST(RegularizeLayout, EmptyLayout) {
  Layout empty;
  EXPECT_TRUE(regularize_layout(empty, 0.02).empty());
}

TEST(RegularizeLayout, FullFrameDuplicatesWithoutMargin) {
  const auto r = regularize_layout(make_layout({{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}}), 0.0);
  EXPECT_TRUE(validate_layout(r).empty());
}

TEST(RegularizeLayout, SlivesAreWidenedToMinimumExtent) {
  const auto r = regularize_layout(make_layout({{0.3, 0.3, 0.31, 0.7}, {0.999, 0.2, 1.0, 0.4}}), 0.04);
  EXPECT_TRUE(validate_layout(r).empty());
  EXPECT_NEAR(r.objects[0].box.width(), kMinBoxExtent, 1e-12);
  EXPECT_LE(r.objects[1].box.x_max, 1.0);
}

TEST(RegularizeLayout, InvertedBoxCannotBeRepaired) {
  try {
    regularize_layout(make_layout({{0.5, 0.5, 0.4, 0.9}}), 0.02);
    FAIL() << "expected RepairFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RepairFailed);
  }
}

TEST(RegularizeLayout, RejectsMarginOutsideRange) { EXPECT_THROW(regularize_layout(Layout{}, 0.3), Error); }

TEST(RegularizeLayout, RecommendedMarginRange) {
  EXPECT_TRUE(delta_in_recommended_range(0.02));
  EXPECT_TRUE(delta_in_recommended_range(0.04));
  EXPECT_FALSE(delta_in_recommended_range(0.1));
}

TEST(RegularizeLayout, FuzzedOutputsAreValidAndOrderPreserving) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto l = testing_support::random_layout(rng, 8);
    const double delta = std::uniform_real_distribution<double>(0.02, 0.04)(rng);
    const auto r = regularize_layout(l, delta);
    ASSERT_TRUE(validate_layout(r).empty()) << "trial " << trial;
    ASSERT_EQ(r.size(), l.size());
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_EQ(r.objects[i].label, l.objects[i].label);
  }
}

TEST(RepairLayout, IsAFixpointOnItsOutput) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    auto l = testing_support::random_layout(rng, 8);
    for (auto& o : l.objects) o.box = shrink_box(o.box, 0.02);
    const auto once = repair_layout(l);
    EXPECT_EQ(repair_layout(once), once);
  }
}

}  // namespace
}  // namespace refocus
