#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "viap/render.hpp"

using viap::CameraPose;
using viap::PoseAxis;
using viap::RenderConfig;
using viap::ShapeKind;
using viap::ShapeSpec;

namespace {

constexpr double kPi = std::numbers::pi;

bool is_background(const viap::Tensor& img, std::size_t pix, const RenderConfig& rc) {
  for (std::size_t c = 0; c < 3; ++c)
    if (img[pix * 3 + c] != rc.background[c]) return false;
  return true;
}

}  // namespace

TEST(Camera, ZeroJitterReturnsBase) {
  std::mt19937_64 rng(1);
  const CameraPose base{kPi / 3, 1.0, 3.0};
  EXPECT_EQ(viap::sample_camera(base, 0.0, std::nullopt, rng), base);
}

TEST(Camera, PolarJitterStaysInBand) {
  std::mt19937_64 rng(2);
  const CameraPose base{kPi / 4, 2.0, 3.0};
  for (int i = 0; i < 2000; ++i) {
    const CameraPose p = viap::sample_camera(base, 0.15, PoseAxis::polar, rng);
    EXPECT_LE(std::abs(p.theta - kPi / 4), 0.15 * kPi / 4 + 1e-15);
    EXPECT_EQ(p.phi, base.phi);
    EXPECT_EQ(p.radius, base.radius);
  }
}

TEST(Camera, AxisRestrictionLeavesOthersUntouched) {
  std::mt19937_64 rng(3);
  const CameraPose base{1.1, 4.0, 3.5};
  for (PoseAxis axis : {PoseAxis::azimuth, PoseAxis::radius}) {
    const CameraPose p = viap::sample_camera(base, 0.2, axis, rng);
    EXPECT_EQ(p.theta, base.theta);
    if (axis == PoseAxis::azimuth) {
      EXPECT_EQ(p.radius, base.radius);
      EXPECT_GE(p.phi, 0.0);
      EXPECT_LT(p.phi, 2 * kPi);
    } else {
      EXPECT_EQ(p.phi, base.phi);
      EXPECT_NEAR(p.radius, 3.5, 0.2 * 3.5 + 1e-12);
    }
  }
}

TEST(Camera, FullJitterIsSeeded) {
  const CameraPose base{1.0, 1.0, 3.0};
  std::mt19937_64 a(9), b(9);
  EXPECT_EQ(viap::sample_camera(base, 0.1, std::nullopt, a), viap::sample_camera(base, 0.1, std::nullopt, b));
}

TEST(Camera, RejectsBadInput) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(viap::sample_camera({1.0, 1.0, 3.0}, 1.0, std::nullopt, rng), viap::Error);
  try {
    viap::sample_camera({4.0, 1.0, 3.0}, 0.1, std::nullopt, rng);
    FAIL();
  } catch (const viap::Error& e) {
    EXPECT_EQ(e.kind(), "invalid_pose");
  }
}

TEST(Render, EmptySceneIsExactlyBackground) {
  RenderConfig rc;
  const ShapeSpec tiny{0, ShapeKind::cube, 1e-6, {0.2, 0.3, 0.4}, 0.0, 0};
  const viap::Tensor img = viap::render(tiny, {kPi / 2, 0.0, 3.0}, rc);
  ASSERT_EQ(img.shape(), (viap::Shape{32, 32, 3}));
  for (std::size_t p = 0; p < 32 * 32; ++p) EXPECT_TRUE(is_background(img, p, rc));
}

TEST(Render, ValuesInUnitRangeAndObjectVisible) {
  RenderConfig rc;
  for (ShapeKind k : {ShapeKind::cube, ShapeKind::sphere, ShapeKind::cone, ShapeKind::torus, ShapeKind::cylinder,
                      ShapeKind::octahedron}) {
    const viap::Tensor img = viap::render({0, k, 1.0, {0.7, 0.6, 0.5}, 0.3, 0}, {1.2, 0.7, 3.2}, rc);
    std::size_t covered = 0;
    for (std::size_t p = 0; p < 32 * 32; ++p) covered += !is_background(img, p, rc);
    for (double v : img.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GT(covered, 50u) << viap::to_string(k);
  }
}

TEST(Render, Deterministic) {
  const ShapeSpec s{0, ShapeKind::torus, 0.9, {0.8, 0.8, 0.8}, 1.0, 0};
  EXPECT_EQ(viap::render(s, {1.0, 2.0, 3.0}), viap::render(s, {1.0, 2.0, 3.0}));
}

TEST(Render, SphereSilhouetteIsMirrorSymmetric) {
  RenderConfig rc;
  const viap::Tensor img = viap::render({0, ShapeKind::sphere, 1.0, {0.5, 0.5, 0.5}, 0.0, 0}, {kPi / 2, 0.0, 3.0}, rc);
  for (std::size_t y = 0; y < 32; ++y) {
    long lo = -1, hi = -1;
    for (std::size_t x = 0; x < 32; ++x)
      if (!is_background(img, y * 32 + x, rc)) {
        if (lo < 0) lo = static_cast<long>(x);
        hi = static_cast<long>(x);
      }
    if (lo < 0) continue;
    EXPECT_LE(std::abs(lo - (31 - hi)), 1) << "row " << y;
  }
}

TEST(Render, ShapeValidationAndDegeneratePose) {
  EXPECT_THROW(viap::render({0, ShapeKind::cube, -1.0, {0.5, 0.5, 0.5}, 0.0, 0}, {1.0, 1.0, 3.0}), viap::Error);
  EXPECT_THROW(viap::render({0, ShapeKind::cube, 1.0, {1.5, 0.5, 0.5}, 0.0, 0}, {1.0, 1.0, 3.0}), viap::Error);
  try {
    viap::render({0, ShapeKind::sphere, 1.0, {0.5, 0.5, 0.5}, 0.0, 0}, {1.0, 1.0, 0.5});
    FAIL();
  } catch (const viap::Error& e) {
    EXPECT_EQ(e.kind(), "degenerate_pose");
  }
  EXPECT_EQ(viap::shape_kind_from_string(viap::to_string(ShapeKind::torus)), ShapeKind::torus);
  EXPECT_THROW(viap::shape_kind_from_string("blob"), viap::Error);
}
