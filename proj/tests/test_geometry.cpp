#include <random>

#include <gtest/gtest.h>

#include "aide/geometry.hpp"

namespace aide {
namespace {

TEST(Region, IouIdenticalIsOne) {
  const Region r{10, 20, 30, 60};
  EXPECT_DOUBLE_EQ(iou(r, r), 1.0);
  const Region degenerate{5, 5, 5, 5};
  EXPECT_DOUBLE_EQ(iou(degenerate, degenerate), 1.0);
}

TEST(Region, IouKnownOverlap) {
  // 10x10 boxes offset by 5 in x: overlap 50, union 150.
  EXPECT_NEAR(iou(Region{0, 0, 10, 10}, Region{5, 0, 15, 10}), 50.0 / 150.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou(Region{0, 0, 10, 10}, Region{20, 20, 30, 30}), 0.0);
}

TEST(Region, IouSymmetricAndBounded) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> u(0, 200);
  for (int i = 0; i < 5000; ++i) {
    auto box = [&] {
      int x0 = u(rng), y0 = u(rng);
      return Region{x0, y0, x0 + u(rng) % 80, y0 + u(rng) % 80};
    };
    const Region a = box(), b = box();
    const double ab = iou(a, b);
    EXPECT_DOUBLE_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Region, TouchingBoxesIntersect) {
  EXPECT_TRUE(Region({0, 0, 10, 10}).intersects(Region{10, 0, 20, 10}));
  EXPECT_FALSE(Region({0, 0, 10, 10}).intersects(Region{11, 0, 20, 10}));
}

TEST(Region, ClipAndPad) {
  EXPECT_EQ(clip_to_frame(Region{-5, -5, 50, 2000}, 100, 100), (Region{0, 0, 50, 100}));
  EXPECT_EQ(pad_region(Region{10, 10, 30, 50}, 0.05, 640, 480), (Region{9, 8, 31, 52}));
  EXPECT_EQ(pad_region(Region{0, 0, 20, 20}, 0.05, 20, 20), (Region{0, 0, 20, 20}));
}

TEST(Camera, ProjectUnprojectRoundTrip) {
  const Camera cam{100.0, 1600, 1200};
  const Vec2 robot{2.0, -1.0};
  const auto box = cam.project(WorldRect{2.0, -1.0, 2.5, -0.5}, robot);
  ASSERT_TRUE(box.has_value());
  EXPECT_EQ(*box, (Region{800, 600, 850, 650}));
  const auto p = cam.unproject(box->center_x(), box->center_y(), robot);
  EXPECT_NEAR(p.x, 2.25, 1e-9);
  EXPECT_NEAR(p.y, -0.75, 1e-9);
  EXPECT_NEAR(cam.distance_to(*box), std::hypot(0.25, 0.25), 1e-9);
}

TEST(Camera, OutOfViewIsDropped) {
  const Camera cam{100.0, 1600, 1200};
  EXPECT_FALSE(cam.project(WorldRect{20.0, 0.0, 21.0, 1.0}, Vec2{}).has_value());
  const auto partial = cam.project(WorldRect{7.5, 0.0, 8.5, 1.0}, Vec2{});
  ASSERT_TRUE(partial.has_value());
  EXPECT_EQ(partial->x_max, 1600);
}

}  // namespace
}  // namespace aide
