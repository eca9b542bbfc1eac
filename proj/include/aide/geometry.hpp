#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>

namespace aide {

/// Axis-aligned pixel box. Width is x_max - x_min, so a 1x1 box has
/// x_max == x_min + 1. Intersection tests treat boxes as closed sets:
/// boxes that only touch along an edge still intersect.
struct Region {
  std::int32_t x_min = 0;
  std::int32_t y_min = 0;
  std::int32_t x_max = 0;
  std::int32_t y_max = 0;

  constexpr std::int32_t width() const { return x_max - x_min; }
  constexpr std::int32_t height() const { return y_max - y_min; }
  constexpr std::int64_t area() const {
    return static_cast<std::int64_t>(width()) * static_cast<std::int64_t>(height());
  }
  constexpr double center_x() const { return 0.5 * (static_cast<double>(x_min) + x_max); }
  constexpr double center_y() const { return 0.5 * (static_cast<double>(y_min) + y_max); }

  constexpr bool valid() const {
    return x_min >= 0 && y_min >= 0 && x_min <= x_max && y_min <= y_max;
  }

  constexpr bool contains(const Region& other) const {
    return other.x_min >= x_min && other.y_min >= y_min && other.x_max <= x_max &&
           other.y_max <= y_max;
  }

  constexpr bool contains_point(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }

  constexpr bool intersects(const Region& other) const {
    return x_min <= other.x_max && other.x_min <= x_max && y_min <= other.y_max &&
           other.y_min <= y_max;
  }

  constexpr bool within_frame(std::int32_t frame_width, std::int32_t frame_height) const {
    return valid() && x_max <= frame_width && y_max <= frame_height;
  }

  friend constexpr bool operator==(const Region&, const Region&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Region& r) {
  return os << '(' << r.x_min << ',' << r.y_min << ',' << r.x_max << ',' << r.y_max << ')';
}

constexpr Region bounding_union(const Region& a, const Region& b) {
  return Region{std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
                std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

/// Clips to [0, width] x [0, height]. A box entirely outside collapses onto
/// the nearest frame edge.
constexpr Region clip_to_frame(const Region& r, std::int32_t width, std::int32_t height) {
  auto clamp = [](std::int32_t v, std::int32_t hi) { return std::clamp<std::int32_t>(v, 0, hi); };
  return Region{clamp(r.x_min, width), clamp(r.y_min, height), clamp(r.x_max, width),
                clamp(r.y_max, height)};
}

/// Overlap of the two boxes, or nullopt when they do not intersect.
constexpr std::optional<Region> intersection(const Region& a, const Region& b) {
  if (!a.intersects(b)) return std::nullopt;
  return Region{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
                std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
}

/// Intersection over union by area; 1 for identical boxes (including
/// identical degenerate ones), 0 for disjoint boxes.
inline double iou(const Region& a, const Region& b) {
  if (a == b) return 1.0;
  const auto overlap = intersection(a, b);
  if (!overlap) return 0.0;
  const double inter = static_cast<double>(overlap->area());
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Grows the box by `fraction` of its size on every side, clipped to the frame.
inline Region pad_region(const Region& r, double fraction, std::int32_t width,
                         std::int32_t height) {
  const auto dx = static_cast<std::int32_t>(std::lround(r.width() * fraction));
  const auto dy = static_cast<std::int32_t>(std::lround(r.height() * fraction));
  return clip_to_frame(Region{r.x_min - dx, r.y_min - dy, r.x_max + dx, r.y_max + dy}, width,
                       height);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline double euclidean(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Rectangle in world units (top-down plane).
struct WorldRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(const WorldRect& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  bool contains_point(const Vec2& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }

  friend constexpr bool operator==(const WorldRect&, const WorldRect&) = default;
};

/// Robot-centred top-down camera: the robot always sits at the frame centre
/// and one world unit spans `pixels_per_unit` pixels.
struct Camera {
  double pixels_per_unit = 100.0;
  std::int32_t width = 1600;
  std::int32_t height = 1200;

  double to_pixel_x(double world_x, const Vec2& robot) const {
    return (world_x - robot.x) * pixels_per_unit + 0.5 * width;
  }
  double to_pixel_y(double world_y, const Vec2& robot) const {
    return (world_y - robot.y) * pixels_per_unit + 0.5 * height;
  }

  /// Projected box clipped to the frame, or nullopt if nothing of it is in view.
  std::optional<Region> project(const WorldRect& r, const Vec2& robot) const {
    const double px0 = std::floor(to_pixel_x(r.x0, robot));
    const double py0 = std::floor(to_pixel_y(r.y0, robot));
    const double px1 = std::ceil(to_pixel_x(r.x1, robot));
    const double py1 = std::ceil(to_pixel_y(r.y1, robot));
    if (px1 <= 0.0 || py1 <= 0.0 || px0 >= width || py0 >= height) return std::nullopt;
    auto clampi = [](double v, std::int32_t hi) {
      return static_cast<std::int32_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
    };
    return Region{clampi(px0, width), clampi(py0, height), clampi(px1, width),
                  clampi(py1, height)};
  }

  Vec2 unproject(double pixel_x, double pixel_y, const Vec2& robot) const {
    return {robot.x + (pixel_x - 0.5 * width) / pixels_per_unit,
            robot.y + (pixel_y - 0.5 * height) / pixels_per_unit};
  }

  /// World distance from the robot (frame centre) to the centre of a region.
  double distance_to(const Region& r) const {
    return std::hypot(r.center_x() - 0.5 * width, r.center_y() - 0.5 * height) /
           pixels_per_unit;
  }
};

}  // namespace aide
