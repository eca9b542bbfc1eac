#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace aide {

template <typename Point>
double squared_distance(const Point& a, const Point& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

/// Index of the closest centroid; ties go to the lowest index.
template <typename Point>
std::size_t nearest_centroid(const Point& p, std::span<const Point> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

template <typename Point>
struct KMeansResult {
  std::vector<Point> centroids;
  std::vector<std::size_t> assignment;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// mt19937_64 output is specified by the standard; the distribution adaptors
// are not, so draws are converted by hand to stay reproducible across
// standard library implementations.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

template <typename Point>
std::vector<Point> kmeanspp_init(std::span<const Point> points, std::size_t k,
                                 std::mt19937_64& rng) {
  std::vector<Point> centroids;
  centroids.reserve(k);
  const std::size_t n = points.size();
  centroids.push_back(points[static_cast<std::size_t>(unit_draw(rng) * n) % n]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids.front());
  while (centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = unit_draw(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    // total == 0: every point coincides with a chosen centroid; duplicate one.
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's algorithm from one k-means++ seeding. Stops when an assignment
/// pass changes nothing or after `max_iterations` centroid updates; the
/// returned assignment is always nearest-centroid with respect to the returned
/// centroids. Clusters that lose all members keep their previous centroid.
template <typename Point>
KMeansResult<Point> lloyd(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                          int max_iterations) {
  KMeansResult<Point> result;
  if (points.empty() || k == 0) return result;
  std::mt19937_64 rng(seed);
  result.centroids = detail::kmeanspp_init(points, k, rng);
  result.assignment.assign(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.assignment[i] = nearest_centroid(points[i], std::span<const Point>(result.centroids));
  }

  const std::size_t dims = points.front().size();
  while (result.iterations < max_iterations) {
    std::vector<Point> sums(k, Point(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[result.assignment[i]];
      for (std::size_t j = 0; j < dims; ++j) s[j] += points[i][j];
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dims; ++j) {
        result.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
    ++result.iterations;

    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = nearest_centroid(points[i], std::span<const Point>(result.centroids));
      if (c != result.assignment[i]) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  return result;
}

template <typename Point>
double inertia(std::span<const Point> points, const KMeansResult<Point>& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += squared_distance(points[i], r.centroids[r.assignment[i]]);
  }
  return total;
}

/// Best of `restarts` seeded Lloyd runs by within-cluster sum of squares
/// (first run wins ties). Restart r uses seed splitmix(seed + r).
template <typename Point>
KMeansResult<Point> kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed,
                           int max_iterations = 100, int restarts = 10) {
  KMeansResult<Point> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::uint64_t s = seed + static_cast<std::uint64_t>(r) + 0x9e3779b97f4a7c15ULL;
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    auto run = lloyd(points, k, s ^ (s >> 31), max_iterations);
    const double w = inertia(points, run);
    if (w < best_inertia) {
      best_inertia = w;
      best = std::move(run);
    }
  }
  return best;
}

}  // namespace aide
