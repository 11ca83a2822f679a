#pragma once

// Independent oracles and scene builders shared by the unit and acceptance
// suites.

#include <cmath>
#include <random>
#include <vector>

#include "gsr/grouping.hpp"
#include "gsr/masks.hpp"
#include "gsr/splat.hpp"
#include "test_util.hpp"

namespace gsr::test {

inline GaussianPrimitive disk(const Vec3& mu, double radius, double opacity, const Vec3& rgb) {
  GaussianPrimitive p;
  p.mu = mu;
  p.log_scale = Vec3(std::log(radius), std::log(radius), std::log(1e-4));
  p.opacity_logit = logit(opacity);
  p.sh[0] = rgb_to_sh0(rgb);
  return p;
}

inline double max_abs_diff(const ImageD& a, const ImageD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}


// Textbook O(n^2) DBSCAN with the same border rule: scan in index order,
// expand clusters breadth first, a border point keeps its first label.
inline std::vector<int> dbscan_oracle(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const int n = static_cast<int>(pts.size());
  auto neighbours = [&](int i) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j)
      if ((pts[i] - pts[j]).norm() <= eps) out.push_back(j);
    return out;
  };
  std::vector<int> label(n, -2);  // -2 unvisited
  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (label[i] != -2) continue;
    auto nb = neighbours(i);
    if (static_cast<int>(nb.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    label[i] = cluster;
    std::vector<int> queue(nb.begin(), nb.end());
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int j = queue[q];
      if (label[j] == kNoise) label[j] = cluster;
      if (label[j] != -2) continue;
      label[j] = cluster;
      auto nb2 = neighbours(j);
      if (static_cast<int>(nb2.size()) >= min_pts) queue.insert(queue.end(), nb2.begin(), nb2.end());
    }
    ++cluster;
  }
  return label;
}

inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == kNoise) != (b[i] == kNoise)) return false;
    if (a[i] == kNoise) continue;
    if (ab.count(a[i]) && ab[a[i]] != b[i]) return false;
    if (ba.count(b[i]) && ba[b[i]] != a[i]) return false;
    ab[a[i]] = b[i];
    ba[b[i]] = a[i];
  }
  return true;
}

inline std::vector<Vec3> random_blobs(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 100);
  std::normal_distribution<double> g(0, 6);
  std::vector<Vec3> centres;
  for (int c = 0; c < 4; ++c) centres.push_back(Vec3(u(rng), u(rng), u(rng) / 4));
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    if (i % 10 == 0) {
      pts.push_back(Vec3(u(rng), u(rng), u(rng)));
    } else {
      pts.push_back(centres[i % 4] + Vec3(g(rng), g(rng), g(rng)));
    }
  }
  return pts;
}


struct VotingScene {
  SceneBundle scene;
  std::vector<MaskBitmap> masks;
};

// Points near the origin, ring of cameras, masks = blobs around true
// building projections with random flipped pixels.
inline VotingScene random_voting_scene(std::uint64_t seed, int n_points, int n_views) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2, 2);
  std::uniform_real_distribution<double> unit(0, 1);
  VotingScene vs;
  const auto k = test::square_intrinsics(48, 40);
  for (int j = 0; j < n_views; ++j) {
    const double a = 2 * M_PI * j / n_views;
    vs.scene.views.push_back(
        test::look_at(Vec3(8 * std::cos(a), 8 * std::sin(a), 3 + u(rng)), Vec3::Zero(), Vec3(0, 0, 1), k, j));
  }
  for (int i = 0; i < n_points; ++i) {
    SparsePoint p;
    p.point_id = i * 2 + 1;
    p.xyz = Vec3(u(rng), u(rng), u(rng)) * (i % 7 == 0 ? 4.0 : 1.0);
    p.track = {0};
    vs.scene.points.push_back(p);
  }
  vs.scene.rebuild_index();
  for (int j = 0; j < n_views; ++j) {
    MaskBitmap m(48, 48);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) m.set(x, y, std::hypot(x - 24.0, y - 24.0) < 12 + 4 * unit(rng));
    for (int e = 0; e < 60; ++e) {
      const int x = static_cast<int>(unit(rng) * 48), y = static_cast<int>(unit(rng) * 48);
      m.set(x, y, !m.test(x, y));
    }
    vs.masks.push_back(m);
  }
  return vs;
}


inline std::vector<ViewRecord> sphere_cameras(int n) {
  std::vector<ViewRecord> views;
  for (int j = 0; j < n; ++j) {
    const double a = 2 * M_PI * j / n;
    const double el = (j % 3 - 1) * 0.6;
    views.push_back(test::look_at(4 * Vec3(std::cos(a) * std::cos(el), std::sin(a) * std::cos(el), std::sin(el)),
                                  Vec3::Zero(), Vec3(0, 0, 1), test::square_intrinsics(96, 90), j));
  }
  return views;
}

inline ImageD sphere_depth(const ViewRecord& v, double r) {
  const auto& k = v.intrinsics;
  ImageD d(k.width, k.height, 1, kInvalidDepth);
  const Vec3 c = v.rotation * (Vec3::Zero() - v.center);  // sphere centre in camera frame
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 ray = pixel_ray(k, x, y);
      const double a = ray.squaredNorm(), b = -2 * ray.dot(c), cc = c.squaredNorm() - r * r;
      const double disc = b * b - 4 * a * cc;
      if (disc >= 0) d.at(x, y) = (-b - std::sqrt(disc)) / (2 * a);
    }
  return d;
}

}  // namespace gsr::test
