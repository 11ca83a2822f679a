#include <cmath>
#include <deque>
#include <unordered_map>

#include "gsr/grouping.hpp"

namespace gsr {
namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
  }
};

class NeighborGrid {
 public:
  NeighborGrid(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(static_cast<int>(i));
  }

  // Indices within eps of point i (including i), ascending.
  std::vector<int> query(int i, double eps) const {
    std::vector<int> out;
    const CellKey c = key(points_[i]);
    const double eps2 = eps * eps;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (int j : it->second) {
            if ((points_[j] - points_[i]).squaredNorm() <= eps2) out.push_back(j);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  CellKey key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
};

}  // namespace

std::vector<int> dbscan_cluster(std::span<const Vec3> points, double eps, int min_pts) {
  if (!(eps > 0)) throw Error("dbscan_cluster: eps must be > 0");
  if (min_pts < 1) throw Error("dbscan_cluster: min_pts must be >= 1");

  const int n = static_cast<int>(points.size());
  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  const NeighborGrid grid(points, eps);

  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    const auto seeds = grid.query(i, eps);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;  // may later become a border point
      continue;
    }
    labels[i] = cluster;
    std::deque<int> frontier(seeds.begin(), seeds.end());
    while (!frontier.empty()) {
      const int j = frontier.front();
      frontier.pop_front();
      if (labels[j] == kNoise) labels[j] = cluster;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = cluster;
      const auto nb = grid.query(j, eps);
      if (static_cast<int>(nb.size()) >= min_pts) frontier.insert(frontier.end(), nb.begin(), nb.end());
    }
    ++cluster;
  }
  return labels;
}

}  // namespace gsr
