#include "gsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace gsr {
namespace {

constexpr std::int64_t kAxisBits = 21;
constexpr std::int64_t kAxisMask = (std::int64_t{1} << kAxisBits) - 1;

// Cells that differ by a multiple of 2^21 along an axis share a key.
std::int64_t pack(std::int64_t i, std::int64_t j, std::int64_t k) {
  return ((i & kAxisMask) << (2 * kAxisBits)) | ((j & kAxisMask) << kAxisBits) | (k & kAxisMask);
}

}  // namespace

double f1_score(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, double density, std::uint64_t seed) {
  if (!(density > 0)) throw Error("sample density must be positive");
  std::vector<double> cdf;
  double total = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    cdf.push_back(total);
  }
  const auto n = static_cast<std::size_t>(std::llround(total / (density * density)));
  std::vector<Vec3> out;
  if (n == 0 || total <= 0) return out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0, 1);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = u01(rng) * total;
    const std::size_t t = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(),
                                                mesh.triangles.size() - 1);
    const auto& tri = mesh.triangles[t];
    double a = u01(rng), b = u01(rng);
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const Vec3& v0 = mesh.vertices[tri[0]];
    out.push_back(v0 + a * (mesh.vertices[tri[1]] - v0) + b * (mesh.vertices[tri[2]] - v0));
  }
  return out;
}

NearestNeighborGrid::NearestNeighborGrid(std::span<const Vec3> points, double cell_size) : cell_(cell_size) {
  if (!(cell_ > 0)) throw Error("grid cell size must be positive");
  if (points.empty()) return;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  origin_ = lo;
  // Keep every axis below 2^20 cells so grid keys stay unique.
  cell_ = std::max(cell_, (hi - lo).maxCoeff() / double(1 << 20));
  for (int a = 0; a < 3; ++a) dims_[a] = static_cast<std::int64_t>(std::floor((hi[a] - lo[a]) / cell_)) + 1;
  std::vector<std::pair<std::int64_t, std::size_t>> keyed(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = cell_of(points[i]);
    keyed[i] = {pack(c[0], c[1], c[2]), i};
  }
  std::sort(keyed.begin(), keyed.end());
  points_.reserve(points.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i == 0 || keyed[i].first != keyed[i - 1].first) cells_.push_back({keyed[i].first, {i, i}});
    cells_.back().second.second = i + 1;
    points_.push_back(points[keyed[i].second]);
  }
}

std::array<std::int64_t, 3> NearestNeighborGrid::cell_of(const Vec3& p) const {
  std::array<std::int64_t, 3> c;
  for (int a = 0; a < 3; ++a) c[a] = static_cast<std::int64_t>(std::floor((p[a] - origin_[a]) / cell_));
  return c;
}

const std::pair<std::size_t, std::size_t>* NearestNeighborGrid::find(std::int64_t key) const {
  const auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                                   [](const auto& e, std::int64_t k) { return e.first < k; });
  return it != cells_.end() && it->first == key ? &it->second : nullptr;
}

double NearestNeighborGrid::nearest(const Vec3& q) const {
  if (points_.empty()) return std::numeric_limits<double>::infinity();
  const auto c = cell_of(q);
  // Rings closer than the grid box hold no cells; rings past the far side add nothing.
  std::int64_t first = 0, last = 0;
  for (int a = 0; a < 3; ++a) {
    first = std::max({first, -c[a], c[a] - (dims_[a] - 1)});
    last = std::max({last, c[a], dims_[a] - 1 - c[a]});
  }
  double best2 = std::numeric_limits<double>::infinity();
  for (std::int64_t r = first; r <= last; ++r) {
    for (std::int64_t i = std::max<std::int64_t>(c[0] - r, 0); i <= std::min(c[0] + r, dims_[0] - 1); ++i) {
      for (std::int64_t j = std::max<std::int64_t>(c[1] - r, 0); j <= std::min(c[1] + r, dims_[1] - 1); ++j) {
        const bool face = std::abs(i - c[0]) == r || std::abs(j - c[1]) == r;
        const std::int64_t step = face ? 1 : std::max<std::int64_t>(2 * r, 1);
        for (std::int64_t k = c[2] - r; k <= c[2] + r; k += step) {
          if (k < 0 || k >= dims_[2]) continue;
          const auto* range = find(pack(i, j, k));
          if (!range) continue;
          for (std::size_t p = range->first; p < range->second; ++p) best2 = std::min(best2, (points_[p] - q).squaredNorm());
        }
      }
    }
    // q lies in cell c, so anything in ring r + 1 or beyond is at least r * cell away.
    const double bound = r * cell_;
    if (best2 <= bound * bound) break;
  }
  return std::sqrt(best2);
}

std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets, double cell) {
  if (!(cell > 0)) {
    // About a few targets per cell for surface-like clouds.
    Vec3 lo = Vec3::Constant(0), hi = Vec3::Constant(0);
    if (!targets.empty()) {
      lo = hi = targets[0];
      for (const auto& p : targets) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    }
    const double extent = std::max((hi - lo).maxCoeff(), 1e-9);
    cell = extent / std::max(1.0, std::sqrt(targets.size() / 4.0));
  }
  const NearestNeighborGrid grid(targets, cell);
  std::vector<double> out(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i) out[i] = grid.nearest(queries[i]);
  return out;
}

EvalReport precision_recall_f1(std::span<const Vec3> samples, std::span<const Vec3> gt, double threshold) {
  if (!(threshold > 0)) throw Error("threshold must be positive");
  if (samples.empty()) throw Error("precision_recall_f1: the sample cloud is empty");
  if (gt.empty()) throw Error("precision_recall_f1: the ground-truth cloud is empty");
  auto fraction_within = [threshold](const std::vector<double>& d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [threshold](double x) { return x < threshold; })) /
           d.size();
  };
  EvalReport r;
  r.precision = fraction_within(nearest_distances(samples, gt, threshold));
  r.recall = fraction_within(nearest_distances(gt, samples, threshold));
  r.f1 = f1_score(r.precision, r.recall);
  r.sample_count = samples.size();
  r.gt_count = gt.size();
  r.threshold = threshold;
  return r;
}

std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double voxel) {
  if (!(voxel > 0)) throw Error("voxel size must be positive");
  std::set<std::array<std::int64_t, 3>> seen;
  std::vector<Vec3> out;
  for (const auto& p : points) {
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

}  // namespace gsr
