#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsr/tsdf.hpp"
#include "gsr/types.hpp"

namespace gsr {

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t sample_count = 0;
  std::size_t gt_count = 0;
  double threshold = 0.0;
  double sample_density = 0.0;
};

/// 2PR / (P + R), or 0 when both are 0.
double f1_score(double precision, double recall);

/// Area-weighted uniform samples, round(area / density^2) in total.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, double density, std::uint64_t seed = 0);

/// Uniform hash grid answering exact nearest-neighbour queries.
class NearestNeighborGrid {
 public:
  NearestNeighborGrid(std::span<const Vec3> points, double cell_size);
  /// Euclidean distance to the closest point; infinity for an empty set.
  double nearest(const Vec3& q) const;

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
  std::vector<Vec3> points_;  // sorted by cell
  std::vector<std::pair<std::int64_t, std::pair<std::size_t, std::size_t>>> cells_;  // key -> [begin, end)
  double cell_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  std::array<std::int64_t, 3> dims_{0, 0, 0};
  const std::pair<std::size_t, std::size_t>* find(std::int64_t key) const;
};

/// Exact nearest distances from every query to `targets`, in parallel.
std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets,
                                      double cell_size = 0.0);

/// Precision over samples and recall over ground truth at `threshold`
/// (distance strictly below counts). Throws when either cloud is empty.
EvalReport precision_recall_f1(std::span<const Vec3> samples, std::span<const Vec3> gt, double threshold);

/// One point per occupied voxel (the first in input order).
std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double voxel);

}  // namespace gsr
