#include <algorithm>
#include <limits>

#include "gsr/reference.hpp"

namespace gsr::reference {

std::vector<PointVotes> count_votes_serial(const SceneBundle& scene, const std::vector<MaskBitmap>& masks) {
  if (masks.size() != scene.views.size()) throw Error("count_votes_serial: one mask per view required");
  std::vector<PointVotes> votes;
  votes.reserve(scene.points.size());
  for (const auto& p : scene.points) {
    PointVotes v{p.point_id, 0, 0};
    for (std::size_t j = 0; j < scene.views.size(); ++j) {
      const auto px = projection_pixel(project_point(p.xyz, scene.views[j]), scene.views[j].intrinsics);
      if (!px) continue;
      if (masks[j].test(px->x, px->y)) {
        ++v.in_mask;
      } else {
        ++v.unreliability;
      }
    }
    votes.push_back(v);
  }
  return votes;
}

void tsdf_integrate_serial(TsdfVolume& volume, const ImageD& depth, const ViewRecord& view, double truncation) {
  if (truncation < 2.0 * volume.voxel_size) throw Error("tsdf_integrate_serial: truncation too small");
  for (int k = 0; k < volume.dims[2]; ++k) {
    for (int j = 0; j < volume.dims[1]; ++j) {
      for (int i = 0; i < volume.dims[0]; ++i) {
        const Projection p = project_point(volume.voxel_center(i, j, k), view);
        const auto px = projection_pixel(p, view.intrinsics);
        if (!px) continue;
        const double d = depth.at(px->x, px->y);
        if (!is_valid_depth(d)) continue;
        const double sdf = d - p.z;
        if (sdf <= -truncation) continue;
        const std::size_t idx = volume.index(i, j, k);
        const double w = volume.weight[idx];
        volume.tsdf[idx] = (volume.tsdf[idx] * w + std::clamp(sdf / truncation, -1.0, 1.0)) / (w + 1.0);
        volume.weight[idx] = w + 1.0;
      }
    }
  }
}

std::vector<double> nearest_distances_brute_force(const std::vector<Vec3>& queries, const std::vector<Vec3>& targets) {
  std::vector<double> out(queries.size(), std::numeric_limits<double>::infinity());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (const auto& t : targets) out[q] = std::min(out[q], (queries[q] - t).norm());
  }
  return out;
}

}  // namespace gsr::reference
