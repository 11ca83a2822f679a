#pragma once

// Serial reference implementations. They trade speed for the most direct
// formulation and are what the parallel kernels are tested and benchmarked
// against.

#include <vector>

#include "gsr/masks.hpp"
#include "gsr/splat.hpp"
#include "gsr/tsdf.hpp"

namespace gsr::reference {

/// O(pixels x primitives) renderer without tiles or bounding boxes.
RenderedBuffers render_brute_force(const GaussianCloud& cloud, const ViewRecord& view, const Vec3& background,
                                   const RasterSettings& settings = {});

/// Plain double loop over (point, view).
std::vector<PointVotes> count_votes_serial(const SceneBundle& scene, const std::vector<MaskBitmap>& masks);

/// Voxel-by-voxel TSDF update on one thread.
void tsdf_integrate_serial(TsdfVolume& volume, const ImageD& depth, const ViewRecord& view, double truncation);

/// Exhaustive nearest-neighbour distance for every query.
std::vector<double> nearest_distances_brute_force(const std::vector<Vec3>& queries, const std::vector<Vec3>& targets);

}  // namespace gsr::reference
