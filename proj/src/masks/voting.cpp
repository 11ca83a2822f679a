#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "gsr/image_io.hpp"
#include "gsr/masks.hpp"
#include "gsr/ply.hpp"

namespace gsr {

std::vector<PointVotes> count_votes(const SceneBundle& scene, const std::vector<MaskBitmap>& masks) {
  if (masks.size() != scene.views.size()) throw Error("count_votes: one mask per view required");
  const std::size_t n_points = scene.points.size();
  const int n_views = static_cast<int>(scene.views.size());
  std::vector<int> in_mask(n_points, 0);
  std::vector<int> outside(n_points, 0);

#pragma omp parallel
  {
    std::vector<int> local_in(n_points, 0);
    std::vector<int> local_out(n_points, 0);
#pragma omp for schedule(static)
    for (int v = 0; v < n_views; ++v) {
      const ViewRecord& view = scene.views[v];
      const MaskBitmap& mask = masks[v];
      for (std::size_t i = 0; i < n_points; ++i) {
        const auto px = projection_pixel(project_point(scene.points[i].xyz, view), view.intrinsics);
        if (!px) continue;
        if (mask.test(px->x, px->y)) {
          ++local_in[i];
        } else {
          ++local_out[i];
        }
      }
    }
#pragma omp critical
    for (std::size_t i = 0; i < n_points; ++i) {
      in_mask[i] += local_in[i];
      outside[i] += local_out[i];
    }
  }

  std::vector<PointVotes> votes(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    votes[i] = {scene.points[i].point_id, in_mask[i], outside[i]};
  }
  return votes;
}

std::map<std::int64_t, int> find_potential_points(const SceneBundle& scene, const std::vector<MaskBitmap>& masks) {
  std::map<std::int64_t, int> out;
  for (const auto& v : count_votes(scene, masks)) {
    if (v.in_mask > 0) out[v.point_id] = v.in_mask;
  }
  return out;
}

int unreliability_score(const SparsePoint& point, const SceneBundle& scene, const std::vector<MaskBitmap>& masks) {
  int us = 0;
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const auto px = projection_pixel(project_point(point.xyz, scene.views[v]), scene.views[v].intrinsics);
    if (px && !masks[v].test(px->x, px->y)) ++us;
  }
  return us;
}

ReliablePointSet filter_reliable_points(const std::vector<PointVotes>& votes, double tau) {
  if (tau < 0 || std::isnan(tau)) throw Error("filter_reliable_points: tau must be >= 0");
  ReliablePointSet out;
  for (const auto& v : votes) {
    if (v.in_mask <= 0) continue;
    const bool keep = tau == 0.0 ? v.unreliability == 0 : v.unreliability < tau;
    if (!keep) continue;
    out.point_ids.push_back(v.point_id);
    out.scores[v.point_id] = v.unreliability;
    out.in_mask_counts[v.point_id] = v.in_mask;
  }
  std::sort(out.point_ids.begin(), out.point_ids.end());
  return out;
}

MaskBitmap refine_mask(const ViewRecord& view, const SceneBundle& scene, const ReliablePointSet& reliable,
                       const SegmentLabelMap& segments, int min_hits) {
  const auto& k = view.intrinsics;
  if (segments.width() != k.width || segments.height() != k.height) {
    throw ShapeError("segment labels for view " + view.name, k.width, k.height, segments.width(),
                     segments.height());
  }
  std::unordered_map<std::int32_t, int> hits;
  for (const auto& p : scene.points) {
    if (!reliable.contains(p.point_id)) continue;
    const auto px = projection_pixel(project_point(p.xyz, view), k);
    if (px) ++hits[segments.at(px->x, px->y)];
  }
  MaskBitmap rbm(k.width, k.height);
  if (hits.empty()) return rbm;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const auto it = hits.find(segments.at(x, y));
      if (it != hits.end() && it->second >= min_hits) rbm.set(x, y);
    }
  }
  return rbm;
}

MaskPipelineResult run_mask_pipeline(const SceneBundle& scene, const std::vector<MaskBitmap>& coarse,
                                     const std::vector<SegmentLabelMap>& segments,
                                     const MaskPipelineConfig& config) {
  if (segments.size() != scene.views.size()) throw Error("run_mask_pipeline: one label map per view required");
  MaskPipelineResult result;
  result.votes = count_votes(scene, coarse);
  result.reliable = filter_reliable_points(result.votes, config.tau);
  result.refined.resize(scene.views.size());
  const int n = static_cast<int>(scene.views.size());
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    auto rbm = refine_mask(scene.views[v], scene, result.reliable, segments[v], config.min_hits);
    auto mb = extract_boundary(rbm, config.band_radius);
    result.refined[v] = {std::move(rbm), std::move(mb)};
  }
  return result;
}

void save_refined_masks(const std::filesystem::path& dir, const SceneBundle& scene,
                        const std::vector<RefinedMask>& refined) {
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const auto stem = std::filesystem::path(scene.views[v].name).stem().string();
    save_mask(dir / (stem + "_rbm.png"), refined[v].rbm);
    save_mask(dir / (stem + "_mb.png"), refined[v].mb);
  }
}

std::vector<RefinedMask> load_refined_masks(const std::filesystem::path& dir, const SceneBundle& scene) {
  std::vector<RefinedMask> out;
  out.reserve(scene.views.size());
  for (const auto& view : scene.views) {
    const auto stem = std::filesystem::path(view.name).stem().string();
    out.push_back({load_mask(dir / (stem + "_rbm.png"), view.intrinsics),
                   load_mask(dir / (stem + "_mb.png"), view.intrinsics)});
  }
  return out;
}

void save_reliable_points(const std::filesystem::path& path, const SceneBundle& scene,
                          const ReliablePointSet& reliable) {
  std::vector<double> id, x, y, z, us, votes;
  for (const auto& p : scene.points) {
    if (!reliable.contains(p.point_id)) continue;
    id.push_back(static_cast<double>(p.point_id));
    x.push_back(p.xyz.x());
    y.push_back(p.xyz.y());
    z.push_back(p.xyz.z());
    us.push_back(reliable.scores.at(p.point_id));
    votes.push_back(reliable.in_mask_counts.at(p.point_id));
  }
  PlyData ply;
  ply.add("x", PlyType::Float64, std::move(x));
  ply.add("y", PlyType::Float64, std::move(y));
  ply.add("z", PlyType::Float64, std::move(z));
  ply.add("point_id", PlyType::Float64, std::move(id));
  ply.add("us", PlyType::Int32, std::move(us));
  ply.add("votes", PlyType::Int32, std::move(votes));
  write_ply(path, ply);
}

ReliablePointSet load_reliable_points(const std::filesystem::path& path) {
  const PlyData ply = read_ply(path);
  const auto& id = ply.column("point_id");
  const auto& us = ply.column("us");
  const auto& votes = ply.column("votes");
  ReliablePointSet out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    const auto pid = static_cast<std::int64_t>(std::llround(id[i]));
    out.point_ids.push_back(pid);
    out.scores[pid] = static_cast<int>(us[i]);
    out.in_mask_counts[pid] = static_cast<int>(votes[i]);
  }
  std::sort(out.point_ids.begin(), out.point_ids.end());
  return out;
}

}  // namespace gsr
