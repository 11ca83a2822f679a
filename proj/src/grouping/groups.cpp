#include <algorithm>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "gsr/grouping.hpp"

namespace gsr {

std::vector<int> assign_views(BuildingGroup& group, const SceneBundle& scene,
                              const std::vector<RefinedMask>& refined, int min_group_votes) {
  if (group.point_ids.empty()) throw Error("assign_views: empty group");
  if (refined.size() != scene.views.size()) throw Error("assign_views: one refined mask per view required");

  std::vector<Vec3> pts;
  for (const auto& p : scene.points) {
    if (std::binary_search(group.point_ids.begin(), group.point_ids.end(), p.point_id)) pts.push_back(p.xyz);
  }

  const int n_views = static_cast<int>(scene.views.size());
  std::vector<int> votes(n_views, 0);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n_views; ++v) {
    const ViewRecord& view = scene.views[v];
    int count = 0;
    for (const auto& x : pts) {
      const auto px = projection_pixel(project_point(x, view), view.intrinsics);
      if (px && refined[v].rbm.test(px->x, px->y)) ++count;
    }
    votes[v] = count;
  }

  std::vector<int> out;
  for (int v = 0; v < n_views; ++v) {
    if (votes[v] >= min_group_votes) out.push_back(scene.views[v].view_id);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    group.warnings.push_back("group " + std::to_string(group.group_id) + " has no assignable views");
  }
  group.view_ids = out;
  return out;
}

std::vector<BuildingGroup> build_groups(const SceneBundle& scene, const ReliablePointSet& reliable,
                                        const std::vector<RefinedMask>& refined, const GroupingConfig& config) {
  if (reliable.size() == 0) throw GroupingError("build_groups: no reliable points");

  // Point-id ascending order makes the clustering independent of file order.
  std::vector<const SparsePoint*> pts;
  for (const auto& p : scene.points) {
    if (reliable.contains(p.point_id)) pts.push_back(&p);
  }
  std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->point_id < b->point_id; });
  std::vector<Vec3> xyz(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) xyz[i] = pts[i]->xyz;

  std::vector<int> labels = dbscan_cluster(xyz, config.eps, config.min_pts);
  const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (n_clusters == 0) {
    throw GroupingError("DBSCAN found no clusters among " + std::to_string(pts.size()) +
                        " reliable points; increase eps or decrease min_pts");
  }

  std::vector<Vec3> centroid(n_clusters, Vec3::Zero());
  std::vector<int> sizes(n_clusters, 0);
  for (std::size_t i = 0; i < xyz.size(); ++i) {
    if (labels[i] == kNoise) continue;
    centroid[labels[i]] += xyz[i];
    ++sizes[labels[i]];
  }
  for (int c = 0; c < n_clusters; ++c) centroid[c] /= sizes[c];

  const double attach2 = 4.0 * config.eps * config.eps;
  for (std::size_t i = 0; i < xyz.size(); ++i) {
    if (labels[i] != kNoise) continue;
    int best = kNoise;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_clusters; ++c) {
      const double d2 = (xyz[i] - centroid[c]).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    if (best_d2 <= attach2) labels[i] = best;
  }

  std::vector<BuildingGroup> groups(n_clusters);
  for (int c = 0; c < n_clusters; ++c) {
    groups[c].group_id = c;
    groups[c].aabb.min = Vec3::Constant(std::numeric_limits<double>::infinity());
    groups[c].aabb.max = Vec3::Constant(-std::numeric_limits<double>::infinity());
  }
  for (std::size_t i = 0; i < xyz.size(); ++i) {
    if (labels[i] == kNoise) continue;
    auto& g = groups[labels[i]];
    g.point_ids.push_back(pts[i]->point_id);
    g.aabb.min = g.aabb.min.cwiseMin(xyz[i]);
    g.aabb.max = g.aabb.max.cwiseMax(xyz[i]);
  }
  for (auto& g : groups) {
    const Vec3 extent = g.aabb.extent();
    const double fallback = std::max(extent.maxCoeff(), 1e-6);
    for (int a = 0; a < 3; ++a) {
      const double m = config.aabb_margin * (extent[a] > 0 ? extent[a] : fallback);
      g.aabb.min[a] -= m;
      g.aabb.max[a] += m;
    }
    assign_views(g, scene, refined, config.min_group_votes);
  }
  return groups;
}

std::vector<RefinedMask> group_refined_masks(const BuildingGroup& group, const SceneBundle& scene,
                                             const std::vector<SegmentLabelMap>& segments,
                                             const MaskPipelineConfig& config) {
  if (segments.size() != scene.views.size()) throw Error("group_refined_masks: one label map per view required");
  ReliablePointSet own;
  own.point_ids = group.point_ids;
  for (const auto id : group.point_ids) own.scores[id] = 0;
  std::vector<RefinedMask> out(scene.views.size());
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const auto& k = scene.views[v].intrinsics;
    if (!std::binary_search(group.view_ids.begin(), group.view_ids.end(), scene.views[v].view_id)) {
      out[v] = {MaskBitmap(k.width, k.height), MaskBitmap(k.width, k.height)};
      continue;
    }
    out[v].rbm = refine_mask(scene.views[v], scene, own, segments[v], config.min_hits);
    out[v].mb = extract_boundary(out[v].rbm, config.band_radius);
  }
  return out;
}

void save_group_manifest(const std::filesystem::path& path, const std::vector<BuildingGroup>& groups) {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : groups) {
    j["groups"].push_back({{"group_id", g.group_id},
                           {"point_ids", g.point_ids},
                           {"view_ids", g.view_ids},
                           {"aabb",
                            {{"min", {g.aabb.min.x(), g.aabb.min.y(), g.aabb.min.z()}},
                             {"max", {g.aabb.max.x(), g.aabb.max.y(), g.aabb.max.z()}}}},
                           {"warnings", g.warnings}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write group manifest " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<BuildingGroup> load_group_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open group manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed group manifest " + path.string() + ": " + e.what());
  }
  std::vector<BuildingGroup> groups;
  for (const auto& jg : j.at("groups")) {
    BuildingGroup g;
    g.group_id = jg.at("group_id").get<int>();
    g.point_ids = jg.at("point_ids").get<std::vector<std::int64_t>>();
    g.view_ids = jg.at("view_ids").get<std::vector<int>>();
    const auto mn = jg.at("aabb").at("min").get<std::vector<double>>();
    const auto mx = jg.at("aabb").at("max").get<std::vector<double>>();
    g.aabb.min = Vec3(mn[0], mn[1], mn[2]);
    g.aabb.max = Vec3(mx[0], mx[1], mx[2]);
    if (jg.contains("warnings")) g.warnings = jg["warnings"].get<std::vector<std::string>>();
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace gsr
