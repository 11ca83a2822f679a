#include "gsr/trainer.hpp"

#include <omp.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "gsr/ply.hpp"

namespace gsr {
namespace {

const char* kLogHeader = "iteration,rgb,mv_geo,mv_rgb,flatten,ban,gc_load,total";

void write_log_row(std::ostream& out, const LossRecord& r) {
  const auto& c = r.components;
  out << r.iteration << ',' << c.rgb << ',' << c.mv_geo << ',' << c.mv_rgb << ',' << c.flatten << ',' << c.ban
      << ',' << c.gc_load << ',' << r.total << '\n';
}

// Radius of the camera centres around their mean, padded by 10%; falls back
// to the group box diagonal when the views are (nearly) co-located.
double spatial_scale(const BuildingGroup& group, const SceneBundle& scene) {
  Vec3 mean = Vec3::Zero();
  int n = 0;
  for (const int id : group.view_ids) {
    if (scene.view_index(id) < 0) continue;
    mean += scene.view(id).center;
    ++n;
  }
  double radius = 0;
  if (n > 0) {
    mean /= n;
    for (const int id : group.view_ids)
      if (scene.view_index(id) >= 0) radius = std::max(radius, (scene.view(id).center - mean).norm());
  }
  const double extent = 1.1 * radius;
  return extent > 1e-9 ? extent : std::max(group.aabb.diagonal(), 1e-6);
}

struct DensifyStats {
  std::vector<double> grad_sum;
  std::vector<int> seen;
  void reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    seen.assign(n, 0);
  }
};

void dump_abort(const TrainConfig& config, const GroupCheckpoint& state) {
  if (config.log_dir.empty()) return;
  save_gaussians_ply(config.log_dir / ("group_" + std::to_string(state.group_id) + "_abort.ply"), state.cloud);
}

// Clone small primitives and split large ones whose accumulated screen-space
// gradient passes the threshold, then prune faint, oversized and
// out-of-group primitives. Returns the source index of every survivor (-1
// for newly created ones).
std::vector<int> densify_and_prune(GaussianCloud& cloud, const DensifyStats& stats, const TrainConfig& config,
                                   const Aabb& box, double scale, bool prune_large, std::mt19937_64& rng) {
  const std::size_t n = cloud.size();
  std::vector<GaussianPrimitive> next;
  std::vector<int> source;
  next.reserve(n + n / 4);
  std::vector<char> drop(n, 0);
  std::vector<GaussianPrimitive> created;
  std::normal_distribution<double> normal;
  const bool room = n < config.max_primitives;
  for (std::size_t i = 0; i < n && room; ++i) {
    if (stats.seen[i] == 0) continue;
    const double g = stats.grad_sum[i] / stats.seen[i];
    if (!(g >= config.densify_grad_threshold)) continue;
    const GaussianPrimitive& p = cloud.prims[i];
    const Vec3 s = p.scale();
    if (s.maxCoeff() <= config.percent_dense * scale) {
      created.push_back(p);
    } else {
      const Mat3 r = p.rotation_matrix();
      for (int k = 0; k < 2; ++k) {
        GaussianPrimitive c = p;
        const Vec3 offset(normal(rng) * s.x(), normal(rng) * s.y(), normal(rng) * s.z());
        c.mu = p.mu + r * offset;
        c.log_scale = (s / 1.6).array().log();
        created.push_back(c);
      }
      drop[i] = 1;
    }
  }
  auto keep = [&](const GaussianPrimitive& p) {
    if (!p.finite()) return false;
    if (p.opacity() < config.opacity_prune_threshold) return false;
    if (prune_large && p.scale().maxCoeff() > config.max_world_scale * scale) return false;
    return box.contains(p.mu);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i] || !keep(cloud.prims[i])) continue;
    next.push_back(cloud.prims[i]);
    source.push_back(static_cast<int>(i));
  }
  for (const auto& c : created) {
    if (!keep(c)) continue;
    next.push_back(c);
    source.push_back(-1);
  }
  cloud.prims = std::move(next);
  return source;
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 0) throw Error("iterations must be >= 0");
  if (!(densify_grad_threshold > 0) || !(opacity_prune_threshold > 0) || densify_interval <= 0) {
    throw Error("densification thresholds and interval must be positive");
  }
  if (sh_degree < 0 || sh_degree > kMaxShDegree) throw Error("sh_degree must be in [0, 3]");
  weights.validate();
}

GaussianCloud init_gaussians_from_points(const BuildingGroup& group, const SceneBundle& scene, int sh_degree) {
  std::map<std::int64_t, const SparsePoint*> by_id;
  for (const auto& p : scene.points) by_id[p.point_id] = &p;
  std::vector<const SparsePoint*> pts;
  for (const auto id : group.point_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("group " + std::to_string(group.group_id) + " references unknown point " + std::to_string(id));
    pts.push_back(it->second);
  }
  GaussianCloud cloud;
  cloud.sh_degree = sh_degree;
  cloud.prims.resize(pts.size());
  const double diag = group.aabb.diagonal();
  const double fallback = diag > 0 ? 0.01 * diag : 0.01;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double scale = fallback;
    if (n >= 4) {
      double best[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()};
      for (std::ptrdiff_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double d = (pts[i]->xyz - pts[j]->xyz).norm();
        for (int k = 0; k < 3; ++k)
          if (d < best[k]) std::swap(d, best[k]);
      }
      scale = std::max((best[0] + best[1] + best[2]) / 3.0, 1e-7);
    }
    GaussianPrimitive& p = cloud.prims[i];
    p.mu = pts[i]->xyz;
    p.log_scale = Vec3::Constant(std::log(scale));
    p.opacity_logit = logit(0.1);
    p.sh[0] = rgb_to_sh0(pts[i]->color);
  }
  return cloud;
}

std::vector<int> select_neighbour_views(const BuildingGroup& group, const SceneBundle& scene) {
  std::map<int, std::vector<std::int64_t>> seen;  // view id -> group points in its track
  std::map<std::int64_t, const SparsePoint*> by_id;
  for (const auto& p : scene.points) by_id[p.point_id] = &p;
  for (const auto id : group.point_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    for (const int v : it->second->track) seen[v].push_back(id);
  }
  for (auto& [v, ids] : seen) std::sort(ids.begin(), ids.end());
  std::vector<int> out;
  for (const int a : group.view_ids) {
    int best = -1;
    std::size_t best_shared = 0;
    for (const int b : group.view_ids) {
      if (b == a) continue;
      const auto& pa = seen[a];
      const auto& pb = seen[b];
      std::vector<std::int64_t> common;
      std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(common));
      if (common.size() > best_shared) {
        best_shared = common.size();
        best = b;
      }
    }
    out.push_back(best);
  }
  return out;
}

GroupCheckpoint train_group(const GroupInputs& inputs, const TrainConfig& config) {
  config.validate();
  const BuildingGroup& group = *inputs.group;
  const SceneBundle& scene = *inputs.scene;
  const auto& images = *inputs.images;
  if (inputs.masks.size() != scene.views.size() || images.size() != scene.views.size()) {
    throw Error("train_group: images and masks must be aligned with the scene views");
  }

  GroupCheckpoint ck;
  ck.group_id = group.group_id;
  ck.cloud = init_gaussians_from_points(group, scene, config.sh_degree);
  if (config.iterations == 0) return ck;

  const std::vector<int> neighbour_ids = select_neighbour_views(group, scene);
  std::vector<ViewTarget> targets;
  std::vector<NeighbourTarget> neighbours;
  std::map<int, ImageD> gray;  // view index -> luma
  for (std::size_t k = 0; k < group.view_ids.size(); ++k) {
    const int idx = scene.view_index(group.view_ids[k]);
    if (idx < 0) continue;
    if (inputs.masks[idx].rbm.count() == 0 || images[idx].empty()) {
      ck.warnings.push_back("view " + scene.views[idx].name + " has no group pixels; skipped");
      continue;
    }
    targets.push_back(make_view_target(scene.views[idx], images[idx], inputs.masks[idx], config.weights));
    NeighbourTarget nb;
    const int nidx = neighbour_ids[k] >= 0 ? scene.view_index(neighbour_ids[k]) : -1;
    if (nidx >= 0 && !images[nidx].empty()) {
      if (!gray.count(nidx)) gray[nidx] = to_grayscale(images[nidx]);
      nb.view = &scene.views[nidx];
      nb.gray = gray[nidx];
    }
    neighbours.push_back(std::move(nb));
  }
  if (targets.empty()) throw Error("group " + std::to_string(group.group_id) + " has no trainable view");

  std::ofstream log;
  if (!config.log_dir.empty()) {
    std::filesystem::create_directories(config.log_dir);
    ck.loss_log = config.log_dir / ("group_" + std::to_string(group.group_id) + "_loss.csv");
    log.open(ck.loss_log);
    log << kLogHeader << '\n' << std::setprecision(10);
  }

  std::mt19937_64 rng(config.seed ^ static_cast<std::uint64_t>(group.group_id));
  const double scale = spatial_scale(group, scene);
  AdamOptimizer adam(config.lr, scale, config.iterations);
  adam.resize(ck.cloud.size());
  DensifyStats stats;
  stats.reset(ck.cloud.size());
  const int densify_stop = static_cast<int>(config.densify_until * config.iterations);

  std::vector<int> order(targets.size());
  std::size_t cursor = order.size();
  for (int it = 1; it <= config.iterations; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const int t = order[cursor++];
    ObjectiveOptions opt;
    opt.multi_view = it >= config.multi_view_from;
    opt.load_gradient = config.load_gradient;
    opt.load_gradient_scale = config.load_gradient_scale;
    ObjectiveResult r;
    try {
      r = evaluate_objective(ck.cloud, targets[t], neighbours[t].view ? &neighbours[t] : nullptr, config.weights,
                             config.raster, opt);
    } catch (const NonFiniteLossError& e) {
      ck.iteration = it - 1;
      dump_abort(config, ck);
      throw TrainingAborted("group " + std::to_string(group.group_id) + " iteration " + std::to_string(it) + ": " +
                                e.what(),
                            std::move(ck));
    }
    const LossRecord rec{it, r.components, r.total};
    ck.history.push_back(rec);
    if (log) write_log_row(log, rec);

    adam.step(ck.cloud, r.grad, it);
    for (const auto& p : ck.cloud.prims) {
      if (!p.finite()) {
        ck.iteration = it;
        dump_abort(config, ck);
        throw TrainingAborted("group " + std::to_string(group.group_id) + " iteration " + std::to_string(it) +
                                  ": non-finite parameters after the update",
                              std::move(ck));
      }
    }

    if (it < densify_stop) {
      const auto& k = targets[t].view->intrinsics;
      const Vec2 to_ndc(0.5 * k.width, 0.5 * k.height);
      for (std::size_t i = 0; i < ck.cloud.size(); ++i) {
        if (!r.visible[i]) continue;
        stats.grad_sum[i] += r.mean2d_grad[i].cwiseProduct(to_ndc).norm();
        ++stats.seen[i];
      }
      if (it > config.densify_from && it % config.densify_interval == 0) {
        const std::vector<int> source = densify_and_prune(ck.cloud, stats, config, group.aabb, scale,
                                                          it > config.opacity_reset_interval, rng);
        adam.remap(source);
        stats.reset(ck.cloud.size());
      }
      if (config.opacity_reset_interval > 0 && it % config.opacity_reset_interval == 0) {
        for (auto& p : ck.cloud.prims) p.opacity_logit = std::min(p.opacity_logit, logit(0.01));
        adam.reset_opacity_moments();
      }
    }
  }

  // Final cull keeps every primitive inside the group box.
  std::erase_if(ck.cloud.prims, [&](const GaussianPrimitive& p) { return !group.aabb.contains(p.mu); });
  ck.iteration = config.iterations;
  return ck;
}

bool TrainRun::all_ok() const {
  return std::all_of(reports.begin(), reports.end(), [](const GroupReport& r) { return r.ok; });
}

TrainRun train_all_groups(const std::vector<GroupInputs>& groups, const TrainConfig& config, int workers) {
  if (workers < 1) throw Error("workers must be >= 1");
  TrainRun run;
  run.checkpoints.resize(groups.size());
  run.reports.resize(groups.size());
  TrainConfig per_group = config;
  if (workers > 1 && per_group.raster.threads == 0) {
    per_group.raster.threads = std::max(1, omp_get_max_threads() / workers);
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t g = next++; g < groups.size(); g = next++) {
      GroupReport& rep = run.reports[g];
      rep.group_id = groups[g].group->group_id;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (workers > 1) omp_set_num_threads(std::max(1, per_group.raster.threads));
        GroupCheckpoint ck = train_group(groups[g], per_group);
        rep.ok = true;
        rep.iterations = ck.iteration;
        rep.primitives = ck.cloud.size();
        if (!ck.history.empty()) rep.final_loss = ck.history.back();
        run.checkpoints[g] = std::move(ck);
      } catch (const TrainingAborted& e) {
        rep.error = e.what();
        rep.iterations = e.checkpoint.iteration;
        rep.primitives = e.checkpoint.cloud.size();
      } catch (const std::exception& e) {
        rep.error = e.what();
      }
      rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const int n_threads = static_cast<int>(std::min<std::size_t>(workers, groups.size()));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return run;
}

void write_run_report(const std::filesystem::path& path, const TrainRun& run) {
  nlohmann::json j;
  j["ok"] = run.all_ok();
  j["groups"] = nlohmann::json::array();
  for (const auto& r : run.reports) {
    nlohmann::json g{{"group_id", r.group_id},     {"ok", r.ok},
                     {"wall_seconds", r.wall_seconds}, {"iterations", r.iterations},
                     {"primitives", r.primitives}};
    if (!r.ok) g["error"] = r.error;
    if (r.final_loss) {
      const auto& c = r.final_loss->components;
      g["final_loss"] = {{"rgb", c.rgb},   {"mv_geo", c.mv_geo},   {"mv_rgb", c.mv_rgb}, {"flatten", c.flatten},
                         {"ban", c.ban},   {"gc_load", c.gc_load}, {"total", r.final_loss->total}};
    }
    j["groups"].push_back(std::move(g));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
}

}  // namespace gsr
