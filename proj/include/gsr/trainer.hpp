#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsr/grouping.hpp"
#include "gsr/losses.hpp"
#include "gsr/objective.hpp"
#include "gsr/splat.hpp"

namespace gsr {

struct LearningRates {
  double position = 1.6e-4;  // multiplied by the group's spatial scale
  double position_final = 1.6e-6;
  double opacity = 0.05;
  double scale = 5e-3;
  double rotation = 1e-3;
  double color = 2.5e-3;  // higher SH bands use color / 20
};

struct TrainConfig {
  int iterations = 30000;
  LearningRates lr;
  int densify_from = 500;
  int densify_interval = 100;
  double densify_until = 0.6;  // fraction of iterations
  double densify_grad_threshold = 2e-4;
  double opacity_prune_threshold = 0.005;
  double percent_dense = 0.01;  // clone below this fraction of the spatial scale, split above
  double max_world_scale = 0.1;  // prune primitives larger than this fraction of the spatial scale
  int opacity_reset_interval = 3000;
  std::size_t max_primitives = 200000;
  int multi_view_from = 0;  // iteration at which the multi-view terms switch on
  LoadGradient load_gradient = LoadGradient::Surrogate;
  // The unscaled soft-count gradient dwarfs the photometric one and drives
  // every opacity to zero; this damping keeps reconstruction quality.
  double load_gradient_scale = 1e-3;
  std::uint64_t seed = 0;
  int sh_degree = 0;
  LossWeights weights;
  RasterSettings raster;
  MultiViewSettings multi_view;
  std::filesystem::path log_dir;  // loss CSV and abort dumps; empty disables files
  void validate() const;
};

/// One CSV row of the training log.
struct LossRecord {
  int iteration = 0;
  LossComponents components;
  double total = 0.0;
};

struct GroupCheckpoint {
  int group_id = 0;
  GaussianCloud cloud;
  int iteration = 0;
  std::filesystem::path loss_log;
  std::vector<LossRecord> history;
  std::vector<std::string> warnings;
};

/// Raised when a loss turns non-finite. The state reached so far is kept
/// and, when a log directory is configured, dumped as PLY.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, GroupCheckpoint state)
      : Error(what), checkpoint(std::move(state)) {}
  GroupCheckpoint checkpoint;
};

/// Inputs for one group. Images and masks are aligned with scene.views;
/// entries for views outside the group may be empty.
struct GroupInputs {
  const BuildingGroup* group = nullptr;
  const SceneBundle* scene = nullptr;
  const std::vector<ImageD>* images = nullptr;
  std::vector<RefinedMask> masks;
};

/// One primitive per group point, isotropic scale from the mean distance to
/// the three nearest group points, opacity 0.1 and the point colour.
GaussianCloud init_gaussians_from_points(const BuildingGroup& group, const SceneBundle& scene, int sh_degree = 0);

/// Co-group view sharing the most group points with each group view
/// (-1 when no other view shares a point). Indexed like group.view_ids.
std::vector<int> select_neighbour_views(const BuildingGroup& group, const SceneBundle& scene);

/// Adam state and the optimizer step, exposed for tests.
class AdamOptimizer {
 public:
  AdamOptimizer(const LearningRates& lr, double spatial_scale, int total_iterations);
  void resize(std::size_t n);
  void step(GaussianCloud& cloud, const CloudGradients& grad, int iteration);
  /// Keeps the moments of the listed primitives, in order; new entries start at zero.
  void remap(const std::vector<int>& source);
  double position_lr(int iteration) const;
  void reset_opacity_moments();

 private:
  LearningRates lr_;
  double spatial_scale_;
  int total_iterations_;
  std::vector<PrimitiveGradient> m_, v_;
};

GroupCheckpoint train_group(const GroupInputs& inputs, const TrainConfig& config);

struct GroupReport {
  int group_id = 0;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
  int iterations = 0;
  std::size_t primitives = 0;
  std::optional<LossRecord> final_loss;
};

struct TrainRun {
  std::vector<std::optional<GroupCheckpoint>> checkpoints;  // aligned with the input groups
  std::vector<GroupReport> reports;
  bool all_ok() const;
};

/// Trains every group on a pool of `workers` threads. Group g uses the seed
/// config.seed ^ group_id, so results do not depend on scheduling. A
/// failing group is reported and the others still run.
TrainRun train_all_groups(const std::vector<GroupInputs>& groups, const TrainConfig& config, int workers);

void write_run_report(const std::filesystem::path& path, const TrainRun& run);

/// Gaussian cloud PLY with the usual x/y/z, scale_*, rot_*, opacity and
/// f_dc / f_rest properties.
void save_gaussians_ply(const std::filesystem::path& path, const GaussianCloud& cloud);
GaussianCloud load_gaussians_ply(const std::filesystem::path& path);

}  // namespace gsr
