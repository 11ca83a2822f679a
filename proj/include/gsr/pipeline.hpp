#pragma once

// Stage composition shared by the CLI and the acceptance suite.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gsr/eval.hpp"
#include "gsr/grouping.hpp"
#include "gsr/masks.hpp"
#include "gsr/meshing.hpp"
#include "gsr/trainer.hpp"

namespace gsr {

struct PipelineConfig {
  MaskPipelineConfig masks;
  GroupingConfig grouping;
  TrainConfig train;
  MeshingConfig meshing;
  double eval_threshold = 0.0;  // <= 0: 2 * voxel size
  double eval_density = 0.0;    // <= 0: voxel size
  bool downsample_gt = false;
  int workers = 1;
};

/// Applies one `key = value` setting; throws Error on an unknown key or a
/// malformed value.
void apply_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
/// Reads a flat key=value file. Blank lines and lines starting with '#' are
/// ignored.
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);
/// Every recognised key with a one-line description.
const std::map<std::string, std::string>& config_keys();

/// Scene plus the rasters that the later stages consume, aligned with
/// scene.views.
struct SceneData {
  SceneBundle scene;
  std::vector<ImageD> images;
  std::vector<MaskBitmap> masks;
  std::vector<SegmentLabelMap> segments;
};

SceneData load_scene_data(const std::filesystem::path& root);
/// Writes the sparse model, images, masks and segments in the layout
/// load_scene_data reads.
void write_scene_data(const std::filesystem::path& root, const SceneData& data);

/// Shrinks every view whose longer edge exceeds `max_edge`. Colour is box
/// filtered, masks and labels take the nearest source pixel, and the
/// intrinsics are rescaled about the pixel-centre convention.
SceneData downscale_scene(const SceneData& data, int max_edge);

/// Per-group training inputs using each group's own refined masks.
std::vector<GroupInputs> make_group_inputs(const std::vector<BuildingGroup>& groups, const SceneData& data,
                                           const MaskPipelineConfig& config);

/// Renders the depth maps of every trained group in its own views, masked
/// by that group's refined mask.
std::vector<GroupSurface> render_group_surfaces(const std::vector<GroupInputs>& inputs,
                                                const std::vector<GaussianCloud>& clouds,
                                                const RasterSettings& settings);

/// Mesh -> samples -> metrics with the config's threshold and density.
EvalReport evaluate_mesh(const TriangleMesh& mesh, const std::vector<Vec3>& gt, double threshold, double density,
                         bool downsample_gt);

}  // namespace gsr
