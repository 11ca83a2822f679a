// gsrecon: command-line driver for the reconstruction stages.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "gsr/pipeline.hpp"
#include "gsr/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  fs::path config_file;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  fs::path out = "gsr_out";
  bool json = false;
};

// Thrown for a stage that ran but did not succeed (exit code 1).
struct StageFailure : gsr::Error {
  using Error::Error;
  json report;
  StageFailure(const std::string& what, json r) : Error(what), report(std::move(r)) {}
};

gsr::PipelineConfig resolve_config(const Globals& g) {
  gsr::PipelineConfig c;
  if (!g.config_file.empty()) gsr::apply_config_file(c, g.config_file);
  for (const auto& kv : g.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    gsr::apply_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) c.train.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  return c;
}

void emit(const Globals& g, const json& j) {
  if (g.json) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  for (const auto& [k, v] : j.items()) {
    if (v.is_structured()) continue;
    std::cout << k << ": " << v << '\n';
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
}

// --- stages --------------------------------------------------------------

json run_ingest(const fs::path& scene_dir, const fs::path& out, int max_edge) {
  gsr::SceneData data = gsr::load_scene_data(scene_dir);
  json j{{"views", data.scene.views.size()}, {"points", data.scene.points.size()}};
  if (max_edge > 0) {
    data = gsr::downscale_scene(data, max_edge);
    gsr::write_scene_data(out / "scene", data);
    j["scene"] = (out / "scene").string();
  } else {
    j["scene"] = scene_dir.string();
  }
  int max_w = 0, max_h = 0;
  for (const auto& v : data.scene.views) {
    max_w = std::max(max_w, v.intrinsics.width);
    max_h = std::max(max_h, v.intrinsics.height);
  }
  j["max_width"] = max_w;
  j["max_height"] = max_h;
  write_json(out / "ingest.json", j);
  return j;
}

json run_refine(const gsr::SceneData& data, const gsr::PipelineConfig& c, const fs::path& out) {
  const auto r = gsr::run_mask_pipeline(data.scene, data.masks, data.segments, c.masks);
  gsr::save_refined_masks(out / "refined", data.scene, r.refined);
  gsr::save_reliable_points(out / "reliable.ply", data.scene, r.reliable);
  std::size_t coarse = 0, refined = 0;
  for (std::size_t i = 0; i < r.refined.size(); ++i) {
    coarse += data.masks[i].count();
    refined += r.refined[i].rbm.count();
  }
  return {{"reliable_points", r.reliable.size()}, {"potential_points", r.votes.size()},
          {"coarse_mask_pixels", coarse}, {"refined_mask_pixels", refined}};
}

std::vector<gsr::BuildingGroup> run_group(const gsr::SceneData& data, const gsr::PipelineConfig& c, const fs::path& out,
                                          json& j) {
  const auto reliable = gsr::load_reliable_points(out / "reliable.ply");
  const auto refined = gsr::load_refined_masks(out / "refined", data.scene);
  auto groups = gsr::build_groups(data.scene, reliable, refined, c.grouping);
  gsr::save_group_manifest(out / "groups.json", groups);
  j = {{"groups", groups.size()}};
  json list = json::array();
  for (const auto& g : groups) list.push_back({{"group_id", g.group_id}, {"points", g.point_ids.size()}, {"views", g.view_ids.size()}});
  j["group_list"] = list;
  return groups;
}

fs::path cloud_path(const fs::path& out, int group_id) {
  return out / "gaussians" / ("group_" + std::to_string(group_id) + ".ply");
}

json run_train(const gsr::SceneData& data, const gsr::PipelineConfig& c, const fs::path& out) {
  const auto groups = gsr::load_group_manifest(out / "groups.json");
  const auto inputs = gsr::make_group_inputs(groups, data, c.masks);
  gsr::TrainConfig tc = c.train;
  tc.log_dir = out / "logs";
  const gsr::TrainRun run = gsr::train_all_groups(inputs, tc, c.workers);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (run.checkpoints[g]) gsr::save_gaussians_ply(cloud_path(out, groups[g].group_id), run.checkpoints[g]->cloud);
  }
  gsr::write_run_report(out / "train_report.json", run);
  const json report = json::parse(std::ifstream(out / "train_report.json"));
  if (!run.all_ok()) throw StageFailure("training failed for at least one group", report);
  return report;
}

json run_mesh(const gsr::SceneData& data, const gsr::PipelineConfig& c, const fs::path& out) {
  const auto groups = gsr::load_group_manifest(out / "groups.json");
  const auto inputs = gsr::make_group_inputs(groups, data, c.masks);
  std::vector<gsr::GaussianCloud> clouds;
  for (const auto& g : groups) clouds.push_back(gsr::load_gaussians_ply(cloud_path(out, g.group_id)));
  const auto surfaces = gsr::render_group_surfaces(inputs, clouds, c.train.raster);
  std::vector<std::string> warnings;
  const gsr::TriangleMesh mesh = gsr::merge_group_meshes(surfaces, data.scene, c.meshing, &warnings);
  gsr::save_mesh_ply(out / "mesh.ply", mesh);
  json j{{"mesh", (out / "mesh.ply").string()},
         {"voxel_size", gsr::resolve_voxel_size(c.meshing, surfaces)},
         {"vertices", mesh.vertices.size()},
         {"triangles", mesh.triangles.size()},
         {"warnings", warnings}};
  write_json(out / "mesh.json", j);
  if (mesh.empty()) throw StageFailure("meshing produced no triangles", j);
  return j;
}

json report_json(const gsr::EvalReport& r) {
  return {{"precision", r.precision},       {"recall", r.recall},     {"f1", r.f1},
          {"sample_count", r.sample_count}, {"gt_count", r.gt_count}, {"threshold", r.threshold},
          {"sample_density", r.sample_density}};
}

json run_eval(const fs::path& mesh_path, const fs::path& gt_path, double threshold, double density, bool downsample) {
  if (!(threshold > 0)) throw CLI::ValidationError("--threshold", "must be positive");
  if (!(density > 0)) throw CLI::ValidationError("--density", "must be positive");
  const gsr::TriangleMesh mesh = gsr::load_mesh_ply(mesh_path);
  const std::vector<gsr::Vec3> gt = gsr::read_point_cloud(gt_path);
  return report_json(gsr::evaluate_mesh(mesh, gt, threshold, density, downsample));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building-level surface reconstruction from posed aerial images"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.set, "override one config key (key=value), repeatable");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--workers", g.workers, "parallel group trainers")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "working directory for stage outputs");
  app.add_flag("--json", g.json, "print the stage result as JSON");
  app.add_flag_callback(
      "--list-config",
      [] {
        for (const auto& [k, h] : gsr::config_keys()) std::cout << k << "\t" << h << '\n';
        throw CLI::Success();
      },
      "print the recognised config keys and exit");

  fs::path scene;
  int max_edge = 0;
  auto* ingest = app.add_subcommand("ingest", "validate a scene; optionally downscale it into <out>/scene");
  ingest->add_option("--scene", scene, "scene directory")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--max-edge", max_edge, "downscale views whose longer edge exceeds this")->check(CLI::PositiveNumber);

  auto scene_stage = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--scene", scene, "scene directory")->required()->check(CLI::ExistingDirectory);
    s->fallthrough();
    return s;
  };
  auto* refine = scene_stage("refine-masks", "vote with sparse points and refine the building masks");
  auto* group = scene_stage("group", "cluster reliable points into building groups");
  auto* train = scene_stage("train", "train one splat model per group");
  auto* mesh = scene_stage("mesh", "render depths, fuse them and extract the merged mesh");
  auto* pipeline = scene_stage("pipeline", "run every stage; evaluates when --gt is given");
  fs::path pipeline_gt;
  pipeline->add_option("--gt", pipeline_gt, "ground-truth point cloud (PLY)")->check(CLI::ExistingFile);
  ingest->fallthrough();

  fs::path mesh_path, gt_path;
  double threshold = 0, density = 0;
  bool downsample = false;
  auto* eval = app.add_subcommand("eval", "precision, recall and F1 of a mesh against a point cloud");
  eval->add_option("--mesh", mesh_path, "mesh PLY")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path, "ground-truth point cloud PLY")->required()->check(CLI::ExistingFile);
  eval->add_option("--threshold", threshold, "distance threshold")->required();
  eval->add_option("--density", density, "mesh sampling spacing")->required();
  eval->add_flag("--downsample-gt", downsample, "voxel-downsample the ground truth at the sampling density");
  eval->fallthrough();

  std::string world = "two-box";
  gsr::SyntheticSceneConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "write a procedural test scene with ground truth into <out>");
  synth->add_option("--world", world, "two-box or gable-house")->check(CLI::IsMember({"two-box", "gable-house"}));
  synth->add_option("--views", synth_cfg.views, "number of orbit views")->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_cfg.width, "image edge in pixels")->check(CLI::PositiveNumber);
  synth->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  // A bad config key or value is a usage error, not a stage failure.
  gsr::PipelineConfig config;
  try {
    config = resolve_config(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  json result;
  try {
    fs::create_directories(g.out);
    const auto start = std::chrono::steady_clock::now();
    if (*ingest) {
      result = run_ingest(scene, g.out, max_edge);
    } else if (*eval) {
      result = run_eval(mesh_path, gt_path, threshold, density, downsample);
    } else if (*synth) {
      synth_cfg.height = synth_cfg.width;
      synth_cfg.seed = config.train.seed;
      const auto world_def = world == "two-box" ? gsr::two_box_world() : gsr::gable_house_world();
      gsr::write_synthetic_scene(g.out, gsr::render_synthetic_scene(world_def, synth_cfg));
      result = {{"scene", g.out.string()}, {"gt", (g.out / "gt.ply").string()}, {"views", synth_cfg.views}};
    } else {
      const gsr::SceneData data = gsr::load_scene_data(scene);
      if (*refine) {
        result = run_refine(data, config, g.out);
      } else if (*group) {
        run_group(data, config, g.out, result);
      } else if (*train) {
        result = run_train(data, config, g.out);
      } else if (*mesh) {
        result = run_mesh(data, config, g.out);
      } else if (*pipeline) {
        json stages;
        stages["refine_masks"] = run_refine(data, config, g.out);
        run_group(data, config, g.out, stages["group"]);
        try {
          stages["train"] = run_train(data, config, g.out);
          stages["mesh"] = run_mesh(data, config, g.out);
        } catch (StageFailure& e) {
          e.report = {{"stages", stages}, {"failed_stage", e.report}};
          write_json(g.out / "run_report.json", {{"ok", false}, {"error", e.what()}, {"stages", stages}});
          throw;
        }
        if (!pipeline_gt.empty()) {
          const double voxel = stages["mesh"]["voxel_size"].get<double>();
          const double thr = config.eval_threshold > 0 ? config.eval_threshold : 2 * voxel;
          const double dens = config.eval_density > 0 ? config.eval_density : voxel;
          stages["eval"] = run_eval(g.out / "mesh.ply", pipeline_gt, thr, dens, config.downsample_gt);
        }
        result = {{"ok", true}, {"stages", stages}};
        write_json(g.out / "run_report.json", result);
      }
    }
    result["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(g, result);
    return 0;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const StageFailure& e) {
    if (g.json) std::cout << json{{"ok", false}, {"error", e.what()}, {"report", e.report}}.dump(2) << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    if (g.json) std::cout << json{{"ok", false}, {"error", e.what()}}.dump(2) << '\n';
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
