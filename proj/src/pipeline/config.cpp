#include <charconv>
#include <fstream>
#include <functional>

#include "gsr/pipeline.hpp"

namespace gsr {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("config " + key + ": not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error("config " + key + ": not an integer: '" + v + "'");
  return out;
}

struct Key {
  std::string help;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Key real(std::string help, T PipelineConfig::*section, double T::*field) {
  return {std::move(help), [=](PipelineConfig& c, const std::string& k, const std::string& v) {
            (c.*section).*field = to_double(k, v);
          }};
}

template <typename T, typename I>
Key integer(std::string help, T PipelineConfig::*section, I T::*field) {
  return {std::move(help), [=](PipelineConfig& c, const std::string& k, const std::string& v) {
            (c.*section).*field = static_cast<I>(to_int(k, v));
          }};
}

Key weight(std::string help, double LossWeights::*field) {
  return {std::move(help), [=](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.train.weights.*field = to_double(k, v);
          }};
}

Key rate(std::string help, double LearningRates::*field) {
  return {std::move(help), [=](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.train.lr.*field = to_double(k, v);
          }};
}

const std::map<std::string, Key>& table() {
  static const std::map<std::string, Key> keys = [] {
    std::map<std::string, Key> m;
    m["tau"] = real("unreliability tolerance; 0 keeps only points never seen outside a mask",
                    &PipelineConfig::masks, &MaskPipelineConfig::tau);
    m["min_hits"] = integer("reliable-point hits needed to keep a fine segment", &PipelineConfig::masks,
                            &MaskPipelineConfig::min_hits);
    m["band_radius"] = integer("boundary band radius in pixels", &PipelineConfig::masks,
                               &MaskPipelineConfig::band_radius);
    m["eps"] = real("DBSCAN radius in world units", &PipelineConfig::grouping, &GroupingConfig::eps);
    m["min_pts"] = integer("DBSCAN core-point count", &PipelineConfig::grouping, &GroupingConfig::min_pts);
    m["min_group_votes"] = integer("group points a view must see inside its mask", &PipelineConfig::grouping,
                                   &GroupingConfig::min_group_votes);
    m["aabb_margin"] = real("group box margin as a fraction of its extent", &PipelineConfig::grouping,
                            &GroupingConfig::aabb_margin);
    m["lambda"] = weight("balance-load weight", &LossWeights::lambda);
    m["lambda1"] = weight("multi-view geometric weight", &LossWeights::lambda1);
    m["lambda2"] = weight("multi-view photometric weight", &LossWeights::lambda2);
    m["lambda3"] = weight("flattening weight", &LossWeights::lambda3);
    m["lambda4"] = weight("boundary-aware normal weight", &LossWeights::lambda4);
    m["boundary_weight"] = weight("normal-loss weight inside the boundary band", &LossWeights::boundary_weight);
    m["iterations"] = integer("training iterations per group", &PipelineConfig::train, &TrainConfig::iterations);
    m["seed"] = integer("global seed", &PipelineConfig::train, &TrainConfig::seed);
    m["sh_degree"] = integer("spherical-harmonics degree (0-3)", &PipelineConfig::train, &TrainConfig::sh_degree);
    m["densify_from"] = integer("first densification iteration", &PipelineConfig::train, &TrainConfig::densify_from);
    m["densify_interval"] = integer("iterations between densification steps", &PipelineConfig::train,
                                    &TrainConfig::densify_interval);
    m["densify_until"] = real("fraction of iterations with densification", &PipelineConfig::train,
                              &TrainConfig::densify_until);
    m["densify_grad_threshold"] = real("screen-space gradient that triggers clone/split", &PipelineConfig::train,
                                       &TrainConfig::densify_grad_threshold);
    m["opacity_prune_threshold"] = real("opacity below which primitives are pruned", &PipelineConfig::train,
                                        &TrainConfig::opacity_prune_threshold);
    m["percent_dense"] = real("clone/split size boundary as a fraction of the scene scale", &PipelineConfig::train,
                              &TrainConfig::percent_dense);
    m["opacity_reset_interval"] = integer("iterations between opacity resets", &PipelineConfig::train,
                                          &TrainConfig::opacity_reset_interval);
    m["max_primitives"] = integer("cap on primitives per group", &PipelineConfig::train, &TrainConfig::max_primitives);
    m["multi_view_from"] = integer("iteration at which the multi-view terms start", &PipelineConfig::train,
                                   &TrainConfig::multi_view_from);
    m["load_gradient"] = {"balance-load gradient path: surrogate, opacity_only, relative or none",
                          [](PipelineConfig& c, const std::string& k, const std::string& v) {
                            static const std::map<std::string, LoadGradient> modes = {
                                {"surrogate", LoadGradient::Surrogate},
                                {"opacity_only", LoadGradient::OpacityOnly},
                                {"relative", LoadGradient::RelativeOpacity},
                                {"none", LoadGradient::None}};
                            const auto it = modes.find(v);
                            if (it == modes.end()) throw Error("config " + k + ": unknown mode '" + v + "'");
                            c.train.load_gradient = it->second;
                          }};
    m["load_gradient_scale"] = real("multiplier on the balance-load gradient (the loss value is unchanged)",
                                    &PipelineConfig::train, &TrainConfig::load_gradient_scale);
    m["lr_position"] = rate("initial position learning rate (times scene scale)", &LearningRates::position);
    m["lr_position_final"] = rate("final position learning rate (times scene scale)", &LearningRates::position_final);
    m["lr_opacity"] = rate("opacity learning rate", &LearningRates::opacity);
    m["lr_scale"] = rate("scale learning rate", &LearningRates::scale);
    m["lr_rotation"] = rate("rotation learning rate", &LearningRates::rotation);
    m["lr_color"] = rate("colour learning rate", &LearningRates::color);
    m["tile_size"] = {"rasterizer tile edge in pixels", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                        c.train.raster.tile_size = static_cast<int>(to_int(k, v));
                      }};
    m["geo_cap"] = {"multi-view geometric error cap in world units",
                    [](PipelineConfig& c, const std::string& k, const std::string& v) {
                      c.train.multi_view.geo_cap = to_double(k, v);
                    }};
    m["patch_radius"] = {"multi-view photometric patch radius in pixels",
                         [](PipelineConfig& c, const std::string& k, const std::string& v) {
                           c.train.multi_view.patch_radius = static_cast<int>(to_int(k, v));
                         }};
    m["voxel_size"] = real("TSDF voxel size; 0 derives it from the group boxes", &PipelineConfig::meshing,
                           &MeshingConfig::voxel_size);
    m["truncation"] = real("TSDF truncation; 0 means 4 voxels", &PipelineConfig::meshing, &MeshingConfig::truncation);
    m["voxels_per_diagonal"] = integer("voxels along the smallest group diagonal when voxel_size is 0",
                                       &PipelineConfig::meshing, &MeshingConfig::voxels_per_diagonal);
    m["merge_mode"] = {"global (one volume) or concatenate",
                       [](PipelineConfig& c, const std::string& k, const std::string& v) {
                         if (v == "global") c.meshing.mode = MergeMode::GlobalVolume;
                         else if (v == "concatenate") c.meshing.mode = MergeMode::Concatenate;
                         else throw Error("config " + k + ": expected global or concatenate, got '" + v + "'");
                       }};
    m["eval_threshold"] = {"evaluation distance threshold; 0 means 2 voxels",
                           [](PipelineConfig& c, const std::string& k, const std::string& v) {
                             c.eval_threshold = to_double(k, v);
                           }};
    m["eval_density"] = {"mesh sampling spacing; 0 means one voxel",
                         [](PipelineConfig& c, const std::string& k, const std::string& v) {
                           c.eval_density = to_double(k, v);
                         }};
    m["workers"] = {"parallel group trainers", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                      c.workers = static_cast<int>(to_int(k, v));
                    }};
    return m;
  }();
  return keys;
}

}  // namespace

void apply_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  const auto it = table().find(key);
  if (it == table().end()) throw Error("unknown config key '" + key + "'");
  it->second.set(config, key, value);
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    apply_config_value(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> help = [] {
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : table()) m[k] = v.help;
    return m;
  }();
  return help;
}

}  // namespace gsr
