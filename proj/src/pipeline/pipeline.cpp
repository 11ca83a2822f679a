#include "gsr/pipeline.hpp"

#include <cmath>

#include "gsr/image_io.hpp"

namespace gsr {
namespace {

// Source range covered by destination pixel i when n_src pixels map onto n_dst.
std::pair<double, double> footprint(int i, int n_src, int n_dst) {
  const double s = static_cast<double>(n_src) / n_dst;
  return {i * s, (i + 1) * s};
}

ImageD box_downscale(const ImageD& src, int w, int h) {
  ImageD out(w, h, src.channels());
  for (int y = 0; y < h; ++y) {
    const auto [y0, y1] = footprint(y, src.height(), h);
    for (int x = 0; x < w; ++x) {
      const auto [x0, x1] = footprint(x, src.width(), w);
      double total = 0;
      for (int sy = static_cast<int>(y0); sy < std::min<double>(y1, src.height()); ++sy) {
        const double wy = std::min<double>(sy + 1, y1) - std::max<double>(sy, y0);
        for (int sx = static_cast<int>(x0); sx < std::min<double>(x1, src.width()); ++sx) {
          const double wgt = wy * (std::min<double>(sx + 1, x1) - std::max<double>(sx, x0));
          if (wgt <= 0) continue;
          for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) += wgt * src.at(sx, sy, c);
          total += wgt;
        }
      }
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) /= total;
    }
  }
  return out;
}

int nearest_source(int i, int n_src, int n_dst) {
  return std::min(n_src - 1, static_cast<int>((i + 0.5) * n_src / n_dst));
}

}  // namespace

SceneData load_scene_data(const std::filesystem::path& root) {
  SceneData d;
  d.scene = load_scene(root);
  for (const auto& v : d.scene.views) {
    ImageD img = load_color_image(v.image_path);
    if (img.width() != v.intrinsics.width || img.height() != v.intrinsics.height) {
      throw ShapeError("image " + v.image_path.string(), v.intrinsics.width, v.intrinsics.height, img.width(),
                       img.height());
    }
    d.images.push_back(std::move(img));
    d.masks.push_back(load_mask(v.mask_path, v.intrinsics));
    d.segments.push_back(load_segment_labels(v.segment_path, v.intrinsics));
  }
  return d;
}

void write_scene_data(const std::filesystem::path& root, const SceneData& data) {
  for (const char* sub : {"sparse", "images", "masks", "segments"}) std::filesystem::create_directories(root / sub);
  write_sparse_model(data.scene, root / "sparse");
  for (std::size_t i = 0; i < data.scene.views.size(); ++i) {
    const auto& v = data.scene.views[i];
    const auto stem = std::filesystem::path(v.name).stem().string() + ".png";
    save_color_image(root / "images" / v.name, data.images[i]);
    save_mask(root / "masks" / stem, data.masks[i]);
    save_segment_labels(root / "segments" / stem, data.segments[i]);
  }
}

SceneData downscale_scene(const SceneData& data, int max_edge) {
  if (max_edge <= 0) throw Error("max edge must be positive");
  SceneData out = data;
  for (std::size_t i = 0; i < out.scene.views.size(); ++i) {
    auto& k = out.scene.views[i].intrinsics;
    const int edge = std::max(k.width, k.height);
    if (edge <= max_edge) continue;
    const double s = static_cast<double>(max_edge) / edge;
    const int w = std::max(1, static_cast<int>(std::lround(k.width * s)));
    const int h = std::max(1, static_cast<int>(std::lround(k.height * s)));
    const double sx = static_cast<double>(w) / k.width;
    const double sy = static_cast<double>(h) / k.height;
    out.images[i] = box_downscale(data.images[i], w, h);
    MaskBitmap mask(w, h);
    SegmentLabelMap labels(w, h);
    for (int y = 0; y < h; ++y) {
      const int src_y = nearest_source(y, k.height, h);
      for (int x = 0; x < w; ++x) {
        const int src_x = nearest_source(x, k.width, w);
        mask.set(x, y, data.masks[i].test(src_x, src_y));
        labels.set(x, y, data.segments[i].at(src_x, src_y));
      }
    }
    out.masks[i] = std::move(mask);
    out.segments[i] = std::move(labels);
    // Pixel centres sit at integers, so the continuous edge is at -0.5.
    k.fx *= sx;
    k.fy *= sy;
    k.cx = (k.cx + 0.5) * sx - 0.5;
    k.cy = (k.cy + 0.5) * sy - 0.5;
    k.width = w;
    k.height = h;
  }
  return out;
}

std::vector<GroupInputs> make_group_inputs(const std::vector<BuildingGroup>& groups, const SceneData& data,
                                           const MaskPipelineConfig& config) {
  std::vector<GroupInputs> out;
  for (const auto& g : groups) {
    GroupInputs in;
    in.group = &g;
    in.scene = &data.scene;
    in.images = &data.images;
    in.masks = group_refined_masks(g, data.scene, data.segments, config);
    out.push_back(std::move(in));
  }
  return out;
}

std::vector<GroupSurface> render_group_surfaces(const std::vector<GroupInputs>& inputs,
                                                const std::vector<GaussianCloud>& clouds,
                                                const RasterSettings& settings) {
  std::vector<GroupSurface> out;
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    const BuildingGroup& group = *inputs[g].group;
    const SceneBundle& scene = *inputs[g].scene;
    GroupSurface s;
    s.group_id = group.group_id;
    s.aabb = group.aabb;
    std::vector<ViewRecord> views;
    std::vector<MaskBitmap> masks;
    for (const int id : group.view_ids) {
      const int idx = scene.view_index(id);
      if (idx < 0) continue;
      s.view_indices.push_back(idx);
      views.push_back(scene.views[idx]);
      masks.push_back(inputs[g].masks[idx].rbm);
    }
    s.depths = render_depth_set(clouds[g], views, masks, settings);
    out.push_back(std::move(s));
  }
  return out;
}

EvalReport evaluate_mesh(const TriangleMesh& mesh, const std::vector<Vec3>& gt, double threshold, double density,
                         bool downsample_gt) {
  const std::vector<Vec3> samples = sample_mesh_surface(mesh, density);
  const std::vector<Vec3> reference = downsample_gt ? voxel_downsample(gt, density) : gt;
  EvalReport r = precision_recall_f1(samples, reference, threshold);
  r.sample_density = density;
  return r;
}

}  // namespace gsr
