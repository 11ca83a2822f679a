#include "gsr/objective.hpp"

namespace gsr {

ViewTarget make_view_target(const ViewRecord& view, ImageD image, const RefinedMask& mask, const LossWeights& weights) {
  ViewTarget t;
  t.view = &view;
  t.gray = to_grayscale(image);
  t.grad_w = gradient_weight(image, mask.rbm);
  t.image = std::move(image);
  t.rbm = mask.rbm;
  t.ban_w = boundary_weights(mask, weights.boundary_weight);
  return t;
}

ObjectiveResult evaluate_objective(const GaussianCloud& cloud, const ViewTarget& target,
                                   const NeighbourTarget* neighbour, const LossWeights& weights,
                                   const RasterSettings& settings, const ObjectiveOptions& options) {
  const ViewRecord& view = *target.view;
  const double geo_share = 1.0 - weights.lambda;
  ObjectiveResult out;
  RasterState state;
  out.buffers = rasterize_forward(cloud, view, Vec3::Zero(), settings, &state);
  const RenderedBuffers& b = out.buffers;
  out.visible.assign(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ProjectedGaussian& p = state.projected[i];
    out.visible[i] = p.visible && p.x_min <= p.x_max && p.y_min <= p.y_max;
  }

  const ImageLoss rgb = loss_rgb(b.color, target.image, target.rbm);
  if (!rgb.warning.empty()) out.warnings.push_back(rgb.warning);
  out.components.rgb = rgb.value;

  if (options.compute_gradient) out.grad.assign(cloud.size(), PrimitiveGradient{});
  out.components.flatten =
      loss_flatten(cloud, options.compute_gradient ? &out.grad : nullptr, geo_share * weights.lambda3);

  const ImageD depth_normal = depth_to_normal(b.depth, view);
  const NormalLoss ban = loss_ban(depth_normal, b.normal, target.ban_w);
  out.components.ban = ban.value;

  const LoadLoss load = loss_gc_load(b.count, b.soft_count, target.grad_w, target.rbm);
  out.components.gc_load = load.value;

  ImageLoss geo, photo;
  const bool use_mv = options.multi_view && neighbour && neighbour->view &&
                      (weights.lambda1 > 0 || weights.lambda2 > 0);
  if (use_mv) {
    const RenderedBuffers nb = rasterize_forward(cloud, *neighbour->view, Vec3::Zero(), settings);
    geo = loss_mv_geo(view, b.depth, target.rbm, *neighbour->view, nb.depth);
    photo = loss_mv_rgb(view, b.depth, target.rbm, target.gray, *neighbour->view, neighbour->gray);
    for (const auto* l : {&geo, &photo})
      if (!l->warning.empty()) out.warnings.push_back(l->warning);
    out.components.mv_geo = geo.value;
    out.components.mv_rgb = photo.value;
  }

  out.total = total_loss(out.components, weights);
  LossComponents soft = out.components;
  soft.gc_load = load.surrogate;
  out.total_surrogate = total_loss(soft, weights);
  if (!options.compute_gradient) return out;

  const int w = view.intrinsics.width, h = view.intrinsics.height;
  PixelGradients up;
  up.color = rgb.grad;
  for (auto& v : up.color.data()) v *= geo_share;
  if (options.load_gradient != LoadGradient::None && weights.lambda > 0) {
    double scale = weights.lambda * options.load_gradient_scale;
    if (options.load_gradient == LoadGradient::RelativeOpacity) {
      scale = load.mean_soft_ratio > 0 ? scale / load.mean_soft_ratio : 0.0;
    }
    up.soft_count = load.grad_soft_count;
    for (auto& v : up.soft_count.data()) v *= scale;
    up.soft_count_opacity_only = options.load_gradient != LoadGradient::Surrogate;
  }
  up.normal = ban.grad_rendered_normal;
  for (auto& v : up.normal.data()) v *= geo_share * weights.lambda4;

  ImageD dn = ban.grad_depth_normal;
  for (auto& v : dn.data()) v *= geo_share * weights.lambda4;
  ImageD grad_depth = depth_to_normal_backward(b.depth, view, dn);
  if (use_mv) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        grad_depth.at(x, y) += geo_share * (weights.lambda1 * geo.grad.at(x, y) + weights.lambda2 * photo.grad.at(x, y));
  }
  depth_map_backward(b, view, grad_depth, up);

  RasterGradients rg = rasterize_backward(cloud, view, settings, state, up);
  for (std::size_t i = 0; i < cloud.size(); ++i) out.grad[i] += rg.params[i];
  out.mean2d_grad = std::move(rg.mean2d);
  return out;
}

}  // namespace gsr
