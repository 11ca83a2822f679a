#pragma once

#include "gsr/splat.hpp"

namespace gsr::detail {

/// Gradients w.r.t. the screen-space attributes of one primitive. `conic`
/// holds (da, db, dc) where b is the single off-diagonal parameter.
struct ScreenGradient {
  Vec2 mean2d = Vec2::Zero();
  Vec3 conic = Vec3::Zero();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 normal_cam = Vec3::Zero();
  double plane_offset = 0.0;

  ScreenGradient& operator+=(const ScreenGradient& o) {
    mean2d += o.mean2d;
    conic += o.conic;
    opacity += o.opacity;
    color += o.color;
    normal_cam += o.normal_cam;
    plane_offset += o.plane_offset;
    return *this;
  }
};

PrimitiveGradient project_backward(const GaussianPrimitive& prim, int sh_degree, const ViewRecord& view,
                                   const ProjectedGaussian& proj, const ScreenGradient& grad);

}  // namespace gsr::detail
