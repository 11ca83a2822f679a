#pragma once

#include <string>
#include <vector>

#include "gsr/gaussian.hpp"
#include "gsr/masks.hpp"
#include "gsr/scene_io.hpp"
#include "gsr/types.hpp"

namespace gsr {

struct LossWeights {
  double lambda = 0.41;  // balance-load share
  double lambda1 = 0.05;  // multi-view geometry
  double lambda2 = 0.2;   // multi-view photometric
  double lambda3 = 100.0;  // flattening
  double lambda4 = 0.01;  // boundary-aware normal
  double boundary_weight = 0.1;

  /// Throws Error unless all weights are >= 0 and lambda <= 1.
  void validate() const;
};

/// Per-pixel weights: 1 inside the RBM, boundary_weight on the MB band
/// (including its part outside the RBM), 0 elsewhere.
ImageD boundary_weights(const RefinedMask& mask, double boundary_weight);

/// Rec. 601 luma of an RGB image.
ImageD to_grayscale(const ImageD& rgb);

/// Sobel magnitude normalized by its mean over `rbm`, clamped to [floor, cap].
/// A zero mean (flat image) gives `floor` everywhere.
ImageD gradient_weight(const ImageD& image, const MaskBitmap& rbm, double floor = 0.1, double cap = 10.0);

/// A scalar loss and its gradient with respect to the primary image input.
struct ImageLoss {
  double value = 0.0;
  ImageD grad;
  std::string warning;
};

/// Mean SSIM over all pixels and channels with an 11x11 Gaussian window
/// (sigma 1.5). Windows are truncated at the border and renormalized.
double ssim(const ImageD& a, const ImageD& b);

/// 0.8 * L1 + 0.2 * (1 - SSIM) over RBM pixels. Both images are multiplied by
/// the mask before comparison; the gradient is with respect to `rendered`.
ImageLoss loss_rgb(const ImageD& rendered, const ImageD& reference, const MaskBitmap& rbm);

/// Mean over primitives of their smallest scale. Adds weight * gradient into
/// `grad` when given (log-scale entries).
double loss_flatten(const GaussianCloud& cloud, CloudGradients* grad = nullptr, double weight = 1.0);

struct NormalLoss {
  double value = 0.0;
  ImageD grad_depth_normal;     // w.r.t. the depth-derived normals
  ImageD grad_rendered_normal;  // w.r.t. the raw blended normals
  int pixels = 0;
};

/// Sum_i w_i |n_depth_i - N_i/|N_i||^2 / #{i : w_i > 0, pixel valid}. Pixels
/// whose depth normal is the zero sentinel or whose blended normal vanishes
/// are skipped.
NormalLoss loss_ban(const ImageD& depth_normal, const ImageD& rendered_normal, const ImageD& ban_w);

struct LoadLoss {
  double value = 0.0;      // std of g / w with hard counts
  double surrogate = 0.0;  // std of S / w with soft counts
  ImageD grad_soft_count;  // gradient of the surrogate
  double mean_soft_ratio = 0.0;
};

/// Population standard deviation of count / grad_w over RBM pixels.
LoadLoss loss_gc_load(const Image<int>& count, const ImageD& soft_count, const ImageD& grad_w,
                      const MaskBitmap& rbm);

struct MultiViewSettings {
  double geo_cap = 0.5;  // world units
  int patch_radius = 3;  // 7x7
};

/// Reprojects A's masked depth into B and compares the camera-B depth of the
/// point with B's depth at the landing pixel, truncated at geo_cap. B's depth
/// is treated as constant. Gradient is w.r.t. depth_a.
ImageLoss loss_mv_geo(const ViewRecord& view_a, const ImageD& depth_a, const MaskBitmap& rbm_a,
                      const ViewRecord& view_b, const ImageD& depth_b, const MultiViewSettings& s = {});

/// 1 - NCC between A's reference patch around each masked pixel and B's
/// reference image sampled (bilinearly) at the reprojections of the patch
/// pixels through A's depth. Gradient is w.r.t. depth_a.
ImageLoss loss_mv_rgb(const ViewRecord& view_a, const ImageD& depth_a, const MaskBitmap& rbm_a,
                      const ImageD& gray_a, const ViewRecord& view_b, const ImageD& gray_b,
                      const MultiViewSettings& s = {});

struct LossComponents {
  double rgb = 0.0;
  double mv_geo = 0.0;
  double mv_rgb = 0.0;
  double flatten = 0.0;
  double ban = 0.0;
  double gc_load = 0.0;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(const std::string& component, double value)
      : Error("loss component " + component + " is not finite (" + std::to_string(value) + ")"),
        component(component) {}
  std::string component;
};

/// rgb + l1 mv_geo + l2 mv_rgb + l3 flatten + l4 ban
double geometric_loss(const LossComponents& c, const LossWeights& w);

/// (1 - lambda) * geometric + lambda * gc_load. Throws NonFiniteLossError
/// naming the first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace gsr
