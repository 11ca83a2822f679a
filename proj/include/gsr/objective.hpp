#pragma once

#include <string>
#include <vector>

#include "gsr/losses.hpp"
#include "gsr/splat.hpp"

namespace gsr {

/// Everything one training view contributes to the loss.
struct ViewTarget {
  const ViewRecord* view = nullptr;
  ImageD image;     // reference RGB
  ImageD gray;      // luma of `image`
  MaskBitmap rbm;
  ImageD ban_w;     // boundary-aware weights
  ImageD grad_w;    // gradient weights
};

ViewTarget make_view_target(const ViewRecord& view, ImageD image, const RefinedMask& mask,
                            const LossWeights& weights);

/// Neighbour view used by the multi-view terms.
struct NeighbourTarget {
  const ViewRecord* view = nullptr;
  ImageD gray;
};

struct ObjectiveResult {
  LossComponents components;
  double total = 0.0;            // uses the hard-count balance-load value
  double total_surrogate = 0.0;  // same with the soft-count surrogate; what the gradient differentiates
  CloudGradients grad;
  std::vector<Vec2> mean2d_grad;
  std::vector<char> visible;  // primitive touched at least one tile of the target view
  RenderedBuffers buffers;
  std::vector<std::string> warnings;
};

/// How the balance-load term reaches the primitives.
enum class LoadGradient {
  Surrogate,        // gradient of the soft-count std through alpha into every parameter
  OpacityOnly,      // the same gradient applied to opacity alone
  RelativeOpacity,  // opacity alone, divided by the mean soft ratio
  None,             // value only
};

struct ObjectiveOptions {
  LoadGradient load_gradient = LoadGradient::Surrogate;
  double load_gradient_scale = 1.0;  // multiplies the balance-load gradient only, not its value
  bool multi_view = true;
  bool compute_gradient = true;
};

/// Renders `target.view`, evaluates every loss term and, when requested,
/// back-propagates the weighted total into the primitives. The neighbour's
/// depth is rendered from the same cloud and held constant.
ObjectiveResult evaluate_objective(const GaussianCloud& cloud, const ViewTarget& target,
                                   const NeighbourTarget* neighbour, const LossWeights& weights,
                                   const RasterSettings& settings, const ObjectiveOptions& options = {});

}  // namespace gsr
