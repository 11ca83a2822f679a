#include <cmath>

#include "gsr/losses.hpp"

namespace gsr {

void LossWeights::validate() const {
  for (double v : {lambda, lambda1, lambda2, lambda3, lambda4, boundary_weight}) {
    if (!(v >= 0)) throw Error("loss weights must be non-negative");
  }
  if (lambda > 1) throw Error("lambda must lie in [0, 1]");
}

ImageD boundary_weights(const RefinedMask& mask, double boundary_weight) {
  const int w = mask.rbm.width(), h = mask.rbm.height();
  const bool has_band = mask.mb.width() > 0;
  if (has_band && !mask.mb.same_shape(mask.rbm)) {
    throw ShapeError("boundary band", w, h, mask.mb.width(), mask.mb.height());
  }
  ImageD out(w, h, 1, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (has_band && mask.mb.test(x, y)) {
        out.at(x, y) = boundary_weight;
      } else if (mask.rbm.test(x, y)) {
        out.at(x, y) = 1.0;
      }
    }
  return out;
}

double loss_flatten(const GaussianCloud& cloud, CloudGradients* grad, double weight) {
  if (cloud.prims.empty()) return 0.0;
  const double n = static_cast<double>(cloud.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& ls = cloud.prims[i].log_scale;
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (ls[a] < ls[axis]) axis = a;
    const double s = std::exp(ls[axis]);
    sum += s;
    if (grad) (*grad)[i].log_scale[axis] += weight * s / n;
  }
  return sum / n;
}

NormalLoss loss_ban(const ImageD& depth_normal, const ImageD& rendered_normal, const ImageD& ban_w) {
  if (!depth_normal.same_shape(rendered_normal)) {
    throw ShapeError("rendered normal map", depth_normal.width(), depth_normal.height(), rendered_normal.width(),
                     rendered_normal.height());
  }
  const int w = depth_normal.width(), h = depth_normal.height();
  NormalLoss out;
  out.grad_depth_normal = ImageD(w, h, 3, 0.0);
  out.grad_rendered_normal = ImageD(w, h, 3, 0.0);
  double sum = 0.0;
  std::vector<std::pair<int, int>> used;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double wi = ban_w.at(x, y);
      if (wi <= 0) continue;
      const Vec3 nd(depth_normal.at(x, y, 0), depth_normal.at(x, y, 1), depth_normal.at(x, y, 2));
      const Vec3 nr(rendered_normal.at(x, y, 0), rendered_normal.at(x, y, 1), rendered_normal.at(x, y, 2));
      if (nd.squaredNorm() == 0.0 || nr.norm() < 1e-8) continue;
      const Vec3 nhat = nr.normalized();
      const Vec3 r = nd - nhat;
      sum += wi * r.squaredNorm();
      used.emplace_back(x, y);
    }
  out.pixels = static_cast<int>(used.size());
  if (used.empty()) return out;
  const double inv = 1.0 / static_cast<double>(used.size());
  out.value = sum * inv;
  for (const auto& [x, y] : used) {
    const double wi = ban_w.at(x, y);
    const Vec3 nd(depth_normal.at(x, y, 0), depth_normal.at(x, y, 1), depth_normal.at(x, y, 2));
    const Vec3 nr(rendered_normal.at(x, y, 0), rendered_normal.at(x, y, 1), rendered_normal.at(x, y, 2));
    const double len = nr.norm();
    const Vec3 nhat = nr / len;
    const Vec3 g = 2.0 * wi * inv * (nd - nhat);
    const Vec3 g_raw = -(g - nhat * nhat.dot(g)) / len;
    for (int c = 0; c < 3; ++c) {
      out.grad_depth_normal.at(x, y, c) = g[c];
      out.grad_rendered_normal.at(x, y, c) = g_raw[c];
    }
  }
  return out;
}

LoadLoss loss_gc_load(const Image<int>& count, const ImageD& soft_count, const ImageD& grad_w, const MaskBitmap& rbm) {
  const int w = count.width(), h = count.height();
  LoadLoss out;
  out.grad_soft_count = ImageD(w, h, 1, 0.0);
  std::size_t n = 0;
  double hard_sum = 0, hard_sq = 0, soft_sum = 0, soft_sq = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!rbm.test(x, y)) continue;
      const double rh = count.at(x, y) / grad_w.at(x, y);
      const double rs = soft_count.at(x, y) / grad_w.at(x, y);
      hard_sum += rh;
      hard_sq += rh * rh;
      soft_sum += rs;
      soft_sq += rs * rs;
      ++n;
    }
  if (n == 0) return out;
  const double hm = hard_sum / n, sm = soft_sum / n;
  out.value = std::sqrt(std::max(0.0, hard_sq / n - hm * hm));
  out.surrogate = std::sqrt(std::max(0.0, soft_sq / n - sm * sm));
  out.mean_soft_ratio = sm;
  if (out.surrogate <= 0) return out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!rbm.test(x, y)) continue;
      const double rs = soft_count.at(x, y) / grad_w.at(x, y);
      out.grad_soft_count.at(x, y) = (rs - sm) / (static_cast<double>(n) * out.surrogate * grad_w.at(x, y));
    }
  return out;
}

double geometric_loss(const LossComponents& c, const LossWeights& w) {
  return c.rgb + w.lambda1 * c.mv_geo + w.lambda2 * c.mv_rgb + w.lambda3 * c.flatten + w.lambda4 * c.ban;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {{"rgb", c.rgb},         {"mv_geo", c.mv_geo}, {"mv_rgb", c.mv_rgb},
                                                  {"flatten", c.flatten}, {"ban", c.ban},       {"gc_load", c.gc_load}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NonFiniteLossError(name, v);
  }
  return (1.0 - w.lambda) * geometric_loss(c, w) + w.lambda * c.gc_load;
}

}  // namespace gsr
