#include <algorithm>
#include <cmath>
#include <numeric>

#include "gsr/reference.hpp"

namespace gsr::reference {
namespace {

struct Splat {
  int index;
  double z;
  Vec2 mean;
  Mat2 inv_cov;
  double opacity;
  Vec3 color;
  Vec3 normal_cam;
  double offset;
};

}  // namespace

RenderedBuffers render_brute_force(const GaussianCloud& cloud, const ViewRecord& view, const Vec3& background,
                                   const RasterSettings& settings) {
  const auto& k = view.intrinsics;
  std::vector<Splat> splats;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const auto& g = cloud.prims[i];
    const Vec3 cam = view.rotation * (g.mu - view.center);
    if (!(cam.z() > settings.near_plane)) continue;

    const Eigen::Quaterniond q(g.rot[0], g.rot[1], g.rot[2], g.rot[3]);
    const Mat3 r = q.normalized().toRotationMatrix();
    const Vec3 s = g.log_scale.array().exp();
    const Mat3 cov3 = r * s.array().square().matrix().asDiagonal() * r.transpose();

    Eigen::Matrix<double, 2, 3> jac;
    jac << k.fx / cam.z(), 0.0, -k.fx * cam.x() / (cam.z() * cam.z()),
        0.0, k.fy / cam.z(), -k.fy * cam.y() / (cam.z() * cam.z());
    Mat2 cov2 = jac * view.rotation * cov3 * view.rotation.transpose() * jac.transpose();
    cov2 += settings.low_pass * Mat2::Identity();

    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (s[a] < s[axis]) axis = a;
    }
    Vec3 n = r.col(axis);
    if (n.dot(g.mu - view.center) > 0) n = -n;
    const Vec3 n_cam = view.rotation * n;

    Splat sp;
    sp.index = i;
    sp.z = cam.z();
    sp.mean = Vec2(k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy);
    sp.inv_cov = cov2.inverse();
    sp.opacity = 1.0 / (1.0 + std::exp(-g.opacity_logit));
    sp.color = eval_sh(cloud.sh_degree, g.sh, (g.mu - view.center).normalized()).cwiseMax(0.0);
    sp.normal_cam = n_cam;
    sp.offset = n_cam.dot(cam);
    splats.push_back(sp);
  }
  std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) { return a.z < b.z; });

  RenderedBuffers out;
  out.color = ImageD(k.width, k.height, 3);
  out.normal = ImageD(k.width, k.height, 3);
  out.distance = ImageD(k.width, k.height, 1);
  out.transmittance = ImageD(k.width, k.height, 1);
  out.soft_count = ImageD(k.width, k.height, 1);
  out.count = Image<int>(k.width, k.height, 1);

  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      double t = 1.0;
      for (const auto& sp : splats) {
        const Vec2 d = Vec2(x, y) - sp.mean;
        const double alpha = std::min(settings.alpha_max, sp.opacity * std::exp(-0.5 * d.dot(sp.inv_cov * d)));
        if (alpha < settings.alpha_min) continue;
        for (int c = 0; c < 3; ++c) {
          out.color.at(x, y, c) += sp.color[c] * alpha * t;
          out.normal.at(x, y, c) += sp.normal_cam[c] * alpha * t;
        }
        out.distance.at(x, y) += sp.offset * alpha * t;
        out.soft_count.at(x, y) +=
            1.0 / (1.0 + std::exp(-settings.soft_count_sharpness * (alpha - settings.alpha_min)));
        out.count.at(x, y) += 1;
        t *= 1.0 - alpha;
        if (t < settings.min_transmittance) break;
      }
      for (int c = 0; c < 3; ++c) out.color.at(x, y, c) += t * background[c];
      out.transmittance.at(x, y) = t;
    }
  }
  out.depth = compute_depth_map(out, view, &out.degenerate_depth_pixels);
  return out;
}

}  // namespace gsr::reference
