#include <algorithm>
#include <cmath>

#include "projection_internal.hpp"

namespace gsr {
namespace {

int min_scale_axis(const Vec3& log_scale) {
  int k = 0;
  for (int a = 1; a < 3; ++a) {
    if (log_scale[a] < log_scale[k]) k = a;
  }
  return k;
}

}  // namespace

Vec3 flatten_normal(const GaussianPrimitive& prim, const ViewRecord& view) {
  const Mat3 r = prim.rotation_matrix();
  Vec3 n = r.col(min_scale_axis(prim.log_scale));
  if (n.dot(prim.mu - view.center) > 0) n = -n;
  return n;
}

ProjectedGaussian project_gaussian(const GaussianPrimitive& prim, int sh_degree, const ViewRecord& view,
                                   const RasterSettings& settings) {
  ProjectedGaussian out;
  const Mat3& w = view.rotation;
  const auto& k = view.intrinsics;
  const Vec3 t = w * (prim.mu - view.center);
  out.depth = t.z();
  if (!(t.z() > settings.near_plane)) return out;

  const Mat3 r = prim.rotation_matrix();
  const Vec3 s = prim.scale();
  const Mat3 m = r * s.asDiagonal();
  const Mat3 sigma = m * m.transpose();

  const double tz = t.z();
  const double tz2 = tz * tz;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / tz, 0, -k.fx * t.x() / tz2, 0, k.fy / tz, -k.fy * t.y() / tz2;
  const Eigen::Matrix<double, 2, 3> jw = j * w;
  out.cov2d = jw * sigma * jw.transpose();
  out.cov2d(0, 0) += settings.low_pass;
  out.cov2d(1, 1) += settings.low_pass;

  const double det = out.cov2d.determinant();
  if (!(det > 0)) return out;
  out.conic = Vec3(out.cov2d(1, 1) / det, -out.cov2d(0, 1) / det, out.cov2d(0, 0) / det);
  out.mean2d = Vec2(k.fx * t.x() / tz + k.cx, k.fy * t.y() / tz + k.cy);
  out.opacity = prim.opacity();

  const Vec3 v = prim.mu - view.center;
  out.color_raw = eval_sh(sh_degree, prim.sh, v.normalized());
  out.color = out.color_raw.cwiseMax(0.0);

  out.min_axis = min_scale_axis(prim.log_scale);
  const Vec3 axis = r.col(out.min_axis);
  out.normal_sign = axis.dot(v) > 0 ? -1.0 : 1.0;
  out.normal_cam = w * (out.normal_sign * axis);
  out.plane_offset = out.normal_cam.dot(t);

  // Pixels with alpha >= alpha_min satisfy d^T conic d <= 2 ln(opacity / alpha_min).
  if (!(out.opacity >= settings.alpha_min)) return out;
  const double m2 = 2.0 * std::log(out.opacity / settings.alpha_min);
  const double hx = std::sqrt(m2 * out.cov2d(0, 0)) + 1e-6;
  const double hy = std::sqrt(m2 * out.cov2d(1, 1)) + 1e-6;
  const double x0 = std::max(0.0, std::ceil(out.mean2d.x() - hx));
  const double x1 = std::min<double>(k.width - 1, std::floor(out.mean2d.x() + hx));
  const double y0 = std::max(0.0, std::ceil(out.mean2d.y() - hy));
  const double y1 = std::min<double>(k.height - 1, std::floor(out.mean2d.y() + hy));
  if (!(x0 <= x1) || !(y0 <= y1)) return out;
  out.x_min = static_cast<int>(x0);
  out.x_max = static_cast<int>(x1);
  out.y_min = static_cast<int>(y0);
  out.y_max = static_cast<int>(y1);
  out.visible = true;
  return out;
}

namespace detail {

PrimitiveGradient project_backward(const GaussianPrimitive& prim, int sh_degree, const ViewRecord& view,
                                   const ProjectedGaussian& proj, const ScreenGradient& g) {
  PrimitiveGradient out;
  const Mat3& w = view.rotation;
  const auto& k = view.intrinsics;
  const Vec3 t = w * (prim.mu - view.center);
  const double tz = t.z();
  const double tz2 = tz * tz;
  const double tz3 = tz2 * tz;

  const Mat3 r = prim.rotation_matrix();
  const Vec3 s = prim.scale();
  const Mat3 m = r * s.asDiagonal();
  const Mat3 sigma = m * m.transpose();

  Vec3 g_t = Vec3::Zero();
  Mat3 g_r = Mat3::Zero();

  // Plane offset and camera-frame normal.
  const Vec3 g_ncam = g.normal_cam + g.plane_offset * t;
  g_t += g.plane_offset * proj.normal_cam;
  g_r.col(proj.min_axis) += proj.normal_sign * (w.transpose() * g_ncam);

  // Opacity through the sigmoid.
  out.opacity_logit = g.opacity * proj.opacity * (1.0 - proj.opacity);

  // Mean projection.
  g_t.x() += g.mean2d.x() * k.fx / tz;
  g_t.y() += g.mean2d.y() * k.fy / tz;
  g_t.z() += -g.mean2d.x() * k.fx * t.x() / tz2 - g.mean2d.y() * k.fy * t.y() / tz2;

  // Conic = cov^-1.
  Mat2 q;
  q << proj.conic[0], proj.conic[1], proj.conic[1], proj.conic[2];
  Mat2 g_q;
  g_q << g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2];
  const Mat2 g_cov = -q * g_q * q;

  // cov = (J W) Sigma (J W)^T + low_pass I.
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / tz, 0, -k.fx * t.x() / tz2, 0, k.fy / tz, -k.fy * t.y() / tz2;
  const Eigen::Matrix<double, 2, 3> jw = j * w;
  const Mat3 g_sigma = jw.transpose() * g_cov * jw;
  const Eigen::Matrix<double, 2, 3> g_jw = 2.0 * g_cov * jw * sigma;
  const Eigen::Matrix<double, 2, 3> g_j = g_jw * w.transpose();
  g_t.x() += g_j(0, 2) * (-k.fx / tz2);
  g_t.y() += g_j(1, 2) * (-k.fy / tz2);
  g_t.z() += g_j(0, 0) * (-k.fx / tz2) + g_j(0, 2) * (2.0 * k.fx * t.x() / tz3) +
             g_j(1, 1) * (-k.fy / tz2) + g_j(1, 2) * (2.0 * k.fy * t.y() / tz3);

  // Sigma = M M^T with M = R diag(s).
  const Mat3 g_m = 2.0 * g_sigma * m;
  g_r += g_m * s.asDiagonal();
  for (int a = 0; a < 3; ++a) out.log_scale[a] = r.col(a).dot(g_m.col(a)) * s[a];

  out.mu = w.transpose() * g_t;

  // Colour from spherical harmonics along the viewing direction.
  Vec3 g_raw = g.color;
  for (int c = 0; c < 3; ++c) {
    if (proj.color_raw[c] < 0) g_raw[c] = 0.0;
  }
  const Vec3 v = prim.mu - view.center;
  const double vn = v.norm();
  const Vec3 dir = v / vn;
  std::array<double, kMaxShCoeffs> basis{};
  std::array<Vec3, kMaxShCoeffs> basis_grad{};
  sh_basis(sh_degree, dir, basis, &basis_grad);
  Vec3 g_dir = Vec3::Zero();
  for (int c = 0; c < sh_coeff_count(sh_degree); ++c) {
    out.sh[c] = basis[c] * g_raw;
    g_dir += basis_grad[c] * prim.sh[c].dot(g_raw);
  }
  out.mu += (g_dir - dir * dir.dot(g_dir)) / vn;

  out.rot = quaternion_backward(prim.rot, g_r);
  return out;
}

}  // namespace detail
}  // namespace gsr
