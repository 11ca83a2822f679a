#include <cmath>

#include "gsr/losses.hpp"
#include "gsr/splat.hpp"

namespace gsr {
namespace {

// Maps a pixel of A with depth d to camera B: x_b = m * d + t.
struct RelativePose {
  Mat3 rotation;  // R_b R_a^T
  Vec3 offset;    // R_b (C_a - C_b)

  RelativePose(const ViewRecord& a, const ViewRecord& b)
      : rotation(b.rotation * a.rotation.transpose()), offset(b.rotation * (a.center - b.center)) {}
};

// Bilinear sample with its image-space gradient. False outside the image.
bool bilinear(const ImageD& img, double u, double v, double& value, double& du, double& dv) {
  if (!(u >= 0 && v >= 0 && u <= img.width() - 1 && v <= img.height() - 1)) return false;
  const int x0 = std::min(static_cast<int>(std::floor(u)), img.width() - 2);
  const int y0 = std::min(static_cast<int>(std::floor(v)), img.height() - 2);
  const double fx = u - x0, fy = v - y0;
  const double a = img.at(x0, y0), b = img.at(x0 + 1, y0), c = img.at(x0, y0 + 1), d = img.at(x0 + 1, y0 + 1);
  value = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
  du = (1 - fy) * (b - a) + fy * (d - c);
  dv = (1 - fx) * (c - a) + fx * (d - b);
  return true;
}

}  // namespace

ImageLoss loss_mv_geo(const ViewRecord& view_a, const ImageD& depth_a, const MaskBitmap& rbm_a,
                      const ViewRecord& view_b, const ImageD& depth_b, const MultiViewSettings& s) {
  const int w = depth_a.width(), h = depth_a.height();
  ImageLoss out;
  out.grad = ImageD(w, h, 1, 0.0);
  const RelativePose pose(view_a, view_b);
  std::vector<std::pair<std::size_t, double>> terms;  // pixel, d residual / d depth
  double sum = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = depth_a.at(x, y);
      if (!rbm_a.test(x, y) || !is_valid_depth(d)) continue;
      const Vec3 dir = pose.rotation * pixel_ray(view_a.intrinsics, x, y);
      const Vec3 xb = dir * d + pose.offset;
      const auto& k = view_b.intrinsics;
      const Projection p{k.fx * xb.x() / xb.z() + k.cx, k.fy * xb.y() / xb.z() + k.cy, xb.z()};
      const auto px = projection_pixel(p, k);
      if (!px) continue;
      const double db = depth_b.at(px->x, px->y);
      if (!is_valid_depth(db)) continue;
      const double r = xb.z() - db;
      if (std::abs(r) >= s.geo_cap) {
        sum += s.geo_cap;
        terms.emplace_back(static_cast<std::size_t>(y) * w + x, 0.0);
      } else {
        sum += std::abs(r);
        terms.emplace_back(static_cast<std::size_t>(y) * w + x, (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) * dir.z());
      }
    }
  if (terms.empty()) {
    out.warning = "no valid correspondences between " + view_a.name + " and " + view_b.name;
    return out;
  }
  const double inv = 1.0 / terms.size();
  out.value = sum * inv;
  for (const auto& [i, g] : terms) out.grad.data()[i] = g * inv;
  return out;
}

ImageLoss loss_mv_rgb(const ViewRecord& view_a, const ImageD& depth_a, const MaskBitmap& rbm_a, const ImageD& gray_a,
                      const ViewRecord& view_b, const ImageD& gray_b, const MultiViewSettings& s) {
  const int w = depth_a.width(), h = depth_a.height();
  const int r = s.patch_radius;
  const int n = (2 * r + 1) * (2 * r + 1);
  ImageLoss out;
  out.grad = ImageD(w, h, 1, 0.0);
  const RelativePose pose(view_a, view_b);
  const auto& kb = view_b.intrinsics;

  // Per patch pixel: A value, B sample, d(sample)/d(depth).
  std::vector<double> av(n), bv(n), db_dd(n);
  std::vector<std::size_t> where(n);
  std::vector<std::pair<std::size_t, double>> grads;  // pixel, d(1 - ncc)/d(depth), before averaging
  double sum = 0.0;
  int patches = 0;
  for (int y = r; y < h - r; ++y)
    for (int x = r; x < w - r; ++x) {
      if (!rbm_a.test(x, y) || !is_valid_depth(depth_a.at(x, y))) continue;
      bool ok = true;
      int k = 0;
      for (int dy = -r; dy <= r && ok; ++dy)
        for (int dx = -r; dx <= r && ok; ++dx, ++k) {
          const int qx = x + dx, qy = y + dy;
          const double d = depth_a.at(qx, qy);
          if (!is_valid_depth(d)) {
            ok = false;
            break;
          }
          const Vec3 dir = pose.rotation * pixel_ray(view_a.intrinsics, qx, qy);
          const Vec3 xb = dir * d + pose.offset;
          if (xb.z() <= 0) {
            ok = false;
            break;
          }
          const double u = kb.fx * xb.x() / xb.z() + kb.cx, v = kb.fy * xb.y() / xb.z() + kb.cy;
          double val, du, dv;
          if (!bilinear(gray_b, u, v, val, du, dv)) {
            ok = false;
            break;
          }
          const double dz2 = xb.z() * xb.z();
          const double du_dd = kb.fx * (dir.x() * xb.z() - xb.x() * dir.z()) / dz2;
          const double dv_dd = kb.fy * (dir.y() * xb.z() - xb.y() * dir.z()) / dz2;
          av[k] = gray_a.at(qx, qy);
          bv[k] = val;
          db_dd[k] = du * du_dd + dv * dv_dd;
          where[k] = static_cast<std::size_t>(qy) * w + qx;
        }
      if (!ok) continue;
      double am = 0, bm = 0;
      for (int i = 0; i < n; ++i) {
        am += av[i];
        bm += bv[i];
      }
      am /= n;
      bm /= n;
      double cov = 0, va = 0, vb = 0;
      for (int i = 0; i < n; ++i) {
        cov += (av[i] - am) * (bv[i] - bm);
        va += (av[i] - am) * (av[i] - am);
        vb += (bv[i] - bm) * (bv[i] - bm);
      }
      if (va < 1e-8) continue;  // textureless reference patch
      const double den = std::sqrt(va * vb + 1e-12);
      const double ncc = cov / den;
      sum += 1.0 - ncc;
      ++patches;
      for (int i = 0; i < n; ++i) {
        const double dncc = (av[i] - am) / den - cov * va * (bv[i] - bm) / (den * den * den);
        grads.emplace_back(where[i], -dncc * db_dd[i]);
      }
    }
  if (patches == 0) {
    out.warning = "no valid patches between " + view_a.name + " and " + view_b.name;
    return out;
  }
  const double inv = 1.0 / patches;
  out.value = sum * inv;
  for (const auto& [i, g] : grads) out.grad.data()[i] += g * inv;
  return out;
}

}  // namespace gsr
