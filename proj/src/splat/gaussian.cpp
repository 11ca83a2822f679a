#include "gsr/gaussian.hpp"

namespace gsr {
namespace {

constexpr double kShC1 = 0.4886025119029199;
constexpr double kShC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kShC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                            0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};

}  // namespace

Mat3 quaternion_matrix(const Vec4& q) {
  const Vec4 n = q / q.norm();
  const double w = n[0], x = n[1], y = n[2], z = n[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 quaternion_backward(const Vec4& q, const Mat3& g) {
  const double norm = q.norm();
  const Vec4 n = q / norm;
  const double w = n[0], x = n[1], y = n[2], z = n[3];
  Vec4 gn;
  gn[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gn[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
               w * g(2, 1) - 2 * x * g(2, 2));
  gn[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
               z * g(2, 1) - 2 * y * g(2, 2));
  gn[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
               y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // Through the normalization q / |q|.
  return (gn - n * n.dot(gn)) / norm;
}

Mat3 GaussianPrimitive::rotation_matrix() const { return quaternion_matrix(rot); }

bool GaussianPrimitive::finite() const {
  if (!mu.allFinite() || !log_scale.allFinite() || !rot.allFinite() || !std::isfinite(opacity_logit)) {
    return false;
  }
  for (const auto& c : sh) {
    if (!c.allFinite()) return false;
  }
  return rot.norm() > 0;
}

PrimitiveGradient& PrimitiveGradient::operator+=(const PrimitiveGradient& o) {
  mu += o.mu;
  log_scale += o.log_scale;
  rot += o.rot;
  opacity_logit += o.opacity_logit;
  for (int k = 0; k < kMaxShCoeffs; ++k) sh[k] += o.sh[k];
  return *this;
}

namespace {

template <typename P>
auto& param_ref_impl(P& p, int index) {
  if (index < 3) return p.mu[index];
  if (index < 6) return p.log_scale[index - 3];
  if (index < 10) return p.rot[index - 6];
  if (index == 10) return p.opacity_logit;
  const int k = index - 11;
  return p.sh[k / 3][k % 3];
}

}  // namespace

double& param_ref(GaussianPrimitive& p, int index) { return param_ref_impl(p, index); }
double& param_ref(PrimitiveGradient& g, int index) { return param_ref_impl(g, index); }
double param_value(const PrimitiveGradient& g, int index) {
  return param_ref_impl(g, index);
}

void sh_basis(int degree, const Vec3& dir, std::array<double, kMaxShCoeffs>& b,
              std::array<Vec3, kMaxShCoeffs>* gb) {
  const double x = dir.x(), y = dir.y(), z = dir.z();
  b[0] = kShC0;
  if (gb) (*gb)[0] = Vec3::Zero();
  if (degree < 1) return;

  b[1] = -kShC1 * y;
  b[2] = kShC1 * z;
  b[3] = -kShC1 * x;
  if (gb) {
    (*gb)[1] = Vec3(0, -kShC1, 0);
    (*gb)[2] = Vec3(0, 0, kShC1);
    (*gb)[3] = Vec3(-kShC1, 0, 0);
  }
  if (degree < 2) return;

  const double xx = x * x, yy = y * y, zz = z * z;
  b[4] = kShC2[0] * x * y;
  b[5] = kShC2[1] * y * z;
  b[6] = kShC2[2] * (2 * zz - xx - yy);
  b[7] = kShC2[3] * x * z;
  b[8] = kShC2[4] * (xx - yy);
  if (gb) {
    (*gb)[4] = kShC2[0] * Vec3(y, x, 0);
    (*gb)[5] = kShC2[1] * Vec3(0, z, y);
    (*gb)[6] = kShC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    (*gb)[7] = kShC2[3] * Vec3(z, 0, x);
    (*gb)[8] = kShC2[4] * Vec3(2 * x, -2 * y, 0);
  }
  if (degree < 3) return;

  b[9] = kShC3[0] * y * (3 * xx - yy);
  b[10] = kShC3[1] * x * y * z;
  b[11] = kShC3[2] * y * (4 * zz - xx - yy);
  b[12] = kShC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  b[13] = kShC3[4] * x * (4 * zz - xx - yy);
  b[14] = kShC3[5] * z * (xx - yy);
  b[15] = kShC3[6] * x * (xx - 3 * yy);
  if (gb) {
    (*gb)[9] = kShC3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    (*gb)[10] = kShC3[1] * Vec3(y * z, x * z, x * y);
    (*gb)[11] = kShC3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    (*gb)[12] = kShC3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    (*gb)[13] = kShC3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    (*gb)[14] = kShC3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    (*gb)[15] = kShC3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
  }
}

Vec3 eval_sh(int degree, const std::array<Vec3, kMaxShCoeffs>& sh, const Vec3& dir) {
  std::array<double, kMaxShCoeffs> b{};
  sh_basis(degree, dir, b, nullptr);
  Vec3 c = Vec3::Constant(0.5);
  for (int k = 0; k < sh_coeff_count(degree); ++k) c += b[k] * sh[k];
  return c;
}

}  // namespace gsr
