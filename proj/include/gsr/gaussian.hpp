#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "gsr/types.hpp"

namespace gsr {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;
inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One flattened Gaussian. Scale is stored in log space, opacity as a logit,
/// rotation as an unnormalized (w, x, y, z) quaternion and colour as
/// spherical-harmonics coefficients (RGB per coefficient).
struct GaussianPrimitive {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rot = Vec4(1, 0, 0, 0);
  double opacity_logit = 0.0;
  std::array<Vec3, kMaxShCoeffs> sh = make_zero_sh();

  Vec3 scale() const { return log_scale.array().exp(); }
  double opacity() const { return sigmoid(opacity_logit); }
  Mat3 rotation_matrix() const;
  bool finite() const;

  static std::array<Vec3, kMaxShCoeffs> make_zero_sh() {
    std::array<Vec3, kMaxShCoeffs> s;
    s.fill(Vec3::Zero());
    return s;
  }
};

struct GaussianCloud {
  int sh_degree = 0;
  std::vector<GaussianPrimitive> prims;

  std::size_t size() const { return prims.size(); }
};

/// Same layout as the primitive, all zero; used for parameter gradients.
struct PrimitiveGradient {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rot = Vec4::Zero();
  double opacity_logit = 0.0;
  std::array<Vec3, kMaxShCoeffs> sh = GaussianPrimitive::make_zero_sh();

  PrimitiveGradient& operator+=(const PrimitiveGradient& o);
};

using CloudGradients = std::vector<PrimitiveGradient>;

/// Number of scalar parameters per primitive for an SH degree.
inline constexpr int param_count(int sh_degree) { return 11 + 3 * sh_coeff_count(sh_degree); }

/// Flat views over parameters / gradients in the order
/// mu(3), log_scale(3), rot(4), opacity(1), sh(3 per coefficient).
double& param_ref(GaussianPrimitive& p, int index);
double& param_ref(PrimitiveGradient& g, int index);
double param_value(const PrimitiveGradient& g, int index);

/// SH colour C0 * sh0 + ... + 0.5 along `dir` (unit, from camera to point).
Vec3 eval_sh(int degree, const std::array<Vec3, kMaxShCoeffs>& sh, const Vec3& dir);

/// Real SH basis values and their gradients w.r.t. the direction.
void sh_basis(int degree, const Vec3& dir, std::array<double, kMaxShCoeffs>& basis,
              std::array<Vec3, kMaxShCoeffs>* basis_grad);

inline constexpr double kShC0 = 0.28209479177387814;

/// Colour <-> SH DC coefficient for degree-0 initialization.
inline Vec3 rgb_to_sh0(const Vec3& rgb) { return (rgb.array() - 0.5) / kShC0; }

/// d(R(q/|q|))/dq contracted with dL/dR.
Vec4 quaternion_backward(const Vec4& q, const Mat3& grad_r);

Mat3 quaternion_matrix(const Vec4& q);  // normalizes q

}  // namespace gsr
