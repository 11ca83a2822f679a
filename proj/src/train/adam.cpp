#include <cmath>

#include "gsr/trainer.hpp"

namespace gsr {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-15;

}  // namespace

AdamOptimizer::AdamOptimizer(const LearningRates& lr, double spatial_scale, int total_iterations)
    : lr_(lr), spatial_scale_(spatial_scale), total_iterations_(std::max(total_iterations, 1)) {}

void AdamOptimizer::resize(std::size_t n) {
  m_.resize(n);
  v_.resize(n);
}

double AdamOptimizer::position_lr(int iteration) const {
  // Log-linear interpolation between the initial and final rates.
  const double t = std::clamp(static_cast<double>(iteration) / total_iterations_, 0.0, 1.0);
  const double lr = std::exp((1 - t) * std::log(lr_.position) + t * std::log(lr_.position_final));
  return lr * spatial_scale_;
}

void AdamOptimizer::step(GaussianCloud& cloud, const CloudGradients& grad, int iteration) {
  resize(cloud.size());
  const int t = std::max(iteration, 1);
  const double c1 = 1 - std::pow(kBeta1, t);
  const double c2 = 1 - std::pow(kBeta2, t);
  const int n_params = param_count(cloud.sh_degree);
  double rates[11];
  const double pos = position_lr(iteration);
  for (int k = 0; k < 3; ++k) rates[k] = pos;
  for (int k = 3; k < 6; ++k) rates[k] = lr_.scale;
  for (int k = 6; k < 10; ++k) rates[k] = lr_.rotation;
  rates[10] = lr_.opacity;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    GaussianPrimitive& p = cloud.prims[i];
    PrimitiveGradient g = grad[i];
    for (int k = 0; k < n_params; ++k) {
      const double gk = param_ref(g, k);
      double& m = param_ref(m_[i], k);
      double& v = param_ref(v_[i], k);
      m = kBeta1 * m + (1 - kBeta1) * gk;
      v = kBeta2 * v + (1 - kBeta2) * gk * gk;
      const double rate = k < 11 ? rates[k] : (k < 14 ? lr_.color : lr_.color / 20);
      param_ref(p, k) -= rate * (m / c1) / (std::sqrt(v / c2) + kEps);
    }
  }
}

void AdamOptimizer::remap(const std::vector<int>& source) {
  std::vector<PrimitiveGradient> m(source.size()), v(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] >= 0 && static_cast<std::size_t>(source[i]) < m_.size()) {
      m[i] = m_[source[i]];
      v[i] = v_[source[i]];
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
}

void AdamOptimizer::reset_opacity_moments() {
  for (auto& m : m_) m.opacity_logit = 0;
  for (auto& v : v_) v.opacity_logit = 0;
}

}  // namespace gsr
