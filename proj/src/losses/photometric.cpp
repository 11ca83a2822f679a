#include <algorithm>
#include <array>
#include <cmath>

#include "gsr/losses.hpp"

namespace gsr {
namespace {

constexpr int kWindowRadius = 5;  // 11 taps
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kWindowRadius + 1> window_taps() {
  std::array<double, 2 * kWindowRadius + 1> g{};
  for (int i = -kWindowRadius; i <= kWindowRadius; ++i) {
    g[i + kWindowRadius] = std::exp(-0.5 * i * i / (kWindowSigma * kWindowSigma));
  }
  return g;
}

// Separable Gaussian filter on one channel with the window truncated at the
// border. `normalize` divides by the in-image tap mass at each output pixel;
// its adjoint is the unnormalized filter applied to input / mass.
class Window {
 public:
  Window(int w, int h) : w_(w), h_(h), taps_(window_taps()), mass_x_(w), mass_y_(h) {
    for (int x = 0; x < w; ++x) mass_x_[x] = mass(x, w);
    for (int y = 0; y < h; ++y) mass_y_[y] = mass(y, h);
  }

  std::vector<double> blur(const std::vector<double>& in) const {
    std::vector<double> out = convolve(in);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) out[idx(x, y)] /= mass_x_[x] * mass_y_[y];
    return out;
  }

  std::vector<double> blur_adjoint(std::vector<double> in) const {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) in[idx(x, y)] /= mass_x_[x] * mass_y_[y];
    return convolve(in);
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }

  double mass(int c, int n) const {
    double m = 0.0;
    for (int i = -kWindowRadius; i <= kWindowRadius; ++i)
      if (c + i >= 0 && c + i < n) m += taps_[i + kWindowRadius];
    return m;
  }

  std::vector<double> convolve(const std::vector<double>& in) const {
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int i = std::max(-kWindowRadius, -x); i <= std::min(kWindowRadius, w_ - 1 - x); ++i)
          s += taps_[i + kWindowRadius] * in[idx(x + i, y)];
        tmp[idx(x, y)] = s;
      }
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int i = std::max(-kWindowRadius, -y); i <= std::min(kWindowRadius, h_ - 1 - y); ++i)
          s += taps_[i + kWindowRadius] * tmp[idx(x, y + i)];
        out[idx(x, y)] = s;
      }
    return out;
  }

  int w_, h_;
  std::array<double, 2 * kWindowRadius + 1> taps_;
  std::vector<double> mass_x_, mass_y_;
};

std::vector<double> channel(const ImageD& img, int c) {
  std::vector<double> out(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, c);
  return out;
}

std::vector<double> product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

struct SsimChannel {
  std::vector<double> map;
  // Partial derivatives of the map w.r.t. mean_x, E[x^2] and E[xy].
  std::vector<double> d_mx, d_exx, d_exy;
};

SsimChannel ssim_channel(const Window& win, const std::vector<double>& x, const std::vector<double>& y,
                         bool with_partials) {
  const auto mx = win.blur(x), my = win.blur(y);
  const auto exx = win.blur(product(x, x)), eyy = win.blur(product(y, y)), exy = win.blur(product(x, y));
  SsimChannel out;
  out.map.resize(x.size());
  if (with_partials) {
    out.d_mx.resize(x.size());
    out.d_exx.resize(x.size());
    out.d_exy.resize(x.size());
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a1 = 2 * mx[i] * my[i] + kC1;
    const double a2 = 2 * (exy[i] - mx[i] * my[i]) + kC2;
    const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1;
    const double b2 = exx[i] - mx[i] * mx[i] + eyy[i] - my[i] * my[i] + kC2;
    const double s = a1 * a2 / (b1 * b2);
    out.map[i] = s;
    if (!with_partials) continue;
    out.d_mx[i] = (2 * my[i] * a2 - 2 * my[i] * a1) / (b1 * b2) - s * (2 * mx[i] / b1 - 2 * mx[i] / b2);
    out.d_exx[i] = -s / b2;
    out.d_exy[i] = 2 * a1 / (b1 * b2);
  }
  return out;
}

void check_same_shape(const ImageD& a, const ImageD& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(what, a.width(), a.height(), b.width(), b.height());
}

}  // namespace

ImageD to_grayscale(const ImageD& rgb) {
  ImageD g(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      g.at(x, y) = rgb.channels() == 1 ? rgb.at(x, y)
                                       : 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
  return g;
}

ImageD gradient_weight(const ImageD& image, const MaskBitmap& rbm, double floor, double cap) {
  const ImageD g = to_grayscale(image);
  const int w = g.width(), h = g.height();
  auto at = [&](int x, int y) { return g.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  ImageD mag(w, h, 1);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      mag.at(x, y) = std::hypot(gx, gy);
      if (rbm.test(x, y)) {
        sum += mag.at(x, y);
        ++n;
      }
    }
  const double mean = n > 0 ? sum / n : 0.0;
  for (auto& v : mag.data()) v = mean > 0 ? std::clamp(v / mean, floor, cap) : floor;
  return mag;
}

double ssim(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b, "ssim input");
  const Window win(a.width(), a.height());
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto s = ssim_channel(win, channel(a, c), channel(b, c), false);
    for (double v : s.map) total += v;
  }
  return total / (static_cast<double>(a.pixel_count()) * a.channels());
}

ImageLoss loss_rgb(const ImageD& rendered, const ImageD& reference, const MaskBitmap& rbm) {
  check_same_shape(rendered, reference, "reference image");
  if (rbm.width() != rendered.width() || rbm.height() != rendered.height()) {
    throw ShapeError("rgb loss mask", rendered.width(), rendered.height(), rbm.width(), rbm.height());
  }
  ImageLoss out;
  out.grad = ImageD(rendered.width(), rendered.height(), rendered.channels(), 0.0);
  const std::size_t m = rbm.count();
  if (m == 0) {
    out.warning = "empty refined mask; rgb loss is 0";
    return out;
  }
  const int w = rendered.width(), h = rendered.height(), nc = rendered.channels();
  const double norm = 1.0 / (static_cast<double>(m) * nc);
  const Window win(w, h);
  std::vector<double> mask(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) mask[static_cast<std::size_t>(y) * w + x] = rbm.test(x, y) ? 1.0 : 0.0;

  double l1 = 0.0, ssim_sum = 0.0;
  for (int c = 0; c < nc; ++c) {
    const auto x = product(channel(rendered, c), mask);
    const auto y = product(channel(reference, c), mask);
    const SsimChannel s = ssim_channel(win, x, y, true);
    std::vector<double> g_mx(x.size()), g_exx(x.size()), g_exy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (mask[i] == 0.0) continue;
      l1 += std::abs(x[i] - y[i]);
      ssim_sum += s.map[i];
      const double up = -0.2 * norm;  // d(0.2 (1 - mean ssim)) / d(map_i)
      g_mx[i] = up * s.d_mx[i];
      g_exx[i] = up * s.d_exx[i];
      g_exy[i] = up * s.d_exy[i];
    }
    const auto a_mx = win.blur_adjoint(std::move(g_mx));
    const auto a_exx = win.blur_adjoint(std::move(g_exx));
    const auto a_exy = win.blur_adjoint(std::move(g_exy));
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        if (mask[i] == 0.0) continue;
        const double d = x[i] - y[i];
        const double g_l1 = 0.8 * norm * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        out.grad.at(px, py, c) = g_l1 + a_mx[i] + 2 * x[i] * a_exx[i] + y[i] * a_exy[i];
      }
  }
  out.value = 0.8 * l1 * norm + 0.2 * (1.0 - ssim_sum * norm);
  return out;
}

}  // namespace gsr
