#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "projection_internal.hpp"

namespace gsr {
namespace {

int thread_count(const RasterSettings& s) {
#ifdef _OPENMP
  return s.threads > 0 ? s.threads : omp_get_max_threads();
#else
  (void)s;
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

struct Contribution {
  int index;
  double alpha;
  double gauss;  // exp(power)
  double transmittance;
  bool clamped;
  double dx;
  double dy;
};

// Evaluates one primitive at a pixel. Returns false when skipped.
inline bool evaluate(const ProjectedGaussian& p, double px, double py, const RasterSettings& s,
                     double& alpha, double& gauss, bool& clamped, double& dx, double& dy) {
  if (px < p.x_min || px > p.x_max || py < p.y_min || py > p.y_max) return false;
  dx = px - p.mean2d.x();
  dy = py - p.mean2d.y();
  const double power = -0.5 * (p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy);
  gauss = std::exp(power);
  const double raw = p.opacity * gauss;
  clamped = raw > s.alpha_max;
  alpha = clamped ? s.alpha_max : raw;
  return alpha >= s.alpha_min;
}

inline double soft_count_term(double alpha, const RasterSettings& s) {
  return sigmoid(s.soft_count_sharpness * (alpha - s.alpha_min));
}

void build_state(const GaussianCloud& cloud, const ViewRecord& view, const RasterSettings& settings,
                 RasterState& state) {
  const int n = static_cast<int>(cloud.size());
  state.projected.assign(n, {});
#pragma omp parallel for schedule(static) num_threads(thread_count(settings))
  for (int i = 0; i < n; ++i) {
    state.projected[i] = project_gaussian(cloud.prims[i], cloud.sh_degree, view, settings);
  }

  state.order.clear();
  for (int i = 0; i < n; ++i) {
    if (state.projected[i].visible) state.order.push_back(i);
  }
  std::sort(state.order.begin(), state.order.end(), [&](int a, int b) {
    const double da = state.projected[a].depth;
    const double db = state.projected[b].depth;
    return da < db || (da == db && a < b);
  });

  const int ts = settings.tile_size;
  state.tiles_x = (view.intrinsics.width + ts - 1) / ts;
  state.tiles_y = (view.intrinsics.height + ts - 1) / ts;
  state.tile_lists.assign(static_cast<std::size_t>(state.tiles_x) * state.tiles_y, {});
  for (int idx : state.order) {
    const auto& p = state.projected[idx];
    for (int ty = p.y_min / ts; ty <= p.y_max / ts; ++ty) {
      for (int tx = p.x_min / ts; tx <= p.x_max / ts; ++tx) {
        state.tile_lists[static_cast<std::size_t>(ty) * state.tiles_x + tx].push_back(idx);
      }
    }
  }
}

}  // namespace

RenderedBuffers rasterize_forward(const GaussianCloud& cloud, const ViewRecord& view, const Vec3& background,
                                  const RasterSettings& settings, RasterState* state_out) {
  RasterState local;
  RasterState& state = state_out ? *state_out : local;
  build_state(cloud, view, settings, state);
  state.background = background;

  const int w = view.intrinsics.width;
  const int h = view.intrinsics.height;
  const int ts = settings.tile_size;
  RenderedBuffers out;
  out.color = ImageD(w, h, 3);
  out.normal = ImageD(w, h, 3);
  out.distance = ImageD(w, h, 1);
  out.transmittance = ImageD(w, h, 1);
  out.soft_count = ImageD(w, h, 1);
  out.count = Image<int>(w, h, 1);

  const int n_tiles = state.tiles_x * state.tiles_y;
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(settings))
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = state.tile_lists[tile];
    const int tx = tile % state.tiles_x;
    const int ty = tile / state.tiles_x;
    for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
        double t = 1.0;
        Vec3 c = Vec3::Zero();
        Vec3 nrm = Vec3::Zero();
        double dist = 0.0;
        double soft = 0.0;
        int count = 0;
        for (int idx : list) {
          const auto& p = state.projected[idx];
          double alpha, gauss, dx, dy;
          bool clamped;
          if (!evaluate(p, x, y, settings, alpha, gauss, clamped, dx, dy)) continue;
          const double wgt = alpha * t;
          c += wgt * p.color;
          nrm += wgt * p.normal_cam;
          dist += wgt * p.plane_offset;
          soft += soft_count_term(alpha, settings);
          ++count;
          t *= 1.0 - alpha;
          if (t < settings.min_transmittance) break;
        }
        c += t * background;
        for (int ch = 0; ch < 3; ++ch) {
          out.color.at(x, y, ch) = c[ch];
          out.normal.at(x, y, ch) = nrm[ch];
        }
        out.distance.at(x, y) = dist;
        out.transmittance.at(x, y) = t;
        out.soft_count.at(x, y) = soft;
        out.count.at(x, y) = count;
      }
    }
  }

  out.depth = compute_depth_map(out, view, &out.degenerate_depth_pixels);
  return out;
}

RasterGradients rasterize_backward(const GaussianCloud& cloud, const ViewRecord& view,
                                   const RasterSettings& settings, const RasterState& state,
                                   const PixelGradients& up) {
  const int n = static_cast<int>(cloud.size());
  const int w = view.intrinsics.width;
  const int h = view.intrinsics.height;
  const int ts = settings.tile_size;
  const bool has_c = !up.color.empty();
  const bool has_n = !up.normal.empty();
  const bool has_d = !up.distance.empty();
  const bool has_s = !up.soft_count.empty();
  const Vec3 bg = state.background;

  const int nt = thread_count(settings);
  std::vector<std::vector<detail::ScreenGradient>> partial(nt, std::vector<detail::ScreenGradient>(n));
  const int n_tiles = state.tiles_x * state.tiles_y;

#pragma omp parallel num_threads(nt)
  {
    auto& acc = partial[thread_id()];
    std::vector<Contribution> contrib;
#pragma omp for schedule(static)
    for (int tile = 0; tile < n_tiles; ++tile) {
      const auto& list = state.tile_lists[tile];
      if (list.empty()) continue;
      const int tx = tile % state.tiles_x;
      const int ty = tile / state.tiles_x;
      for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
        for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
          const Vec3 dc = has_c ? Vec3(up.color.at(x, y, 0), up.color.at(x, y, 1), up.color.at(x, y, 2))
                                : Vec3::Zero();
          const Vec3 dn = has_n ? Vec3(up.normal.at(x, y, 0), up.normal.at(x, y, 1), up.normal.at(x, y, 2))
                                : Vec3::Zero();
          const double dd = has_d ? up.distance.at(x, y) : 0.0;
          const double ds = has_s ? up.soft_count.at(x, y) : 0.0;
          if (dc.isZero() && dn.isZero() && dd == 0.0 && ds == 0.0) continue;

          // Replay the forward pass to recover the contributor list.
          contrib.clear();
          double t = 1.0;
          for (int idx : list) {
            Contribution ct{idx, 0, 0, t, false, 0, 0};
            if (!evaluate(state.projected[idx], x, y, settings, ct.alpha, ct.gauss, ct.clamped, ct.dx, ct.dy)) {
              continue;
            }
            contrib.push_back(ct);
            t *= 1.0 - ct.alpha;
            if (t < settings.min_transmittance) break;
          }

          Vec3 behind_c = t * bg;
          Vec3 behind_n = Vec3::Zero();
          double behind_d = 0.0;
          for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
            const auto& p = state.projected[it->index];
            auto& g = acc[it->index];
            const double a = it->alpha;
            const double ti = it->transmittance;
            const double wgt = a * ti;
            g.color += wgt * dc;
            g.normal_cam += wgt * dn;
            g.plane_offset += wgt * dd;

            const double inv = 1.0 / (1.0 - a);
            double g_alpha = dc.dot(p.color * ti - behind_c * inv) + dn.dot(p.normal_cam * ti - behind_n * inv) +
                             dd * (p.plane_offset * ti - behind_d * inv);
            double g_alpha_soft = 0.0;
            if (has_s) {
              const double sg = soft_count_term(a, settings);
              g_alpha_soft = ds * settings.soft_count_sharpness * sg * (1.0 - sg);
              if (!up.soft_count_opacity_only) {
                g_alpha += g_alpha_soft;
                g_alpha_soft = 0.0;
              }
            }
            behind_c += wgt * p.color;
            behind_n += wgt * p.normal_cam;
            behind_d += wgt * p.plane_offset;

            if (it->clamped) continue;
            g.opacity += (g_alpha + g_alpha_soft) * it->gauss;
            const double g_power = g_alpha * a;
            const double dx = it->dx;
            const double dy = it->dy;
            g.conic += g_power * Vec3(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
            g.mean2d += g_power * Vec2(p.conic[0] * dx + p.conic[1] * dy, p.conic[1] * dx + p.conic[2] * dy);
          }
        }
      }
    }
  }

  RasterGradients out;
  out.params.assign(n, {});
  out.mean2d.assign(n, Vec2::Zero());
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int i = 0; i < n; ++i) {
    if (!state.projected[i].visible) continue;
    detail::ScreenGradient g;
    for (int th = 0; th < nt; ++th) g += partial[th][i];
    out.mean2d[i] = g.mean2d;
    out.params[i] = detail::project_backward(cloud.prims[i], cloud.sh_degree, view, state.projected[i], g);
  }
  return out;
}

}  // namespace gsr
