// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>

#include "gsr/eval.hpp"
#include "gsr/masks.hpp"
#include "gsr/reference.hpp"
#include "gsr/splat.hpp"
#include "gsr/synthetic.hpp"
#include "gsr/tsdf.hpp"

namespace {

using namespace gsr;

const SyntheticScene& scene() {
  static const SyntheticScene s = [] {
    SyntheticSceneConfig c;
    c.views = 12;
    c.point_spacing = 0.06;
    return render_synthetic_scene(two_box_world(), c);
  }();
  return s;
}

GaussianCloud cloud_from_points() {
  GaussianCloud c;
  for (const auto& p : scene().scene.points) {
    GaussianPrimitive g;
    g.mu = p.xyz;
    g.log_scale = Vec3::Constant(std::log(0.08));
    g.opacity_logit = logit(0.6);
    g.sh[0] = rgb_to_sh0(p.color);
    c.prims.push_back(g);
  }
  return c;
}

void BM_Render_Tiled(benchmark::State& st) {
  const GaussianCloud c = cloud_from_points();
  const ViewRecord& v = scene().scene.views[0];
  for (auto _ : st) benchmark::DoNotOptimize(rasterize_forward(c, v, Vec3::Zero()));
  st.counters["primitives"] = static_cast<double>(c.size());
}
BENCHMARK(BM_Render_Tiled)->Unit(benchmark::kMillisecond);

void BM_Render_BruteForce(benchmark::State& st) {
  const GaussianCloud c = cloud_from_points();
  const ViewRecord& v = scene().scene.views[0];
  for (auto _ : st) benchmark::DoNotOptimize(reference::render_brute_force(c, v, Vec3::Zero()));
}
BENCHMARK(BM_Render_BruteForce)->Unit(benchmark::kMillisecond);

void BM_Votes_Parallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(count_votes(scene().scene, scene().masks));
}
BENCHMARK(BM_Votes_Parallel)->Unit(benchmark::kMillisecond);

void BM_Votes_Serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(reference::count_votes_serial(scene().scene, scene().masks));
}
BENCHMARK(BM_Votes_Serial)->Unit(benchmark::kMillisecond);

template <bool Parallel>
void tsdf_bench(benchmark::State& st) {
  const Aabb box{Vec3(-3.5, -1.5, -0.2), Vec3(3.5, 2.0, 2.5)};
  const ImageD& depth = scene().depth[0];
  const ViewRecord& view = scene().scene.views[0];
  for (auto _ : st) {
    TsdfVolume vol = TsdfVolume::covering(box, 0.05);
    if constexpr (Parallel) {
      tsdf_integrate(vol, depth, view, 0.2);
    } else {
      reference::tsdf_integrate_serial(vol, depth, view, 0.2);
    }
    benchmark::DoNotOptimize(vol.tsdf.data());
  }
}
void BM_Tsdf_Parallel(benchmark::State& st) { tsdf_bench<true>(st); }
void BM_Tsdf_Serial(benchmark::State& st) { tsdf_bench<false>(st); }
BENCHMARK(BM_Tsdf_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Tsdf_Serial)->Unit(benchmark::kMillisecond);

std::vector<Vec3> random_cloud(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

void BM_Nearest_Grid(benchmark::State& st) {
  const auto q = random_cloud(static_cast<int>(st.range(0)), 1);
  const auto t = random_cloud(static_cast<int>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(nearest_distances(q, t, 0.05));
}
BENCHMARK(BM_Nearest_Grid)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Nearest_BruteForce(benchmark::State& st) {
  const auto q = random_cloud(static_cast<int>(st.range(0)), 1);
  const auto t = random_cloud(static_cast<int>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(reference::nearest_distances_brute_force(q, t));
}
BENCHMARK(BM_Nearest_BruteForce)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
