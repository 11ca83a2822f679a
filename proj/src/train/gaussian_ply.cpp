#include "gsr/ply.hpp"
#include "gsr/trainer.hpp"

namespace gsr {

void save_gaussians_ply(const std::filesystem::path& path, const GaussianCloud& cloud) {
  const std::size_t n = cloud.size();
  const int coeffs = sh_coeff_count(cloud.sh_degree);
  PlyData ply;
  auto column = [&](const std::string& name, auto get) {
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get(cloud.prims[i]);
    ply.add(name, PlyType::Float64, std::move(values));
  };
  for (int a = 0; a < 3; ++a) column(std::string(1, "xyz"[a]), [a](const GaussianPrimitive& p) { return p.mu[a]; });
  for (int c = 0; c < 3; ++c)
    column("f_dc_" + std::to_string(c), [c](const GaussianPrimitive& p) { return p.sh[0][c]; });
  // Higher bands channel-major, as splatting viewers expect.
  for (int c = 0; c < 3; ++c)
    for (int k = 1; k < coeffs; ++k)
      column("f_rest_" + std::to_string(c * (coeffs - 1) + k - 1),
             [c, k](const GaussianPrimitive& p) { return p.sh[k][c]; });
  column("opacity", [](const GaussianPrimitive& p) { return p.opacity_logit; });
  for (int a = 0; a < 3; ++a)
    column("scale_" + std::to_string(a), [a](const GaussianPrimitive& p) { return p.log_scale[a]; });
  for (int a = 0; a < 4; ++a)
    column("rot_" + std::to_string(a), [a](const GaussianPrimitive& p) { return p.rot[a]; });
  write_ply(path, ply);
}

GaussianCloud load_gaussians_ply(const std::filesystem::path& path) {
  const PlyData ply = read_ply(path);
  int rest = 0;
  while (ply.find("f_rest_" + std::to_string(rest))) ++rest;
  const int coeffs = rest / 3 + 1;
  GaussianCloud cloud;
  cloud.sh_degree = 0;
  while (sh_coeff_count(cloud.sh_degree) < coeffs && cloud.sh_degree < kMaxShDegree) ++cloud.sh_degree;
  if (sh_coeff_count(cloud.sh_degree) != coeffs || rest % 3 != 0) {
    throw ParseError(path.string() + ": f_rest count " + std::to_string(rest) + " is not a full SH band set");
  }
  const std::size_t n = ply.vertex_count();
  cloud.prims.resize(n);
  auto read = [&](const std::string& name, auto set) {
    const auto& values = ply.column(name);
    for (std::size_t i = 0; i < n; ++i) set(cloud.prims[i], values[i]);
  };
  for (int a = 0; a < 3; ++a) read(std::string(1, "xyz"[a]), [a](GaussianPrimitive& p, double v) { p.mu[a] = v; });
  for (int c = 0; c < 3; ++c)
    read("f_dc_" + std::to_string(c), [c](GaussianPrimitive& p, double v) { p.sh[0][c] = v; });
  for (int c = 0; c < 3; ++c)
    for (int k = 1; k < coeffs; ++k)
      read("f_rest_" + std::to_string(c * (coeffs - 1) + k - 1),
           [c, k](GaussianPrimitive& p, double v) { p.sh[k][c] = v; });
  read("opacity", [](GaussianPrimitive& p, double v) { p.opacity_logit = v; });
  for (int a = 0; a < 3; ++a)
    read("scale_" + std::to_string(a), [a](GaussianPrimitive& p, double v) { p.log_scale[a] = v; });
  for (int a = 0; a < 4; ++a)
    read("rot_" + std::to_string(a), [a](GaussianPrimitive& p, double v) { p.rot[a] = v; });
  return cloud;
}

}  // namespace gsr
