#include "gsr/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gsr/image_io.hpp"

namespace gsr {
namespace {

// Möller-Trumbore; returns t > 0 or a negative value on a miss.
double intersect(const SceneTriangle& tri, const Vec3& o, const Vec3& d) {
  const Vec3 e1 = tri.v[1] - tri.v[0];
  const Vec3 e2 = tri.v[2] - tri.v[0];
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return -1;
  const double inv = 1.0 / det;
  const Vec3 s = o - tri.v[0];
  const double u = s.dot(p) * inv;
  if (u < 0 || u > 1) return -1;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < 0 || u + v > 1) return -1;
  return e2.dot(q) * inv;
}

Vec3 raw_normal(const SceneTriangle& tri) { return (tri.v[1] - tri.v[0]).cross(tri.v[2] - tri.v[0]).normalized(); }

ViewRecord orbit_view(const SyntheticSceneConfig& c, int i) {
  const double theta = 2 * std::numbers::pi * i / c.views + 0.3;
  const double elev = c.elevation_deg * std::numbers::pi / 180.0;
  const Vec3 eye = c.look_target +
                   c.orbit_radius * Vec3(std::cos(elev) * std::cos(theta), std::cos(elev) * std::sin(theta), std::sin(elev));
  const Vec3 z = (c.look_target - eye).normalized();
  const Vec3 x = z.cross(Vec3::UnitZ()).normalized();
  const Vec3 y = z.cross(x);
  ViewRecord v;
  v.view_id = i + 1;
  v.rotation.row(0) = x.transpose();
  v.rotation.row(1) = y.transpose();
  v.rotation.row(2) = z.transpose();
  v.center = eye;
  v.intrinsics = {c.focal, c.focal, c.width / 2.0 - 0.5, c.height / 2.0 - 0.5, c.width, c.height};
  char name[32];
  std::snprintf(name, sizeof name, "view_%02d.png", i + 1);
  v.name = name;
  return v;
}

}  // namespace

void SyntheticWorld::add_triangle(const SceneTriangle& tri) { tris_.push_back(tri); }

void SyntheticWorld::add_box(const Vec3& lo, const Vec3& hi, int building, const Vec3& color) {
  const Vec3 c[8] = {{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                     {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                     {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
  // Quads as corner indices, counter-clockwise seen from outside.
  const int quads[5][4] = {{4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  for (const auto& q : quads) {
    const int seg = next_segment_++;
    tris_.push_back({{c[q[0]], c[q[1]], c[q[2]]}, building, seg, color});
    tris_.push_back({{c[q[0]], c[q[2]], c[q[3]]}, building, seg, color});
  }
}

void SyntheticWorld::add_gable_house(const Vec3& lo, const Vec3& hi, double eave, double ridge, int building,
                                     const Vec3& color) {
  const double ym = 0.5 * (lo.y() + hi.y());
  auto quad = [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const int seg = next_segment_++;
    tris_.push_back({{a, b, c}, building, seg, color});
    tris_.push_back({{a, c, d}, building, seg, color});
    return seg;
  };
  const double z0 = lo.z();
  // Long walls.
  quad({lo.x(), lo.y(), z0}, {hi.x(), lo.y(), z0}, {hi.x(), lo.y(), eave}, {lo.x(), lo.y(), eave});
  quad({hi.x(), hi.y(), z0}, {lo.x(), hi.y(), z0}, {lo.x(), hi.y(), eave}, {hi.x(), hi.y(), eave});
  // Gable ends: rectangle plus the triangle under the ridge, one segment each.
  for (const double x : {lo.x(), hi.x()}) {
    const int seg = quad({x, lo.y(), z0}, {x, hi.y(), z0}, {x, hi.y(), eave}, {x, lo.y(), eave});
    tris_.push_back({{Vec3(x, lo.y(), eave), Vec3(x, hi.y(), eave), Vec3(x, ym, ridge)}, building, seg, color});
  }
  // Roof planes meeting at the ridge.
  quad({lo.x(), lo.y(), eave}, {hi.x(), lo.y(), eave}, {hi.x(), ym, ridge}, {lo.x(), ym, ridge});
  quad({hi.x(), hi.y(), eave}, {lo.x(), hi.y(), eave}, {lo.x(), ym, ridge}, {hi.x(), ym, ridge});
}

void SyntheticWorld::add_ground(double h, double z) {
  const Vec3 a(-h, -h, z), b(h, -h, z), c(h, h, z), d(-h, h, z);
  const Vec3 color(0.45, 0.5, 0.4);
  tris_.push_back({{a, b, c}, 0, 0, color, 5.0});
  tris_.push_back({{a, c, d}, 0, 0, color, 5.0});
}

RayHit SyntheticWorld::cast(const Vec3& o, const Vec3& d) const {
  RayHit hit;
  hit.t = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tris_.size(); ++i) {
    const double t = intersect(tris_[i], o, d);
    if (t > 1e-9 && t < hit.t) {
      hit.t = t;
      hit.triangle = static_cast<int>(i);
    }
  }
  return hit;
}

Vec3 SyntheticWorld::normal(int triangle) const { return raw_normal(tris_[triangle]); }

Vec3 SyntheticWorld::shade(int triangle, const Vec3& p) const {
  const SceneTriangle& tri = tris_[triangle];
  Vec3 n = raw_normal(tri);
  // Sign-free basis so both triangles of a face share the texture.
  if (n.z() < -1e-9 || (std::abs(n.z()) <= 1e-9 && (n.y() < -1e-9 || (std::abs(n.y()) <= 1e-9 && n.x() < 0)))) n = -n;
  Vec3 e1 = n.cross(Vec3::UnitZ());
  if (e1.norm() < 1e-6) e1 = Vec3::UnitX();
  e1.normalize();
  const Vec3 e2 = n.cross(e1);
  const double f = tri.texture_frequency;
  const double u = p.dot(e1), v = p.dot(e2);
  const double pattern = 0.5 + 0.3 * std::sin(f * u) * std::sin(0.8 * f * v + 1.3) +
                         0.2 * std::sin(2.3 * f * u + 1.7 * f * v + 0.4 * tri.segment);
  const double light = 0.75 + 0.25 * std::abs(n.dot(Vec3(0.3, 0.5, 0.81).normalized()));
  return (tri.base_color * light * (0.55 + 0.45 * pattern)).cwiseMin(1.0).cwiseMax(0.0);
}

std::vector<Vec3> SyntheticWorld::sample_buildings(double spacing, std::uint64_t seed,
                                                   std::vector<int>* triangle_ids) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0, 1);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < tris_.size(); ++i) {
    const SceneTriangle& t = tris_[i];
    if (t.building == 0) continue;
    const double area = 0.5 * (t.v[1] - t.v[0]).cross(t.v[2] - t.v[0]).norm();
    const double expected = area / (spacing * spacing);
    int n = static_cast<int>(expected);
    if (u01(rng) < expected - n) ++n;
    for (int k = 0; k < n; ++k) {
      double a = u01(rng), b = u01(rng);
      if (a + b > 1) a = 1 - a, b = 1 - b;
      out.push_back(t.v[0] + a * (t.v[1] - t.v[0]) + b * (t.v[2] - t.v[0]));
      if (triangle_ids) triangle_ids->push_back(static_cast<int>(i));
    }
  }
  return out;
}

SyntheticScene render_synthetic_scene(const SyntheticWorld& world, const SyntheticSceneConfig& c) {
  SyntheticScene out;
  for (int i = 0; i < c.views; ++i) out.scene.views.push_back(orbit_view(c, i));
  out.scene.rebuild_index();
  const Vec3 sky(0.62, 0.72, 0.9);
  const int ss = std::max(c.supersample, 1);

  for (const auto& view : out.scene.views) {
    const auto& k = view.intrinsics;
    ImageD img(k.width, k.height, 3), depth(k.width, k.height, 1, kInvalidDepth), normals(k.width, k.height, 3, 0.0);
    MaskBitmap mask(k.width, k.height);
    SegmentLabelMap seg(k.width, k.height);
    const Mat3 rt = view.rotation.transpose();
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < k.height; ++y) {
      for (int x = 0; x < k.width; ++x) {
        Vec3 color = Vec3::Zero();
        for (int sy = 0; sy < ss; ++sy)
          for (int sx = 0; sx < ss; ++sx) {
            const double px = x + (sx + 0.5) / ss - 0.5, py = y + (sy + 0.5) / ss - 0.5;
            const Vec3 dir = rt * Vec3((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
            const RayHit h = world.cast(view.center, dir);
            color += h.triangle < 0 ? sky : world.shade(h.triangle, view.center + h.t * dir);
          }
        color /= ss * ss;
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = color[ch];
        // Labels, depth and normals come from the pixel centre.
        const Vec3 dir = rt * Vec3((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        const RayHit h = world.cast(view.center, dir);
        if (h.triangle < 0) continue;
        const SceneTriangle& tri = world.triangles()[h.triangle];
        seg.set(x, y, tri.segment);
        if (tri.building == 0) continue;
        mask.set(x, y);
        depth.at(x, y) = h.t;  // camera z is 1 per unit of t
        Vec3 n = view.rotation * world.normal(h.triangle);
        if (n.dot(view.rotation * dir) > 0) n = -n;
        for (int ch = 0; ch < 3; ++ch) normals.at(x, y, ch) = n[ch];
      }
    }
    out.images.push_back(std::move(img));
    out.masks.push_back(std::move(mask));
    out.segments.push_back(std::move(seg));
    out.depth.push_back(std::move(depth));
    out.normals.push_back(std::move(normals));
  }

  // Sparse points on buildings and ground, tracked in every view that sees them.
  std::vector<int> tri_ids;
  std::vector<Vec3> candidates = world.sample_buildings(c.point_spacing, c.seed, &tri_ids);
  std::mt19937_64 rng(c.seed + 1);
  std::uniform_real_distribution<double> ground(-0.45 * c.orbit_radius, 0.45 * c.orbit_radius);
  for (int i = 0; i < c.ground_points; ++i) {
    const Vec3 p(c.look_target.x() + ground(rng), c.look_target.y() + ground(rng), 0.0);
    const RayHit h = world.cast(p + Vec3(0, 0, 100), -Vec3::UnitZ());
    if (h.triangle < 0 || world.triangles()[h.triangle].building != 0) continue;
    candidates.push_back(p + Vec3(0, 0, 100) - h.t * Vec3::UnitZ());
    tri_ids.push_back(h.triangle);
  }
  std::int64_t next_id = 1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vec3& p = candidates[i];
    SparsePoint sp;
    sp.point_id = next_id;
    sp.xyz = p;
    sp.color = world.shade(tri_ids[i], p);
    for (const auto& view : out.scene.views) {
      if (!projection_pixel(project_point(p, view), view.intrinsics)) continue;
      const Vec3 d = p - view.center;
      const RayHit h = world.cast(view.center, d);
      if (h.t >= 1.0 - 1e-7) sp.track.push_back(view.view_id);
    }
    if (sp.track.size() < 2) continue;
    out.scene.points.push_back(std::move(sp));
    ++next_id;
  }

  std::vector<int> gt_tris;
  out.gt_points = world.sample_buildings(c.gt_spacing, c.seed + 2, &gt_tris);
  for (const int t : gt_tris) out.gt_building.push_back(world.triangles()[t].building);
  return out;
}

SyntheticWorld two_box_world() {
  SyntheticWorld w;
  w.add_ground(12.0);
  w.add_box({-3.2, -1.0, 0.0}, {-1.2, 1.0, 1.6}, 1, {0.85, 0.55, 0.4});
  w.add_box({1.4, -0.9, 0.0}, {3.0, 1.5, 2.2}, 2, {0.5, 0.6, 0.85});
  return w;
}

SyntheticWorld gable_house_world() {
  SyntheticWorld w;
  w.add_ground(12.0);
  w.add_gable_house({-1.6, -1.1, 0.0}, {1.6, 1.1, 0.0}, 1.4, 2.5, 1, {0.8, 0.6, 0.45});
  return w;
}

void write_synthetic_scene(const std::filesystem::path& dir, const SyntheticScene& s) {
  std::filesystem::create_directories(dir / "sparse");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  std::filesystem::create_directories(dir / "segments");
  write_sparse_model(s.scene, dir / "sparse");
  for (std::size_t i = 0; i < s.scene.views.size(); ++i) {
    const auto& v = s.scene.views[i];
    const auto stem = std::filesystem::path(v.name).stem().string() + ".png";
    save_color_image(dir / "images" / v.name, s.images[i]);
    save_mask(dir / "masks" / stem, s.masks[i]);
    save_segment_labels(dir / "segments" / stem, s.segments[i]);
  }
  write_point_cloud(dir / "gt.ply", s.gt_points);
}

}  // namespace gsr
