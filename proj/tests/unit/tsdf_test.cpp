#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "gsr/meshing.hpp"
#include "gsr/reference.hpp"
#include "gsr/tsdf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gsr {
namespace {

using test::sphere_cameras;
using test::sphere_depth;

TsdfVolume sphere_volume(double radius, double voxel, const Vec3& centre = Vec3::Zero()) {
  Aabb box{centre - Vec3::Constant(radius * 1.5), centre + Vec3::Constant(radius * 1.5)};
  TsdfVolume vol = TsdfVolume::covering(box, voxel);
  const double trunc = 4 * voxel;
  for (int k = 0; k < vol.dims[2]; ++k)
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int i = 0; i < vol.dims[0]; ++i) {
        const double sdf = (vol.voxel_center(i, j, k) - centre).norm() - radius;
        vol.tsdf[vol.index(i, j, k)] = std::clamp(sdf / trunc, -1.0, 1.0);
        vol.weight[vol.index(i, j, k)] = 1;
      }
  return vol;
}

std::map<std::pair<int, int>, int> edge_uses(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      uses[{std::min(a, b), std::max(a, b)}]++;
    }
  return uses;
}

TEST(MarchingCubes, SphereVerticesOnSurface) {
  const double r = 1.0, vs = 0.05;
  const TriangleMesh m = extract_mesh(sphere_volume(r, vs));
  ASSERT_FALSE(m.empty());
  for (const auto& v : m.vertices) EXPECT_NEAR(v.norm(), r, vs);
  EXPECT_NEAR(m.area(), 4 * M_PI * r * r, 0.05 * 4 * M_PI);
}

TEST(MarchingCubes, SphereIsWatertight) {
  const TriangleMesh m = extract_mesh(sphere_volume(1.0, 0.07, Vec3(0.013, -0.02, 0.031)));
  for (const auto& [edge, n] : edge_uses(m)) EXPECT_EQ(n, 2) << edge.first << "-" << edge.second;
}

TEST(MarchingCubes, NormalsPointIntoFreeSpace) {
  const TriangleMesh m = extract_mesh(sphere_volume(1.0, 0.08));
  int outward = 0;
  for (const auto& t : m.triangles) {
    const Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3;
    outward += n.dot(c) > 0;
  }
  EXPECT_EQ(outward, static_cast<int>(m.triangles.size()));
}

TEST(MarchingCubes, AllPositiveGivesEmptyWithWarning) {
  TsdfVolume vol(Vec3::Zero(), 0.1, {8, 8, 8});
  std::fill(vol.weight.begin(), vol.weight.end(), 1.0);
  std::string warning;
  EXPECT_TRUE(extract_mesh(vol, &warning).empty());
  EXPECT_FALSE(warning.empty());
}

TEST(MarchingCubes, PlaneIsPlanar) {
  TsdfVolume vol(Vec3::Zero(), 0.1, {12, 12, 12});
  const double plane_z = 0.537;
  for (int k = 0; k < 12; ++k)
    for (int j = 0; j < 12; ++j)
      for (int i = 0; i < 12; ++i) {
        vol.tsdf[vol.index(i, j, k)] = std::clamp((vol.voxel_center(i, j, k).z() - plane_z) / 0.4, -1.0, 1.0);
        vol.weight[vol.index(i, j, k)] = 1;
      }
  const TriangleMesh m = extract_mesh(vol);
  ASSERT_FALSE(m.empty());
  for (const auto& v : m.vertices) EXPECT_NEAR(v.z(), plane_z, 1e-12);
}

TEST(MarchingCubes, UnobservedCellsAreSkipped) {
  TsdfVolume vol = sphere_volume(1.0, 0.1);
  std::fill(vol.weight.begin(), vol.weight.end(), 0.0);
  EXPECT_TRUE(extract_mesh(vol).empty());
}

ViewRecord camera_facing_wall(int id) {
  return test::look_at(Vec3(0.2 * id, 0.1 * id, -3), Vec3(0, 0, 0), Vec3(0, 1, 0), test::square_intrinsics(40, 35), id);
}

// Depth of the plane z = wall_z seen from `view`.
ImageD wall_depth(const ViewRecord& view, double wall_z) {
  const auto& k = view.intrinsics;
  ImageD d(k.width, k.height, 1);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 ray_world = view.rotation.transpose() * pixel_ray(k, x, y);
      const double t = (wall_z - view.center.z()) / ray_world.z();
      d.at(x, y) = t;  // camera z of the hit, since ray has unit camera z
    }
  return d;
}

TEST(Integrate, ContributionArithmetic) {
  ViewRecord v = test::origin_view(9, 10);
  TsdfVolume vol(Vec3(0, 0, 1.0), 0.25, {1, 1, 12});
  ImageD depth(9, 9, 1, 2.0);
  tsdf_integrate(vol, depth, v, 1.0);
  // Voxel k sits at z = 1 + 0.25 k.
  EXPECT_DOUBLE_EQ(vol.tsdf[vol.index(0, 0, 4)], 0.0);  // on the surface
  EXPECT_DOUBLE_EQ(vol.tsdf[vol.index(0, 0, 2)], 0.5);  // truncation / 2 in front
  EXPECT_DOUBLE_EQ(vol.tsdf[vol.index(0, 0, 7)], -0.75);
  EXPECT_DOUBLE_EQ(vol.weight[vol.index(0, 0, 8)], 0.0);  // sdf == -truncation stays untouched
  EXPECT_DOUBLE_EQ(vol.tsdf[vol.index(0, 0, 8)], 1.0);
  EXPECT_THROW(tsdf_integrate(vol, depth, v, 0.4), Error);
}

TEST(Integrate, SentinelPixelsAreIgnored) {
  ViewRecord v = test::origin_view(9, 10);
  TsdfVolume vol(Vec3(0, 0, 1.0), 0.25, {1, 1, 12});
  tsdf_integrate(vol, ImageD(9, 9, 1, kInvalidDepth), v, 1.0);
  for (double w : vol.weight) EXPECT_EQ(w, 0.0);
}

TEST(Integrate, MatchesSerialReferenceAndIsOrderInvariant) {
  std::vector<ViewRecord> views;
  std::vector<ImageD> depths;
  for (int j = 0; j < 5; ++j) {
    views.push_back(camera_facing_wall(j));
    depths.push_back(wall_depth(views.back(), 0.1 * j));
  }
  auto make = [] { return TsdfVolume::covering({Vec3(-1, -1, -0.5), Vec3(1, 1, 1)}, 0.05); };
  TsdfVolume a = make(), b = make(), c = make();
  for (int j = 0; j < 5; ++j) {
    tsdf_integrate(a, depths[j], views[j], 0.2);
    reference::tsdf_integrate_serial(b, depths[j], views[j], 0.2);
  }
  for (int j : {3, 0, 4, 2, 1}) tsdf_integrate(c, depths[j], views[j], 0.2);
  EXPECT_EQ(a.tsdf, b.tsdf);
  EXPECT_EQ(a.weight, b.weight);
  for (std::size_t i = 0; i < a.tsdf.size(); ++i) EXPECT_NEAR(a.tsdf[i], c.tsdf[i], 1e-6);
}

double sphere_rms(double voxel) {
  const double r = 1.0;
  const auto views = sphere_cameras(24);
  TsdfVolume vol = TsdfVolume::covering({Vec3::Constant(-1.3), Vec3::Constant(1.3)}, voxel);
  for (const auto& v : views) tsdf_integrate(vol, sphere_depth(v, r), v, 4 * voxel);
  const TriangleMesh m = extract_mesh(vol);
  double s = 0;
  for (const auto& p : m.vertices) s += (p.norm() - r) * (p.norm() - r);
  return std::sqrt(s / m.vertices.size());
}

TEST(Integrate, SphereErrorShrinksWithResolution) {
  const double e1 = sphere_rms(0.1), e2 = sphere_rms(0.05);
  EXPECT_LT(e1, 0.1);
  EXPECT_LT(e2, 0.05);
  EXPECT_LT(e2, e1);
}

TEST(Merge, SingleGroupEqualsOwnExtraction) {
  SceneBundle scene;
  GroupSurface g;
  g.group_id = 3;
  g.aabb = {Vec3(-1, -1, -0.3), Vec3(1, 1, 0.3)};
  for (int j = 0; j < 3; ++j) {
    scene.views.push_back(camera_facing_wall(j));
    g.view_indices.push_back(j);
    g.depths.push_back(wall_depth(scene.views.back(), 0.0));
  }
  scene.rebuild_index();
  MeshingConfig cfg;
  cfg.voxel_size = 0.05;
  const TriangleMesh own = mesh_group(g, scene, cfg);
  const TriangleMesh merged = merge_group_meshes(std::span<const GroupSurface>(&g, 1), scene, cfg);
  EXPECT_EQ(own.vertices, merged.vertices);
  EXPECT_EQ(own.triangles, merged.triangles);
  for (int t : merged.vertex_group) EXPECT_EQ(t, 3);
}

TEST(Merge, SharedWallIsSingleSheet) {
  SceneBundle scene;
  std::vector<GroupSurface> groups(2);
  for (int j = 0; j < 4; ++j) scene.views.push_back(camera_facing_wall(j));
  scene.rebuild_index();
  groups[0].aabb = {Vec3(-1, -1, -0.3), Vec3(0.2, 1, 0.3)};
  groups[1].aabb = {Vec3(-0.2, -1, -0.3), Vec3(1, 1, 0.3)};
  for (int gi = 0; gi < 2; ++gi) {
    groups[gi].group_id = gi;
    for (int j = 0; j < 4; ++j) {
      groups[gi].view_indices.push_back(j);
      ImageD d = wall_depth(scene.views[j], 0.0);
      // Each group sees a slightly different wall estimate.
      for (auto& x : d.data()) x += gi == 0 ? 0.01 : -0.01;
      groups[gi].depths.push_back(d);
    }
  }
  MeshingConfig cfg;
  cfg.voxel_size = 0.05;
  const TriangleMesh m = merge_group_meshes(groups, scene, cfg);
  ASSERT_FALSE(m.empty());
  for (const auto& v : m.vertices) EXPECT_LT(std::abs(v.z()), cfg.voxel_size);
  cfg.mode = MergeMode::Concatenate;
  // Concatenation keeps both groups' sheets in the overlap strip.
  const TriangleMesh cat = merge_group_meshes(groups, scene, cfg);
  std::set<int> tags;
  for (std::size_t i = 0; i < cat.vertices.size(); ++i)
    if (std::abs(cat.vertices[i].x()) < 0.1) tags.insert(cat.vertex_group[i]);
  EXPECT_EQ(tags, (std::set<int>{0, 1}));
}

TEST(Merge, DisjointGroupsAddUp) {
  SceneBundle scene;
  for (int j = 0; j < 3; ++j) scene.views.push_back(camera_facing_wall(j));
  scene.rebuild_index();
  std::vector<GroupSurface> groups(2);
  groups[0].aabb = {Vec3(-1, -1, -0.3), Vec3(-0.3, 1, 0.3)};
  groups[1].aabb = {Vec3(0.3, -1, -0.3), Vec3(1, 1, 0.3)};
  for (int gi = 0; gi < 2; ++gi) {
    groups[gi].group_id = gi;
    for (int j = 0; j < 3; ++j) {
      groups[gi].view_indices.push_back(j);
      ImageD d = wall_depth(scene.views[j], 0.0);
      const auto& v = scene.views[j];
      for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) {
          const Vec3 hit = v.center + v.rotation.transpose() * pixel_ray(v.intrinsics, x, y) * d.at(x, y);
          if (!groups[gi].aabb.contains(hit)) d.at(x, y) = kInvalidDepth;
        }
      groups[gi].depths.push_back(d);
    }
  }
  MeshingConfig cfg;
  cfg.voxel_size = 0.05;
  const std::size_t a = mesh_group(groups[0], scene, cfg).triangles.size();
  const std::size_t b = mesh_group(groups[1], scene, cfg).triangles.size();
  const TriangleMesh merged = merge_group_meshes(groups, scene, cfg);
  EXPECT_GT(a, 0u);
  EXPECT_EQ(merged.triangles.size(), a + b);
}

TEST(MeshIo, PlyRoundTrip) {
  const TriangleMesh m = extract_mesh(sphere_volume(1.0, 0.2));
  test::TempDir dir("meshio");
  save_mesh_ply(dir.path() / "m.ply", m);
  const TriangleMesh back = load_mesh_ply(dir.path() / "m.ply");
  ASSERT_EQ(back.vertices.size(), m.vertices.size());
  EXPECT_EQ(back.triangles, m.triangles);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_LT((back.vertices[i] - m.vertices[i]).norm(), 1e-6);
  save_mesh_obj(dir.path() / "m.obj", m);
  save_volume_raw(dir.path() / "vol", sphere_volume(1.0, 0.2));
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "vol.tsdf.raw") % 4, 0u);
}

}  // namespace
}  // namespace gsr
