#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "gsr/grouping.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gsr {
namespace {

using test::dbscan_oracle;
using test::same_partition;
using test::random_blobs;

TEST(Dbscan, MatchesQuadraticReference) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto pts = random_blobs(rng, 60 + t * 3);
    const double eps = 4.0 + (t % 5);
    const int min_pts = 3 + t % 6;
    EXPECT_TRUE(same_partition(dbscan_cluster(pts, eps, min_pts), dbscan_oracle(pts, eps, min_pts))) << "instance " << t;
  }
}

TEST(Dbscan, TwoFarBlobsAndSinglePoint) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Vec3(i * 0.1, 0, 0));
  for (int i = 0; i < 20; ++i) pts.push_back(Vec3(100 + i * 0.1, 0, 0));
  const auto l = dbscan_cluster(pts, 1.0, 5);
  EXPECT_EQ(std::set<int>(l.begin(), l.begin() + 20).size(), 1u);
  EXPECT_EQ(std::set<int>(l.begin() + 20, l.end()).size(), 1u);
  EXPECT_NE(l[0], l[20]);
  EXPECT_EQ(dbscan_cluster(std::vector<Vec3>{Vec3::Zero()}, 1.0, 2)[0], kNoise);
}

TEST(Dbscan, LabelsArePermutationEquivariant) {
  std::mt19937_64 rng(5);
  auto pts = random_blobs(rng, 150);
  for (auto& p : pts) p *= 0.5;
  // Only core points are order independent; compare the partition of core points.
  const auto a = dbscan_cluster(pts, 3.0, 6);
  std::vector<int> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> shuffled;
  for (int i : perm) shuffled.push_back(pts[i]);
  const auto b_shuffled = dbscan_cluster(shuffled, 3.0, 6);
  std::vector<int> b(pts.size());
  for (std::size_t i = 0; i < perm.size(); ++i) b[perm[i]] = b_shuffled[i];
  std::vector<int> core_a, core_b;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int n = 0;
    for (const auto& q : pts) n += (pts[i] - q).norm() <= 3.0;
    if (n >= 6) {
      core_a.push_back(a[i]);
      core_b.push_back(b[i]);
    }
  }
  EXPECT_TRUE(same_partition(core_a, core_b));
}

struct GroupScene {
  SceneBundle scene;
  ReliablePointSet reliable;
  std::vector<RefinedMask> refined;
};

GroupScene two_cluster_scene() {
  GroupScene g;
  const auto k = test::square_intrinsics(64, 50);
  for (int j = 0; j < 8; ++j) {
    const double a = 2 * M_PI * j / 8;
    g.scene.views.push_back(test::look_at(Vec3(150 * std::cos(a), 150 * std::sin(a), 60), Vec3::Zero(),
                                          Vec3(0, 0, 1), k, j));
  }
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 3);
  for (int i = 0; i < 80; ++i) {
    const Vec3 c = i < 40 ? Vec3(-40, 0, 0) : Vec3(40, 0, 0);
    g.scene.points.push_back({i, c + Vec3(n(rng), n(rng), n(rng)), Vec3::Zero(), 0, {0}});
  }
  g.scene.points.push_back({500, Vec3(0, 60, 0), Vec3::Zero(), 0, {0}});  // far noise
  g.scene.rebuild_index();
  for (const auto& p : g.scene.points) {
    g.reliable.point_ids.push_back(p.point_id);
    g.reliable.scores[p.point_id] = 0;
    g.reliable.in_mask_counts[p.point_id] = 1;
  }
  for (std::size_t j = 0; j < g.scene.views.size(); ++j) g.refined.push_back({MaskBitmap(64, 64, true), MaskBitmap(64, 64)});
  return g;
}

TEST(Groups, TwoClustersWithBoxesAndViews) {
  GroupScene g = two_cluster_scene();
  GroupingConfig cfg;
  const auto groups = build_groups(g.scene, g.reliable, g.refined, cfg);
  ASSERT_EQ(groups.size(), 2u);
  std::size_t total = 0;
  for (const auto& grp : groups) {
    total += grp.point_ids.size();
    EXPECT_FALSE(grp.view_ids.empty());
    for (auto id : grp.point_ids) {
      for (const auto& p : g.scene.points)
        if (p.point_id == id) {
          EXPECT_TRUE(grp.aabb.contains(p.xyz));
        }
    }
    EXPECT_TRUE(std::is_sorted(grp.point_ids.begin(), grp.point_ids.end()));
  }
  EXPECT_EQ(total, 80u);  // the far point is beyond 2*eps of both centroids
}

TEST(Groups, EmptyMasksLeaveGroupsWithoutViews) {
  GroupScene g = two_cluster_scene();
  for (auto& r : g.refined) r.rbm = MaskBitmap(64, 64);
  const auto groups = build_groups(g.scene, g.reliable, g.refined, {});
  for (const auto& grp : groups) {
    EXPECT_TRUE(grp.view_ids.empty());
    EXPECT_FALSE(grp.warnings.empty());
  }
}

TEST(Groups, NoClusterThrows) {
  GroupScene g = two_cluster_scene();
  GroupingConfig cfg;
  cfg.min_pts = 1000;
  EXPECT_THROW(build_groups(g.scene, g.reliable, g.refined, cfg), GroupingError);
}

TEST(Groups, ManifestRoundTrip) {
  GroupScene g = two_cluster_scene();
  const auto groups = build_groups(g.scene, g.reliable, g.refined, {});
  test::TempDir dir("manifest");
  save_group_manifest(dir.path() / "groups.json", groups);
  const auto back = load_group_manifest(dir.path() / "groups.json");
  ASSERT_EQ(back.size(), groups.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].group_id, groups[i].group_id);
    EXPECT_EQ(back[i].point_ids, groups[i].point_ids);
    EXPECT_EQ(back[i].view_ids, groups[i].view_ids);
    EXPECT_NEAR((back[i].aabb.min - groups[i].aabb.min).norm(), 0, 1e-12);
  }
}

}  // namespace
}  // namespace gsr
