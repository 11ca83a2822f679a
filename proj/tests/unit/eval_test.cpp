#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gsr/eval.hpp"
#include "gsr/meshing.hpp"

namespace gsr {
namespace {

TriangleMesh unit_square() {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

std::vector<Vec3> random_points(std::mt19937_64& rng, int n, double extent) {
  std::uniform_real_distribution<double> u(0, extent);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

std::vector<double> brute_nearest(const std::vector<Vec3>& q, const std::vector<Vec3>& t) {
  std::vector<double> out;
  for (const auto& a : q) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : t) best = std::min(best, (a - b).squaredNorm());
    out.push_back(std::sqrt(best));
  }
  return out;
}

double brute_fraction(const std::vector<Vec3>& q, const std::vector<Vec3>& t, double thr) {
  const auto d = brute_nearest(q, t);
  return static_cast<double>(std::count_if(d.begin(), d.end(), [&](double x) { return x < thr; })) / d.size();
}

TEST(F1, PublishedPrecisionRecallPair) {
  EXPECT_NEAR(f1_score(0.671, 0.467), 0.551, 5e-4);
  EXPECT_EQ(f1_score(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(f1_score(1, 1), 1.0);
}

TEST(Sampling, UnitSquareGivesOneHundredSamples) {
  const auto s = sample_mesh_surface(unit_square(), 0.1);
  EXPECT_NEAR(static_cast<double>(s.size()), 100.0, 1.0);
  for (const auto& p : s) {
    EXPECT_GE(p.x(), 0.0);
    EXPECT_LE(p.x(), 1.0);
    EXPECT_GE(p.y(), 0.0);
    EXPECT_LE(p.y(), 1.0);
    EXPECT_EQ(p.z(), 0.0);
  }
}

TEST(Sampling, CountsFollowTriangleArea) {
  TriangleMesh m;
  // Areas 1.5 and 0.5, far apart along z.
  m.vertices = {Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 5), Vec3(1, 0, 5), Vec3(0, 1, 5)};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  const auto s = sample_mesh_surface(m, 0.02, 3);
  ASSERT_EQ(s.size(), 5000u);
  const auto low = std::count_if(s.begin(), s.end(), [](const Vec3& p) { return p.z() < 1; });
  const double ratio = static_cast<double>(low) / (s.size() - low);
  EXPECT_NEAR(ratio, 3.0, 0.3);
}

TEST(Sampling, DeterministicForSeed) {
  EXPECT_EQ(sample_mesh_surface(unit_square(), 0.05, 11), sample_mesh_surface(unit_square(), 0.05, 11));
  EXPECT_TRUE(sample_mesh_surface(TriangleMesh{}, 0.1).empty());
  EXPECT_THROW(sample_mesh_surface(unit_square(), 0.0), Error);
}

TEST(NearestNeighbour, MatchesBruteForceExactly) {
  std::mt19937_64 rng(5);
  const auto a = random_points(rng, 2000, 2.0);
  const auto b = random_points(rng, 2000, 2.0);
  for (const double cell : {0.0, 0.01, 0.1, 5.0}) {
    const auto got = nearest_distances(a, b, cell);
    const auto want = brute_nearest(a, b);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i], want[i]) << "cell " << cell << " query " << i;
  }
}

TEST(NearestNeighbour, QueriesFarOutsideTheGrid) {
  std::mt19937_64 rng(6);
  const auto t = random_points(rng, 300, 1.0);
  std::vector<Vec3> q = {Vec3(40, -3, 2), Vec3(-10, -10, -10), Vec3(0.5, 0.5, 9)};
  EXPECT_EQ(nearest_distances(q, t, 0.05), brute_nearest(q, t));
}

TEST(NearestNeighbour, HugeExtentStaysExact) {
  std::mt19937_64 rng(8);
  auto t = random_points(rng, 200, 1.0);
  t.push_back(Vec3(1e7, 0, 0));
  const auto q = random_points(rng, 200, 1.0);
  EXPECT_EQ(nearest_distances(q, t, 1e-3), brute_nearest(q, t));
}

TEST(Metrics, MatchBruteForceOn2000Points) {
  std::mt19937_64 rng(9);
  const auto a = random_points(rng, 2000, 1.0);
  const auto b = random_points(rng, 2000, 1.0);
  const double thr = 0.05;
  const EvalReport r = precision_recall_f1(a, b, thr);
  EXPECT_EQ(r.precision, brute_fraction(a, b, thr));
  EXPECT_EQ(r.recall, brute_fraction(b, a, thr));
  EXPECT_EQ(r.f1, f1_score(r.precision, r.recall));
  EXPECT_EQ(r.sample_count, 2000u);
  EXPECT_EQ(r.gt_count, 2000u);
}

TEST(Metrics, IdenticalCloudsScoreOne) {
  std::mt19937_64 rng(10);
  const auto a = random_points(rng, 500, 1.0);
  const EvalReport r = precision_recall_f1(a, a, 1e-3);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(Metrics, ShiftBeyondThresholdScoresZero) {
  std::mt19937_64 rng(11);
  const auto a = random_points(rng, 300, 1.0);
  auto b = a;
  for (auto& p : b) p.x() += 3.0;
  const EvalReport r = precision_recall_f1(a, b, 0.5);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Metrics, DistanceEqualToThresholdDoesNotCount) {
  const std::vector<Vec3> a = {Vec3(0, 0, 0)};
  const std::vector<Vec3> b = {Vec3(0.5, 0, 0)};
  EXPECT_EQ(precision_recall_f1(a, b, 0.5).precision, 0.0);
  EXPECT_EQ(precision_recall_f1(a, b, 0.5000001).precision, 1.0);
}

TEST(Metrics, SwappingCloudsSwapsPrecisionAndRecall) {
  std::mt19937_64 rng(12);
  const auto a = random_points(rng, 400, 1.0);
  const auto b = random_points(rng, 700, 1.0);
  const EvalReport ab = precision_recall_f1(a, b, 0.08);
  const EvalReport ba = precision_recall_f1(b, a, 0.08);
  EXPECT_EQ(ab.precision, ba.recall);
  EXPECT_EQ(ab.recall, ba.precision);
  EXPECT_EQ(ab.f1, ba.f1);
}

TEST(Metrics, RigidMotionLeavesScoresUnchanged) {
  std::mt19937_64 rng(13);
  const auto a = random_points(rng, 400, 1.0);
  const auto b = random_points(rng, 400, 1.0);
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 t(5, -2, 1);
  auto move = [&](std::vector<Vec3> pts) {
    for (auto& p : pts) p = r * p + t;
    return pts;
  };
  const EvalReport before = precision_recall_f1(a, b, 0.07);
  const EvalReport after = precision_recall_f1(move(a), move(b), 0.07);
  EXPECT_NEAR(before.precision, after.precision, 1.0 / 400);
  EXPECT_NEAR(before.recall, after.recall, 1.0 / 400);
}

TEST(Metrics, EmptyCloudsAreErrors) {
  const std::vector<Vec3> a = {Vec3::Zero()};
  const std::vector<Vec3> none;
  try {
    precision_recall_f1(none, a, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sample"), std::string::npos);
  }
  try {
    precision_recall_f1(a, none, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ground-truth"), std::string::npos);
  }
  EXPECT_THROW(precision_recall_f1(a, a, 0.0), Error);
}

TEST(Downsample, KeepsFirstPointPerVoxel) {
  const std::vector<Vec3> pts = {Vec3(0.01, 0.01, 0.01), Vec3(0.02, 0.02, 0.02), Vec3(0.15, 0, 0),
                                 Vec3(-0.01, 0, 0)};
  const auto out = voxel_downsample(pts, 0.1);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], pts[0]);
  EXPECT_EQ(out[1], pts[2]);
  EXPECT_EQ(out[2], pts[3]);
}

TEST(Fusion, MeanOfValidDepths) {
  std::vector<ImageD> d(4, ImageD(1, 1, 1));
  d[0].at(0, 0) = 4;
  d[1].at(0, 0) = kInvalidDepth;
  d[2].at(0, 0) = 6;
  d[3].at(0, 0) = 8;
  EXPECT_DOUBLE_EQ(fuse_overlapping_depths(d).at(0, 0), 6.0);
  std::vector<ImageD> none(2, ImageD(1, 1, 1, kInvalidDepth));
  EXPECT_EQ(fuse_overlapping_depths(none).at(0, 0), kInvalidDepth);
}

}  // namespace
}  // namespace gsr
