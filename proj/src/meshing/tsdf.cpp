#include "gsr/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "gsr/ply.hpp"
#include "mc_tables.hpp"

namespace gsr {

TsdfVolume::TsdfVolume(const Vec3& o, double vs, std::array<int, 3> d)
    : origin(o),
      voxel_size(vs),
      dims(d),
      tsdf(static_cast<std::size_t>(d[0]) * d[1] * d[2], 1.0),
      weight(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0.0) {}

TsdfVolume TsdfVolume::covering(const Aabb& box, double vs) {
  if (!(vs > 0)) throw Error("TsdfVolume: voxel size must be > 0");
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = static_cast<int>(std::ceil(box.extent()[a] / vs)) + 1;
  return TsdfVolume(box.min, vs, d);
}

void tsdf_integrate(TsdfVolume& volume, const ImageD& depth, const ViewRecord& view, double truncation) {
  if (truncation < 2.0 * volume.voxel_size) {
    throw Error("tsdf_integrate: truncation must be at least twice the voxel size");
  }
  const auto& k = view.intrinsics;
  if (depth.width() != k.width || depth.height() != k.height) {
    throw ShapeError("depth map for view " + view.name, k.width, k.height, depth.width(), depth.height());
  }
  const int nz = volume.dims[2];
#pragma omp parallel for schedule(static)
  for (int kk = 0; kk < nz; ++kk) {
    for (int j = 0; j < volume.dims[1]; ++j) {
      for (int i = 0; i < volume.dims[0]; ++i) {
        const Projection p = project_point(volume.voxel_center(i, j, kk), view);
        const auto px = projection_pixel(p, k);
        if (!px) continue;
        const double d = depth.at(px->x, px->y);
        if (!is_valid_depth(d)) continue;
        const double sdf = d - p.z;
        if (sdf <= -truncation) continue;
        const double value = std::clamp(sdf / truncation, -1.0, 1.0);
        const std::size_t idx = volume.index(i, j, kk);
        const double w = volume.weight[idx];
        volume.tsdf[idx] = (volume.tsdf[idx] * w + value) / (w + 1.0);
        volume.weight[idx] = w + 1.0;
      }
    }
  }
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) {
    a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }
  return a;
}

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

TriangleMesh extract_mesh(const TsdfVolume& volume, std::string* warning) {
  TriangleMesh mesh;
  std::unordered_map<std::size_t, int> edge_vertex;
  const auto& d = volume.dims;

  auto vertex_on_edge = [&](int i, int j, int k, int c0, int c1, double v0, double v1) {
    int a = c0, b = c1;
    if (kCorner[a][0] + kCorner[a][1] + kCorner[a][2] > kCorner[b][0] + kCorner[b][1] + kCorner[b][2]) {
      std::swap(a, b);
      std::swap(v0, v1);
    }
    int axis = 0;
    while (kCorner[a][axis] == kCorner[b][axis]) ++axis;
    const int li = i + kCorner[a][0], lj = j + kCorner[a][1], lk = k + kCorner[a][2];
    const std::size_t key = volume.index(li, lj, lk) * 3 + axis;
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double t = v0 / (v0 - v1);
    Vec3 p = volume.voxel_center(li, lj, lk);
    p[axis] += t * volume.voxel_size;
    mesh.vertices.push_back(p);
    mesh.vertex_group.push_back(-1);
    const int id = static_cast<int>(mesh.vertices.size()) - 1;
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int k = 0; k + 1 < d[2]; ++k) {
    for (int j = 0; j + 1 < d[1]; ++j) {
      for (int i = 0; i + 1 < d[0]; ++i) {
        double val[8];
        bool observed = true;
        int cube = 0;
        for (int c = 0; c < 8 && observed; ++c) {
          const std::size_t idx = volume.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          observed = volume.weight[idx] > 0;
          val[c] = volume.tsdf[idx];
          if (val[c] < 0) cube |= 1 << c;
        }
        if (!observed || detail::kMcEdgeTable[cube] == 0) continue;
        int verts[12];
        for (int e = 0; e < 12; ++e) {
          if (detail::kMcEdgeTable[cube] & (1 << e)) {
            verts[e] = vertex_on_edge(i, j, k, kEdge[e][0], kEdge[e][1], val[kEdge[e][0]], val[kEdge[e][1]]);
          }
        }
        const auto& tri = detail::kMcTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3) {
          // Table winding faces the negative side; swap to face free space.
          const std::array<int, 3> f{verts[tri[t]], verts[tri[t + 2]], verts[tri[t + 1]]};
          mesh.triangles.push_back(f);
        }
      }
    }
  }
  if (mesh.triangles.empty() && warning) *warning = "volume has no observed zero crossing; mesh is empty";
  return mesh;
}

void save_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  PlyData ply;
  std::vector<double> x, y, z, g;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    x.push_back(mesh.vertices[i].x());
    y.push_back(mesh.vertices[i].y());
    z.push_back(mesh.vertices[i].z());
    g.push_back(i < mesh.vertex_group.size() ? mesh.vertex_group[i] : -1);
  }
  ply.add("x", PlyType::Float32, std::move(x));
  ply.add("y", PlyType::Float32, std::move(y));
  ply.add("z", PlyType::Float32, std::move(z));
  ply.add("group", PlyType::Int32, std::move(g));
  ply.faces = mesh.triangles;
  write_ply(path, ply);
}

TriangleMesh load_mesh_ply(const std::filesystem::path& path) {
  const PlyData ply = read_ply(path);
  TriangleMesh mesh;
  const auto& x = ply.column("x");
  const auto& y = ply.column("y");
  const auto& z = ply.column("z");
  const PlyProperty* g = ply.find("group");
  for (std::size_t i = 0; i < x.size(); ++i) {
    mesh.vertices.emplace_back(x[i], y[i], z[i]);
    mesh.vertex_group.push_back(g ? static_cast<int>(g->values[i]) : -1);
  }
  for (const auto& f : ply.faces) {
    for (int v : f) {
      if (v < 0 || v >= static_cast<int>(x.size())) throw ParseError("face index out of range in " + path.string());
    }
    mesh.triangles.push_back(f);
  }
  return mesh;
}

void save_mesh_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write OBJ file " + path.string());
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_volume_raw(const std::filesystem::path& stem, const TsdfVolume& volume) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  auto dump = [](const std::filesystem::path& p, const std::vector<double>& v) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    for (double x : v) {
      const float f = static_cast<float>(x);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  };
  const std::string base = stem.string();
  dump(base + ".tsdf.raw", volume.tsdf);
  dump(base + ".weight.raw", volume.weight);
  nlohmann::json header = {{"origin", {volume.origin.x(), volume.origin.y(), volume.origin.z()}},
                           {"voxel_size", volume.voxel_size},
                           {"dims", volume.dims},
                           {"dtype", "float32"},
                           {"layout", "x fastest, then y, then z"}};
  std::ofstream(base + ".json") << header.dump(2) << '\n';
}

}  // namespace gsr
