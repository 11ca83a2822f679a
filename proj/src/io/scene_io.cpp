#include "gsr/scene_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gsr/ply.hpp"

namespace gsr {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

struct CameraEntry {
  CameraIntrinsics intrinsics;
};

std::unordered_map<int, CameraEntry> read_cameras(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::unordered_map<int, CameraEntry> cameras;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int id = 0;
    std::string model;
    int width = 0;
    int height = 0;
    if (!(ls >> id >> model >> width >> height)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed camera line");
    }
    std::vector<double> params;
    for (double p; ls >> p;) params.push_back(p);

    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    if (model == "PINHOLE") {
      if (params.size() != 4) throw ParseError(path.string() + ": PINHOLE needs 4 parameters");
      k.fx = params[0];
      k.fy = params[1];
      k.cx = params[2];
      k.cy = params[3];
    } else if (model == "SIMPLE_PINHOLE") {
      if (params.size() != 3) throw ParseError(path.string() + ": SIMPLE_PINHOLE needs 3 parameters");
      k.fx = k.fy = params[0];
      k.cx = params[1];
      k.cy = params[2];
    } else {
      throw UnsupportedModelError("unsupported camera model '" + model + "' in " + path.string() +
                                  " (only PINHOLE and SIMPLE_PINHOLE)");
    }
    if (!k.valid()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid intrinsics");
    }
    cameras[id] = {k};
  }
  return cameras;
}

}  // namespace

int SceneBundle::view_index(int view_id) const {
  if (view_lookup_.size() != views.size()) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (views[i].view_id == view_id) return static_cast<int>(i);
    }
    return -1;
  }
  const auto it = view_lookup_.find(view_id);
  return it == view_lookup_.end() ? -1 : it->second;
}

const ViewRecord& SceneBundle::view(int view_id) const {
  const int idx = view_index(view_id);
  if (idx < 0) throw Error("unknown view id " + std::to_string(view_id));
  return views[idx];
}

void SceneBundle::rebuild_index() {
  view_lookup_.clear();
  for (std::size_t i = 0; i < views.size(); ++i) view_lookup_[views[i].view_id] = static_cast<int>(i);
}

Mat3 quaternion_to_rotation(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n == 0.0) throw ParseError("zero quaternion");
  return Eigen::Quaterniond(w / n, x / n, y / n, z / n).toRotationMatrix();
}

Vec4 rotation_to_quaternion(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0) out = -out;
  return out;
}

SceneBundle load_sparse_model(const std::filesystem::path& dir) {
  const auto cameras = read_cameras(dir / "cameras.txt");

  SceneBundle scene;
  {
    const auto path = dir / "images.txt";
    auto in = open_or_throw(path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      ViewRecord view;
      double qw, qx, qy, qz, tx, ty, tz;
      int camera_id = 0;
      if (!(ls >> view.view_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id)) {
        throw ParseError(path.string() + ": malformed image line '" + line + "'");
      }
      std::getline(ls >> std::ws, view.name);
      view.name = trim(view.name);
      const auto cam = cameras.find(camera_id);
      if (cam == cameras.end()) {
        throw ParseError(path.string() + ": image " + std::to_string(view.view_id) +
                         " references unknown camera " + std::to_string(camera_id));
      }
      view.intrinsics = cam->second.intrinsics;
      view.rotation = quaternion_to_rotation(qw, qx, qy, qz);
      view.center = -view.rotation.transpose() * Vec3(tx, ty, tz);
      scene.views.push_back(std::move(view));
      std::getline(in, line);  // POINTS2D row, unused
    }
  }
  scene.rebuild_index();

  {
    const auto path = dir / "points3D.txt";
    auto in = open_or_throw(path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      SparsePoint p;
      int r, g, b;
      if (!(ls >> p.point_id >> p.xyz.x() >> p.xyz.y() >> p.xyz.z() >> r >> g >> b >> p.error)) {
        throw ParseError(path.string() + ": malformed point line '" + line + "'");
      }
      p.color = Vec3(r, g, b) / 255.0;
      int image_id, point2d_idx;
      while (ls >> image_id >> point2d_idx) {
        if (scene.view_index(image_id) < 0) {
          throw ParseError(path.string() + ": point " + std::to_string(p.point_id) +
                           " track references unknown image " + std::to_string(image_id));
        }
        p.track.push_back(image_id);
      }
      if (p.track.empty()) {
        throw ParseError(path.string() + ": point " + std::to_string(p.point_id) + " has an empty track");
      }
      if (!p.xyz.allFinite()) {
        throw ParseError(path.string() + ": point " + std::to_string(p.point_id) + " is not finite");
      }
      scene.points.push_back(std::move(p));
    }
  }
  return scene;
}

void write_sparse_model(const SceneBundle& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int digits = std::numeric_limits<double>::max_digits10;

  std::ofstream cams(dir / "cameras.txt");
  std::ofstream imgs(dir / "images.txt");
  std::ofstream pts(dir / "points3D.txt");
  if (!cams || !imgs || !pts) throw Error("cannot write sparse model to " + dir.string());
  cams.precision(digits);
  imgs.precision(digits);
  pts.precision(digits);

  cams << "# Camera list with one line of data per camera:\n"
       << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  imgs << "# Image list with two lines of data per image:\n"
       << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
       << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
  pts << "# 3D point list with one line of data per point:\n"
      << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";

  // One camera per view keeps the mapping trivial.
  for (const auto& v : scene.views) {
    const auto& k = v.intrinsics;
    cams << v.view_id << " PINHOLE " << k.width << ' ' << k.height << ' ' << k.fx << ' ' << k.fy
         << ' ' << k.cx << ' ' << k.cy << '\n';
    const Vec4 q = rotation_to_quaternion(v.rotation);
    const Vec3 t = -v.rotation * v.center;
    imgs << v.view_id << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << t.x()
         << ' ' << t.y() << ' ' << t.z() << ' ' << v.view_id << ' ' << v.name << "\n\n";
  }
  for (const auto& p : scene.points) {
    const Vec3 c = (p.color * 255.0).array().round().max(0.0).min(255.0);
    pts << p.point_id << ' ' << p.xyz.x() << ' ' << p.xyz.y() << ' ' << p.xyz.z() << ' '
        << static_cast<int>(c.x()) << ' ' << static_cast<int>(c.y()) << ' ' << static_cast<int>(c.z())
        << ' ' << p.error;
    for (std::size_t i = 0; i < p.track.size(); ++i) pts << ' ' << p.track[i] << ' ' << i;
    pts << '\n';
  }
}

SceneBundle load_scene(const std::filesystem::path& root) {
  std::filesystem::path sparse = root;
  for (const auto& candidate : {root / "sparse" / "0", root / "sparse", root}) {
    if (std::filesystem::exists(candidate / "cameras.txt")) {
      sparse = candidate;
      break;
    }
  }
  SceneBundle scene = load_sparse_model(sparse);
  for (auto& v : scene.views) {
    const auto stem = std::filesystem::path(v.name).stem().string() + ".png";
    v.image_path = root / "images" / v.name;
    v.mask_path = root / "masks" / stem;
    v.segment_path = root / "segments" / stem;
  }
  return scene;
}

Projection project_point(const Vec3& xyz, const ViewRecord& view) {
  const Vec3 c = view.rotation * (xyz - view.center);
  const auto& k = view.intrinsics;
  return {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy, c.z()};
}

std::optional<PixelIndex> projection_pixel(const Projection& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0) || !std::isfinite(p.u) || !std::isfinite(p.v)) return std::nullopt;
  const double fx = std::ceil(p.u - 0.5);
  const double fy = std::ceil(p.v - 0.5);
  if (fx < 0 || fy < 0 || fx >= k.width || fy >= k.height) return std::nullopt;
  return PixelIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

std::vector<Vec3> read_point_cloud(const std::filesystem::path& path) {
  const PlyData ply = read_ply(path);
  const auto& x = ply.column("x");
  const auto& y = ply.column("y");
  const auto& z = ply.column("z");
  std::vector<Vec3> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Vec3(x[i], y[i], z[i]);
  return out;
}

void write_point_cloud(const std::filesystem::path& path, const std::vector<Vec3>& points) {
  PlyData ply;
  std::vector<double> x(points.size()), y(points.size()), z(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    x[i] = points[i].x();
    y[i] = points[i].y();
    z[i] = points[i].z();
  }
  ply.add("x", PlyType::Float64, std::move(x));
  ply.add("y", PlyType::Float64, std::move(y));
  ply.add("z", PlyType::Float64, std::move(z));
  write_ply(path, ply);
}

}  // namespace gsr
