#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace gsr {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  std::vector<double> values;
};

/// Vertex properties stored column-wise plus triangle faces. Polygons with
/// more than three corners are fan-triangulated on read.
struct PlyData {
  std::vector<PlyProperty> vertex;
  std::vector<std::array<int, 3>> faces;

  std::size_t vertex_count() const { return vertex.empty() ? 0 : vertex.front().values.size(); }
  const PlyProperty* find(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;  // throws ParseError
  void add(std::string name, PlyType type, std::vector<double> values);
};

PlyData read_ply(const std::filesystem::path& path);

void write_ply(const std::filesystem::path& path, const PlyData& data, bool binary = true);

}  // namespace gsr
