#include "gsr/ply.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gsr/types.hpp"

namespace gsr {
namespace {

PlyType parse_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw ParseError("unknown PLY property type '" + s + "'");
}

const char* type_name(PlyType t) {
  switch (t) {
    case PlyType::Int8: return "char";
    case PlyType::UInt8: return "uchar";
    case PlyType::Int16: return "short";
    case PlyType::UInt16: return "ushort";
    case PlyType::Int32: return "int";
    case PlyType::UInt32: return "uint";
    case PlyType::Float32: return "float";
    case PlyType::Float64: return "double";
  }
  return "float";
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 4;
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("unexpected end of binary PLY data");
  return v;
}

double read_binary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::Int8: return read_raw<std::int8_t>(in);
    case PlyType::UInt8: return read_raw<std::uint8_t>(in);
    case PlyType::Int16: return read_raw<std::int16_t>(in);
    case PlyType::UInt16: return read_raw<std::uint16_t>(in);
    case PlyType::Int32: return read_raw<std::int32_t>(in);
    case PlyType::UInt32: return read_raw<std::uint32_t>(in);
    case PlyType::Float32: return read_raw<float>(in);
    case PlyType::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_binary(std::ostream& out, PlyType t, double v) {
  switch (t) {
    case PlyType::Int8: write_raw(out, static_cast<std::int8_t>(v)); break;
    case PlyType::UInt8: write_raw(out, static_cast<std::uint8_t>(v)); break;
    case PlyType::Int16: write_raw(out, static_cast<std::int16_t>(v)); break;
    case PlyType::UInt16: write_raw(out, static_cast<std::uint16_t>(v)); break;
    case PlyType::Int32: write_raw(out, static_cast<std::int32_t>(v)); break;
    case PlyType::UInt32: write_raw(out, static_cast<std::uint32_t>(v)); break;
    case PlyType::Float32: write_raw(out, static_cast<float>(v)); break;
    case PlyType::Float64: write_raw(out, v); break;
  }
}

struct PropertyDecl {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::vector<PropertyDecl> props;
};

bool is_face_index_list(const PropertyDecl& p) {
  return p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index");
}

}  // namespace

const PlyProperty* PlyData::find(const std::string& name) const {
  for (const auto& p : vertex) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const std::vector<double>& PlyData::column(const std::string& name) const {
  const PlyProperty* p = find(name);
  if (!p) throw ParseError("PLY vertex property '" + name + "' not found");
  return p->values;
}

void PlyData::add(std::string name, PlyType type, std::vector<double> values) {
  if (!vertex.empty() && values.size() != vertex.front().values.size()) {
    throw Error("PLY column '" + name + "' has mismatched length");
  }
  vertex.push_back({std::move(name), type, std::move(values)});
}

PlyData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PLY file " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw ParseError("not a PLY file: " + path.string());

  bool binary = false;
  std::vector<ElementDecl> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw ParseError("unsupported PLY format '" + fmt + "' in " + path.string());
      }
    } else if (key == "element") {
      ElementDecl e;
      ls >> e.name >> e.count;
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty()) throw ParseError("PLY property before element in " + path.string());
      PropertyDecl p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, vt;
        ls >> ct >> vt >> p.name;
        p.is_list = true;
        p.count_type = parse_type(ct);
        p.type = parse_type(vt);
      } else {
        p.type = parse_type(t);
        ls >> p.name;
      }
      elements.back().props.push_back(std::move(p));
    } else if (key == "end_header") {
      break;
    }
  }

  PlyData data;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    std::vector<std::vector<double>> cols;
    if (is_vertex) {
      for (const auto& p : e.props) {
        if (!p.is_list) data.vertex.push_back({p.name, p.type, std::vector<double>(e.count)});
      }
    }
    for (std::size_t i = 0; i < e.count; ++i) {
      std::istringstream ascii_line;
      if (!binary) {
        if (!std::getline(in, line)) throw ParseError("truncated ASCII PLY " + path.string());
        ascii_line.str(line);
      }
      auto next = [&](PlyType t) -> double {
        if (binary) return read_binary(in, t);
        double v;
        if (!(ascii_line >> v)) throw ParseError("malformed ASCII PLY row in " + path.string());
        return v;
      };
      std::size_t col = 0;
      for (const auto& p : e.props) {
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(next(p.count_type));
          std::vector<int> idx(n);
          for (std::size_t k = 0; k < n; ++k) idx[k] = static_cast<int>(next(p.type));
          if (is_face && is_face_index_list(p)) {
            for (std::size_t k = 1; k + 1 < n; ++k) data.faces.push_back({idx[0], idx[k], idx[k + 1]});
          }
        } else {
          const double v = next(p.type);
          if (is_vertex) data.vertex[col++].values[i] = v;
        }
      }
    }
  }
  return data;
}

void write_ply(const std::filesystem::path& path, const PlyData& data, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write PLY file " + path.string());

  const std::size_t n = data.vertex_count();
  out << "ply\n" << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << n << "\n";
  for (const auto& p : data.vertex) out << "property " << type_name(p.type) << " " << p.name << "\n";
  if (!data.faces.empty()) {
    out << "element face " << data.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
  }
  out << "end_header\n";

  if (binary) {
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& p : data.vertex) write_binary(out, p.type, p.values[i]);
    }
    for (const auto& f : data.faces) {
      write_raw(out, std::uint8_t{3});
      for (int k : f) write_raw(out, static_cast<std::int32_t>(k));
    }
  } else {
    out.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < data.vertex.size(); ++c) {
        if (c) out << ' ';
        out << data.vertex[c].values[i];
      }
      out << '\n';
    }
    for (const auto& f : data.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
  if (!out) throw Error("failed writing PLY file " + path.string());
}

}  // namespace gsr
