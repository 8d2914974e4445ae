#include "trajnerf/ply.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace trajnerf {
namespace {

void put_f32_le(std::string& buf, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  buf.push_back(static_cast<char>(u & 0xff));
  buf.push_back(static_cast<char>((u >> 8) & 0xff));
  buf.push_back(static_cast<char>((u >> 16) & 0xff));
  buf.push_back(static_cast<char>((u >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

struct PlyProperty {
  std::string name;
  std::string type;
  int byte_size = 0;
};

int property_byte_size(const std::string& type) {
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
  if (type == "int" || type == "int32" || type == "uint" || type == "uint32") return 4;
  if (type == "float" || type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

}  // namespace

void write_ply(const PointCloud& cloud, const std::string& path, bool ascii) {
  cloud.check_consistent();
  const std::size_t n = cloud.size();
  for (float v : cloud.positions) {
    if (!std::isfinite(v)) throw InvalidInputError("write_ply: non-finite coordinate");
  }
  const bool colored = cloud.has_colors();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "ply\n"
      << "format " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << n << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n";
  if (colored) {
    out << "property uchar red\n"
        << "property uchar green\n"
        << "property uchar blue\n";
  }
  out << "end_header\n";

  if (ascii) {
    std::ostringstream line;
    line.precision(9);  // shortest round-trip-safe float32 precision
    for (std::size_t i = 0; i < n; ++i) {
      line.str("");
      line << cloud.positions[3 * i] << " " << cloud.positions[3 * i + 1] << " "
           << cloud.positions[3 * i + 2];
      if (colored) {
        line << " " << static_cast<int>(cloud.colors[3 * i]) << " "
             << static_cast<int>(cloud.colors[3 * i + 1]) << " "
             << static_cast<int>(cloud.colors[3 * i + 2]);
      }
      out << line.str() << "\n";
    }
  } else {
    std::string buf;
    buf.reserve(n * (colored ? 15 : 12));
    for (std::size_t i = 0; i < n; ++i) {
      put_f32_le(buf, cloud.positions[3 * i]);
      put_f32_le(buf, cloud.positions[3 * i + 1]);
      put_f32_le(buf, cloud.positions[3 * i + 2]);
      if (colored) {
        buf.push_back(static_cast<char>(cloud.colors[3 * i]));
        buf.push_back(static_cast<char>(cloud.colors[3 * i + 1]));
        buf.push_back(static_cast<char>(cloud.colors[3 * i + 2]));
      }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

PointCloud parse_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError(path, 1, "not a PLY file");

  bool ascii = false;
  bool format_seen = false;
  std::size_t vertex_count = 0;
  bool in_vertex_element = false;
  bool vertex_seen = false;
  std::vector<PlyProperty> props;

  while (true) {
    if (!next_line()) throw ParseError(path, line_no, "unexpected end of header");
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt == "binary_little_endian") {
        ascii = false;
      } else {
        throw ParseError(path, line_no, "unsupported format: " + fmt);
      }
      format_seen = true;
    } else if (word == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (ss.fail() || count < 0) throw ParseError(path, line_no, "bad element line");
      if (name == "vertex") {
        if (vertex_seen) throw ParseError(path, line_no, "duplicate vertex element");
        vertex_seen = true;
        in_vertex_element = true;
        vertex_count = static_cast<std::size_t>(count);
      } else {
        if (in_vertex_element) in_vertex_element = false;
        if (!vertex_seen && count > 0) {
          throw ParseError(path, line_no, "non-vertex element before vertex data");
        }
      }
    } else if (word == "property") {
      if (!in_vertex_element) continue;  // properties of trailing elements
      PlyProperty p;
      ss >> p.type;
      if (p.type == "list") throw ParseError(path, line_no, "list property on vertex element");
      ss >> p.name;
      if (ss.fail() || p.name.empty()) throw ParseError(path, line_no, "bad property line");
      p.byte_size = property_byte_size(p.type);
      if (p.byte_size == 0) throw ParseError(path, line_no, "unknown property type: " + p.type);
      props.push_back(std::move(p));
    } else {
      throw ParseError(path, line_no, "unknown header keyword: " + word);
    }
  }
  if (!format_seen) throw ParseError(path, line_no, "missing format line");
  if (!vertex_seen) throw ParseError(path, line_no, "missing vertex element");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  int stride = 0;
  std::vector<int> offsets(props.size(), 0);
  for (std::size_t i = 0; i < props.size(); ++i) {
    offsets[i] = stride;
    stride += props[i].byte_size;
    const PlyProperty& p = props[i];
    auto expect = [&](const char* want_type_a, const char* want_type_b) {
      if (p.type != want_type_a && p.type != want_type_b) {
        throw ParseError(path, line_no, "property " + p.name + " has type " + p.type);
      }
    };
    if (p.name == "x") { expect("float", "float32"); ix = static_cast<int>(i); }
    else if (p.name == "y") { expect("float", "float32"); iy = static_cast<int>(i); }
    else if (p.name == "z") { expect("float", "float32"); iz = static_cast<int>(i); }
    else if (p.name == "red") { expect("uchar", "uint8"); ir = static_cast<int>(i); }
    else if (p.name == "green") { expect("uchar", "uint8"); ig = static_cast<int>(i); }
    else if (p.name == "blue") { expect("uchar", "uint8"); ib = static_cast<int>(i); }
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw ParseError(path, line_no, "vertex element lacks x/y/z properties");
  }
  const bool colored = ir >= 0 && ig >= 0 && ib >= 0;

  PointCloud cloud;
  cloud.positions.reserve(vertex_count * 3);
  if (colored) cloud.colors.reserve(vertex_count * 3);

  if (ascii) {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!next_line()) throw ParseError(path, line_no, "unexpected end of vertex data");
      std::istringstream ss(line);
      std::vector<double> vals(props.size());
      for (std::size_t i = 0; i < props.size(); ++i) {
        if (!(ss >> vals[i])) throw ParseError(path, line_no, "short vertex line");
      }
      cloud.positions.push_back(static_cast<float>(vals[ix]));
      cloud.positions.push_back(static_cast<float>(vals[iy]));
      cloud.positions.push_back(static_cast<float>(vals[iz]));
      if (colored) {
        for (int idx : {ir, ig, ib}) {
          const double c = vals[idx];
          if (c < 0 || c > 255) throw ParseError(path, line_no, "color out of range");
          cloud.colors.push_back(static_cast<std::uint8_t>(c));
        }
      }
    }
  } else {
    std::vector<unsigned char> rec(static_cast<std::size_t>(stride));
    for (std::size_t v = 0; v < vertex_count; ++v) {
      in.read(reinterpret_cast<char*>(rec.data()), stride);
      if (in.gcount() != stride) throw ParseError(path, line_no, "unexpected end of vertex data");
      cloud.positions.push_back(get_f32_le(rec.data() + offsets[ix]));
      cloud.positions.push_back(get_f32_le(rec.data() + offsets[iy]));
      cloud.positions.push_back(get_f32_le(rec.data() + offsets[iz]));
      if (colored) {
        cloud.colors.push_back(rec[static_cast<std::size_t>(offsets[ir])]);
        cloud.colors.push_back(rec[static_cast<std::size_t>(offsets[ig])]);
        cloud.colors.push_back(rec[static_cast<std::size_t>(offsets[ib])]);
      }
    }
  }
  return cloud;
}

}  // namespace trajnerf
