#pragma once

// Oriented point cloud files.
//
// PLY: "format ascii 1.0" or "format binary_little_endian 1.0", a single
// `element vertex N` with exactly the properties x y z nx ny nz, each float
// (float32) or double (float64). Writers emit float64. Two optional header
// comments carry metadata:
//   comment halfcloud source <structured|unstructured|half_structured>
//   comment halfcloud grid <ox> <oy> <oz> <spacing> <nx> <ny> <nz>
//
// XYZN: one point per line, "x y z nx ny nz", whitespace separated. Blank
// lines and lines starting with '#' are skipped. LF or CRLF on input.

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"

namespace halfcloud {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

enum class FileFormat { PlyAscii, PlyBinaryLittleEndian, XyzText };

/// Tolerance within which stored normals are accepted and re-normalized.
inline constexpr double kReadNormalTolerance = 1e-3;

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("read failure on '" + path.string() + "'");
  return data;
}

/// Accepts normals within kReadNormalTolerance of unit length. Normals already
/// within kUnitNormalTolerance are kept bit-for-bit; the rest are rescaled.
inline void finish_point(OrientedPoint& p, std::size_t index) {
  if (!is_finite(p.position) || !is_finite(p.normal))
    throw Error("non-finite value at index " + std::to_string(index));
  const double n = norm(p.normal);
  if (std::abs(n - 1.0) > kReadNormalTolerance) throw Error("non-unit normal at index " + std::to_string(index));
  if (std::abs(n - 1.0) > kUnitNormalTolerance) p.normal = p.normal / n;
}

struct PlyHeader {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<bool> is_double;  // per property, in x y z nx ny nz order
  std::optional<CloudSource> source;
  std::optional<GridSpec> grid;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;
};

inline PlyHeader parse_ply_header(std::string_view data) {
  PlyHeader header;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_format = false;
  bool saw_vertex = false;
  std::vector<std::string> names;

  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= data.size()) return std::nullopt;
    const std::size_t nl = data.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? data.size() : nl;
    std::string_view line = data.substr(pos, end - pos);
    pos = nl == std::string_view::npos ? data.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  auto fail = [&](const std::string& what) -> Error {
    return Error("parse error at line " + std::to_string(line_no) + ": " + what);
  };

  auto first = next_line();
  if (!first || trim(*first) != "ply") throw Error("parse error at line 1: missing 'ply' magic");

  while (true) {
    auto line = next_line();
    if (!line) throw fail("header not terminated by end_header");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok.size() >= 3 && tok[0] == "comment" && tok[1] == "halfcloud") {
        if (tok[2] == "source" && tok.size() == 4) {
          header.source = parse_source(tok[3]);
          if (!header.source) throw fail("unknown source tag");
        } else if (tok[2] == "grid" && tok.size() == 10) {
          GridSpec g;
          double vals[4];
          for (int i = 0; i < 4; ++i) {
            auto v = parse_double(tok[3 + i]);
            if (!v) throw fail("bad grid comment");
            vals[i] = *v;
          }
          g.origin = {vals[0], vals[1], vals[2]};
          g.spacing = vals[3];
          for (int i = 0; i < 3; ++i) {
            auto d = parse_int<std::int64_t>(tok[7 + i]);
            if (!d) throw fail("bad grid comment");
            g.dims[i] = *d;
          }
          try {
            g.validate();
          } catch (const Error& e) {
            throw fail(e.what());
          }
          header.grid = g;
        }
      }
      continue;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[2] != "1.0") throw fail("unsupported format line");
      if (tok[1] == "ascii")
        header.binary = false;
      else if (tok[1] == "binary_little_endian")
        header.binary = true;
      else
        throw fail("unsupported format '" + std::string(tok[1]) + "'");
      saw_format = true;
      continue;
    }
    if (tok[0] == "element") {
      if (tok.size() != 3) throw fail("malformed element line");
      if (tok[1] != "vertex" || saw_vertex) throw fail("unsupported element '" + std::string(tok[1]) + "'");
      auto count = parse_int<std::size_t>(tok[2]);
      if (!count) throw fail("bad vertex count");
      header.vertex_count = *count;
      saw_vertex = true;
      continue;
    }
    if (tok[0] == "property") {
      if (!saw_vertex) throw fail("property before element");
      if (tok.size() != 3) throw fail("unsupported property declaration");
      const auto type = tok[1];
      if (type == "float" || type == "float32")
        header.is_double.push_back(false);
      else if (type == "double" || type == "float64")
        header.is_double.push_back(true);
      else
        throw fail("unsupported property type '" + std::string(type) + "'");
      names.emplace_back(tok[2]);
      continue;
    }
    throw fail("unknown header keyword '" + std::string(tok[0]) + "'");
  }
  if (!saw_format) throw Error("parse error at line " + std::to_string(line_no) + ": missing format line");
  if (!saw_vertex) throw Error("parse error at line " + std::to_string(line_no) + ": missing element vertex");

  static const std::vector<std::string> kPositions{"x", "y", "z"};
  static const std::vector<std::string> kAll{"x", "y", "z", "nx", "ny", "nz"};
  if (names == kPositions) throw Error("normals required");
  if (names != kAll) {
    const bool has_normals = std::find(names.begin(), names.end(), "nx") != names.end();
    if (!has_normals) throw Error("normals required");
    throw Error("parse error at line " + std::to_string(line_no) + ": properties must be exactly x y z nx ny nz");
  }
  header.body_offset = pos;
  header.body_line = line_no;
  return header;
}

inline PointCloud read_ply(std::string_view data) {
  const PlyHeader header = parse_ply_header(data);
  PointCloud cloud;
  cloud.grid = header.grid;
  if (header.source) cloud.source = *header.source;
  cloud.points.reserve(header.vertex_count);
  std::string_view body = data.substr(header.body_offset);

  if (header.binary) {
    std::size_t record = 0;
    for (bool d : header.is_double) record += d ? 8 : 4;
    const std::size_t expected = header.vertex_count * record;
    if (body.size() != expected)
      throw Error("parse error at byte " + std::to_string(header.body_offset + std::min(body.size(), expected)) +
                  ": record count disagrees with header");
    const char* cursor = body.data();
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
      double v[6];
      for (std::size_t c = 0; c < 6; ++c) {
        if (header.is_double[c]) {
          std::memcpy(&v[c], cursor, 8);
          cursor += 8;
        } else {
          float f;
          std::memcpy(&f, cursor, 4);
          v[c] = f;
          cursor += 4;
        }
      }
      OrientedPoint p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
      finish_point(p, i);
      cloud.points.push_back(p);
    }
    return cloud;
  }

  std::size_t line_no = header.body_line;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t nl = body.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? body.size() : nl;
    std::string_view line = body.substr(pos, end - pos);
    pos = nl == std::string_view::npos ? body.size() : nl + 1;
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (cloud.points.size() == header.vertex_count)
      throw Error("parse error at line " + std::to_string(line_no) + ": more records than header declares");
    if (tok.size() != 6) throw Error("parse error at line " + std::to_string(line_no) + ": expected 6 values");
    double v[6];
    for (std::size_t c = 0; c < 6; ++c) {
      auto parsed = parse_double(tok[c]);
      if (!parsed) throw Error("parse error at line " + std::to_string(line_no) + ": bad number");
      v[c] = header.is_double[c] ? *parsed : static_cast<double>(static_cast<float>(*parsed));
    }
    OrientedPoint p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
    finish_point(p, cloud.points.size());
    cloud.points.push_back(p);
  }
  if (cloud.points.size() != header.vertex_count)
    throw Error("parse error at line " + std::to_string(line_no) + ": fewer records than header declares");
  return cloud;
}

inline PointCloud read_xyzn(std::string_view data) {
  PointCloud cloud;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? data.size() : nl;
    std::string_view line = data.substr(pos, end - pos);
    pos = nl == std::string_view::npos ? data.size() : nl + 1;
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tok = split_ws(t);
    if (tok.size() == 3) throw Error("normals required");
    if (tok.size() != 6) throw Error("parse error at line " + std::to_string(line_no) + ": expected 6 values");
    double v[6];
    for (std::size_t c = 0; c < 6; ++c) {
      auto parsed = parse_double(tok[c]);
      if (!parsed) throw Error("parse error at line " + std::to_string(line_no) + ": bad number");
      v[c] = *parsed;
    }
    OrientedPoint p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
    finish_point(p, cloud.points.size());
    cloud.points.push_back(p);
  }
  return cloud;
}

inline void append_raw(std::string& out, double v) {
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  out.append(bytes, 8);
}

}  // namespace detail

/// Parses file contents. PLY is recognized by its magic line; anything else
/// is read as XYZN.
inline PointCloud parse_cloud(std::string_view data) {
  if (data.substr(0, 3) == "ply" && (data.size() == 3 || data[3] == '\n' || data[3] == '\r'))
    return detail::read_ply(data);
  return detail::read_xyzn(data);
}

/// Reads a cloud and tags it with `expected_source`. Grid metadata stored in a
/// PLY header is kept only for structured clouds.
inline PointCloud read_cloud(const std::filesystem::path& path, CloudSource expected_source) {
  const std::string data = detail::read_file(path);
  PointCloud cloud;
  try {
    cloud = parse_cloud(data);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  cloud.source = expected_source;
  if (expected_source != CloudSource::Structured) cloud.grid.reset();
  return cloud;
}

inline std::string serialize_cloud(const PointCloud& cloud, FileFormat format) {
  if (auto bad = validate_cloud(cloud); !bad.empty())
    throw Error("invalid point at index " + std::to_string(bad.front().index) + ": " +
                std::string(to_string(bad.front().kind)));
  std::string out;
  if (format == FileFormat::XyzText) {
    out += "# halfcloud source ";
    out += to_string(cloud.source);
    out += "\n";
    for (const auto& p : cloud.points) {
      const double v[6] = {p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z};
      for (int c = 0; c < 6; ++c) {
        if (c) out += ' ';
        out += detail::format_double(v[c]);
      }
      out += '\n';
    }
    return out;
  }

  const bool binary = format == FileFormat::PlyBinaryLittleEndian;
  out += "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  out += "comment halfcloud source ";
  out += to_string(cloud.source);
  out += "\n";
  if (cloud.grid) {
    const auto& g = *cloud.grid;
    out += "comment halfcloud grid " + detail::format_double(g.origin.x) + " " + detail::format_double(g.origin.y) +
           " " + detail::format_double(g.origin.z) + " " + detail::format_double(g.spacing) + " " +
           std::to_string(g.dims[0]) + " " + std::to_string(g.dims[1]) + " " + std::to_string(g.dims[2]) + "\n";
  }
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz"}) out += std::string("property double ") + name + "\n";
  out += "end_header\n";
  if (binary) {
    out.reserve(out.size() + cloud.size() * 48);
    for (const auto& p : cloud.points) {
      for (double v : {p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z})
        detail::append_raw(out, v);
    }
  } else {
    for (const auto& p : cloud.points) {
      const double v[6] = {p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y, p.normal.z};
      for (int c = 0; c < 6; ++c) {
        if (c) out += ' ';
        out += detail::format_double(v[c]);
      }
      out += '\n';
    }
  }
  return out;
}

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, FileFormat format) {
  const std::string data = serialize_cloud(cloud, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error("write failure on '" + path.string() + "'");
}

/// Format implied by a file extension: .xyzn/.xyz/.txt are text, .ply is
/// binary unless `ascii_ply` is set.
inline FileFormat format_for_path(const std::filesystem::path& path, bool ascii_ply = false) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".xyzn" || ext == ".xyz" || ext == ".txt") return FileFormat::XyzText;
  return ascii_ply ? FileFormat::PlyAscii : FileFormat::PlyBinaryLittleEndian;
}

}  // namespace halfcloud
