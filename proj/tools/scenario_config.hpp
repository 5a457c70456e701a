#pragma once

// Scenario files: one `key = value` per line, '#' starts a comment.
//
//   shape = slotted_box          # required, one of the builtin shapes
//   grid.h = 0.05                # default 0.05
//   grid.origin = -1.49, -1.49, -1.49
//   grid.dims = 60               # one value or three
//   views = 0,0,-1; 0.5,0,-1     # camera directions, ';' separated
//   samples = 30000
//   seed = 7
//   outliers.count = 0
//   outliers.spread = 0.5        # required when outliers.count > 0
//
// grid.origin defaults to the shape's domain minimum and grid.dims to enough
// cells to cover the domain.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/implicit.hpp"
#include "halfcloud/io.hpp"
#include "halfcloud/vec3.hpp"

namespace halfcloud::cli {

struct Scenario {
  std::string shape;
  GridSpec grid;
  std::vector<Vec3> views{{0, 0, -1}};
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::size_t outlier_count = 0;
  double outlier_spread = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(halfcloud::detail::trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Numbers separated by commas and/or whitespace.
inline std::vector<double> parse_numbers(std::string_view s) {
  std::string text(s);
  for (auto& c : text)
    if (c == ',') c = ' ';
  std::vector<double> out;
  for (auto tok : halfcloud::detail::split_ws(text)) {
    auto v = halfcloud::detail::parse_double(tok);
    if (!v) throw Error("not a number: '" + std::string(tok) + "'");
    out.push_back(*v);
  }
  return out;
}

inline Vec3 parse_vec3(std::string_view s) {
  const auto v = parse_numbers(s);
  if (v.size() != 3) throw Error("expected three numbers, got " + std::to_string(v.size()));
  return {v[0], v[1], v[2]};
}

inline std::uint64_t parse_unsigned(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw Error("not a non-negative integer: '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view text, const std::string& where) {
  static const std::set<std::string, std::less<>> kKeys = {
      "shape", "grid.h", "grid.origin", "grid.dims", "views", "samples", "seed", "outliers.count", "outliers.spread"};
  std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> entries;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = halfcloud::detail::trim(line);
    if (line.empty()) continue;
    const auto anchor = where + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(anchor + "expected 'key = value'");
    const std::string key(halfcloud::detail::trim(line.substr(0, eq)));
    const std::string value(halfcloud::detail::trim(line.substr(eq + 1)));
    if (!kKeys.contains(key)) throw Error(anchor + "unknown key '" + key + "'");
    if (entries.contains(key)) throw Error(anchor + "duplicate key '" + key + "'");
    if (value.empty()) throw Error(anchor + "empty value for '" + key + "'");
    entries[key] = {value, line_no};
  }

  const auto at = [&](const std::string& key) { return where + ":" + std::to_string(entries.at(key).second) + ": "; };
  const auto with_line = [&](const std::string& key, auto&& parse) {
    try {
      return parse(std::string_view(entries.at(key).first));
    } catch (const Error& e) {
      throw Error(at(key) + key + ": " + e.what());
    }
  };

  Scenario sc;
  if (!entries.contains("shape")) throw Error(where + ": missing required key 'shape'");
  sc.shape = entries.at("shape").first;
  const ImplicitSurface surface = with_line("shape", [](std::string_view s) { return builtin_shape(std::string(s)); });

  double h = 0.05;
  if (entries.contains("grid.h")) {
    h = with_line("grid.h", [](std::string_view s) {
      const auto v = detail::parse_numbers(s);
      if (v.size() != 1 || !(v[0] > 0.0) || !std::isfinite(v[0])) throw Error("must be one positive number");
      return v[0];
    });
  }
  const BoundingBox dom = surface.domain();
  sc.grid.spacing = h;
  sc.grid.origin = entries.contains("grid.origin") ? with_line("grid.origin", detail::parse_vec3) : dom.min;
  if (entries.contains("grid.dims")) {
    sc.grid.dims = with_line("grid.dims", [](std::string_view s) {
      const auto v = detail::parse_numbers(s);
      if (v.size() != 1 && v.size() != 3) throw Error("expected one or three integers");
      std::array<std::int64_t, 3> d{};
      for (std::size_t a = 0; a < 3; ++a) {
        const double x = v[v.size() == 1 ? 0 : a];
        if (x != std::floor(x) || x < 1 || x > 1e5) throw Error("dimensions must be integers in [1, 100000]");
        d[a] = static_cast<std::int64_t>(x);
      }
      return d;
    });
  } else {
    for (std::size_t a = 0; a < 3; ++a)
      sc.grid.dims[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((dom.max[a] - sc.grid.origin[a]) / h)));
  }
  if (entries.contains("views")) {
    sc.views = with_line("views", [](std::string_view s) {
      std::vector<Vec3> views;
      for (auto part : detail::split(s, ';')) {
        if (part.empty()) continue;
        const Vec3 v = detail::parse_vec3(part);
        if (norm(v) == 0.0) throw Error("view direction must be non-zero");
        views.push_back(v);
      }
      if (views.empty()) throw Error("at least one view direction required");
      return views;
    });
  }
  if (entries.contains("samples")) sc.samples = with_line("samples", detail::parse_unsigned);
  if (entries.contains("seed")) sc.seed = with_line("seed", detail::parse_unsigned);
  if (entries.contains("outliers.count")) sc.outlier_count = with_line("outliers.count", detail::parse_unsigned);
  if (entries.contains("outliers.spread")) {
    sc.outlier_spread = with_line("outliers.spread", [](std::string_view s) {
      const auto v = detail::parse_numbers(s);
      if (v.size() != 1 || !(v[0] > 0.0)) throw Error("must be one positive number");
      return v[0];
    });
  }
  if (sc.outlier_count > 0 && !entries.contains("outliers.spread"))
    throw Error(where + ": missing required key 'outliers.spread' (outliers.count > 0)");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(halfcloud::detail::read_file(path), path.string());
}

}  // namespace halfcloud::cli
