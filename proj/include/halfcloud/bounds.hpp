#pragma once

// Executable checks of the nearest-neighbor distance bound and the grid
// density bounds of half-structured clouds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/merge.hpp"
#include "halfcloud/parallel.hpp"
#include "halfcloud/spatial_index.hpp"

namespace halfcloud {

/// Where the worst case sits: point indices for distance checks, lattice
/// coordinates (cell or vertex) for density checks.
struct WorstCase {
  std::vector<std::int64_t> location;
  double measured = 0.0;
  double allowed = 0.0;
};

struct CaseReport {
  std::string name;
  double allowed = 0.0;
  std::size_t checked = 0;
  std::size_t violations = 0;
  /// Largest measured - allowed among checked items.
  std::optional<WorstCase> worst;
};

struct BoundReport {
  std::string bound_name;
  bool holds = true;
  std::size_t violations = 0;
  std::optional<WorstCase> worst;
  std::vector<CaseReport> cases;
};

namespace detail {

inline void record(CaseReport& c, WorstCase w) {
  ++c.checked;
  if (w.measured > w.allowed) ++c.violations;
  if (!c.worst || w.measured - w.allowed > c.worst->measured - c.worst->allowed) c.worst = std::move(w);
}

inline void finalize(BoundReport& report) {
  report.violations = 0;
  report.worst.reset();
  for (const auto& c : report.cases) {
    report.violations += c.violations;
    if (c.worst && (!report.worst || c.worst->measured - c.worst->allowed >
                                         report.worst->measured - report.worst->allowed))
      report.worst = c.worst;
  }
  report.holds = report.violations == 0;
}

}  // namespace detail

struct DistanceBounds {
  double struct_struct;
  double un_un;
  double mixed;
};

/// Allowed nearest-neighbor distances per origin pair.
inline DistanceBounds distance_bounds(double d_struct, double d_un) {
  return {d_struct, d_struct + 2.0 * d_un, d_struct + d_un};
}

/// For each point A and its nearest other point B (ties to the lower index),
/// checks d(A, B) against the bound for the origin pair of (A, B).
inline BoundReport verify_distance_bound(const PointCloud& half, const std::vector<Origin>& origins, double d_struct,
                                         double d_un, unsigned threads = 0) {
  if (origins.size() != half.size()) throw Error("origin tags do not match point count");
  if (half.size() < 2) throw Error("need >= 2 points");
  if (!(d_struct > 0.0) || !(d_un > 0.0)) throw Error("d_struct and d_un must be positive");

  const DistanceBounds allowed = distance_bounds(d_struct, d_un);
  const SpatialIndex index(half);
  std::vector<Neighbor> nearest(half.size(), Neighbor{0, 0.0});
  parallel_for(half.size(), threads,
               [&](std::size_t i) { nearest[i] = *index.nearest_other(half.points[i].position, i); });

  BoundReport report;
  report.bound_name = "nearest_neighbor_distance";
  report.cases = {{"struct_struct", allowed.struct_struct, 0, 0, std::nullopt},
                  {"un_un", allowed.un_un, 0, 0, std::nullopt},
                  {"mixed", allowed.mixed, 0, 0, std::nullopt}};
  for (std::size_t i = 0; i < half.size(); ++i) {
    const std::size_t j = nearest[i].index;
    std::size_t which = 2;
    if (origins[i] == Origin::Structured && origins[j] == Origin::Structured)
      which = 0;
    else if (origins[i] == Origin::Unstructured && origins[j] == Origin::Unstructured)
      which = 1;
    detail::record(report.cases[which], WorstCase{{static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)},
                                                  nearest[i].distance,
                                                  report.cases[which].allowed});
  }
  detail::finalize(report);
  return report;
}

/// Largest number of points one grid cell may hold: 12 * k.
inline std::size_t max_points_per_cell(std::size_t k) { return 12 * k; }

/// Largest number of points a cube of width w may hold: 12 * k * ceil(w/h + 1)^3.
inline std::size_t max_points_per_cube(std::size_t k, double w, double h) {
  const auto side = static_cast<std::size_t>(std::ceil(w / h + 1.0));
  return 12 * k * side * side * side;
}

/// Counts points per grid cell and per cube of width w anchored at each grid
/// vertex, against 12k and 12k * ceil(w/h + 1)^3.
///
/// Lattice coordinates are u = (x - origin) / h. A point belongs to cell i
/// when i <= u < i + 1 on every axis and to the cube at vertex i when
/// i <= u < i + w/h, so boundary points go to the lower index. Cells are
/// unbounded (points off the grid still count); cubes are anchored only at
/// the (dims + 1)^3 grid vertices.
inline BoundReport verify_density_bound(const PointCloud& half, const GridSpec& grid, std::size_t k, double w) {
  grid.validate();
  if (k < 1) throw Error("k must be >= 1");
  if (!(w > 0.0)) throw Error("probe width must be positive");

  const double h = grid.spacing;
  const double wh = w / h;
  const auto cell_limit = static_cast<double>(max_points_per_cell(k));
  const auto cube_limit = static_cast<double>(max_points_per_cube(k, w, h));

  std::map<std::array<std::int64_t, 3>, std::size_t> cells;
  const std::array<std::int64_t, 3> verts{grid.dims[0] + 1, grid.dims[1] + 1, grid.dims[2] + 1};
  std::vector<std::uint32_t> cubes(static_cast<std::size_t>(verts[0] * verts[1] * verts[2]), 0);

  for (const auto& p : half.points) {
    std::array<std::int64_t, 3> cell{};
    std::array<std::int64_t, 3> lo{};
    std::array<std::int64_t, 3> hi{};
    bool any_cube = true;
    for (std::size_t a = 0; a < 3; ++a) {
      const double u = (p.position[a] - grid.origin[a]) / h;
      cell[a] = static_cast<std::int64_t>(std::floor(u));
      // Vertices i with i <= u < i + w/h.
      std::int64_t first = static_cast<std::int64_t>(std::floor(u - wh)) + 1;
      while (static_cast<double>(first - 1) + wh > u) --first;
      while (static_cast<double>(first) + wh <= u) ++first;
      lo[a] = std::max<std::int64_t>(first, 0);
      hi[a] = std::min<std::int64_t>(cell[a], verts[a] - 1);
      if (lo[a] > hi[a]) any_cube = false;
    }
    ++cells[cell];
    if (!any_cube) continue;
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
          ++cubes[static_cast<std::size_t>((z * verts[1] + y) * verts[0] + x)];
  }

  BoundReport report;
  report.bound_name = "density";
  CaseReport cell_case{"cell", cell_limit, 0, 0, std::nullopt};
  for (const auto& [coord, count] : cells)
    detail::record(cell_case, WorstCase{{coord[0], coord[1], coord[2]}, static_cast<double>(count), cell_limit});

  CaseReport cube_case{"cube", cube_limit, 0, 0, std::nullopt};
  for (std::int64_t z = 0; z < verts[2]; ++z)
    for (std::int64_t y = 0; y < verts[1]; ++y)
      for (std::int64_t x = 0; x < verts[0]; ++x) {
        const auto count = cubes[static_cast<std::size_t>((z * verts[1] + y) * verts[0] + x)];
        if (count == 0) continue;
        detail::record(cube_case, WorstCase{{x, y, z}, static_cast<double>(count), cube_limit});
      }
  // Empty inputs: the densest cell / cube holds zero points.
  if (!cell_case.worst) cell_case.worst = WorstCase{{}, 0.0, cell_limit};
  if (!cube_case.worst) cube_case.worst = WorstCase{{}, 0.0, cube_limit};

  report.cases = {std::move(cell_case), std::move(cube_case)};
  detail::finalize(report);
  return report;
}

}  // namespace halfcloud
