#pragma once

// Synthetic structured / unstructured cloud pairs from implicit surfaces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/implicit.hpp"
#include "halfcloud/parallel.hpp"
#include "halfcloud/vec3.hpp"

namespace halfcloud {

/// Marching-cubes vertex placement: one point per lattice edge whose endpoint
/// values differ in sign (negative vs non-negative), at the linear zero
/// crossing, with the normalized field gradient as normal. Edges are visited
/// in lattice order (z, y, x, then axis), so each shared edge yields one point.
inline PointCloud sample_structured(const ImplicitSurface& surface, const GridSpec& grid, unsigned threads = 0) {
  grid.validate();
  const std::int64_t nx = grid.dims[0] + 1;
  const std::int64_t ny = grid.dims[1] + 1;
  const std::int64_t nz = grid.dims[2] + 1;
  const auto vid = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return static_cast<std::size_t>((k * ny + j) * nx + i);
  };

  std::vector<double> values(static_cast<std::size_t>(nx * ny * nz));
  parallel_for(static_cast<std::size_t>(nz), threads, [&](std::size_t kk) {
    const auto k = static_cast<std::int64_t>(kk);
    for (std::int64_t j = 0; j < ny; ++j)
      for (std::int64_t i = 0; i < nx; ++i) values[vid(i, j, k)] = surface.value(grid.vertex(i, j, k));
  });

  PointCloud cloud;
  cloud.source = CloudSource::Structured;
  cloud.grid = grid;
  const std::int64_t step[3] = {1, nx, nx * ny};
  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::size_t a = vid(i, j, k);
        const std::int64_t idx[3] = {i, j, k};
        const std::int64_t lim[3] = {nx, ny, nz};
        for (std::size_t axis = 0; axis < 3; ++axis) {
          if (idx[axis] + 1 >= lim[axis]) continue;
          const std::size_t b = a + static_cast<std::size_t>(step[axis]);
          const double fa = values[a];
          const double fb = values[b];
          if ((fa < 0.0) == (fb < 0.0)) continue;
          const double t = fa / (fa - fb);
          Vec3 pos = grid.vertex(i, j, k);
          const double start = pos[axis];
          pos[axis] = start + t * grid.spacing;
          cloud.points.push_back({pos, {}});
        }
      }
    }
  }
  parallel_for(cloud.size(), threads, [&](std::size_t i) {
    auto& p = cloud.points[i];
    p.normal = surface.normal(p.position, grid.spacing);
  });
  return cloud;
}

/// Ray tracing settings for visibility tests.
struct VisibilityOptions {
  /// Base ray step; also the offset at which a ray leaves its own surface.
  double ray_step = 0.0;
  /// A ray that comes closer than this (in field value) to any surface counts
  /// as blocked.
  double hit_tolerance = 0.0;
  std::size_t max_steps = 200000;

  /// ray_step = extent / 1000 and hit_tolerance = ray_step / 1000.
  static VisibilityOptions for_surface(const ImplicitSurface& surface) {
    VisibilityOptions o;
    o.ray_step = surface.extent() / 1000.0;
    o.hit_tolerance = o.ray_step * 1e-3;
    return o;
  }
};

namespace detail {

/// Parameter at which the ray origin + t*dir leaves `box`; 0 when it starts outside.
inline double exit_parameter(const BoundingBox& box, const Vec3& origin, const Vec3& dir) {
  double t_exit = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a) {
    if (dir[a] > 0.0)
      t_exit = std::min(t_exit, (box.max[a] - origin[a]) / dir[a]);
    else if (dir[a] < 0.0)
      t_exit = std::min(t_exit, (box.min[a] - origin[a]) / dir[a]);
  }
  return std::max(0.0, t_exit);
}

}  // namespace detail

/// True when the surface point `p` with outward normal `n` is lit by parallel
/// rays travelling along `view` (the camera looks along `view`).
///
/// The point must face the camera. The ray back toward the camera starts one
/// ray step off the point and is advanced by f / L (a step that cannot jump
/// over a crossing for an L-Lipschitz field) until it leaves the surface
/// domain. Any sample below hit_tolerance blocks the ray, which makes the
/// test conservative: a visible verdict is never overturned by a finer march.
inline bool is_visible_from(const ImplicitSurface& surface, const Vec3& p, const Vec3& n, const Vec3& view,
                            const VisibilityOptions& opt) {
  const Vec3 dir = -normalized(view);
  if (!(dot(n, dir) > 0.0)) return false;
  const double t_exit = detail::exit_parameter(surface.domain(), p, dir);
  const double lipschitz = surface.lipschitz();
  double t = opt.ray_step;
  for (std::size_t s = 0; s < opt.max_steps; ++s) {
    if (t >= t_exit) return true;
    const double v = surface.value(p + dir * t);
    if (!(v >= opt.hit_tolerance)) return false;
    t += v / lipschitz;
  }
  return false;
}

inline bool is_visible(const ImplicitSurface& surface, const Vec3& p, const Vec3& n, const std::vector<Vec3>& views,
                       const VisibilityOptions& opt) {
  return std::any_of(views.begin(), views.end(),
                     [&](const Vec3& v) { return is_visible_from(surface, p, n, v, opt); });
}

struct ScanConfig {
  ImplicitSurface surface;
  /// Directions the camera looks along; normalized on use.
  std::vector<Vec3> view_directions{{0, 0, -1}};
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (view_directions.empty()) throw Error("at least one view direction required");
    for (const auto& v : view_directions)
      if (!is_finite(v) || norm(v) == 0.0) throw Error("view directions must be finite and non-zero");
  }
};

/// Projects x onto the zero set with Newton steps along the
/// gradient. Returns nullopt when 50 steps do not reach |f| <= tolerance.
inline std::optional<Vec3> project_to_surface(const ImplicitSurface& surface, Vec3 x, double tolerance,
                                              double grad_step) {
  for (int step = 0; step <= 50; ++step) {
    const double v = surface.value(x);
    if (std::abs(v) <= tolerance) return x;
    if (step == 50) break;
    const Vec3 g = surface.gradient(x, grad_step);
    const double g2 = dot(g, g);
    if (!(g2 > 0.0)) return std::nullopt;
    x -= g * (v / g2);
    if (!is_finite(x)) return std::nullopt;
  }
  return std::nullopt;
}

/// Simulated optical scan. Candidates are drawn uniformly in the surface
/// domain, projected onto the surface and kept when they stay inside the
/// domain and are visible from at least one view. Stops after `samples` accepted points or 100 * samples candidates.
/// Output order is the candidate order, so results depend only on the seed.
inline PointCloud sample_unstructured(const ScanConfig& config, unsigned threads = 0) {
  config.validate();
  PointCloud cloud;
  cloud.source = CloudSource::Unstructured;
  if (config.samples == 0) return cloud;

  const ImplicitSurface& surface = config.surface;
  const BoundingBox domain = surface.domain();
  const double extent = surface.extent();
  const double tolerance = 1e-9 * extent;
  const double grad_step = extent / 1000.0;
  const VisibilityOptions vis = VisibilityOptions::for_surface(surface);
  std::vector<Vec3> views;
  for (const auto& v : config.view_directions) views.push_back(normalized(v));

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> ux(domain.min.x, domain.max.x);
  std::uniform_real_distribution<double> uy(domain.min.y, domain.max.y);
  std::uniform_real_distribution<double> uz(domain.min.z, domain.max.z);

  const std::size_t budget = config.samples * 100;
  constexpr std::size_t kBatch = 4096;
  std::size_t attempts = 0;
  std::vector<Vec3> batch;
  std::vector<std::optional<OrientedPoint>> results;
  cloud.points.reserve(config.samples);
  while (cloud.size() < config.samples && attempts < budget) {
    const std::size_t n = std::min(kBatch, budget - attempts);
    batch.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = ux(rng);
      const double y = uy(rng);
      const double z = uz(rng);
      batch.push_back({x, y, z});
    }
    attempts += n;
    results.assign(n, std::nullopt);
    parallel_for(n, threads, [&](std::size_t i) {
      auto on_surface = project_to_surface(surface, batch[i], tolerance, grad_step);
      if (!on_surface || !domain.contains(*on_surface)) return;
      const Vec3 normal = surface.normal(*on_surface, grad_step);
      if (norm(normal) == 0.0) return;
      if (!is_visible(surface, *on_surface, normal, views, vis)) return;
      results[i] = OrientedPoint{*on_surface, normal};
    });
    for (const auto& r : results) {
      if (!r) continue;
      cloud.points.push_back(*r);
      if (cloud.size() == config.samples) break;
    }
  }
  if (cloud.empty()) throw Error("surface unreachable");
  return cloud;
}

/// Keeps injected outliers away from a surface: positions with
/// |f| <= min_abs_value are redrawn.
struct OutlierClearance {
  const ImplicitSurface* surface = nullptr;
  double min_abs_value = 0.0;
};

struct InjectedOutliers {
  PointCloud cloud;
  std::vector<std::size_t> indices;
};

/// Appends `count` points drawn uniformly in the cloud's bounding box inflated
/// by `spread` on every side, each with a uniformly random unit normal.
inline InjectedOutliers inject_outliers(const PointCloud& cloud, std::size_t count, double spread, std::uint64_t seed,
                                        const OutlierClearance& clearance = {}) {
  if (!(spread > 0.0)) throw Error("spread must be positive");
  InjectedOutliers out{cloud, {}};
  if (count == 0) return out;
  BoundingBox box = bounding_box(cloud);
  box.min -= Vec3{spread, spread, spread};
  box.max += Vec3{spread, spread, spread};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(box.min.x, box.max.x);
  std::uniform_real_distribution<double> uy(box.min.y, box.max.y);
  std::uniform_real_distribution<double> uz(box.min.z, box.max.z);
  std::uniform_real_distribution<double> unit_z(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  const std::size_t max_attempts = count * 1000;
  std::size_t attempts = 0;
  while (out.indices.size() < count) {
    if (attempts++ >= max_attempts) throw Error("could not place outliers with the requested clearance");
    const double x = ux(rng);
    const double y = uy(rng);
    const double z = uz(rng);
    const double nz = unit_z(rng);
    const double phi = angle(rng);
    const Vec3 pos{x, y, z};
    if (clearance.surface && std::abs(clearance.surface->value(pos)) <= clearance.min_abs_value) continue;
    const double r = std::sqrt(std::max(0.0, 1.0 - nz * nz));
    const Vec3 normal = normalized(Vec3{r * std::cos(phi), r * std::sin(phi), nz});
    out.indices.push_back(out.cloud.size());
    out.cloud.points.push_back({pos, normal});
  }
  return out;
}

}  // namespace halfcloud
