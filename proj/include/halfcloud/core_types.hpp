#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "halfcloud/error.hpp"
#include "halfcloud/vec3.hpp"

namespace halfcloud {

/// Absolute tolerance on |normal| - 1 accepted by the point invariants.
inline constexpr double kUnitNormalTolerance = 1e-6;

/// Position plus unit outward normal.
struct OrientedPoint {
  Vec3 position;
  Vec3 normal;

  friend bool operator==(const OrientedPoint&, const OrientedPoint&) = default;
};

enum class CloudSource { Structured, Unstructured, HalfStructured };

inline std::string_view to_string(CloudSource s) {
  switch (s) {
    case CloudSource::Structured:
      return "structured";
    case CloudSource::Unstructured:
      return "unstructured";
    case CloudSource::HalfStructured:
      return "half_structured";
  }
  return "unknown";
}

inline std::optional<CloudSource> parse_source(std::string_view s) {
  if (s == "structured") return CloudSource::Structured;
  if (s == "unstructured") return CloudSource::Unstructured;
  if (s == "half_structured") return CloudSource::HalfStructured;
  return std::nullopt;
}

/// Regular sampling lattice: `dims` cells of side `spacing` starting at `origin`.
struct GridSpec {
  Vec3 origin;
  double spacing = 1.0;
  std::array<std::int64_t, 3> dims{1, 1, 1};

  /// Throws Error unless spacing > 0 and every dim >= 1.
  void validate() const {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error("grid spacing must be positive");
    if (!is_finite(origin)) throw Error("grid origin must be finite");
    for (auto d : dims)
      if (d < 1) throw Error("grid dims must each be >= 1");
  }

  Vec3 vertex(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return {origin.x + static_cast<double>(i) * spacing, origin.y + static_cast<double>(j) * spacing,
            origin.z + static_cast<double>(k) * spacing};
  }

  /// Largest nearest-neighbor distance a marching-cubes style vertex set can
  /// have on this grid: the cell diagonal.
  double cell_diagonal() const { return spacing * std::sqrt(3.0); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct PointCloud {
  std::vector<OrientedPoint> points;
  CloudSource source = CloudSource::Unstructured;
  std::optional<GridSpec> grid;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Which outlier passes the merge runs before candidate selection.
enum class OutlierMode {
  None,
  /// Structured cloud trusted: drop unstructured points without structured support.
  TrustStructured,
  /// Additionally drop structured points that break the grid distance bound.
  FilterBoth,
};

struct MergeParams {
  /// Neighbors retrieved per structured anchor.
  std::size_t k = 8;
  /// Largest anchor-to-candidate distance.
  double d_un = 0.1;
  /// Smallest accepted dot(n_anchor, n_candidate).
  double cos_theta_min = 0.8;
  /// Anchors with fewer accepted candidates than this are kept in the output.
  std::size_t fill_min_support = 1;
  double outlier_radius_un = 0.2;
  /// Nearest-neighbor bound for structured outliers (d_struct bound).
  double outlier_radius_struct = 0.1;
  OutlierMode outlier_mode = OutlierMode::TrustStructured;
  /// 0 selects default_thread_count().
  unsigned threads = 0;

  /// Defaults tied to a grid of spacing h: d_un = 2h, structured bound = h*sqrt(3),
  /// unstructured outlier radius = 2h*sqrt(3).
  static MergeParams for_grid_spacing(double h) {
    MergeParams p;
    p.d_un = 2.0 * h;
    p.outlier_radius_struct = h * std::sqrt(3.0);
    p.outlier_radius_un = 2.0 * h * std::sqrt(3.0);
    return p;
  }

  void validate() const {
    if (k < 1) throw Error("k must be >= 1");
    if (!(d_un > 0.0)) throw Error("d_un must be positive");
    if (!(cos_theta_min >= -1.0 && cos_theta_min <= 1.0)) throw Error("cos_theta_min must lie in [-1, 1]");
    if (!(outlier_radius_un > 0.0)) throw Error("outlier_radius_un must be positive");
    if (!(outlier_radius_struct > 0.0)) throw Error("outlier_radius_struct must be positive");
  }
};

enum class ViolationKind { NonFinite, ZeroNormal, NonUnitNormal };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::NonFinite:
      return "non-finite";
    case ViolationKind::ZeroNormal:
      return "zero-norm normal";
    case ViolationKind::NonUnitNormal:
      return "non-unit normal";
  }
  return "unknown";
}

struct Violation {
  std::size_t index;
  ViolationKind kind;

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::optional<ViolationKind> check_point(const OrientedPoint& p) {
  if (!is_finite(p.position) || !is_finite(p.normal)) return ViolationKind::NonFinite;
  const double n = norm(p.normal);
  if (n == 0.0) return ViolationKind::ZeroNormal;
  if (std::abs(n - 1.0) > kUnitNormalTolerance) return ViolationKind::NonUnitNormal;
  return std::nullopt;
}

/// Every offending point, in index order. An empty result means the cloud is valid.
inline std::vector<Violation> validate_cloud(const PointCloud& cloud) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    if (auto kind = check_point(cloud.points[i])) out.push_back({i, *kind});
  return out;
}

struct BoundingBox {
  Vec3 min;
  Vec3 max;

  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
  double largest_extent() const {
    const Vec3 e = extent();
    return std::max({e.x, e.y, e.z});
  }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y && p.z <= max.z;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("empty cloud");
  BoundingBox box{cloud.points.front().position, cloud.points.front().position};
  for (const auto& p : cloud.points) {
    box.min = component_min(box.min, p.position);
    box.max = component_max(box.max, p.position);
  }
  return box;
}

/// Uniformly scales and translates `moving` so that its bounding box shares the
/// center of `reference`'s box and its largest extent matches. No rotation.
inline PointCloud scale_normalize(const PointCloud& moving, const PointCloud& reference) {
  if (moving.empty() || reference.empty()) throw Error("empty cloud");
  const BoundingBox ref = bounding_box(reference);
  const Vec3 ref_extent = ref.extent();
  if (!(ref_extent.x > 0.0 && ref_extent.y > 0.0 && ref_extent.z > 0.0))
    throw Error("degenerate reference extent");
  const BoundingBox mov = bounding_box(moving);
  const double mov_largest = mov.largest_extent();
  if (!(mov_largest > 0.0)) throw Error("degenerate extent");

  const double scale = ref.largest_extent() / mov_largest;
  const Vec3 from = mov.center();
  const Vec3 to = ref.center();

  PointCloud out = moving;
  for (auto& p : out.points) p.position = to + (p.position - from) * scale;
  if (out.grid) {
    out.grid->origin = to + (out.grid->origin - from) * scale;
    out.grid->spacing *= scale;
  }
  return out;
}

}  // namespace halfcloud
