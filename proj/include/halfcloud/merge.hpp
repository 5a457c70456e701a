#pragma once

// Half-structured merge: structured points act as anchors that pull in nearby,
// normal-consistent unstructured points; anchors left without support stay in
// the output and fill the holes of the scan.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/parallel.hpp"
#include "halfcloud/spatial_index.hpp"

namespace halfcloud {

enum class Origin : std::uint8_t { Structured, Unstructured };

inline std::string_view to_string(Origin o) { return o == Origin::Structured ? "struct" : "un"; }

struct MergeReport {
  std::size_t n_struct_in = 0;
  std::size_t n_un_in = 0;
  std::size_t n_selected_un = 0;
  std::size_t n_fill_struct = 0;
  /// max_nn_distance of the output; empty when it has fewer than two points.
  std::optional<double> measured_d_half;
  /// Indices into the unstructured input, ascending.
  std::vector<std::size_t> selected_un;
  /// Indices into the structured input, ascending.
  std::vector<std::size_t> fill_struct;
  std::vector<std::size_t> outliers_un;
  std::vector<std::size_t> outliers_struct;
  /// Origin of every output point, aligned with the output cloud.
  std::vector<Origin> origins;
};

struct MergeResult {
  PointCloud half;
  MergeReport report;
};

/// Unstructured points accepted for one anchor: among the k nearest, those
/// within d_un whose normal satisfies dot(n_anchor, n_q) >= cos_theta_min.
/// `index_un` must be built over `p_un`. Order follows the knn order.
inline std::vector<std::size_t> select_candidates(const OrientedPoint& anchor, const PointCloud& p_un,
                                                  const SpatialIndex& index_un, const MergeParams& params) {
  std::vector<std::size_t> accepted;
  for (const auto& nb : index_un.knn(anchor.position, params.k)) {
    if (nb.distance > params.d_un) break;
    if (dot(anchor.normal, p_un.points[nb.index].normal) >= params.cos_theta_min) accepted.push_back(nb.index);
  }
  return accepted;
}

/// Setting 1: the structured cloud is the model. Unstructured points with no
/// structured point within outlier_radius_un are outliers.
inline std::vector<std::size_t> detect_outliers_unstructured(const PointCloud& p_un, const SpatialIndex& index_struct,
                                                             const MergeParams& params) {
  std::vector<std::uint8_t> flag(p_un.size(), 0);
  parallel_for(p_un.size(), params.threads, [&](std::size_t i) {
    const auto nn = index_struct.knn(p_un.points[i].position, 1);
    flag[i] = nn.empty() || nn.front().distance > params.outlier_radius_un;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flag.size(); ++i)
    if (flag[i]) out.push_back(i);
  return out;
}

/// Setting 2: structured points whose nearest structured neighbor is farther
/// than d_struct_bound violate the grid distance bound and are outliers.
inline std::vector<std::size_t> detect_outliers_structured(const PointCloud& p_struct, double d_struct_bound,
                                                           unsigned threads = 0) {
  if (p_struct.size() < 2) throw Error("need >= 2 points");
  if (!(d_struct_bound > 0.0)) throw Error("d_struct_bound must be positive");
  const SpatialIndex index(p_struct);
  std::vector<std::uint8_t> flag(p_struct.size(), 0);
  parallel_for(p_struct.size(), threads, [&](std::size_t i) {
    flag[i] = index.nearest_other(p_struct.points[i].position, i)->distance > d_struct_bound;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flag.size(); ++i)
    if (flag[i]) out.push_back(i);
  return out;
}

namespace detail {

inline PointCloud subset(const PointCloud& cloud, const std::vector<std::size_t>& keep) {
  PointCloud out;
  out.source = cloud.source;
  out.points.reserve(keep.size());
  for (auto i : keep) out.points.push_back(cloud.points[i]);
  return out;
}

/// Indices of [0, n) not listed in the ascending `removed`.
inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& removed) {
  std::vector<std::size_t> keep;
  keep.reserve(n - std::min(n, removed.size()));
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r < removed.size() && removed[r] == i) {
      ++r;
      continue;
    }
    keep.push_back(i);
  }
  return keep;
}

}  // namespace detail

/// Builds the half-structured cloud.
///
/// Outlier passes run first (per params.outlier_mode); outliers take no part
/// as anchors or candidates. Every remaining structured anchor selects
/// candidates; the union of accepted unstructured points (each at most once)
/// forms the first part of the output, in ascending input order. Anchors with
/// fewer than fill_min_support accepted candidates follow, in ascending input
/// order. The result is identical for any thread count.
inline MergeResult merge(const PointCloud& p_struct, const PointCloud& p_un, const MergeParams& params) {
  params.validate();
  if (p_struct.empty()) throw Error("structured cloud required");

  MergeResult result;
  MergeReport& report = result.report;
  report.n_struct_in = p_struct.size();
  report.n_un_in = p_un.size();

  if (params.outlier_mode == OutlierMode::FilterBoth && p_struct.size() >= 2)
    report.outliers_struct = detect_outliers_structured(p_struct, params.outlier_radius_struct, params.threads);
  const std::vector<std::size_t> anchor_ids = detail::complement(p_struct.size(), report.outliers_struct);
  const PointCloud anchors = detail::subset(p_struct, anchor_ids);

  if (params.outlier_mode != OutlierMode::None && !p_un.empty())
    report.outliers_un = detect_outliers_unstructured(p_un, SpatialIndex(anchors), params);
  const std::vector<std::size_t> un_ids = detail::complement(p_un.size(), report.outliers_un);
  const PointCloud candidates = detail::subset(p_un, un_ids);
  const SpatialIndex index_un(candidates);

  std::vector<std::uint32_t> support(anchors.size(), 0);
  std::vector<std::uint8_t> selected(candidates.size(), 0);
  parallel_for_chunks(anchors.size(), params.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const auto accepted = select_candidates(anchors.points[a], candidates, index_un, params);
      support[a] = static_cast<std::uint32_t>(accepted.size());
      // Several anchors may select the same candidate.
      for (auto q : accepted) std::atomic_ref<std::uint8_t>(selected[q]).store(1, std::memory_order_relaxed);
    }
  });

  PointCloud& half = result.half;
  half.source = CloudSource::HalfStructured;
  half.grid = p_struct.grid;
  for (std::size_t q = 0; q < candidates.size(); ++q) {
    if (!selected[q]) continue;
    report.selected_un.push_back(un_ids[q]);
    half.points.push_back(candidates.points[q]);
    report.origins.push_back(Origin::Unstructured);
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (support[a] >= params.fill_min_support) continue;
    report.fill_struct.push_back(anchor_ids[a]);
    half.points.push_back(anchors.points[a]);
    report.origins.push_back(Origin::Structured);
  }
  report.n_selected_un = report.selected_un.size();
  report.n_fill_struct = report.fill_struct.size();
  if (half.size() >= 2) report.measured_d_half = max_nn_distance(half, params.threads);
  return result;
}

}  // namespace halfcloud
