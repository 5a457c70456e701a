#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "halfcloud/bounds.hpp"
#include "halfcloud/synth.hpp"
#include "oracles.hpp"

using namespace halfcloud;

namespace {

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  PointCloud c;
  for (const auto& p : pts) c.points.push_back({p, {0, 0, 1}});
  return c;
}

const CaseReport& find_case(const BoundReport& r, const std::string& name) {
  for (const auto& c : r.cases)
    if (c.name == name) return c;
  throw std::runtime_error("no case " + name);
}

}  // namespace

TEST(DistanceBound, CaseFormula) {
  const auto b = distance_bounds(1.0, 0.2);
  EXPECT_DOUBLE_EQ(b.struct_struct, 1.0);
  EXPECT_DOUBLE_EQ(b.un_un, 1.4);
  EXPECT_DOUBLE_EQ(b.mixed, 1.2);
}

TEST(DistanceBound, PairAtExactlyTheBoundHolds) {
  const auto half = cloud_of({{0, 0, 0}, {1.0, 0, 0}});
  const auto r = verify_distance_bound(half, {Origin::Structured, Origin::Structured}, 1.0, 0.2);
  EXPECT_TRUE(r.holds);
  ASSERT_TRUE(r.worst.has_value());
  EXPECT_EQ(r.worst->measured, r.worst->allowed);
  EXPECT_EQ(find_case(r, "struct_struct").checked, 2u);
}

TEST(DistanceBound, ConstructedUnUnViolation) {
  const double d_struct = 0.1, d_un = 0.05;
  const auto half = cloud_of({{0, 0, 0}, {d_struct + 3 * d_un, 0, 0}});
  const auto r = verify_distance_bound(half, {Origin::Unstructured, Origin::Unstructured}, d_struct, d_un);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.violations, 2u);
  ASSERT_TRUE(r.worst.has_value());
  EXPECT_EQ(r.worst->location, (std::vector<std::int64_t>{0, 1}));
  EXPECT_DOUBLE_EQ(r.worst->allowed, d_struct + 2 * d_un);
}

TEST(DistanceBound, MixedCaseUsesNearestNeighborsOrigin) {
  // Point 0 (un) has nearest 1 (struct): mixed. Point 2 (struct) has nearest 1: struct_struct.
  const auto half = cloud_of({{0, 0, 0}, {1.1, 0, 0}, {2.0, 0, 0}});
  const auto r =
      verify_distance_bound(half, {Origin::Unstructured, Origin::Structured, Origin::Structured}, 1.0, 0.2);
  EXPECT_EQ(find_case(r, "mixed").checked, 1u);
  EXPECT_EQ(find_case(r, "struct_struct").checked, 2u);
  EXPECT_TRUE(r.holds);
}

TEST(DistanceBound, Errors) {
  const auto half = cloud_of({{0, 0, 0}, {1, 0, 0}});
  EXPECT_THROW(verify_distance_bound(half, {Origin::Structured}, 1.0, 0.2), Error);
  EXPECT_THROW(verify_distance_bound(cloud_of({{0, 0, 0}}), {Origin::Structured}, 1.0, 0.2), Error);
  EXPECT_THROW(verify_distance_bound(half, {Origin::Structured, Origin::Structured}, 0.0, 0.2), Error);
}

// Case assignment and counts agree with an all-pairs recomputation on a real
// merge output.
TEST(DistanceBound, PipelineOutputMatchesAllPairsOracle) {
  const double h = 0.1;
  const GridSpec g{{-1.4863, -1.4871, -1.4859}, h, {30, 30, 30}};
  const auto s = shapes::make_slotted_box();
  const auto ps = sample_structured(s, g);
  const auto pu = sample_unstructured({s, {{0, 0, -1}}, 3000, 2});
  const auto m = merge(ps, pu, MergeParams::for_grid_spacing(h));
  const double d_struct = h * std::sqrt(3.0), d_un = 2 * h;
  const auto r = verify_distance_bound(m.half, m.report.origins, d_struct, d_un);
  EXPECT_TRUE(r.holds);

  const auto nearest = oracle::all_nearest(oracle::positions(m.half));
  const auto allowed = distance_bounds(d_struct, d_un);
  std::size_t counts[3] = {0, 0, 0};
  std::size_t violations = 0;
  for (std::size_t i = 0; i < nearest.size(); ++i) {
    const auto a = m.report.origins[i];
    const auto b = m.report.origins[nearest[i].index];
    const int c = (a == b) ? (a == Origin::Structured ? 0 : 1) : 2;
    ++counts[c];
    const double lim = c == 0 ? allowed.struct_struct : c == 1 ? allowed.un_un : allowed.mixed;
    if (nearest[i].distance > lim) ++violations;
  }
  EXPECT_EQ(find_case(r, "struct_struct").checked, counts[0]);
  EXPECT_EQ(find_case(r, "un_un").checked, counts[1]);
  EXPECT_EQ(find_case(r, "mixed").checked, counts[2]);
  EXPECT_EQ(r.violations, violations);
}

TEST(DensityBound, ClosedForms) {
  EXPECT_EQ(max_points_per_cell(3), 36u);
  EXPECT_EQ(max_points_per_cube(1, 0.2, 0.1), 324u);
  EXPECT_EQ(max_points_per_cube(2, 0.1, 0.1), 192u);
  EXPECT_EQ(max_points_per_cube(1, 0.25, 0.1), 12u * 64u);
}

TEST(DensityBound, EmptyCloudHoldsVacuously) {
  const GridSpec g{{0, 0, 0}, 1.0, {3, 3, 3}};
  const auto r = verify_density_bound(PointCloud{}, g, 1, 1.0);
  EXPECT_TRUE(r.holds);
  ASSERT_TRUE(r.worst.has_value());
  EXPECT_EQ(r.worst->measured, 0.0);
}

TEST(DensityBound, OverfullCellIsReported) {
  const GridSpec g{{0, 0, 0}, 1.0, {3, 3, 3}};
  PointCloud c;
  for (int i = 0; i < 13; ++i) c.points.push_back({{1.5, 1.5, 1.0 + i * 0.01}, {0, 0, 1}});
  const auto r = verify_density_bound(c, g, 1, 1.0);
  const auto& cell = find_case(r, "cell");
  EXPECT_EQ(cell.violations, 1u);
  EXPECT_EQ(cell.worst->location, (std::vector<std::int64_t>{1, 1, 1}));
  EXPECT_EQ(cell.worst->measured, 13.0);
  EXPECT_FALSE(r.holds);
  EXPECT_TRUE(verify_density_bound(c, g, 2, 1.0).holds);
}

TEST(DensityBound, BoundaryPointsGoToLowerIndex) {
  const GridSpec g{{0, 0, 0}, 1.0, {3, 3, 3}};
  const auto c = cloud_of({{1.0, 2.0, 0.0}});
  const auto r = verify_density_bound(c, g, 1, 1.0);
  const auto& cell = find_case(r, "cell");
  EXPECT_EQ(cell.worst->location, (std::vector<std::int64_t>{1, 2, 0}));
  // Width h: only the cube anchored at the point's own vertex contains it.
  const auto& cube = find_case(r, "cube");
  EXPECT_EQ(cube.checked, 1u);
  EXPECT_EQ(cube.worst->location, (std::vector<std::int64_t>{1, 2, 0}));
  // Width 2h: vertices 0..1 / 1..2 / 0 per axis reach it, but not beyond the grid.
  const auto wide = find_case(verify_density_bound(c, g, 1, 2.0), "cube");
  EXPECT_EQ(wide.checked, 2u * 2u * 1u);
}

// Cube counts compared against a direct scan over every vertex.
TEST(DensityBound, CubeCountsMatchDirectScan) {
  std::mt19937_64 rng(3);
  const GridSpec g{{-0.05, -0.05, -0.05}, 0.1, {11, 11, 11}};
  const auto c = oracle::random_cloud(3000, rng, -0.2, 1.2);
  for (double w : {0.1, 0.2, 0.35}) {
    const auto r = verify_density_bound(c, g, 1, w);
    std::size_t worst = 0;
    std::size_t nonempty = 0;
    for (std::int64_t z = 0; z <= 11; ++z)
      for (std::int64_t y = 0; y <= 11; ++y)
        for (std::int64_t x = 0; x <= 11; ++x) {
          std::size_t count = 0;
          const std::int64_t v[3] = {x, y, z};
          for (const auto& p : c.points) {
            bool in = true;
            for (std::size_t a = 0; a < 3 && in; ++a) {
              const double u = (p.position[a] - g.origin[a]) / g.spacing;
              in = double(v[a]) <= u && u < double(v[a]) + w / g.spacing;
            }
            count += in;
          }
          worst = std::max(worst, count);
          nonempty += count > 0;
        }
    const auto& cube = find_case(r, "cube");
    EXPECT_EQ(cube.checked, nonempty) << w;
    EXPECT_EQ(cube.worst->measured, double(worst)) << w;
  }
}

TEST(DensityBound, StructuredAndMergedCloudsHold) {
  const double h = 0.05;
  const GridSpec g{{-1.4863, -1.4871, -1.4859}, h, {60, 60, 60}};
  for (const auto& [name, shape] : builtin_shapes()) {
    const auto ps = sample_structured(shape, g);
    const auto pu = sample_unstructured({shape, {{0, 0, -1}, {0.5, 0, -1}}, 10000, 4});
    const auto params = MergeParams::for_grid_spacing(h);
    const auto m = merge(ps, pu, params);
    for (double w : {h, 2 * h, 5 * h}) {
      EXPECT_TRUE(verify_density_bound(ps, g, params.k, w).holds) << name;
      EXPECT_TRUE(verify_density_bound(m.half, g, params.k, w).holds) << name;
    }
  }
}
