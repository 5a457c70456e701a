#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "halfcloud/synth.hpp"
#include "oracles.hpp"

using namespace halfcloud;

namespace {

const GridSpec kSphereGrid{{-1.5, -1.5, -1.5}, 0.2, {15, 15, 15}};

GridSpec offset_grid(double h) {
  const auto n = static_cast<std::int64_t>(std::ceil(2.97 / h));
  return GridSpec{{-1.4863, -1.4871, -1.4859}, h, {n, n, n}};
}

/// Slot-local coordinates of the slotted box, used to locate the slot floor.
struct SlotFrame {
  Mat3 rot = Mat3::rotation({0, 1, 0}, 35.0 * std::numbers::pi / 180.0);
  Vec3 center;
  SlotFrame() {
    const Vec3 axis = rot * Vec3{0, 0, 1};
    const Vec3 mouth = shapes::kBodyCenter + Vec3{0.2, 0.0, shapes::kBodyHalf.z};
    center = mouth - axis * 0.45;
  }
  Vec3 local(const Vec3& p) const { return rot.transposed() * (p - center); }
  bool on_floor(const Vec3& p, double tol) const {
    const Vec3 l = local(p);
    return std::abs(l.z + 0.6) <= tol && std::abs(l.x) <= 0.14 && std::abs(l.y) <= 0.5;
  }
};

}  // namespace

TEST(SampleStructured, SphereBandAndGridBound) {
  const auto s = shapes::make_sphere();
  const auto c = sample_structured(s, kSphereGrid);
  ASSERT_FALSE(c.empty());
  EXPECT_EQ(c.source, CloudSource::Structured);
  ASSERT_TRUE(c.grid.has_value());
  for (const auto& p : c.points) EXPECT_LE(std::abs(norm(p.position) - 1.0), 0.2);
  EXPECT_LE(max_nn_distance(c), 0.2 * std::sqrt(3.0));
}

TEST(SampleStructured, PlaneIsInterpolatedExactly) {
  const ImplicitSurface plane(
      "plane", [](const Vec3& x) { return x.x; }, [](const Vec3&) { return Vec3{1, 0, 0}; },
      BoundingBox{{-3, -3, -3}, {3, 3, 3}});
  const GridSpec g{{-2.5, -2, -2}, 1.0, {5, 4, 4}};
  const auto c = sample_structured(plane, g);
  ASSERT_EQ(c.size(), 25u);
  for (const auto& p : c.points) {
    EXPECT_EQ(p.position.x, 0.0);
    EXPECT_EQ(p.position.y, std::round(p.position.y));
    EXPECT_EQ(p.position.z, std::round(p.position.z));
    EXPECT_EQ(p.normal, (Vec3{1, 0, 0}));
  }
}

TEST(SampleStructured, CountMatchesEdgeEnumeration) {
  for (const auto& [name, shape] : builtin_shapes()) {
    for (double h : {0.2, 0.07}) {
      const auto g = offset_grid(h);
      EXPECT_EQ(sample_structured(shape, g).size(), oracle::count_sign_change_edges(shape, g)) << name << " h=" << h;
    }
  }
}

TEST(SampleStructured, NoIntersectionGivesEmptyCloud) {
  const GridSpec far{{10, 10, 10}, 0.1, {4, 4, 4}};
  const auto c = sample_structured(shapes::make_sphere(), far);
  EXPECT_TRUE(c.empty());
  EXPECT_TRUE(c.grid.has_value());
}

TEST(SampleStructured, GridBoundHoldsForAllShapes) {
  for (const auto& [name, shape] : builtin_shapes()) {
    for (double h : {0.1, 0.05}) {
      const auto c = sample_structured(shape, offset_grid(h));
      EXPECT_LE(max_nn_distance(c), h * std::sqrt(3.0)) << name << " h=" << h;
    }
  }
}

TEST(SampleStructured, ThreadCountDoesNotChangeOutput) {
  const auto s = shapes::make_undercut_slot();
  const auto a = sample_structured(s, offset_grid(0.05), 1);
  const auto b = sample_structured(s, offset_grid(0.05), 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.points[i], b.points[i]);
}

TEST(SampleUnstructured, PointsLieOnSurface) {
  for (const auto& [name, shape] : builtin_shapes()) {
    const auto c = sample_unstructured({shape, {{0, 0, -1}, {0.5, 0, -1}}, 1000, 11});
    EXPECT_EQ(c.size(), 1000u) << name;
    EXPECT_EQ(c.source, CloudSource::Unstructured);
    for (const auto& p : c.points) ASSERT_LE(std::abs(shape.value(p.position)), 1e-9 * shape.extent()) << name;
  }
}

TEST(SampleUnstructured, SphereBackHemisphereAbsent) {
  const Vec3 view{0, 0, -1};
  const auto c = sample_unstructured({shapes::make_sphere(), {view}, 5000, 1});
  ASSERT_EQ(c.size(), 5000u);
  for (const auto& p : c.points) ASSERT_LE(dot(p.normal, view), 0.1);
  for (const Vec3 v : {Vec3{1, 1, 0}, Vec3{-0.3, 0.2, 0.9}}) {
    const Vec3 u = normalized(v);
    const auto d = sample_unstructured({shapes::make_sphere(), {v}, 2000, 2});
    for (const auto& p : d.points) ASSERT_LE(dot(p.normal, u), 0.1);
  }
}

TEST(SampleUnstructured, SlottedBoxFloorIsEmptyFromAbove) {
  const auto s = shapes::make_slotted_box();
  const SlotFrame slot;
  const Vec3 view{0, 0, -1};
  // The floor really is occluded: probe it on a fine lattice with the
  // fixed-step oracle.
  const double step = s.extent() / 1000.0 / 10.0;
  for (int i = -6; i <= 6; ++i)
    for (int j = -10; j <= 10; ++j) {
      const Vec3 p = slot.center + slot.rot * Vec3{0.13 * i / 6.0, 0.45 * j / 10.0, -0.6};
      ASSERT_TRUE(slot.on_floor(p, 1e-9));
      ASSERT_FALSE(oracle::fine_visible(s, p, view, step)) << i << "," << j;
    }
  const auto c = sample_unstructured({s, {view}, 20000, 5});
  ASSERT_EQ(c.size(), 20000u);
  for (const auto& p : c.points) ASSERT_FALSE(slot.on_floor(p.position, 1e-6));
  // Some points do reach into the upper part of the slot.
  std::size_t in_slot_mouth = 0;
  for (const auto& p : c.points) {
    const Vec3 l = slot.local(p.position);
    if (std::abs(l.x) <= 0.14 + 1e-6 && l.z > 0.0 && p.position.z < shapes::kBodyCenter.z + 0.5) ++in_slot_mouth;
  }
  EXPECT_GT(in_slot_mouth, 0u);
}

TEST(SampleUnstructured, DeterministicUnderSeed) {
  const ScanConfig cfg{shapes::make_multi_chamber_crack(), {{0, 0, -1}, {0.3, -0.2, -1}}, 3000, 99};
  const auto a = sample_unstructured(cfg, 1);
  const auto b = sample_unstructured(cfg, 4);
  const auto c = sample_unstructured(cfg);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.points[i], b.points[i]);
    ASSERT_EQ(a.points[i], c.points[i]);
  }
  const auto d = sample_unstructured({cfg.surface, cfg.view_directions, 3000, 100});
  EXPECT_NE(a.points[0], d.points[0]);
}

// Every accepted point is still visible under a fixed-step march ten times
// finer than the base ray step.
TEST(SampleUnstructured, VisibilityIsSoundAgainstFineMarch) {
  const std::vector<Vec3> views{{0, 0, -1}, {0.5, 0, -1}, {-0.5, 0, -1}};
  for (const auto& [name, shape] : builtin_shapes()) {
    const auto c = sample_unstructured({shape, views, 1500, 21});
    std::vector<Vec3> unit;
    for (const auto& v : views) unit.push_back(normalized(v));
    const double step = shape.extent() / 1000.0 / 10.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      ASSERT_TRUE(oracle::fine_visible_any(shape, c.points[i].position, unit, step)) << name << " point " << i;
  }
}

TEST(SampleUnstructured, ZeroSamplesAndErrors) {
  EXPECT_TRUE(sample_unstructured({shapes::make_sphere(), {{0, 0, -1}}, 0, 1}).empty());
  EXPECT_THROW(sample_unstructured({shapes::make_sphere(), {}, 10, 1}), Error);
  EXPECT_THROW(sample_unstructured({shapes::make_sphere(), {{0, 0, 0}}, 10, 1}), Error);
  // A surface entirely outside its own domain can never be reached.
  const auto lost = shapes::make_sphere().with_domain({{5, 5, 5}, {6, 6, 6}});
  try {
    sample_unstructured({lost, {{0, 0, -1}}, 10, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "surface unreachable");
  }
}

TEST(Visibility, FrontFacingRequired) {
  const auto s = shapes::make_sphere();
  const auto opt = VisibilityOptions::for_surface(s);
  EXPECT_TRUE(is_visible_from(s, {0, 0, 1}, {0, 0, 1}, {0, 0, -1}, opt));
  EXPECT_FALSE(is_visible_from(s, {0, 0, -1}, {0, 0, -1}, {0, 0, -1}, opt));
  EXPECT_FALSE(is_visible_from(s, {1, 0, 0}, {1, 0, 0}, {0, 0, -1}, opt));
}

TEST(InjectOutliers, ZeroCountIsNoOp) {
  const auto base = sample_structured(shapes::make_sphere(), kSphereGrid);
  const auto r = inject_outliers(base, 0, 1.0, 3);
  EXPECT_TRUE(r.indices.empty());
  ASSERT_EQ(r.cloud.size(), base.size());
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(r.cloud.points[i], base.points[i]);
}

TEST(InjectOutliers, FiftyPointsAwayFromSurface) {
  const double h = 0.1;
  const auto s = shapes::make_sphere();
  const auto base = sample_unstructured({s, {{0, 0, -1}}, 2000, 4});
  const auto r = inject_outliers(base, 50, 1.0, 8, {&s, 3 * h});
  ASSERT_EQ(r.indices.size(), 50u);
  ASSERT_EQ(r.cloud.size(), base.size() + 50);
  const auto box = bounding_box(base);
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_EQ(r.indices[k], base.size() + k);
    const auto& p = r.cloud.points[r.indices[k]];
    EXPECT_GT(std::abs(s.value(p.position)), 3 * h);
    EXPECT_NEAR(norm(p.normal), 1.0, 1e-12);
    for (std::size_t a = 0; a < 3; ++a) {
      EXPECT_GE(p.position[a], box.min[a] - 1.0);
      EXPECT_LE(p.position[a], box.max[a] + 1.0);
    }
  }
}

TEST(InjectOutliers, DeterministicAndValidated) {
  const auto base = sample_structured(shapes::make_sphere(), kSphereGrid);
  const auto a = inject_outliers(base, 20, 0.5, 42);
  const auto b = inject_outliers(base, 20, 0.5, 42);
  ASSERT_EQ(a.indices, b.indices);
  for (std::size_t i = 0; i < a.cloud.size(); ++i) ASSERT_EQ(a.cloud.points[i], b.cloud.points[i]);
  EXPECT_THROW(inject_outliers(base, 1, 0.0, 1), Error);
}

TEST(Shapes, SlottedBoxSignProbes) {
  const auto s = shapes::make_slotted_box();
  const SlotFrame slot;
  const Vec3 axis = slot.rot * Vec3{0, 0, 1};
  const Vec3 mouth = shapes::kBodyCenter + Vec3{0.2, 0.0, shapes::kBodyHalf.z};
  EXPECT_LT(s.value(shapes::kBodyCenter), 0.0);
  EXPECT_GT(s.value({0, 0, 1.2}), 0.0);
  EXPECT_GT(s.value({1.3, 0, 0}), 0.0);
  EXPECT_GT(s.value(mouth - axis * 0.3), 0.0);
  EXPECT_GT(s.value(mouth - axis * 1.0), 0.0);
  EXPECT_LT(s.value(mouth - axis * 1.2), 0.0);
}

TEST(Shapes, CanonicalForms) {
  const auto sphere = builtin_shape("sphere");
  EXPECT_DOUBLE_EQ(sphere.value({0, 0, 2}), 1.0);
  EXPECT_DOUBLE_EQ(sphere.value({0, 0, 0}), -1.0);
  const auto box = builtin_shape("box");
  EXPECT_NEAR(box.value({0.013 + 1.9, -0.021, 0.017}), 1.0, 1e-12);
  EXPECT_NEAR(box.value({0.013, -0.021, 0.017}), -0.5, 1e-12);
  EXPECT_THROW(builtin_shape("torus"), Error);
  EXPECT_EQ(builtin_shapes().size(), 5u);
}

TEST(Shapes, NumericGradientMatchesAnalytic) {
  const auto s = shapes::make_sphere();
  const ImplicitSurface numeric("numeric_sphere", [](const Vec3& x) { return norm(x) - 1.0; }, nullptr,
                                shapes::kDefaultDomain);
  for (const Vec3 p : {Vec3{0.3, -0.5, 0.8}, Vec3{1, 1, 1}, Vec3{-0.2, 0.1, 0.05}}) {
    EXPECT_LE(distance(numeric.gradient(p, 0.05), s.gradient(p)), 1e-6);
  }
}
