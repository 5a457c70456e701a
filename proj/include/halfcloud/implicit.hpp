#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <utility>

#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/vec3.hpp"

namespace halfcloud {

/// Scalar field whose zero set is the object surface. Negative inside.
///
/// The field must be Lipschitz with constant `lipschitz()` (1 for a signed
/// distance or any CSG combination of distance bounds); visibility tracing
/// relies on it to step safely.
class ImplicitSurface {
 public:
  using Field = std::function<double(const Vec3&)>;
  using GradientField = std::function<Vec3(const Vec3&)>;

  ImplicitSurface() = default;
  ImplicitSurface(std::string name, Field value, GradientField gradient, BoundingBox domain,
                  std::string description = {}, double lipschitz = 1.0)
      : name_(std::move(name)),
        description_(std::move(description)),
        value_(std::move(value)),
        gradient_(std::move(gradient)),
        domain_(domain),
        lipschitz_(lipschitz) {}

  double value(const Vec3& x) const { return value_(x); }

  /// Analytic gradient when available, otherwise central differences with
  /// step 1e-5 * h.
  Vec3 gradient(const Vec3& x, double h = 1.0) const {
    if (gradient_) return gradient_(x);
    const double s = 1e-5 * h;
    Vec3 g;
    for (std::size_t a = 0; a < 3; ++a) {
      Vec3 lo = x;
      Vec3 hi = x;
      lo[a] -= s;
      hi[a] += s;
      g[a] = (value_(hi) - value_(lo)) / (2.0 * s);
    }
    return g;
  }

  /// Unit outward normal (toward positive values).
  Vec3 normal(const Vec3& x, double h = 1.0) const { return normalized(gradient(x, h)); }

  bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }
  const std::string& name() const { return name_; }
  const std::string& description() const { return description_; }
  const BoundingBox& domain() const { return domain_; }
  double lipschitz() const { return lipschitz_; }
  double extent() const { return domain_.largest_extent(); }

  ImplicitSurface with_domain(const BoundingBox& domain) const {
    ImplicitSurface s = *this;
    s.domain_ = domain;
    return s;
  }

 private:
  std::string name_;
  std::string description_;
  Field value_;
  GradientField gradient_;
  BoundingBox domain_{{-1, -1, -1}, {1, 1, 1}};
  double lipschitz_ = 1.0;
};

namespace shapes {

inline ImplicitSurface sphere(const Vec3& center, double radius, const BoundingBox& domain) {
  return ImplicitSurface(
      "sphere", [=](const Vec3& x) { return distance(x, center) - radius; },
      [=](const Vec3& x) {
        const Vec3 d = x - center;
        const double n = norm(d);
        return n > 0.0 ? d / n : Vec3{0, 0, 1};
      },
      domain, "|x - c| - r");
}

/// Box with the given half extents, rotated by `rotation` about its center.
/// Value is the max-norm distance max_i(|local_i| - half_i), a lower bound on
/// the Euclidean distance outside and exact inside along the closest face.
inline ImplicitSurface box(const Vec3& center, const Vec3& half, const Mat3& rotation, const BoundingBox& domain) {
  const Mat3 to_local = rotation.transposed();
  auto value = [=](const Vec3& x) {
    const Vec3 l = to_local * (x - center);
    return std::max({std::abs(l.x) - half.x, std::abs(l.y) - half.y, std::abs(l.z) - half.z});
  };
  auto gradient = [=](const Vec3& x) {
    const Vec3 l = to_local * (x - center);
    const double q[3] = {std::abs(l.x) - half.x, std::abs(l.y) - half.y, std::abs(l.z) - half.z};
    std::size_t axis = 0;
    for (std::size_t a = 1; a < 3; ++a)
      if (q[a] > q[axis]) axis = a;
    Vec3 g;
    g[axis] = l[axis] < 0.0 ? -1.0 : 1.0;
    return rotation * g;
  };
  return ImplicitSurface("box", value, gradient, domain, "max_i(|R^T (x - c)|_i - half_i)");
}

inline ImplicitSurface box(const Vec3& center, const Vec3& half, const BoundingBox& domain) {
  return box(center, half, Mat3::identity(), domain);
}

/// min(a, b): solid union.
inline ImplicitSurface unite(const ImplicitSurface& a, const ImplicitSurface& b) {
  return ImplicitSurface(
      a.name() + "|" + b.name(), [=](const Vec3& x) { return std::min(a.value(x), b.value(x)); },
      [=](const Vec3& x) { return a.value(x) <= b.value(x) ? a.gradient(x) : b.gradient(x); }, a.domain(),
      "min(a, b)", std::max(a.lipschitz(), b.lipschitz()));
}

/// max(a, -b): a with b carved out.
inline ImplicitSurface subtract(const ImplicitSurface& a, const ImplicitSurface& b) {
  return ImplicitSurface(
      a.name() + "-" + b.name(), [=](const Vec3& x) { return std::max(a.value(x), -b.value(x)); },
      [=](const Vec3& x) { return a.value(x) >= -b.value(x) ? a.gradient(x) : -b.gradient(x); }, a.domain(),
      "max(a, -b)", std::max(a.lipschitz(), b.lipschitz()));
}

inline ImplicitSurface named(ImplicitSurface s, std::string name, std::string description) {
  return ImplicitSurface(std::move(name), [s](const Vec3& x) { return s.value(x); },
                         [s](const Vec3& x) { return s.gradient(x); }, s.domain(), std::move(description),
                         s.lipschitz());
}

inline const BoundingBox kDefaultDomain{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};

// Shape parameters are offset slightly from round numbers so that faces do not
// fall on the lattice of typical sampling grids.
inline const Vec3 kBodyCenter{0.011, 0.007, 0.013};
inline const Vec3 kBodyHalf{1.0, 0.8, 0.6};

inline ImplicitSurface make_sphere() {
  return named(sphere({0, 0, 0}, 1.0, kDefaultDomain), "sphere", "|x| - 1");
}

inline ImplicitSurface make_box() {
  return named(box({0.013, -0.021, 0.017}, {0.9, 0.65, 0.5}, kDefaultDomain), "box",
               "max-norm box, center (0.013,-0.021,0.017), half extents (0.9,0.65,0.5)");
}

/// Body pierced from the top face by a straight slot tilted 35 degrees from
/// vertical. The floor and lower walls of the slot cannot be seen from above.
inline ImplicitSurface make_slotted_box() {
  const double tilt = 35.0 * std::numbers::pi / 180.0;
  const Mat3 rot = Mat3::rotation({0, 1, 0}, tilt);
  const Vec3 axis = rot * Vec3{0, 0, 1};
  const Vec3 mouth = kBodyCenter + Vec3{0.2, 0.0, kBodyHalf.z};
  const ImplicitSurface slot = box(mouth - axis * 0.45, {0.14, 0.5, 0.6}, rot, kDefaultDomain);
  return named(subtract(box(kBodyCenter, kBodyHalf, kDefaultDomain), slot), "slotted_box",
               "max(f_body, -f_slot); body half extents (1,0.8,0.6); slot half extents (0.14,0.5,0.6) tilted 35 deg "
               "about y, mouth on the top face at x=0.2");
}

/// A narrow vertical neck opening into a wider cavity below the top face.
inline ImplicitSurface make_undercut_slot() {
  const Vec3 top = kBodyCenter + Vec3{0, 0, kBodyHalf.z};
  const ImplicitSurface neck = box(top, {0.1, 0.5, 0.4}, kDefaultDomain);
  const ImplicitSurface cavity = box(kBodyCenter + Vec3{0, 0, 0.1}, {0.45, 0.5, 0.15}, kDefaultDomain);
  return named(subtract(box(kBodyCenter, kBodyHalf, kDefaultDomain), unite(neck, cavity)), "undercut_slot",
               "max(f_body, -min(f_neck, f_cavity)); neck half extents (0.1,0.5,0.4) at the top face, cavity half "
               "extents (0.45,0.5,0.15) centered 0.1 above the body center");
}

/// One vertical crack with two side chambers branching off at different
/// depths: a single opening that leaves several separate hidden areas.
inline ImplicitSurface make_multi_chamber_crack() {
  const ImplicitSurface crack = box(kBodyCenter + Vec3{0, 0, 0.3}, {0.08, 0.5, 0.6}, kDefaultDomain);
  const ImplicitSurface left = box(kBodyCenter + Vec3{-0.31, 0, 0.3}, {0.26, 0.45, 0.1}, kDefaultDomain);
  const ImplicitSurface right = box(kBodyCenter + Vec3{0.31, 0, -0.15}, {0.26, 0.45, 0.1}, kDefaultDomain);
  return named(subtract(box(kBodyCenter, kBodyHalf, kDefaultDomain), unite(crack, unite(left, right))),
               "multi_chamber_crack",
               "max(f_body, -min(f_crack, f_left, f_right)); crack half extents (0.08,0.5,0.6) down to 0.3 below "
               "the body center; left chamber 0.3 above and right chamber 0.15 below the body center, each half "
               "extents (0.26,0.45,0.1)");
}

}  // namespace shapes

/// The builtin test objects, keyed by name.
inline std::map<std::string, ImplicitSurface> builtin_shapes() {
  return {{"sphere", shapes::make_sphere()},
          {"box", shapes::make_box()},
          {"slotted_box", shapes::make_slotted_box()},
          {"undercut_slot", shapes::make_undercut_slot()},
          {"multi_chamber_crack", shapes::make_multi_chamber_crack()}};
}

inline ImplicitSurface builtin_shape(const std::string& name) {
  auto all = builtin_shapes();
  auto it = all.find(name);
  if (it == all.end()) throw Error("unknown shape '" + name + "'");
  return it->second;
}

}  // namespace halfcloud
