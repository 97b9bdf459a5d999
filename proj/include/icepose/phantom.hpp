#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>

#include "icepose/geometry.hpp"

namespace icepose {

// --- SDF primitives (all distances in mm) ---

// Capsule (line segment a-b swept by a sphere of `radius`); exact.
template <typename Scalar>
Scalar sdf_capsule(const Vec3T<Scalar>& p, const Vec3T<Scalar>& a, const Vec3T<Scalar>& b,
                   Scalar radius) {
  const Vec3T<Scalar> pa = p - a;
  const Vec3T<Scalar> ba = b - a;
  const Scalar denom = ba.squaredNorm();
  const Scalar h = denom > Scalar(0)
                       ? std::clamp(pa.dot(ba) / denom, Scalar(0), Scalar(1))
                       : Scalar(0);
  return (pa - ba * h).norm() - radius;
}

// Ellipsoid via the scaled-space correction d = k0 (k0 - 1) / k1. A bounded
// approximation of the true distance (within ~5% for the aspect ratios used
// here); sign and zero set are exact.
template <typename Scalar>
Scalar sdf_ellipsoid(const Vec3T<Scalar>& p, const Vec3T<Scalar>& semi_axes) {
  const Vec3T<Scalar> q = p.cwiseQuotient(semi_axes);
  const Scalar k0 = q.norm();
  if (k0 < Scalar(1e-12)) return -semi_axes.minCoeff();
  const Scalar k1 = p.cwiseQuotient(semi_axes.cwiseProduct(semi_axes)).norm();
  return k0 * (k0 - Scalar(1)) / k1;
}

template <typename Scalar>
Scalar sdf_union(Scalar a, Scalar b) {
  return std::min(a, b);
}

// Ellipsoid with its own frame: center plus rotation (columns = local axes).
struct OrientedEllipsoid {
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();

  double sdf(const Vec3& p) const {
    return sdf_ellipsoid<double>(rotation.transpose() * (p - center), semi_axes);
  }
};

struct CapsuleShape {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::UnitZ();
  double radius = 1.0;

  double sdf(const Vec3& p) const { return sdf_capsule<double>(p, a, b, radius); }
};

// Seeded parametric cardiac-like scene: LA ellipsoid, four pulmonary-vein
// capsules on the LA surface, an LAA lobe offset anterolaterally, and a
// vertical esophagus capsule posterior to the LA. Identical seed and ranges
// give a bit-exact identical phantom.
struct AnatomyPhantom {
  std::uint64_t seed = 0;
  OrientedEllipsoid la;
  std::array<CapsuleShape, 4> pv;
  OrientedEllipsoid laa;
  CapsuleShape eso;
  double wall_thickness_mm = 3.0;
  Vec3 bounds_center = Vec3::Zero();    // = la.center
  double bounds_half_extent_mm = 60.0;  // 120 mm cube
};

// Generation ranges; every structure drawn from them must fit the bounding
// box or generate_phantom throws ConfigError.
//
// Subjects share a canonical anatomical orientation with a bounded random
// tilt, mirroring patient-aligned clinical world frames; a fully random
// orientation would make anatomy-relative pose unlearnable across subjects.
struct PhantomRanges {
  double la_semi_axis_min = 20.0, la_semi_axis_max = 26.0;
  double la_center_span = 40.0;  // LA center uniform in ±span per axis
  double la_max_tilt_deg = 8.0;  // subject tilt about a random axis
  double wall_min = 4.5, wall_max = 5.5;
  double pv_radius_min = 4.0, pv_radius_max = 6.5;
  double pv_length_min = 15.0, pv_length_max = 25.0;
  double laa_semi_axis_min = 10.0, laa_semi_axis_max = 13.0;
  double eso_radius_min = 5.5, eso_radius_max = 6.5;
  double eso_half_length_min = 30.0, eso_half_length_max = 45.0;
  double eso_gap_min = 6.0, eso_gap_max = 14.0;  // LA surface to esophagus axis
  double bounds_half_extent_mm = 60.0;
};

AnatomyPhantom generate_phantom(std::uint64_t seed, const PhantomRanges& ranges = {});

// Signed distance of the blood-pool union: negative inside any structure.
double sdf_eval(const AnatomyPhantom& phantom, const Vec3& point);

// Piecewise intensity map over the SDF: pool 0.05, wall band 0.9 within
// ±wall/2, background 0.35, with linear 0.5 mm blends at the band edges.
double intensity_at(const AnatomyPhantom& phantom, const Vec3& point);

inline constexpr double kPoolIntensity = 0.05;
inline constexpr double kWallIntensity = 0.9;
inline constexpr double kBackgroundIntensity = 0.35;
inline constexpr double kBlendWidthMm = 0.5;

// The same rigid motion applied to every primitive; supports equivariance
// checks and mesh-frame scene export.
AnatomyPhantom transformed(const AnatomyPhantom& phantom, const RigidTransform& t);

// Human-readable key = value serialization of all phantom parameters;
// round-trips bit-exactly.
void write_phantom_file(const AnatomyPhantom& phantom, const std::string& path);
AnatomyPhantom read_phantom_file(const std::string& path);

}  // namespace icepose
