#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "icepose/errors.hpp"
#include "icepose/rng.hpp"

namespace icepose {

template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Rot6T = Eigen::Matrix<Scalar, 6, 1>;

using Mat3 = Mat3T<double>;
using Vec3 = Vec3T<double>;
using Rot6d = Rot6T<double>;

// Rigid motion: rotation (orthonormal, det +1) plus translation in mm.
// Applies as p' = rotation * p + translation.
template <typename Scalar>
struct RigidTransformT {
  Mat3T<Scalar> rotation = Mat3T<Scalar>::Identity();
  Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();

  static RigidTransformT identity() { return {}; }

  static RigidTransformT translate(const Vec3T<Scalar>& t) {
    return {Mat3T<Scalar>::Identity(), t};
  }

  Vec3T<Scalar> apply(const Vec3T<Scalar>& p) const { return rotation * p + translation; }

  Eigen::Matrix<Scalar, 4, 4> homogeneous() const {
    Eigen::Matrix<Scalar, 4, 4> h = Eigen::Matrix<Scalar, 4, 4>::Identity();
    h.template topLeftCorner<3, 3>() = rotation;
    h.template topRightCorner<3, 1>() = translation;
    return h;
  }
};

using RigidTransform = RigidTransformT<double>;

// Transducer state in some frame: position in mm plus orientation matrix.
template <typename Scalar>
struct PoseT {
  Vec3T<Scalar> position = Vec3T<Scalar>::Zero();
  Mat3T<Scalar> orientation = Mat3T<Scalar>::Identity();

  RigidTransformT<Scalar> transform() const { return {orientation, position}; }
};

using Pose = PoseT<double>;

template <typename Derived>
typename Derived::Scalar rotation_drift(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Mat3T<Scalar> gram = r.transpose() * r;
  return (gram - Mat3T<Scalar>::Identity()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r,
                 typename Derived::Scalar tol = typename Derived::Scalar(1e-9)) {
  using Scalar = typename Derived::Scalar;
  return rotation_drift(r) < tol && std::abs(r.determinant() - Scalar(1)) < tol;
}

// Nearest rotation in Frobenius norm (SVD projection, det forced to +1).
template <typename Derived>
Mat3T<typename Derived::Scalar> project_to_rotation(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Mat3T<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3T<Scalar> r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < Scalar(0)) {
    Mat3T<Scalar> flip = Mat3T<Scalar>::Identity();
    flip(2, 2) = Scalar(-1);
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

// (a ∘ b): apply b first, then a. Re-orthonormalizes if accumulated drift
// exceeds 1e-12.
template <typename Scalar>
RigidTransformT<Scalar> compose(const RigidTransformT<Scalar>& a,
                                const RigidTransformT<Scalar>& b) {
  RigidTransformT<Scalar> out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (rotation_drift(out.rotation) > Scalar(1e-12))
    out.rotation = project_to_rotation(out.rotation);
  return out;
}

template <typename Scalar>
RigidTransformT<Scalar> invert(const RigidTransformT<Scalar>& t) {
  RigidTransformT<Scalar> out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

// Anatomy-relative normalization: re-expresses a world-frame state in the
// mesh frame, s_mesh = t_world_to_mesh^-1 ∘ s_world.
template <typename Scalar>
RigidTransformT<Scalar> normalize_pose(const RigidTransformT<Scalar>& s_world,
                                       const RigidTransformT<Scalar>& t_world_to_mesh) {
  return compose(invert(t_world_to_mesh), s_world);
}

template <typename Scalar>
RigidTransformT<Scalar> denormalize_pose(const RigidTransformT<Scalar>& s_mesh,
                                         const RigidTransformT<Scalar>& t_world_to_mesh) {
  return compose(t_world_to_mesh, s_mesh);
}

// Continuous 6-number rotation encoding: the first two columns, flattened
// column-first as (c0, c1).
template <typename Derived>
Rot6T<typename Derived::Scalar> encode_rot6d(const Eigen::MatrixBase<Derived>& r) {
  Rot6T<typename Derived::Scalar> v;
  v.template head<3>() = r.col(0);
  v.template tail<3>() = r.col(1);
  return v;
}

// Gram-Schmidt decode: normalize c0, orthogonalize-normalize c1, c2 = c0 x c1.
// Throws DegeneracyError when c0 is (near) zero or the columns are (near)
// parallel; callers surface that rather than silently repairing.
template <typename Derived>
Mat3T<typename Derived::Scalar> decode_rot6d(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Vec3T<Scalar> a = v.template head<3>();
  const Vec3T<Scalar> b = v.template tail<3>();
  const Scalar an = a.norm();
  if (!(an > Scalar(1e-12))) throw DegeneracyError("decode_rot6d: first column is numerically zero");
  const Vec3T<Scalar> c0 = a / an;
  const Vec3T<Scalar> residual = b - c0.dot(b) * c0;
  const Scalar rn = residual.norm();
  if (!(rn > Scalar(1e-12) * std::max(Scalar(1), b.norm())))
    throw DegeneracyError("decode_rot6d: columns are numerically parallel");
  Mat3T<Scalar> r;
  r.col(0) = c0;
  r.col(1) = residual / rn;
  r.col(2) = c0.cross(residual / rn);
  return r;
}

// Angle in degrees between the k-th basis axes of the two rotations,
// acos(clamp(<r_pred e_k, r_true e_k>, -1, 1)), one value per axis in [0, 180].
template <typename Scalar>
Vec3T<Scalar> per_axis_orientation_error_deg(const Mat3T<Scalar>& r_pred,
                                             const Mat3T<Scalar>& r_true) {
  Vec3T<Scalar> out;
  constexpr Scalar rad2deg = Scalar(180) / Scalar(M_PI);
  for (int k = 0; k < 3; ++k) {
    const Scalar d = std::clamp(r_pred.col(k).dot(r_true.col(k)), Scalar(-1), Scalar(1));
    out[k] = std::acos(d) * rad2deg;
  }
  return out;
}

template <typename Scalar>
Scalar position_error_mm(const Vec3T<Scalar>& p_pred, const Vec3T<Scalar>& p_true) {
  return (p_pred - p_true).norm();
}

// Uniform random rotation from a normalized 4-normal quaternion; consumes a
// fixed number of draws from `rng`.
inline Mat3 random_rotation(Rng& rng) {
  double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  while (n < 1e-12) {  // astronomically unlikely; redraw keeps the stream defined
    w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    n = std::sqrt(w * w + x * x + y * y + z * z);
  }
  w /= n, x /= n, y /= n, z /= n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

inline RigidTransform random_rigid_transform(Rng& rng, double translation_range_mm = 100.0) {
  RigidTransform t;
  t.rotation = random_rotation(rng);
  for (int i = 0; i < 3; ++i)
    t.translation[i] = rng.uniform(-translation_range_mm, translation_range_mm);
  return t;
}

}  // namespace icepose
