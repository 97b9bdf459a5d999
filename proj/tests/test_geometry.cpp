#include <doctest.h>

#include <cmath>

#include "icepose/geometry.hpp"

using namespace icepose;

TEST_CASE("compose: identity, translations, homogeneous-matrix oracle") {
  Rng rng(5);
  const RigidTransform t = random_rigid_transform(rng);
  const RigidTransform ct = compose(RigidTransform::identity(), t);
  CHECK((ct.rotation - t.rotation).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ct.translation - t.translation).norm() < 1e-15);

  const auto t1 = RigidTransform::translate({1, 2, 3});
  const auto t2 = RigidTransform::translate({-4, 0, 10});
  const RigidTransform both = compose(t1, t2);
  CHECK((both.translation - Vec3(-3, 2, 13)).norm() == 0.0);
  CHECK(both.rotation.isIdentity(0.0));

  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform a = random_rigid_transform(rng);
    const RigidTransform b = random_rigid_transform(rng);
    const Eigen::Matrix4d expected = a.homogeneous() * b.homogeneous();
    CHECK((compose(a, b).homogeneous() - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("invert: identity, pure translation, round-trip") {
  const RigidTransform inv_id = invert(RigidTransform::identity());
  CHECK(inv_id.rotation.isIdentity(0.0));
  CHECK(inv_id.translation.norm() == 0.0);

  const RigidTransform inv_t = invert(RigidTransform::translate({10, 0, 0}));
  CHECK((inv_t.translation - Vec3(-10, 0, 0)).norm() == 0.0);

  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform t = random_rigid_transform(rng);
    const RigidTransform round = compose(t, invert(t));
    CHECK((round.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(round.translation.norm() < 1e-9);
  }
}

TEST_CASE("normalize_pose implements the mesh-frame change of coordinates") {
  Rng rng(9);
  const RigidTransform s = random_rigid_transform(rng);
  const RigidTransform same = normalize_pose(s, RigidTransform::identity());
  CHECK((same.homogeneous() - s.homogeneous()).cwiseAbs().maxCoeff() < 1e-15);

  const Vec3 centroid(12, -7, 30);
  const Vec3 p(1, 2, 3);
  const RigidTransform shifted =
      normalize_pose(RigidTransform::translate(p), RigidTransform::translate(centroid));
  CHECK((shifted.translation - (p - centroid)).norm() < 1e-12);

  for (int trial = 0; trial < 1000; ++trial) {
    const RigidTransform t = random_rigid_transform(rng);
    const RigidTransform sw = random_rigid_transform(rng);
    const RigidTransform back = denormalize_pose(normalize_pose(sw, t), t);
    CHECK((back.homogeneous() - sw.homogeneous()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("rot6d: identity, round-trip, Gram-Schmidt scale invariance") {
  const Rot6d id = encode_rot6d(Mat3::Identity());
  CHECK(id.isApprox((Rot6d() << 1, 0, 0, 0, 1, 0).finished(), 0.0));
  CHECK(decode_rot6d(id).isIdentity(0.0));

  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const Mat3 r = random_rotation(rng);
    const Mat3 back = decode_rot6d(encode_rot6d(r));
    CHECK((back - r).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(rotation_drift(back) < 1e-9);
  }

  const Rot6d scaled = (Rot6d() << 2, 0, 0, 0, 5, 0).finished();
  CHECK(decode_rot6d(scaled).isIdentity(1e-15));
}

TEST_CASE("rot6d decode: noisy input still lands on a proper rotation") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    Rot6d v;
    for (int i = 0; i < 6; ++i) v[i] = rng.uniform(-1.5, 1.5);
    if (v.head<3>().norm() < 1e-6) continue;
    Mat3 r;
    try {
      r = decode_rot6d(v);
    } catch (const DegeneracyError&) {
      continue;  // parallel draws are legal inputs to reject
    }
    CHECK(rotation_drift(r) < 1e-9);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rot6d decode rejects degenerate input") {
  CHECK_THROWS_AS(decode_rot6d((Rot6d() << 0, 0, 0, 0, 1, 0).finished()), DegeneracyError);
  CHECK_THROWS_AS(decode_rot6d((Rot6d() << 1, 0, 0, 2, 0, 0).finished()), DegeneracyError);
}

TEST_CASE("per-axis orientation error examples") {
  const Mat3 id = Mat3::Identity();
  const Vec3 zero = per_axis_orientation_error_deg<double>(id, id);
  CHECK(zero.norm() == 0.0);

  Mat3 rz90;
  rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Vec3 about_z = per_axis_orientation_error_deg<double>(rz90, id);
  CHECK(about_z[0] == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(about_z[1] == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(about_z[2] == doctest::Approx(0.0).epsilon(1e-12));

  Mat3 rx180;
  rx180 << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const Vec3 about_x = per_axis_orientation_error_deg<double>(rx180, id);
  CHECK(about_x[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(about_x[1] == doctest::Approx(180.0).epsilon(1e-12));
  CHECK(about_x[2] == doctest::Approx(180.0).epsilon(1e-12));
}

TEST_CASE("per-axis orientation error: symmetric, zero iff equal") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 a = random_rotation(rng);
    const Mat3 b = random_rotation(rng);
    const Vec3 ab = per_axis_orientation_error_deg<double>(a, b);
    const Vec3 ba = per_axis_orientation_error_deg<double>(b, a);
    CHECK((ab - ba).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(per_axis_orientation_error_deg<double>(a, a).maxCoeff() < 1e-5);
    if (ab.maxCoeff() < 1e-7) CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("position error: Pythagorean example and rigid invariance") {
  CHECK(position_error_mm<double>({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(position_error_mm<double>({3, 4, 0}, {0, 0, 0}) == doctest::Approx(5.0).epsilon(1e-15));

  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 a, b;
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.uniform(-50, 50);
      b[i] = rng.uniform(-50, 50);
    }
    const RigidTransform t = random_rigid_transform(rng);
    const double before = position_error_mm<double>(a, b);
    const double after = position_error_mm<double>(t.apply(a), t.apply(b));
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("project_to_rotation repairs drifted rotations") {
  Rng rng(55);
  const Mat3 r = random_rotation(rng);
  Mat3 drifted = r;
  drifted(0, 1) += 1e-6;
  const Mat3 fixed = project_to_rotation(drifted);
  CHECK(rotation_drift(fixed) < 1e-12);
  CHECK((fixed - r).cwiseAbs().maxCoeff() < 1e-5);
}
