#include "icepose/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "icepose/config.hpp"
#include "icepose/errors.hpp"
#include "icepose/rng.hpp"

namespace icepose {

namespace {

// Radial extent of an oriented ellipsoid from its center along unit `dir`.
double radial_extent(const OrientedEllipsoid& e, const Vec3& dir) {
  const Vec3 local = e.rotation.transpose() * dir;
  return 1.0 / local.cwiseQuotient(e.semi_axes).norm();
}

Vec3 surface_point(const OrientedEllipsoid& e, const Vec3& dir) {
  return e.center + dir * radial_extent(e, dir);
}

Vec3 jittered_unit(Rng& rng, const Vec3& base, double jitter) {
  Vec3 d = base.normalized();
  for (int i = 0; i < 3; ++i) d[i] += rng.uniform(-jitter, jitter);
  return d.normalized();
}

void check_range(double lo, double hi, const char* name) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError(std::string("phantom range `") + name + "` is degenerate (min > max)");
}

void check_positive(double v, const char* name) {
  if (!(v > 0)) throw ConfigError(std::string("phantom range `") + name + "` must be positive");
}

void require_inside(const Vec3& lo, const Vec3& hi, const Vec3& center, double half,
                    const char* what) {
  const Vec3 bmin = center.array() - half;
  const Vec3 bmax = center.array() + half;
  if ((lo.array() < bmin.array()).any() || (hi.array() > bmax.array()).any())
    throw ConfigError(std::string("phantom structure `") + what +
                      "` exceeds the declared bounding box");
}

void require_ellipsoid_inside(const OrientedEllipsoid& e, const Vec3& center, double half,
                              const char* what) {
  // Tight AABB of a rotated ellipsoid: half-width along world axis k is
  // ||row_k(R * diag(a))||.
  Vec3 hw;
  for (int k = 0; k < 3; ++k)
    hw[k] = (e.rotation.row(k).transpose().array() * e.semi_axes.array()).matrix().norm();
  require_inside(e.center - hw, e.center + hw, center, half, what);
}

void require_capsule_inside(const CapsuleShape& c, const Vec3& center, double half,
                            const char* what) {
  const Vec3 lo = c.a.cwiseMin(c.b).array() - c.radius;
  const Vec3 hi = c.a.cwiseMax(c.b).array() + c.radius;
  require_inside(lo, hi, center, half, what);
}

}  // namespace

AnatomyPhantom generate_phantom(std::uint64_t seed, const PhantomRanges& ranges) {
  check_range(ranges.la_semi_axis_min, ranges.la_semi_axis_max, "la_semi_axis");
  check_range(ranges.wall_min, ranges.wall_max, "wall");
  check_range(ranges.pv_radius_min, ranges.pv_radius_max, "pv_radius");
  check_range(ranges.pv_length_min, ranges.pv_length_max, "pv_length");
  check_range(ranges.laa_semi_axis_min, ranges.laa_semi_axis_max, "laa_semi_axis");
  check_range(ranges.eso_radius_min, ranges.eso_radius_max, "eso_radius");
  check_range(ranges.eso_half_length_min, ranges.eso_half_length_max, "eso_half_length");
  check_range(ranges.eso_gap_min, ranges.eso_gap_max, "eso_gap");
  check_positive(ranges.la_semi_axis_min, "la_semi_axis_min");
  check_positive(ranges.bounds_half_extent_mm, "bounds_half_extent_mm");
  if (ranges.la_center_span < 0) throw ConfigError("phantom la_center_span must be >= 0");

  if (!(ranges.la_max_tilt_deg >= 0))
    throw ConfigError("phantom la_max_tilt_deg must be >= 0");

  Rng rng(derive_seed(seed, 0x70686172ull));  // phantom stream

  // The anatomy is first built in a canonical frame (LA at the origin,
  // posterior = -y, superior = +z), then tilted and offset per subject.
  AnatomyPhantom ph;
  ph.seed = seed;
  ph.bounds_half_extent_mm = ranges.bounds_half_extent_mm;
  ph.la.center = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    ph.la.semi_axes[i] = rng.uniform(ranges.la_semi_axis_min, ranges.la_semi_axis_max);
  ph.la.rotation = Mat3::Identity();
  ph.bounds_center = ph.la.center;

  ph.wall_thickness_mm = rng.uniform(ranges.wall_min, ranges.wall_max);

  // Pulmonary veins: four capsules rooted on the posterior-superior LA
  // surface, pointing outward.
  const Vec3 pv_base[4] = {
      Vec3(0.75, -0.45, 0.55), Vec3(-0.75, -0.45, 0.55),
      Vec3(0.80, -0.50, -0.40), Vec3(-0.80, -0.50, -0.40)};
  for (int k = 0; k < 4; ++k) {
    const Vec3 dir = jittered_unit(rng, pv_base[k], 0.12);
    const double len = rng.uniform(ranges.pv_length_min, ranges.pv_length_max);
    const double radius = rng.uniform(ranges.pv_radius_min, ranges.pv_radius_max);
    CapsuleShape& c = ph.pv[static_cast<size_t>(k)];
    c.a = surface_point(ph.la, dir) - dir * 2.0;  // rooted just inside the wall
    c.b = c.a + jittered_unit(rng, dir, 0.08) * len;
    c.radius = radius;
  }

  // LAA lobe: ellipsoid straddling the anterolateral LA surface, mildly
  // tilted relative to its attachment direction.
  {
    const Vec3 dir = jittered_unit(rng, Vec3(-0.65, 0.70, 0.30), 0.10);
    for (int i = 0; i < 3; ++i)
      ph.laa.semi_axes[i] = rng.uniform(ranges.laa_semi_axis_min, ranges.laa_semi_axis_max);
    ph.laa.center = surface_point(ph.la, dir) + dir * (0.45 * ph.laa.semi_axes.mean());
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-12) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    const double angle = rng.uniform(0.0, 30.0 * M_PI / 180.0);
    ph.laa.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  }

  // Esophagus: vertical capsule behind the posterior LA wall.
  {
    const double gap = rng.uniform(ranges.eso_gap_min, ranges.eso_gap_max);
    const double radius = rng.uniform(ranges.eso_radius_min, ranges.eso_radius_max);
    const double half_len =
        rng.uniform(ranges.eso_half_length_min, ranges.eso_half_length_max);
    const Vec3 posterior = Vec3(0, -1, 0);
    const Vec3 wall = surface_point(ph.la, posterior);
    const Vec3 axis = wall + posterior * (gap + radius);
    ph.eso.a = axis - Vec3(0, 0, half_len);
    ph.eso.b = axis + Vec3(0, 0, half_len);
    ph.eso.radius = radius;
  }

  // Per-subject placement: bounded tilt about a random axis plus a world
  // offset of the LA center.
  {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    while (axis.norm() < 1e-12) axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    const double angle = rng.uniform(0.0, ranges.la_max_tilt_deg * M_PI / 180.0);
    RigidTransform subject;
    subject.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    for (int i = 0; i < 3; ++i)
      subject.translation[i] = rng.uniform(-ranges.la_center_span, ranges.la_center_span);
    ph = transformed(ph, subject);
    ph.seed = seed;
  }

  const Vec3& bc = ph.bounds_center;
  const double half = ph.bounds_half_extent_mm;
  require_ellipsoid_inside(ph.la, bc, half, "la");
  require_ellipsoid_inside(ph.laa, bc, half, "laa");
  for (int k = 0; k < 4; ++k)
    require_capsule_inside(ph.pv[static_cast<size_t>(k)], bc, half,
                           (std::string("pv") + std::to_string(k)).c_str());
  require_capsule_inside(ph.eso, bc, half, "eso");
  return ph;
}

double sdf_eval(const AnatomyPhantom& phantom, const Vec3& point) {
  double d = phantom.la.sdf(point);
  for (const CapsuleShape& c : phantom.pv) d = sdf_union(d, c.sdf(point));
  d = sdf_union(d, phantom.laa.sdf(point));
  d = sdf_union(d, phantom.eso.sdf(point));
  return d;
}

double intensity_at(const AnatomyPhantom& phantom, const Vec3& point) {
  const double s = sdf_eval(phantom, point);
  const double w2 = 0.5 * phantom.wall_thickness_mm;
  const double b2 = 0.5 * kBlendWidthMm;
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  if (s <= -w2 - b2) return kPoolIntensity;
  if (s < -w2 + b2) return lerp(kPoolIntensity, kWallIntensity, (s + w2 + b2) / (2.0 * b2));
  if (s <= w2 - b2) return kWallIntensity;
  if (s < w2 + b2) return lerp(kWallIntensity, kBackgroundIntensity, (s - w2 + b2) / (2.0 * b2));
  return kBackgroundIntensity;
}

AnatomyPhantom transformed(const AnatomyPhantom& phantom, const RigidTransform& t) {
  AnatomyPhantom out = phantom;
  out.la.center = t.apply(phantom.la.center);
  out.la.rotation = t.rotation * phantom.la.rotation;
  out.laa.center = t.apply(phantom.laa.center);
  out.laa.rotation = t.rotation * phantom.laa.rotation;
  for (size_t k = 0; k < phantom.pv.size(); ++k) {
    out.pv[k].a = t.apply(phantom.pv[k].a);
    out.pv[k].b = t.apply(phantom.pv[k].b);
  }
  out.eso.a = t.apply(phantom.eso.a);
  out.eso.b = t.apply(phantom.eso.b);
  // The box stays axis-aligned; after a rotation it is a loose cover.
  out.bounds_center = t.apply(phantom.bounds_center);
  return out;
}

namespace {

void put_vec3(KeyValues& kv, const std::string& key, const Vec3& v) {
  kv.set_doubles(key, v.data(), 3);
}

void put_mat3(KeyValues& kv, const std::string& key, const Mat3& m) {
  double row_major[9];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) row_major[r * 3 + c] = m(r, c);
  kv.set_doubles(key, row_major, 9);
}

Vec3 take_vec3(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_doubles(key, 3);
  return Vec3(v[0], v[1], v[2]);
}

Mat3 take_mat3(const KeyValues& kv, const std::string& key) {
  const auto v = kv.get_doubles(key, 9);
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[static_cast<size_t>(r * 3 + c)];
  return m;
}

void put_ellipsoid(KeyValues& kv, const std::string& prefix, const OrientedEllipsoid& e) {
  put_vec3(kv, prefix + ".center", e.center);
  put_vec3(kv, prefix + ".semi_axes", e.semi_axes);
  put_mat3(kv, prefix + ".rotation", e.rotation);
}

OrientedEllipsoid take_ellipsoid(const KeyValues& kv, const std::string& prefix) {
  OrientedEllipsoid e;
  e.center = take_vec3(kv, prefix + ".center");
  e.semi_axes = take_vec3(kv, prefix + ".semi_axes");
  e.rotation = take_mat3(kv, prefix + ".rotation");
  return e;
}

void put_capsule(KeyValues& kv, const std::string& prefix, const CapsuleShape& c) {
  put_vec3(kv, prefix + ".a", c.a);
  put_vec3(kv, prefix + ".b", c.b);
  kv.set_double(prefix + ".radius", c.radius);
}

CapsuleShape take_capsule(const KeyValues& kv, const std::string& prefix) {
  CapsuleShape c;
  c.a = take_vec3(kv, prefix + ".a");
  c.b = take_vec3(kv, prefix + ".b");
  c.radius = kv.get_double(prefix + ".radius");
  return c;
}

}  // namespace

void write_phantom_file(const AnatomyPhantom& phantom, const std::string& path) {
  KeyValues kv;
  kv.set("format", "icepose-phantom");
  kv.set_int("version", 1);
  kv.set_u64("seed", phantom.seed);
  put_ellipsoid(kv, "la", phantom.la);
  for (size_t k = 0; k < phantom.pv.size(); ++k)
    put_capsule(kv, "pv" + std::to_string(k), phantom.pv[k]);
  put_ellipsoid(kv, "laa", phantom.laa);
  put_capsule(kv, "eso", phantom.eso);
  kv.set_double("wall_thickness_mm", phantom.wall_thickness_mm);
  put_vec3(kv, "bounds.center", phantom.bounds_center);
  kv.set_double("bounds.half_extent_mm", phantom.bounds_half_extent_mm);
  kv.write_file(path);
}

AnatomyPhantom read_phantom_file(const std::string& path) {
  const KeyValues kv = KeyValues::parse_file(path);
  if (kv.get_string("format", "") != "icepose-phantom")
    throw IoError("not a phantom file: " + path);
  if (kv.get_int("version") != 1)
    throw IoError("unsupported phantom file version in " + path);
  AnatomyPhantom ph;
  ph.seed = kv.get_u64("seed");
  ph.la = take_ellipsoid(kv, "la");
  for (size_t k = 0; k < ph.pv.size(); ++k)
    ph.pv[k] = take_capsule(kv, "pv" + std::to_string(k));
  ph.laa = take_ellipsoid(kv, "laa");
  ph.eso = take_capsule(kv, "eso");
  ph.wall_thickness_mm = kv.get_double("wall_thickness_mm");
  ph.bounds_center = take_vec3(kv, "bounds.center");
  ph.bounds_half_extent_mm = kv.get_double("bounds.half_extent_mm");
  return ph;
}

}  // namespace icepose
