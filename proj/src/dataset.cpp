#include "icepose/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "icepose/config.hpp"
#include "icepose/crc32.hpp"
#include "icepose/errors.hpp"

namespace icepose {

namespace {

constexpr std::int64_t kHeaderBytes = 64;

// Explicit little-endian framing, independent of host byte order.
void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::vector<unsigned char>& buf, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(buf, u);
}

void put_f64(std::vector<unsigned char>& buf, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float get_f32(const unsigned char* p) {
  const std::uint32_t u = get_u32(p);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | p[i];
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

std::vector<unsigned char> encode_record(const SampleRecord& rec) {
  std::vector<unsigned char> buf;
  buf.reserve(8 + 96 + rec.pixels.size() * 4 + 4);
  put_u32(buf, rec.subject_id);
  put_u32(buf, rec.sample_id);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) put_f64(buf, rec.pose_mesh.orientation(r, c));
  for (int i = 0; i < 3; ++i) put_f64(buf, rec.pose_mesh.position[i]);
  for (float px : rec.pixels) put_f32(buf, px);
  put_u32(buf, crc32(buf.data(), buf.size()));
  return buf;
}

SampleRecord decode_record(const unsigned char* p, std::int64_t record_bytes, int h, int w) {
  const std::int64_t payload = record_bytes - 4;
  const std::uint32_t stored = get_u32(p + payload);
  if (crc32(p, static_cast<size_t>(payload)) != stored)
    throw IoError("dataset record failed its CRC-32 check");
  SampleRecord rec;
  rec.subject_id = get_u32(p);
  rec.sample_id = get_u32(p + 4);
  const unsigned char* q = p + 8;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c, q += 8) rec.pose_mesh.orientation(r, c) = get_f64(q);
  for (int i = 0; i < 3; ++i, q += 8) rec.pose_mesh.position[i] = get_f64(q);
  rec.pixels.resize(static_cast<size_t>(h) * w);
  for (auto& px : rec.pixels) {
    px = get_f32(q);
    q += 4;
  }
  return rec;
}

std::vector<unsigned char> encode_header(const FanGeometry& fan, std::int64_t count) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kRecordMagic, kRecordMagic + 8);
  put_u32(buf, kRecordVersion);
  put_u32(buf, static_cast<std::uint32_t>(fan.image_h));
  put_u32(buf, static_cast<std::uint32_t>(fan.image_w));
  put_u32(buf, static_cast<std::uint32_t>(count));
  buf.resize(kHeaderBytes, 0);
  return buf;
}

// Uniform point inside an oriented ellipsoid (affine image of a uniform ball).
Vec3 uniform_point_inside(Rng& rng, const OrientedEllipsoid& e) {
  Vec3 dir(rng.normal(), rng.normal(), rng.normal());
  while (dir.norm() < 1e-12) dir = Vec3(rng.normal(), rng.normal(), rng.normal());
  dir.normalize();
  const double radius = std::cbrt(rng.uniform());
  const Vec3 ball = dir * radius;
  return e.center + e.rotation * ball.cwiseProduct(e.semi_axes);
}

double la_radial_extent(const OrientedEllipsoid& e, const Vec3& dir) {
  const Vec3 local = e.rotation.transpose() * dir;
  return 1.0 / local.cwiseQuotient(e.semi_axes).norm();
}

// Per-subject sample counts: uniform weights rescaled to the exact total,
// one sample guaranteed per subject, remainders assigned largest-first.
std::vector<int> distribute_counts(Rng& rng, int subjects, int total) {
  if (subjects <= 0) throw ConfigError("each split needs at least one subject");
  if (total < subjects)
    throw ConfigError("split has fewer samples than subjects (" + std::to_string(total) + " < " +
                      std::to_string(subjects) + ")");
  std::vector<double> weights(static_cast<size_t>(subjects));
  double sum = 0;
  for (double& w : weights) {
    w = rng.uniform(0.5, 1.5);
    sum += w;
  }
  const int extra_total = total - subjects;
  std::vector<int> counts(static_cast<size_t>(subjects), 1);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int i = 0; i < subjects; ++i) {
    const double ideal = extra_total * weights[static_cast<size_t>(i)] / sum;
    const int base = static_cast<int>(ideal);
    counts[static_cast<size_t>(i)] += base;
    assigned += base;
    remainders.emplace_back(ideal - base, i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (int k = 0; k < extra_total - assigned; ++k)
    counts[static_cast<size_t>(remainders[static_cast<size_t>(k)].second)] += 1;
  return counts;
}

void put_int_list(KeyValues& kv, const std::string& key, const std::vector<std::int64_t>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  kv.set(key, s);
}

std::vector<std::int64_t> take_int_list(const KeyValues& kv, const std::string& key) {
  std::istringstream in(kv.get_string(key));
  std::vector<std::int64_t> out;
  std::int64_t v;
  while (in >> v) out.push_back(v);
  return out;
}

void put_split(KeyValues& kv, const std::string& name, const SplitInfo& split) {
  kv.set(name + ".file", split.file);
  kv.set_int(name + ".total", split.total);
  std::vector<std::int64_t> ids, firsts, counts;
  for (const SubjectEntry& s : split.subjects) {
    ids.push_back(s.subject_id);
    firsts.push_back(s.first_record);
    counts.push_back(s.record_count);
  }
  put_int_list(kv, name + ".subject_ids", ids);
  put_int_list(kv, name + ".subject_first", firsts);
  put_int_list(kv, name + ".subject_count", counts);
}

SplitInfo take_split(const KeyValues& kv, const std::string& name) {
  SplitInfo split;
  split.file = kv.get_string(name + ".file");
  split.total = kv.get_int(name + ".total");
  const auto ids = take_int_list(kv, name + ".subject_ids");
  const auto firsts = take_int_list(kv, name + ".subject_first");
  const auto counts = take_int_list(kv, name + ".subject_count");
  if (ids.size() != firsts.size() || ids.size() != counts.size())
    throw IoError("manifest split `" + name + "` has inconsistent subject tables");
  for (size_t i = 0; i < ids.size(); ++i)
    split.subjects.push_back({static_cast<std::uint32_t>(ids[i]), firsts[i], counts[i]});
  return split;
}

void validate_split_against_file(const DatasetManifest& m, const SplitInfo& split,
                                 const std::string& name) {
  const std::string path = m.directory + "/" + split.file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing dataset file: " + path);
  unsigned char header[kHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(header), kHeaderBytes))
    throw IoError("truncated dataset header: " + path);
  if (std::memcmp(header, kRecordMagic, 8) != 0)
    throw IoError("bad magic in dataset file: " + path);
  if (get_u32(header + 8) != kRecordVersion)
    throw IoError("unsupported dataset version in: " + path);
  if (static_cast<int>(get_u32(header + 12)) != m.config.fan.image_h ||
      static_cast<int>(get_u32(header + 16)) != m.config.fan.image_w)
    throw IoError("dataset image dimensions disagree with the manifest: " + path);
  if (static_cast<std::int64_t>(get_u32(header + 20)) != split.total)
    throw IoError("record count in `" + name + "` header disagrees with the manifest");
  in.seekg(0, std::ios::end);
  const std::int64_t expected =
      kHeaderBytes + split.total * record_size_bytes(m.config.fan);
  if (static_cast<std::int64_t>(in.tellg()) != expected)
    throw IoError("dataset file size disagrees with the manifest: " + path);
  std::int64_t sum = 0;
  for (const SubjectEntry& s : split.subjects) {
    if (s.first_record != sum)
      throw IoError("manifest split `" + name + "` subject offsets are not contiguous");
    sum += s.record_count;
  }
  if (sum != split.total)
    throw IoError("manifest split `" + name + "` subject counts do not sum to the total");
}

}  // namespace

std::int64_t record_size_bytes(const FanGeometry& fan) {
  return 8 + 96 + static_cast<std::int64_t>(fan.image_h) * fan.image_w * 4 + 4;
}

const SplitInfo& DatasetManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ContractError("unknown split `" + name + "` (expected train, val, or test)");
}

std::uint64_t subject_phantom_seed(std::uint64_t master_seed, std::uint32_t subject_id) {
  return derive_seed(master_seed, 0x70680000ull + subject_id);
}

RigidTransform world_to_mesh(const AnatomyPhantom& phantom, bool rotational_alignment) {
  RigidTransform t = RigidTransform::translate(phantom.la.center);
  if (rotational_alignment) t.rotation = phantom.la.rotation;
  return t;
}

namespace {

// Uniform direction within the cone of half-angle `alpha` about `axis`.
Vec3 uniform_cone_direction(Rng& rng, const Vec3& axis, double alpha_rad) {
  const double cos_a = std::cos(alpha_rad);
  const double z = rng.uniform(cos_a, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vec3 local(s * std::cos(phi), s * std::sin(phi), z);
  const Vec3 ref = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 u = ref.cross(axis).normalized();
  const Vec3 v = axis.cross(u);
  return local.x() * u + local.y() * v + local.z() * axis;
}

}  // namespace

RigidTransform sample_pose(Rng& rng, const AnatomyPhantom& phantom, double shell_inner_mm,
                           double shell_outer_mm, double roll_range_deg,
                           double cone_half_angle_deg) {
  if (!(shell_inner_mm <= shell_outer_mm))
    throw ConfigError("pose shell: inner bound exceeds outer bound");
  if (!(roll_range_deg >= 0.0) || roll_range_deg > 180.0)
    throw ConfigError("pose roll_range_deg must lie in [0, 180]");
  if (!(cone_half_angle_deg > 0.0) || cone_half_angle_deg > 180.0)
    throw ConfigError("pose cone_half_angle_deg must lie in (0, 180]");

  const Vec3 dir =
      uniform_cone_direction(rng, kAccessDirection, cone_half_angle_deg * M_PI / 180.0);
  const double surface = la_radial_extent(phantom.la, dir);
  const double radius = rng.uniform(surface + shell_inner_mm, surface + shell_outer_mm);
  const Vec3 position = phantom.la.center + dir * radius;

  Vec3 target = uniform_point_inside(rng, phantom.la);
  Vec3 centerline = target - position;
  while (centerline.norm() < 1e-9) {
    target = uniform_point_inside(rng, phantom.la);
    centerline = target - position;
  }
  const Vec3 y = centerline.normalized();

  // Zero roll keeps the lateral axis horizontal (upright catheter); the
  // fallback handles a near-vertical centerline.
  Vec3 x0 = Vec3::UnitZ().cross(y);
  if (x0.norm() > 1e-6) {
    x0.normalize();
  } else {
    const Vec3 ref = std::abs(y.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    x0 = (ref - y * ref.dot(y)).normalized();
  }
  const double limit = roll_range_deg * M_PI / 180.0;
  const double roll = rng.uniform(-limit, limit);
  const Vec3 x = std::cos(roll) * x0 + std::sin(roll) * y.cross(x0);

  RigidTransform pose;
  pose.translation = position;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = x.cross(y);
  return pose;
}

DatasetManifest build_dataset(const DatasetConfig& config, const std::string& out_dir) {
  validate_fan(config.fan);
  check_patch_compatible(config.fan, config.patch);
  if (!(config.shell_inner_mm <= config.shell_outer_mm))
    throw ConfigError("pose shell: inner bound exceeds outer bound");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create dataset directory: " + out_dir);

  DatasetManifest manifest;
  manifest.config = config;
  manifest.directory = out_dir;

  struct Plan {
    const char* name;
    int subjects;
    int samples;
    SplitInfo* out;
  };
  Plan plans[3] = {{"train", config.subjects_train, config.samples_train, &manifest.train},
                   {"val", config.subjects_val, config.samples_val, &manifest.val},
                   {"test", config.subjects_test, config.samples_test, &manifest.test}};

  std::uint32_t next_subject = 0;
  for (int pi = 0; pi < 3; ++pi) {
    Plan& plan = plans[pi];
    Rng count_rng(derive_seed(config.master_seed, 0x636e7400ull + static_cast<unsigned>(pi)));
    const std::vector<int> counts = distribute_counts(count_rng, plan.subjects, plan.samples);

    SplitInfo& split = *plan.out;
    split.file = std::string(plan.name) + ".icepose";
    split.total = plan.samples;

    const std::string path = out_dir + "/" + split.file;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset file: " + path);
    const auto header = encode_header(config.fan, plan.samples);
    out.write(reinterpret_cast<const char*>(header.data()),
              static_cast<std::streamsize>(header.size()));

    std::int64_t first = 0;
    for (int si = 0; si < plan.subjects; ++si, ++next_subject) {
      const std::uint32_t subject_id = next_subject;
      const AnatomyPhantom phantom =
          generate_phantom(subject_phantom_seed(config.master_seed, subject_id),
                           config.phantom_ranges);
      const RigidTransform to_mesh = world_to_mesh(phantom, config.rotational_alignment);
      Rng pose_rng(derive_seed(config.master_seed, 0x706f0000ull + subject_id));

      const int n = counts[static_cast<size_t>(si)];
      for (int k = 0; k < n; ++k) {
        const RigidTransform pose_world =
            sample_pose(pose_rng, phantom, config.shell_inner_mm, config.shell_outer_mm,
                        config.roll_range_deg, config.cone_half_angle_deg);
        const std::uint64_t speckle_seed =
            derive_seed(derive_seed(config.master_seed, 0x73700000ull + subject_id),
                        static_cast<std::uint64_t>(k));
        const FanImage img = render_fan(phantom, pose_world, config.fan, speckle_seed);
        const RigidTransform pose_mesh = normalize_pose(pose_world, to_mesh);

        if (pose_mesh.translation.cwiseAbs().maxCoeff() >
            1.5 * phantom.bounds_half_extent_mm)
          throw ContractError("normalized pose escaped 1.5x the phantom bounding box");

        SampleRecord rec;
        rec.subject_id = subject_id;
        rec.sample_id = static_cast<std::uint32_t>(k);
        rec.pose_mesh.position = pose_mesh.translation;
        rec.pose_mesh.orientation = pose_mesh.rotation;
        rec.pixels.resize(img.pixels.size());
        for (size_t i = 0; i < img.pixels.size(); ++i)
          rec.pixels[i] = static_cast<float>(img.pixels[i]);
        const auto bytes = encode_record(rec);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
      }
      split.subjects.push_back({subject_id, first, n});
      first += n;
    }
    if (!out) throw IoError("write failed: " + path);
  }

  // Manifest file.
  KeyValues kv;
  kv.set("format", "icepose-manifest");
  kv.set_int("version", manifest.version);
  kv.set_u64("master_seed", config.master_seed);
  kv.set_int("subjects.train", config.subjects_train);
  kv.set_int("subjects.val", config.subjects_val);
  kv.set_int("subjects.test", config.subjects_test);
  kv.set_int("samples.train", config.samples_train);
  kv.set_int("samples.val", config.samples_val);
  kv.set_int("samples.test", config.samples_test);
  kv.set_double("fan.sector_angle_deg", config.fan.sector_angle_deg);
  kv.set_double("fan.depth_mm", config.fan.depth_mm);
  kv.set_int("fan.ray_count", config.fan.ray_count);
  kv.set_int("fan.samples_per_ray", config.fan.samples_per_ray);
  kv.set_int("fan.image_h", config.fan.image_h);
  kv.set_int("fan.image_w", config.fan.image_w);
  kv.set_double("pose.shell_inner_mm", config.shell_inner_mm);
  kv.set_double("pose.shell_outer_mm", config.shell_outer_mm);
  kv.set_double("pose.roll_range_deg", config.roll_range_deg);
  kv.set_double("pose.cone_half_angle_deg", config.cone_half_angle_deg);
  kv.set_int("patch", config.patch);
  kv.set(std::string("normalize.rotational"), config.rotational_alignment ? "true" : "false");
  const PhantomRanges& pr = config.phantom_ranges;
  kv.set_double("phantom.la_semi_axis_min", pr.la_semi_axis_min);
  kv.set_double("phantom.la_semi_axis_max", pr.la_semi_axis_max);
  kv.set_double("phantom.la_center_span", pr.la_center_span);
  kv.set_double("phantom.la_max_tilt_deg", pr.la_max_tilt_deg);
  kv.set_double("phantom.wall_min", pr.wall_min);
  kv.set_double("phantom.wall_max", pr.wall_max);
  kv.set_double("phantom.pv_radius_min", pr.pv_radius_min);
  kv.set_double("phantom.pv_radius_max", pr.pv_radius_max);
  kv.set_double("phantom.pv_length_min", pr.pv_length_min);
  kv.set_double("phantom.pv_length_max", pr.pv_length_max);
  kv.set_double("phantom.laa_semi_axis_min", pr.laa_semi_axis_min);
  kv.set_double("phantom.laa_semi_axis_max", pr.laa_semi_axis_max);
  kv.set_double("phantom.eso_radius_min", pr.eso_radius_min);
  kv.set_double("phantom.eso_radius_max", pr.eso_radius_max);
  kv.set_double("phantom.eso_half_length_min", pr.eso_half_length_min);
  kv.set_double("phantom.eso_half_length_max", pr.eso_half_length_max);
  kv.set_double("phantom.eso_gap_min", pr.eso_gap_min);
  kv.set_double("phantom.eso_gap_max", pr.eso_gap_max);
  kv.set_double("phantom.bounds_half_extent_mm", pr.bounds_half_extent_mm);
  put_split(kv, "train", manifest.train);
  put_split(kv, "val", manifest.val);
  put_split(kv, "test", manifest.test);
  kv.write_file(out_dir + "/manifest.txt");

  return manifest;
}

DatasetManifest load_manifest(const std::string& dir) {
  const KeyValues kv = KeyValues::parse_file(dir + "/manifest.txt");
  if (kv.get_string("format", "") != "icepose-manifest")
    throw IoError("not a dataset manifest: " + dir + "/manifest.txt");
  DatasetManifest m;
  m.version = static_cast<int>(kv.get_int("version"));
  if (m.version != 1) throw IoError("unsupported manifest version");
  m.directory = dir;

  DatasetConfig& c = m.config;
  c.master_seed = kv.get_u64("master_seed");
  c.subjects_train = static_cast<int>(kv.get_int("subjects.train"));
  c.subjects_val = static_cast<int>(kv.get_int("subjects.val"));
  c.subjects_test = static_cast<int>(kv.get_int("subjects.test"));
  c.samples_train = static_cast<int>(kv.get_int("samples.train"));
  c.samples_val = static_cast<int>(kv.get_int("samples.val"));
  c.samples_test = static_cast<int>(kv.get_int("samples.test"));
  c.fan.sector_angle_deg = kv.get_double("fan.sector_angle_deg");
  c.fan.depth_mm = kv.get_double("fan.depth_mm");
  c.fan.ray_count = static_cast<int>(kv.get_int("fan.ray_count"));
  c.fan.samples_per_ray = static_cast<int>(kv.get_int("fan.samples_per_ray"));
  c.fan.image_h = static_cast<int>(kv.get_int("fan.image_h"));
  c.fan.image_w = static_cast<int>(kv.get_int("fan.image_w"));
  c.shell_inner_mm = kv.get_double("pose.shell_inner_mm");
  c.shell_outer_mm = kv.get_double("pose.shell_outer_mm");
  c.roll_range_deg = kv.get_double("pose.roll_range_deg");
  c.cone_half_angle_deg = kv.get_double("pose.cone_half_angle_deg");
  c.patch = static_cast<int>(kv.get_int("patch"));
  c.rotational_alignment = kv.get_bool("normalize.rotational", false);
  PhantomRanges& pr = c.phantom_ranges;
  pr.la_semi_axis_min = kv.get_double("phantom.la_semi_axis_min");
  pr.la_semi_axis_max = kv.get_double("phantom.la_semi_axis_max");
  pr.la_center_span = kv.get_double("phantom.la_center_span");
  pr.la_max_tilt_deg = kv.get_double("phantom.la_max_tilt_deg");
  pr.wall_min = kv.get_double("phantom.wall_min");
  pr.wall_max = kv.get_double("phantom.wall_max");
  pr.pv_radius_min = kv.get_double("phantom.pv_radius_min");
  pr.pv_radius_max = kv.get_double("phantom.pv_radius_max");
  pr.pv_length_min = kv.get_double("phantom.pv_length_min");
  pr.pv_length_max = kv.get_double("phantom.pv_length_max");
  pr.laa_semi_axis_min = kv.get_double("phantom.laa_semi_axis_min");
  pr.laa_semi_axis_max = kv.get_double("phantom.laa_semi_axis_max");
  pr.eso_radius_min = kv.get_double("phantom.eso_radius_min");
  pr.eso_radius_max = kv.get_double("phantom.eso_radius_max");
  pr.eso_half_length_min = kv.get_double("phantom.eso_half_length_min");
  pr.eso_half_length_max = kv.get_double("phantom.eso_half_length_max");
  pr.eso_gap_min = kv.get_double("phantom.eso_gap_min");
  pr.eso_gap_max = kv.get_double("phantom.eso_gap_max");
  pr.bounds_half_extent_mm = kv.get_double("phantom.bounds_half_extent_mm");

  m.train = take_split(kv, "train");
  m.val = take_split(kv, "val");
  m.test = take_split(kv, "test");

  // Splits must be disjoint by subject.
  std::vector<std::uint32_t> seen;
  for (const SplitInfo* s : {&m.train, &m.val, &m.test})
    for (const SubjectEntry& e : s->subjects) seen.push_back(e.subject_id);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw IoError("manifest splits share a subject id");

  validate_split_against_file(m, m.train, "train");
  validate_split_against_file(m, m.val, "val");
  validate_split_against_file(m, m.test, "test");
  return m;
}

SampleRecord read_record(const DatasetManifest& manifest, const std::string& split,
                         std::int64_t index) {
  const SplitInfo& info = manifest.split(split);
  if (index < 0 || index >= info.total)
    throw ContractError("record index " + std::to_string(index) + " out of range for split `" +
                        split + "` of " + std::to_string(info.total));
  const std::string path = manifest.directory + "/" + info.file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  const std::int64_t rec_bytes = record_size_bytes(manifest.config.fan);
  std::vector<unsigned char> buf(static_cast<size_t>(rec_bytes));
  in.seekg(kHeaderBytes + index * rec_bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), rec_bytes))
    throw IoError("truncated dataset record in: " + path);
  return decode_record(buf.data(), rec_bytes, manifest.config.fan.image_h,
                       manifest.config.fan.image_w);
}

Batch load_batch(const DatasetManifest& manifest, const std::string& split,
                 const std::vector<std::int64_t>& indices) {
  const SplitInfo& info = manifest.split(split);
  const int h = manifest.config.fan.image_h;
  const int w = manifest.config.fan.image_w;
  const int b = static_cast<int>(indices.size());
  if (b == 0) throw ContractError("load_batch requires at least one index");

  const std::string path = manifest.directory + "/" + info.file;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  const std::int64_t rec_bytes = record_size_bytes(manifest.config.fan);
  std::vector<unsigned char> buf(static_cast<size_t>(rec_bytes));

  Batch batch;
  batch.images = autodiff::Tensor::zeros({b, h, w});
  batch.target_pos = autodiff::Tensor::zeros({b, 3});
  batch.target_rot6d = autodiff::Tensor::zeros({b, 6});

  for (int i = 0; i < b; ++i) {
    const std::int64_t index = indices[static_cast<size_t>(i)];
    if (index < 0 || index >= info.total)
      throw ContractError("record index " + std::to_string(index) +
                          " out of range for split `" + split + "`");
    in.seekg(kHeaderBytes + index * rec_bytes);
    if (!in.read(reinterpret_cast<char*>(buf.data()), rec_bytes))
      throw IoError("truncated dataset record in: " + path);
    const SampleRecord rec = decode_record(buf.data(), rec_bytes, h, w);

    double* img = batch.images.data() + static_cast<Eigen::Index>(i) * h * w;
    for (size_t px = 0; px < rec.pixels.size(); ++px)
      img[px] = static_cast<double>(rec.pixels[px]);
    for (int k = 0; k < 3; ++k) batch.target_pos.at(i, k) = rec.pose_mesh.position[k];
    const Rot6d r6 = encode_rot6d(rec.pose_mesh.orientation);
    for (int k = 0; k < 6; ++k) batch.target_rot6d.at(i, k) = r6[k];
    batch.subject_ids.push_back(rec.subject_id);
    batch.sample_ids.push_back(rec.sample_id);
  }
  return batch;
}

}  // namespace icepose
