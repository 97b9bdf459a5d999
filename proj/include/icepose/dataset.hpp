#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icepose/fan.hpp"
#include "icepose/geometry.hpp"
#include "icepose/phantom.hpp"
#include "icepose/tensor.hpp"

namespace icepose {

// Everything needed to regenerate a dataset bit-exactly.
struct DatasetConfig {
  std::uint64_t master_seed = 42;
  int subjects_train = 16, subjects_val = 2, subjects_test = 2;
  int samples_train = 512, samples_val = 64, samples_test = 64;
  FanGeometry fan;
  PhantomRanges phantom_ranges;
  double shell_inner_mm = -10.0;  // sampling shell, relative to the LA surface
  double shell_outer_mm = 30.0;
  double roll_range_deg = 2.0;  // roll about the centerline, uniform in +-range
  // Transducer directions stay within a cone around the canonical access
  // direction, mirroring the confined clinical vantage; 180 opens the full
  // sphere.
  double cone_half_angle_deg = 10.0;
  int patch = 16;  // ViT patch size the images must tile into
  bool rotational_alignment = false;
};

struct SubjectEntry {
  std::uint32_t subject_id = 0;
  std::int64_t first_record = 0;
  std::int64_t record_count = 0;
};

struct SplitInfo {
  std::string file;  // records file, relative to the dataset directory
  std::vector<SubjectEntry> subjects;
  std::int64_t total = 0;
};

struct DatasetManifest {
  int version = 1;
  DatasetConfig config;
  SplitInfo train, val, test;
  std::string directory;  // where the files live; set on build/load

  const SplitInfo& split(const std::string& name) const;
};

// One stored sample: scan-converted image plus the mesh-frame pose.
struct SampleRecord {
  std::uint32_t subject_id = 0;
  std::uint32_t sample_id = 0;
  Pose pose_mesh;
  std::vector<float> pixels;  // row-major H x W
};

struct Batch {
  autodiff::Tensor images;       // [B x H x W]
  autodiff::Tensor target_pos;   // [B x 3], mm, mesh frame
  autodiff::Tensor target_rot6d; // [B x 6]
  std::vector<std::uint32_t> subject_ids;
  std::vector<std::uint32_t> sample_ids;
};

// Direction from the LA center toward the assumed catheter access region.
// Component-balanced so that normalized positions stay well inside the
// quarter bounding box even with a narrow access cone.
inline const Vec3 kAccessDirection = Vec3(1.0, 1.0, -1.0).normalized();

// Transducer pose for one synthetic acquisition: direction uniform within a
// cone about kAccessDirection, radius uniform in a shell around the LA
// surface ([surface + inner, surface + outer]), centerline (local +y) aimed
// at a uniform point inside the LA, then a random roll about the centerline,
// uniform in +-roll_range_deg. The default roll range reflects a roughly
// upright catheter; 180/180 opens the full sphere and a free roll.
RigidTransform sample_pose(Rng& rng, const AnatomyPhantom& phantom,
                           double shell_inner_mm = -10.0, double shell_outer_mm = 30.0,
                           double roll_range_deg = 2.0, double cone_half_angle_deg = 10.0);

// Per-subject phantom seed; exposed so tools can rebuild a subject's anatomy
// from the manifest alone.
std::uint64_t subject_phantom_seed(std::uint64_t master_seed, std::uint32_t subject_id);

// Mesh-frame normalization transform for a subject (translation to the LA
// center; optionally the LA orientation as well).
RigidTransform world_to_mesh(const AnatomyPhantom& phantom, bool rotational_alignment);

// Generates phantoms, samples poses, renders fans, normalizes poses, and
// writes one records file per split plus `manifest.txt` under `out_dir`.
DatasetManifest build_dataset(const DatasetConfig& config, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& dir);

SampleRecord read_record(const DatasetManifest& manifest, const std::string& split,
                         std::int64_t index);

Batch load_batch(const DatasetManifest& manifest, const std::string& split,
                 const std::vector<std::int64_t>& indices);

// Record framing (little-endian):
//   header, 64 bytes: "ICEPOSE1", u32 version, u32 H, u32 W, u32 count, zeros
//   record: u32 subject_id, u32 sample_id, 12 x f64 pose (rotation row-major,
//           then translation), H*W x f32 pixels, u32 CRC-32 of the record
//           bytes before the checksum.
inline constexpr char kRecordMagic[9] = "ICEPOSE1";
inline constexpr std::uint32_t kRecordVersion = 1;

std::int64_t record_size_bytes(const FanGeometry& fan);

}  // namespace icepose
