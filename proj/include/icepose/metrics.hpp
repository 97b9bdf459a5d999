#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icepose/dataset.hpp"
#include "icepose/geometry.hpp"
#include "icepose/vit.hpp"

namespace icepose {

struct PerSampleError {
  std::int64_t index = 0;
  std::uint32_t subject_id = 0;
  std::uint32_t sample_id = 0;
  bool ok = true;  // false when the orientation decode was degenerate
  double position_error_mm = 0.0;
  Vec3 orientation_error_deg = Vec3::Zero();
};

// Mean and population std of positional error (mm) and per-axis orientation
// error (degrees). Failed decodes are excluded from the aggregates but kept
// in the table and counted.
struct MetricsReport {
  double mean_position_error_mm = 0.0;
  double std_position_error_mm = 0.0;
  Vec3 mean_orientation_error_deg = Vec3::Zero();
  Vec3 std_orientation_error_deg = Vec3::Zero();
  std::int64_t n_samples = 0;
  std::int64_t n_decode_failures = 0;
  std::vector<PerSampleError> per_sample;
};

// Aggregation core; also the path test hooks use to feed synthetic errors.
MetricsReport aggregate_errors(std::vector<PerSampleError> per_sample);

PerSampleError compare_prediction(const PosePrediction& pred, const Vec3& target_pos,
                                  const Mat3& target_rot);

MetricsReport evaluate(const ViTParams& params, const ViTConfig& config,
                       const DatasetManifest& manifest, const std::string& split,
                       int batch_size = 16);

// Same metrics for a constant prediction applied to every sample.
MetricsReport evaluate_constant(const PosePrediction& pred, const DatasetManifest& manifest,
                                const std::string& split);

// Constant yardstick: the training split's mean position and the Rot6D
// encoding of the chordal-mean rotation (elementwise mean of rotation
// matrices, projected by decoding its first two columns).
PosePrediction baseline_from_targets(const std::vector<Vec3>& positions,
                                     const std::vector<Mat3>& rotations);
PosePrediction baseline_predictor(const DatasetManifest& manifest,
                                  const std::string& split = "train");

// Two-row mean/std table with "[mm]" and "[degree]" units; values printed
// with two decimals.
std::string format_metrics_table(double mean_mm, double std_mm, const Vec3& mean_deg,
                                 const Vec3& std_deg);

std::string format_report(const MetricsReport& report);

void write_report_files(const MetricsReport& report, const std::string& out_prefix);

}  // namespace icepose
