#include "icepose/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "icepose/errors.hpp"

namespace icepose {

using autodiff::Graph;
using autodiff::Tensor;

MetricsReport aggregate_errors(std::vector<PerSampleError> per_sample) {
  MetricsReport report;
  report.per_sample = std::move(per_sample);

  double pos_sum = 0.0;
  Vec3 ori_sum = Vec3::Zero();
  std::int64_t n = 0;
  for (const PerSampleError& e : report.per_sample) {
    if (!e.ok) {
      ++report.n_decode_failures;
      continue;
    }
    pos_sum += e.position_error_mm;
    ori_sum += e.orientation_error_deg;
    ++n;
  }
  report.n_samples = n;
  if (n == 0) return report;

  report.mean_position_error_mm = pos_sum / static_cast<double>(n);
  report.mean_orientation_error_deg = ori_sum / static_cast<double>(n);

  double pos_sq = 0.0;
  Vec3 ori_sq = Vec3::Zero();
  for (const PerSampleError& e : report.per_sample) {
    if (!e.ok) continue;
    const double dp = e.position_error_mm - report.mean_position_error_mm;
    pos_sq += dp * dp;
    const Vec3 dq = e.orientation_error_deg - report.mean_orientation_error_deg;
    ori_sq += dq.cwiseProduct(dq);
  }
  // Population std, matching the fixed-denominator reading of Table-1's Std.
  report.std_position_error_mm = std::sqrt(pos_sq / static_cast<double>(n));
  report.std_orientation_error_deg = (ori_sq / static_cast<double>(n)).cwiseSqrt();
  return report;
}

PerSampleError compare_prediction(const PosePrediction& pred, const Vec3& target_pos,
                                  const Mat3& target_rot) {
  PerSampleError e;
  e.position_error_mm = position_error_mm<double>(pred.p_hat, target_pos);
  try {
    const Mat3 rot_pred = decode_rot6d(pred.o_hat);
    e.orientation_error_deg = per_axis_orientation_error_deg<double>(rot_pred, target_rot);
  } catch (const DegeneracyError&) {
    e.ok = false;
  }
  return e;
}

namespace {

MetricsReport evaluate_with(const DatasetManifest& manifest, const std::string& split,
                            int batch_size,
                            const std::function<std::vector<PosePrediction>(const Batch&)>& run) {
  const std::int64_t total = manifest.split(split).total;
  if (total == 0) throw ConfigError("split `" + split + "` is empty");
  std::vector<PerSampleError> table;
  table.reserve(static_cast<size_t>(total));
  for (std::int64_t start = 0; start < total; start += batch_size) {
    const std::int64_t stop = std::min<std::int64_t>(start + batch_size, total);
    std::vector<std::int64_t> idx(static_cast<size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = load_batch(manifest, split, idx);
    const std::vector<PosePrediction> preds = run(batch);

    for (size_t i = 0; i < preds.size(); ++i) {
      Vec3 tp;
      for (int k = 0; k < 3; ++k) tp[k] = batch.target_pos.at(static_cast<int>(i), k);
      Rot6d tr;
      for (int k = 0; k < 6; ++k) tr[k] = batch.target_rot6d.at(static_cast<int>(i), k);
      PerSampleError e = compare_prediction(preds[i], tp, decode_rot6d(tr));
      e.index = start + static_cast<std::int64_t>(i);
      e.subject_id = batch.subject_ids[i];
      e.sample_id = batch.sample_ids[i];
      table.push_back(e);
    }
  }
  return aggregate_errors(std::move(table));
}

}  // namespace

MetricsReport evaluate(const ViTParams& params, const ViTConfig& config,
                       const DatasetManifest& manifest, const std::string& split,
                       int batch_size) {
  if (batch_size < 1) throw ContractError("evaluate batch_size must be >= 1");
  return evaluate_with(manifest, split, batch_size,
                       [&](const Batch& batch) { return predict(params, config, batch.images); });
}

MetricsReport evaluate_constant(const PosePrediction& pred, const DatasetManifest& manifest,
                                const std::string& split) {
  return evaluate_with(manifest, split, 64, [&](const Batch& batch) {
    return std::vector<PosePrediction>(static_cast<size_t>(batch.images.dim(0)), pred);
  });
}

PosePrediction baseline_from_targets(const std::vector<Vec3>& positions,
                                     const std::vector<Mat3>& rotations) {
  if (positions.empty() || positions.size() != rotations.size())
    throw ConfigError("baseline_from_targets requires matching non-empty target lists");
  Vec3 pos_sum = Vec3::Zero();
  Mat3 rot_sum = Mat3::Zero();
  for (const Vec3& p : positions) pos_sum += p;
  for (const Mat3& r : rotations) rot_sum += r;
  const double n = static_cast<double>(positions.size());

  PosePrediction pred;
  pred.p_hat = pos_sum / n;
  pred.o_hat = encode_rot6d(decode_rot6d(encode_rot6d(rot_sum / n)));
  return pred;
}

PosePrediction baseline_predictor(const DatasetManifest& manifest, const std::string& split) {
  const std::int64_t total = manifest.split(split).total;
  if (total == 0) throw ConfigError("baseline_predictor: split `" + split + "` is empty");

  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
  positions.reserve(static_cast<size_t>(total));
  for (std::int64_t start = 0; start < total; start += 64) {
    const std::int64_t stop = std::min<std::int64_t>(start + 64, total);
    std::vector<std::int64_t> idx(static_cast<size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = load_batch(manifest, split, idx);
    for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
      Vec3 tp;
      for (int k = 0; k < 3; ++k) tp[k] = batch.target_pos.at(i, k);
      positions.push_back(tp);
      Rot6d tr;
      for (int k = 0; k < 6; ++k) tr[k] = batch.target_rot6d.at(i, k);
      rotations.push_back(decode_rot6d(tr));
    }
  }
  return baseline_from_targets(positions, rotations);
}

namespace {

std::string fmt_mm(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f [mm]", v);
  return buf;
}

std::string fmt_deg(const Vec3& v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "(%.2f, %.2f, %.2f) [degree]", v[0], v[1], v[2]);
  return buf;
}

std::string pad(const std::string& s, size_t width) {
  std::string out = s;
  while (out.size() < width) out += ' ';
  return out;
}

}  // namespace

std::string format_metrics_table(double mean_mm, double std_mm, const Vec3& mean_deg,
                                 const Vec3& std_deg) {
  const std::string labels[3] = {"", "Mean error", "Std"};
  const std::string position[3] = {"Position", fmt_mm(mean_mm), fmt_mm(std_mm)};
  const std::string orientation[3] = {"Orientation", fmt_deg(mean_deg), fmt_deg(std_deg)};

  size_t w0 = 0, w1 = 0;
  for (int r = 0; r < 3; ++r) {
    w0 = std::max(w0, labels[r].size());
    w1 = std::max(w1, position[r].size());
  }
  std::string out;
  for (int r = 0; r < 3; ++r) {
    out += pad(labels[r], w0 + 3);
    out += pad(position[r], w1 + 3);
    out += orientation[r];
    out += '\n';
  }
  return out;
}

std::string format_report(const MetricsReport& report) {
  std::string out = format_metrics_table(
      report.mean_position_error_mm, report.std_position_error_mm,
      report.mean_orientation_error_deg, report.std_orientation_error_deg);
  out += "samples evaluated: " + std::to_string(report.n_samples) + "\n";
  out += "decode failures: " + std::to_string(report.n_decode_failures) + "\n";
  return out;
}

void write_report_files(const MetricsReport& report, const std::string& out_prefix) {
  {
    std::ofstream txt(out_prefix + ".txt", std::ios::trunc);
    if (!txt) throw IoError("cannot write report: " + out_prefix + ".txt");
    txt << format_report(report);
  }
  std::ofstream csv(out_prefix + ".csv", std::ios::trunc);
  if (!csv) throw IoError("cannot write report: " + out_prefix + ".csv");
  csv << "index,subject_id,sample_id,ok,position_error_mm,"
         "orientation_error_x_deg,orientation_error_y_deg,orientation_error_z_deg\n";
  for (const PerSampleError& e : report.per_sample) {
    char line[256];
    std::snprintf(line, sizeof(line), "%lld,%u,%u,%d,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(e.index), e.subject_id, e.sample_id, e.ok ? 1 : 0,
                  e.position_error_mm, e.orientation_error_deg[0], e.orientation_error_deg[1],
                  e.orientation_error_deg[2]);
    csv << line;
  }
  if (!csv) throw IoError("report write failed: " + out_prefix + ".csv");
}

}  // namespace icepose
