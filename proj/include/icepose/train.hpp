#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icepose/dataset.hpp"
#include "icepose/vit.hpp"

namespace icepose {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 2.0;
  double pos_scale = 1.0;  // positions divided by this inside the loss only
  std::uint64_t shuffle_seed = 1;
  std::uint64_t init_seed = 7;
  int checkpoint_every = 0;  // epochs; 0 = final checkpoint only

  void validate() const;
};

// Per-tensor first/second moment estimates plus the shared step counter.
struct AdamState {
  std::vector<autodiff::Tensor> m;
  std::vector<autodiff::Tensor> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const std::vector<const autodiff::Tensor*>& params);

// Standard bias-corrected Adam update, in place and deterministic.
void adam_step(const std::vector<autodiff::Tensor*>& params,
               const std::vector<const autodiff::Tensor*>& grads, AdamState& state,
               const TrainConfig& config);

struct TrainResult {
  ViTParams params;
  std::vector<double> step_losses;        // one entry per optimization step
  std::vector<double> epoch_train_loss;   // per-epoch mean of step losses
  std::vector<double> epoch_val_loss;     // logged for inspection only
  std::int64_t steps = 0;
};

// Per epoch: seeded shuffle, fixed-size batches (final short batch kept),
// forward, loss, backward, Adam. Aborts with NumericError on a non-finite
// loss. When `out_dir` is non-empty, writes `loss_log.csv` (epoch,step,loss),
// `val_loss.csv`, scheduled checkpoints, and `ckpt_final.bin`.
TrainResult train(const TrainConfig& train_config, const ViTConfig& vit_config,
                  const DatasetManifest& manifest, const std::string& out_dir = "");

}  // namespace icepose
