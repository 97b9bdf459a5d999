#include "icepose/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "icepose/checkpoint.hpp"
#include "icepose/errors.hpp"
#include "icepose/rng.hpp"

namespace icepose {

using autodiff::Graph;
using autodiff::Tensor;
using autodiff::Value;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("train learning_rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw ConfigError("adam eps must be positive");
  if (lambda < 0) throw ConfigError("loss lambda must be >= 0");
  if (!(pos_scale > 0)) throw ConfigError("loss pos_scale must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

AdamState make_adam_state(const std::vector<const Tensor*>& params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor* p : params) {
    state.m.push_back(Tensor::zeros(p->shape()));
    state.v.push_back(Tensor::zeros(p->shape()));
  }
  return state;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw ShapeError("adam_step: params, grads, and state have different lengths");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i]))
      throw ShapeError("adam_step: shape mismatch between parameter " + p.shape_str() +
                       " and gradient " + g.shape_str());
    auto& m = state.m[i].array();
    auto& v = state.v[i].array();
    m = config.beta1 * m + (1.0 - config.beta1) * g.array();
    v = config.beta2 * v + (1.0 - config.beta2) * g.array().square();
    p.array() -= config.learning_rate * (m / bc1) / ((v / bc2).sqrt() + config.adam_eps);
  }
}

namespace {

// Fisher-Yates with explicit bounded draws; std::shuffle's draw sequence is
// implementation-defined, this one is not.
void deterministic_shuffle(std::vector<std::int64_t>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.bounded(i));
    std::swap(v[i - 1], v[j]);
  }
}

double run_validation(const ViTParams& params, const ViTConfig& vit_config,
                      const DatasetManifest& manifest, const TrainConfig& cfg) {
  const std::int64_t total = manifest.split("val").total;
  if (total == 0) return 0.0;
  double loss_sum = 0.0;
  std::int64_t weight = 0;
  for (std::int64_t start = 0; start < total; start += cfg.batch_size) {
    const std::int64_t stop = std::min<std::int64_t>(start + cfg.batch_size, total);
    std::vector<std::int64_t> idx(static_cast<size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = load_batch(manifest, "val", idx);
    Graph g;
    const ViTLeaves leaves = bind_params(g, params);
    const ViTOutputs out = vit_forward(g, leaves, vit_config, batch.images);
    const Value loss = vit_loss(g, out, g.leaf(batch.target_pos, false),
                                g.leaf(batch.target_rot6d, false), cfg.lambda, cfg.pos_scale);
    loss_sum += g.value(loss)[0] * static_cast<double>(stop - start);
    weight += stop - start;
  }
  return loss_sum / static_cast<double>(weight);
}

}  // namespace

TrainResult train(const TrainConfig& train_config, const ViTConfig& vit_config,
                  const DatasetManifest& manifest, const std::string& out_dir) {
  train_config.validate();
  vit_config.validate();
  if (manifest.config.fan.image_h != vit_config.image_h ||
      manifest.config.fan.image_w != vit_config.image_w)
    throw ConfigError("dataset images are " + std::to_string(manifest.config.fan.image_h) +
                      "x" + std::to_string(manifest.config.fan.image_w) +
                      " but the model expects " + std::to_string(vit_config.image_h) + "x" +
                      std::to_string(vit_config.image_w));
  check_patch_compatible(manifest.config.fan, vit_config.patch);

  TrainResult result;
  result.params = init_params(vit_config, train_config.init_seed);

  std::vector<Tensor*> param_ptrs;
  for_each_param(result.params,
                 [&](const std::string&, Tensor& t) { param_ptrs.push_back(&t); });
  std::vector<const Tensor*> param_view(param_ptrs.begin(), param_ptrs.end());
  AdamState adam = make_adam_state(param_view);

  std::ofstream loss_log, val_log;
  if (!out_dir.empty()) {
    loss_log.open(out_dir + "/loss_log.csv", std::ios::trunc);
    if (!loss_log) throw IoError("cannot write loss log in: " + out_dir);
    loss_log << "epoch,step,loss\n";
    val_log.open(out_dir + "/val_loss.csv", std::ios::trunc);
    val_log << "epoch,loss\n";
  }

  const std::int64_t total = manifest.split("train").total;
  if (total == 0) throw ConfigError("training split is empty");
  std::vector<std::int64_t> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), 0);

  std::int64_t global_step = 0;
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(train_config.shuffle_seed, static_cast<unsigned>(epoch)));
    deterministic_shuffle(order, shuffle_rng);

    double epoch_sum = 0.0;
    std::int64_t epoch_batches = 0;
    for (std::int64_t start = 0; start < total; start += train_config.batch_size) {
      const std::int64_t stop = std::min<std::int64_t>(start + train_config.batch_size, total);
      const std::vector<std::int64_t> idx(order.begin() + start, order.begin() + stop);
      const Batch batch = load_batch(manifest, "train", idx);

      Graph g;
      const ViTLeaves leaves = bind_params(g, result.params);
      const ViTOutputs out = vit_forward(g, leaves, vit_config, batch.images);
      const Value loss =
          vit_loss(g, out, g.leaf(batch.target_pos, false), g.leaf(batch.target_rot6d, false),
                   train_config.lambda, train_config.pos_scale);
      const double loss_value = g.value(loss)[0];
      if (!std::isfinite(loss_value))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(global_step + 1));

      g.backward(loss);
      std::vector<const Tensor*> grads;
      grads.reserve(leaves.flat.size());
      for (const auto& [name, leaf] : leaves.flat) grads.push_back(&g.grad(leaf));
      adam_step(param_ptrs, grads, adam, train_config);
      for (const Tensor* p : param_view)
        if (!p->all_finite())
          throw NumericError("training diverged: non-finite parameters after epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(global_step + 1));

      ++global_step;
      ++epoch_batches;
      epoch_sum += loss_value;
      result.step_losses.push_back(loss_value);
      if (loss_log) {
        char line[96];
        std::snprintf(line, sizeof(line), "%d,%lld,%.17g\n", epoch,
                      static_cast<long long>(global_step), loss_value);
        loss_log << line;
      }
    }
    result.epoch_train_loss.push_back(epoch_sum / static_cast<double>(epoch_batches));

    if (manifest.split("val").total > 0) {
      const double vl = run_validation(result.params, vit_config, manifest, train_config);
      result.epoch_val_loss.push_back(vl);
      if (val_log) {
        char line[64];
        std::snprintf(line, sizeof(line), "%d,%.17g\n", epoch, vl);
        val_log << line;
      }
    }

    if (!out_dir.empty() && train_config.checkpoint_every > 0 &&
        epoch % train_config.checkpoint_every == 0 && epoch != train_config.epochs) {
      char name[48];
      std::snprintf(name, sizeof(name), "/ckpt_epoch_%04d.bin", epoch);
      save_checkpoint(out_dir + name, vit_config, result.params);
    }
  }
  result.steps = global_step;

  if (!out_dir.empty()) save_checkpoint(out_dir + "/ckpt_final.bin", vit_config, result.params);
  return result;
}

}  // namespace icepose
