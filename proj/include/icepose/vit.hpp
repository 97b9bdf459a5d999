#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icepose/geometry.hpp"
#include "icepose/tensor.hpp"

namespace icepose {

// Architecture hyperparameters. The desk preset trains in minutes on a CPU;
// the paper preset keeps the published 16x16 patches and 768-wide embeddings.
struct ViTConfig {
  int image_h = 64;
  int image_w = 64;
  int patch = 16;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  static constexpr int kPosDim = 3;
  static constexpr int kOriDim = 6;

  int tokens() const { return (image_h / patch) * (image_w / patch); }
  int head_dim() const { return embed_dim / heads; }
  int mlp_dim() const { return mlp_ratio * embed_dim; }

  void validate() const;

  static ViTConfig desk() { return {}; }
  static ViTConfig paper() {
    ViTConfig c;
    c.image_h = c.image_w = 224;
    c.patch = 16;
    c.embed_dim = 768;
    c.depth = 12;
    c.heads = 12;
    return c;
  }
};

struct BlockParams {
  autodiff::Tensor ln1_gain, ln1_bias;
  autodiff::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  autodiff::Tensor ln2_gain, ln2_bias;
  autodiff::Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct ViTParams {
  autodiff::Tensor patch_weight;  // [patch^2 x embed]
  autodiff::Tensor patch_bias;    // [1 x embed]
  autodiff::Tensor pos_embed;     // [(tokens+1) x embed]
  autodiff::Tensor cls_token;     // [1 x embed]
  std::vector<BlockParams> blocks;
  autodiff::Tensor head_p_weight, head_p_bias;  // [embed x 3], [1 x 3]
  autodiff::Tensor head_o_weight, head_o_bias;  // [embed x 6], [1 x 6]
};

// Stable iteration order over all learnable tensors; the same order drives
// initialization, Adam state, gradients, and checkpoints.
void for_each_param(ViTParams& params,
                    const std::function<void(const std::string&, autodiff::Tensor&)>& fn);
void for_each_param(const ViTParams& params,
                    const std::function<void(const std::string&, const autodiff::Tensor&)>& fn);

// Closed-form learnable-parameter count:
//   P*d + d + (T+1)*d + d + L*(4*(d^2+d) + 4*d + d*m + m + m*d + d) + (3d+3) + (6d+6)
// with P = patch^2, d = embed_dim, T = tokens, m = mlp_ratio*d, L = depth.
std::int64_t param_count(const ViTConfig& config);
std::int64_t param_count(const ViTParams& params);

// Truncated-normal (std 0.02, cut at 2 sigma) weights and embeddings, unit
// layer-norm gains, zero biases. Deterministic per seed.
ViTParams init_params(const ViTConfig& config, std::uint64_t seed);

// Rows are patches in row-major patch order; within a patch, pixels flatten
// row-major. image is [H x W].
autodiff::Tensor patchify(const autodiff::Tensor& image, int patch);

struct PosePrediction {
  Vec3 p_hat = Vec3::Zero();   // mm, mesh frame
  Rot6d o_hat = Rot6d::Zero(); // unconstrained head output
};

// Graph-bound parameter leaves; `flat` matches for_each_param order.
struct ViTLeaves {
  autodiff::Value patch_weight, patch_bias, pos_embed, cls_token;
  struct Block {
    autodiff::Value ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo;
    autodiff::Value ln2_gain, ln2_bias, mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };
  std::vector<Block> blocks;
  autodiff::Value head_p_weight, head_p_bias, head_o_weight, head_o_bias;
  std::vector<std::pair<std::string, autodiff::Value>> flat;
};

ViTLeaves bind_params(autodiff::Graph& graph, const ViTParams& params);

struct ViTOutputs {
  autodiff::Value p_hat;  // [B x 3]
  autodiff::Value o_hat;  // [B x 6]
};

// Pre-norm transformer encoder over CLS + patch tokens; the CLS output row
// feeds the two linear heads. images is [B x H x W].
ViTOutputs vit_forward(autodiff::Graph& graph, const ViTLeaves& leaves,
                       const ViTConfig& config, const autodiff::Tensor& images);

// l_total = l_mse(p_hat, p) + lambda * l_mse(o_hat, o), each term the mean
// over batch and components. Positions enter divided by pos_scale.
autodiff::Value vit_loss(autodiff::Graph& graph, const ViTOutputs& out,
                         autodiff::Value target_pos, autodiff::Value target_rot6d,
                         double lambda = 2.0, double pos_scale = 1.0);

// Inference convenience: forward on a throwaway graph.
std::vector<PosePrediction> predict(const ViTParams& params, const ViTConfig& config,
                                    const autodiff::Tensor& images);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::int64_t params_checked = 0;
};

// End-to-end check of reverse-mode gradients against central finite
// differences (step h) for every parameter of a randomly initialized model on
// a random batch. Relative error uses an absolute floor of 1:
// |ad - fd| / max(1, |ad|, |fd|).
GradCheckResult gradcheck_vit(const ViTConfig& config, std::uint64_t seed, double h = 1e-5,
                              int batch = 2);

// Micro model used by the gradient-correctness gate: 8x8 image, patch 4,
// embed 8, depth 1, heads 2.
ViTConfig micro_vit_config();

}  // namespace icepose
