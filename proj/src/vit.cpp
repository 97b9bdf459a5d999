#include "icepose/vit.hpp"

#include <cmath>

#include "icepose/errors.hpp"
#include "icepose/rng.hpp"

namespace icepose {

using autodiff::Graph;
using autodiff::Tensor;
using autodiff::Value;

void ViTConfig::validate() const {
  if (image_h < 1 || image_w < 1 || patch < 1 || embed_dim < 1 || depth < 1 || heads < 1 ||
      mlp_ratio < 1)
    throw ConfigError("vit config fields must be positive");
  if (image_h % patch != 0 || image_w % patch != 0)
    throw ConfigError("vit image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                      " is not divisible by patch size " + std::to_string(patch));
  if (embed_dim % heads != 0)
    throw ConfigError("vit embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by head count " + std::to_string(heads));
}

namespace {

template <typename Params, typename Fn>
void for_each_param_impl(Params& p, const Fn& fn) {
  fn("patch_proj.weight", p.patch_weight);
  fn("patch_proj.bias", p.patch_bias);
  fn("pos_embed", p.pos_embed);
  fn("cls_token", p.cls_token);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "block" + std::to_string(i) + ".";
    fn(prefix + "ln1.gain", b.ln1_gain);
    fn(prefix + "ln1.bias", b.ln1_bias);
    fn(prefix + "attn.wq", b.wq);
    fn(prefix + "attn.bq", b.bq);
    fn(prefix + "attn.wk", b.wk);
    fn(prefix + "attn.bk", b.bk);
    fn(prefix + "attn.wv", b.wv);
    fn(prefix + "attn.bv", b.bv);
    fn(prefix + "attn.wo", b.wo);
    fn(prefix + "attn.bo", b.bo);
    fn(prefix + "ln2.gain", b.ln2_gain);
    fn(prefix + "ln2.bias", b.ln2_bias);
    fn(prefix + "mlp.w1", b.mlp_w1);
    fn(prefix + "mlp.b1", b.mlp_b1);
    fn(prefix + "mlp.w2", b.mlp_w2);
    fn(prefix + "mlp.b2", b.mlp_b2);
  }
  fn("head_p.weight", p.head_p_weight);
  fn("head_p.bias", p.head_p_bias);
  fn("head_o.weight", p.head_o_weight);
  fn("head_o.bias", p.head_o_bias);
}

}  // namespace

void for_each_param(ViTParams& params,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
  for_each_param_impl(params, fn);
}

void for_each_param(const ViTParams& params,
                    const std::function<void(const std::string&, const Tensor&)>& fn) {
  for_each_param_impl(params, fn);
}

std::int64_t param_count(const ViTConfig& config) {
  const std::int64_t p2 = static_cast<std::int64_t>(config.patch) * config.patch;
  const std::int64_t d = config.embed_dim;
  const std::int64_t t = config.tokens();
  const std::int64_t m = config.mlp_dim();
  const std::int64_t per_block = 4 * (d * d + d) + 4 * d + (d * m + m) + (m * d + d);
  return p2 * d + d + (t + 1) * d + d + config.depth * per_block + (3 * d + 3) + (6 * d + 6);
}

std::int64_t param_count(const ViTParams& params) {
  std::int64_t n = 0;
  for_each_param(params, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

ViTParams init_params(const ViTConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x76697400ull));
  const int d = config.embed_dim;
  const int p2 = config.patch * config.patch;
  const int t = config.tokens();
  const int m = config.mlp_dim();

  auto trunc_normal = [&](std::vector<int> shape) {
    Tensor out = Tensor::zeros(std::move(shape));
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = rng.truncated_normal(0.02, 2.0);
    out.requires_grad = true;
    return out;
  };
  auto zeros = [&](std::vector<int> shape) {
    Tensor out = Tensor::zeros(std::move(shape));
    out.requires_grad = true;
    return out;
  };
  auto ones = [&](std::vector<int> shape) {
    Tensor out = Tensor::full(std::move(shape), 1.0);
    out.requires_grad = true;
    return out;
  };

  ViTParams params;
  params.patch_weight = trunc_normal({p2, d});
  params.patch_bias = zeros({1, d});
  params.pos_embed = trunc_normal({t + 1, d});
  params.cls_token = trunc_normal({1, d});
  params.blocks.resize(static_cast<size_t>(config.depth));
  for (auto& b : params.blocks) {
    b.ln1_gain = ones({1, d});
    b.ln1_bias = zeros({1, d});
    b.wq = trunc_normal({d, d});
    b.bq = zeros({1, d});
    b.wk = trunc_normal({d, d});
    b.bk = zeros({1, d});
    b.wv = trunc_normal({d, d});
    b.bv = zeros({1, d});
    b.wo = trunc_normal({d, d});
    b.bo = zeros({1, d});
    b.ln2_gain = ones({1, d});
    b.ln2_bias = zeros({1, d});
    b.mlp_w1 = trunc_normal({d, m});
    b.mlp_b1 = zeros({1, m});
    b.mlp_w2 = trunc_normal({m, d});
    b.mlp_b2 = zeros({1, d});
  }
  params.head_p_weight = trunc_normal({d, ViTConfig::kPosDim});
  params.head_p_bias = zeros({1, ViTConfig::kPosDim});
  params.head_o_weight = trunc_normal({d, ViTConfig::kOriDim});
  params.head_o_bias = zeros({1, ViTConfig::kOriDim});
  return params;
}

Tensor patchify(const Tensor& image, int patch) {
  if (image.rank() != 2)
    throw ShapeError("patchify expects an [H x W] image, got " + image.shape_str());
  const int h = image.dim(0);
  const int w = image.dim(1);
  if (patch < 1 || h % patch != 0 || w % patch != 0)
    throw ConfigError("image " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by patch size " + std::to_string(patch));
  const int rows = h / patch;
  const int cols = w / patch;
  Tensor out = Tensor::zeros({rows * cols, patch * patch});
  for (int pr = 0; pr < rows; ++pr)
    for (int pc = 0; pc < cols; ++pc) {
      const int token = pr * cols + pc;
      for (int r = 0; r < patch; ++r)
        for (int c = 0; c < patch; ++c)
          out.at(token, r * patch + c) = image.at(pr * patch + r, pc * patch + c);
    }
  return out;
}

ViTLeaves bind_params(Graph& graph, const ViTParams& params) {
  ViTLeaves leaves;
  leaves.blocks.resize(params.blocks.size());
  std::vector<Value*> slots;
  // Bound in for_each_param order so `flat` aligns with gradients and Adam
  // state downstream.
  auto& l = leaves;
  slots = {&l.patch_weight, &l.patch_bias, &l.pos_embed, &l.cls_token};
  for (auto& b : l.blocks) {
    for (Value* v : {&b.ln1_gain, &b.ln1_bias, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo,
                     &b.bo, &b.ln2_gain, &b.ln2_bias, &b.mlp_w1, &b.mlp_b1, &b.mlp_w2,
                     &b.mlp_b2})
      slots.push_back(v);
  }
  for (Value* v : {&l.head_p_weight, &l.head_p_bias, &l.head_o_weight, &l.head_o_bias})
    slots.push_back(v);

  size_t i = 0;
  for_each_param(params, [&](const std::string& name, const Tensor& t) {
    *slots[i] = graph.leaf(t);
    leaves.flat.emplace_back(name, *slots[i]);
    ++i;
  });
  return leaves;
}

namespace {

Value linear(Graph& g, Value x, Value weight, Value bias, int rows) {
  return g.add(g.matmul(x, weight), g.repeat_rows(bias, rows));
}

Value encoder_block(Graph& g, Value x, const ViTLeaves::Block& b, const ViTConfig& cfg,
                    int rows) {
  // LN -> multi-head self-attention -> residual.
  const Value h1 = g.layer_norm(x, b.ln1_gain, b.ln1_bias);
  const Value q = linear(g, h1, b.wq, b.bq, rows);
  const Value k = linear(g, h1, b.wk, b.bk, rows);
  const Value v = linear(g, h1, b.wv, b.bv, rows);
  const int dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Value heads_out{};
  for (int h = 0; h < cfg.heads; ++h) {
    const Value qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    const Value kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    const Value vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    const Value att = g.softmax(g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh));
    const Value oh = g.matmul(att, vh);
    heads_out = (h == 0) ? oh : g.concat_cols(heads_out, oh);
  }
  const Value attn = linear(g, heads_out, b.wo, b.bo, rows);
  const Value x1 = g.add(x, attn);

  // LN -> MLP with GELU -> residual.
  const Value h2 = g.layer_norm(x1, b.ln2_gain, b.ln2_bias);
  const Value mid = g.gelu(linear(g, h2, b.mlp_w1, b.mlp_b1, rows));
  const Value mlp = linear(g, mid, b.mlp_w2, b.mlp_b2, rows);
  return g.add(x1, mlp);
}

}  // namespace

ViTOutputs vit_forward(Graph& g, const ViTLeaves& leaves, const ViTConfig& cfg,
                       const Tensor& images) {
  cfg.validate();
  if (images.rank() != 3 || images.dim(1) != cfg.image_h || images.dim(2) != cfg.image_w)
    throw ShapeError("vit_forward expects [B x " + std::to_string(cfg.image_h) + " x " +
                     std::to_string(cfg.image_w) + "] images, got " + images.shape_str());
  const int batch = images.dim(0);
  const int rows = cfg.tokens() + 1;

  Value p_all{}, o_all{};
  for (int i = 0; i < batch; ++i) {
    const Value tokens = g.leaf(patchify(images.slice_outer(i), cfg.patch), false);
    const Value embedded =
        linear(g, tokens, leaves.patch_weight, leaves.patch_bias, cfg.tokens());
    Value seq = g.concat_rows(leaves.cls_token, embedded);
    seq = g.add(seq, leaves.pos_embed);
    for (const auto& b : leaves.blocks) seq = encoder_block(g, seq, b, cfg, rows);
    const Value cls = g.slice_rows(seq, 0, 1);
    const Value p = linear(g, cls, leaves.head_p_weight, leaves.head_p_bias, 1);
    const Value o = linear(g, cls, leaves.head_o_weight, leaves.head_o_bias, 1);
    p_all = (i == 0) ? p : g.concat_rows(p_all, p);
    o_all = (i == 0) ? o : g.concat_rows(o_all, o);
  }
  return {p_all, o_all};
}

Value vit_loss(Graph& g, const ViTOutputs& out, Value target_pos, Value target_rot6d,
               double lambda, double pos_scale) {
  if (lambda < 0) throw ContractError("loss lambda must be >= 0");
  if (!(pos_scale > 0)) throw ContractError("loss pos_scale must be positive");
  const Tensor& p = g.value(out.p_hat);
  const Tensor& tp = g.value(target_pos);
  const Tensor& o = g.value(out.o_hat);
  const Tensor& to = g.value(target_rot6d);
  if (!p.same_shape(tp))
    throw ShapeError("loss: prediction " + p.shape_str() + " vs position target " +
                     tp.shape_str());
  if (!o.same_shape(to))
    throw ShapeError("loss: prediction " + o.shape_str() + " vs orientation target " +
                     to.shape_str());
  const int batch = p.rows();

  Value dp = g.sub(out.p_hat, target_pos);
  if (pos_scale != 1.0) dp = g.scale(dp, 1.0 / pos_scale);
  const Value pos_mse = g.scale(g.sum(g.mul(dp, dp)), 1.0 / (3.0 * batch));

  const Value do_ = g.sub(out.o_hat, target_rot6d);
  const Value ori_mse = g.scale(g.sum(g.mul(do_, do_)), 1.0 / (6.0 * batch));

  return g.add(pos_mse, g.scale(ori_mse, lambda));
}

ViTConfig micro_vit_config() {
  ViTConfig c;
  c.image_h = c.image_w = 8;
  c.patch = 4;
  c.embed_dim = 8;
  c.depth = 1;
  c.heads = 2;
  c.mlp_ratio = 2;
  return c;
}

GradCheckResult gradcheck_vit(const ViTConfig& config, std::uint64_t seed, double h,
                              int batch) {
  config.validate();
  if (batch < 1) throw ContractError("gradcheck batch must be >= 1");
  Rng rng(derive_seed(seed, 0x67636b00ull));

  Tensor images = Tensor::zeros({batch, config.image_h, config.image_w});
  for (Eigen::Index i = 0; i < images.size(); ++i) images[i] = rng.uniform();
  Tensor target_pos = Tensor::zeros({batch, 3});
  for (Eigen::Index i = 0; i < target_pos.size(); ++i) target_pos[i] = rng.uniform(-5.0, 5.0);
  Tensor target_rot = Tensor::zeros({batch, 6});
  for (int b = 0; b < batch; ++b) {
    const Rot6d r6 = encode_rot6d(random_rotation(rng));
    for (int k = 0; k < 6; ++k) target_rot.at(b, k) = r6[k];
  }

  ViTParams params = init_params(config, seed);

  auto loss_with = [&](const ViTParams& p) {
    Graph g;
    const ViTLeaves leaves = bind_params(g, p);
    const ViTOutputs out = vit_forward(g, leaves, config, images);
    return g.value(vit_loss(g, out, g.leaf(target_pos, false), g.leaf(target_rot, false)))[0];
  };

  Graph g;
  const ViTLeaves leaves = bind_params(g, params);
  const ViTOutputs out = vit_forward(g, leaves, config, images);
  g.backward(vit_loss(g, out, g.leaf(target_pos, false), g.leaf(target_rot, false)));

  GradCheckResult result;
  std::vector<Tensor*> tensors;
  for_each_param(params, [&](const std::string&, Tensor& t) { tensors.push_back(&t); });

  for (size_t pi = 0; pi < tensors.size(); ++pi) {
    const Tensor& ad = g.grad(leaves.flat[pi].second);
    Tensor& live = *tensors[pi];
    const Tensor fd = autodiff::finite_diff_grad(
        [&](const Tensor& probe) {
          const Tensor saved = live;
          live = probe;
          live.requires_grad = true;
          const double value = loss_with(params);
          live = saved;
          return value;
        },
        live, h);
    for (Eigen::Index i = 0; i < ad.size(); ++i) {
      const double rel =
          std::abs(ad[i] - fd[i]) / std::max({1.0, std::abs(ad[i]), std::abs(fd[i])});
      result.max_rel_error = std::max(result.max_rel_error, rel);
    }
    result.params_checked += ad.size();
  }
  return result;
}

std::vector<PosePrediction> predict(const ViTParams& params, const ViTConfig& config,
                                    const Tensor& images) {
  Graph g;
  const ViTLeaves leaves = bind_params(g, params);
  const ViTOutputs out = vit_forward(g, leaves, config, images);
  const Tensor& p = g.value(out.p_hat);
  const Tensor& o = g.value(out.o_hat);
  std::vector<PosePrediction> preds(static_cast<size_t>(p.rows()));
  for (int i = 0; i < p.rows(); ++i) {
    for (int k = 0; k < 3; ++k) preds[static_cast<size_t>(i)].p_hat[k] = p.at(i, k);
    for (int k = 0; k < 6; ++k) preds[static_cast<size_t>(i)].o_hat[k] = o.at(i, k);
  }
  return preds;
}

}  // namespace icepose
