#include <doctest.h>

#include <cmath>

#include "icepose/rng.hpp"
#include "icepose/vit.hpp"

using namespace icepose;
using autodiff::Graph;
using autodiff::Tensor;
using autodiff::Value;

namespace {

Tensor random_images(Rng& rng, int b, int h, int w) {
  Tensor t = Tensor::zeros({b, h, w});
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return t;
}

Tensor random_targets(Rng& rng, int b, int cols, double lo, double hi) {
  Tensor t = Tensor::zeros({b, cols});
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("patchify: token layout and inverse raster") {
  Rng rng(5);
  Tensor image = Tensor::zeros({64, 64});
  for (Eigen::Index i = 0; i < image.size(); ++i) image[i] = rng.uniform();

  const Tensor tokens = patchify(image, 16);
  CHECK(tokens.shape() == std::vector<int>{16, 256});

  // Inverse raster: scatter tokens back and compare exactly.
  Tensor rebuilt = Tensor::zeros({64, 64});
  const int cols = 64 / 16;
  for (int t = 0; t < 16; ++t) {
    const int pr = t / cols, pc = t % cols;
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        rebuilt.at(pr * 16 + r, pc * 16 + c) = tokens.at(t, r * 16 + c);
  }
  CHECK((rebuilt.array() == image.array()).all());

  const Tensor flat = patchify(Tensor::full({8, 8}, 0.37), 4);
  for (Eigen::Index i = 0; i < flat.size(); ++i) CHECK(flat[i] == 0.37);

  CHECK_THROWS_AS(patchify(Tensor::zeros({65, 64}), 16), ConfigError);
}

TEST_CASE("init_params: deterministic, truncated, closed-form count") {
  const ViTConfig desk = ViTConfig::desk();
  ViTParams a = init_params(desk, 11);
  ViTParams b = init_params(desk, 11);
  bool identical = true;
  for_each_param(a, [&](const std::string& name, Tensor& t) {
    for_each_param(b, [&](const std::string& name2, Tensor& t2) {
      if (name == name2) identical &= (t.array() == t2.array()).all();
    });
  });
  CHECK(identical);

  ViTParams c = init_params(desk, 12);
  bool any_differ = false;
  for_each_param(a, [&](const std::string& name, Tensor& t) {
    for_each_param(c, [&](const std::string& name2, Tensor& t2) {
      if (name == name2) any_differ |= (t.array() != t2.array()).any();
    });
  });
  CHECK(any_differ);

  for_each_param(a, [&](const std::string&, Tensor& t) {
    CHECK(t.array().abs().maxCoeff() <= 1.0 + 1e-12);  // gains are the largest at 1
  });
  // Non-gain tensors stay within the 2-sigma truncation of std 0.02.
  CHECK(a.patch_weight.array().abs().maxCoeff() <= 0.04 + 1e-12);
  CHECK(a.pos_embed.array().abs().maxCoeff() <= 0.04 + 1e-12);
  CHECK(a.cls_token.array().abs().maxCoeff() <= 0.04 + 1e-12);

  for (const ViTConfig& cfg : {ViTConfig::desk(), micro_vit_config(), ViTConfig::paper()}) {
    ViTParams p = init_params(cfg, 1);
    CHECK(param_count(p) == param_count(cfg));
  }
}

TEST_CASE("forward: desk shape contract at batch 16") {
  const ViTConfig cfg = ViTConfig::desk();
  const ViTParams params = init_params(cfg, 3);
  Rng rng(17);
  const Tensor images = random_images(rng, 16, cfg.image_h, cfg.image_w);
  Graph g;
  const ViTLeaves leaves = bind_params(g, params);
  const ViTOutputs out = vit_forward(g, leaves, cfg, images);
  CHECK(g.value(out.p_hat).shape() == std::vector<int>{16, 3});
  CHECK(g.value(out.o_hat).shape() == std::vector<int>{16, 6});
}

TEST_CASE("forward: permuting the batch permutes outputs identically") {
  const ViTConfig cfg = micro_vit_config();
  const ViTParams params = init_params(cfg, 4);
  Rng rng(19);
  const Tensor images = random_images(rng, 3, cfg.image_h, cfg.image_w);

  Tensor swapped = images;
  const int plane = cfg.image_h * cfg.image_w;
  for (int i = 0; i < plane; ++i) {
    std::swap(swapped[i], swapped[2 * plane + i]);  // swap samples 0 and 2
  }

  const std::vector<PosePrediction> base = predict(params, cfg, images);
  const std::vector<PosePrediction> perm = predict(params, cfg, swapped);
  CHECK((base[0].p_hat - perm[2].p_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK((base[2].p_hat - perm[0].p_hat).cwiseAbs().maxCoeff() == 0.0);
  CHECK((base[1].o_hat - perm[1].o_hat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: zero head weights collapse outputs to the head bias") {
  const ViTConfig cfg = micro_vit_config();
  ViTParams params = init_params(cfg, 5);
  params.head_p_weight.array() = 0.0;
  params.head_p_bias = Tensor::from({1, 3}, {1.5, -2.0, 0.25});
  params.head_p_bias.requires_grad = true;

  Rng rng(23);
  const Tensor images = random_images(rng, 4, cfg.image_h, cfg.image_w);
  for (const PosePrediction& pred : predict(params, cfg, images)) {
    CHECK(pred.p_hat[0] == 1.5);
    CHECK(pred.p_hat[1] == -2.0);
    CHECK(pred.p_hat[2] == 0.25);
  }
}

TEST_CASE("loss identities from the total-loss definition") {
  Graph g;
  const Value p = g.leaf(Tensor::from({1, 3}, {1, 2, 3}), false);
  const Value o = g.leaf(Tensor::from({1, 6}, {1, 0, 0, 0, 1, 0}), false);
  const ViTOutputs out{p, o};

  // Perfect prediction.
  const Value zero =
      vit_loss(g, out, g.leaf(g.value(p), false), g.leaf(g.value(o), false), 2.0);
  CHECK(g.value(zero)[0] == 0.0);

  // One position component off by 1: mean over 3 components.
  const Value tp = g.leaf(Tensor::from({1, 3}, {0, 2, 3}), false);
  const Value pos_off = vit_loss(g, out, tp, g.leaf(g.value(o), false), 2.0);
  CHECK(std::abs(g.value(pos_off)[0] - 1.0 / 3.0) <= 1e-12);

  // One orientation component off by 1 with lambda 2: 2 * (1/6).
  const Value to = g.leaf(Tensor::from({1, 6}, {0, 0, 0, 0, 1, 0}), false);
  const Value ori_off = vit_loss(g, out, g.leaf(g.value(p), false), to, 2.0);
  CHECK(std::abs(g.value(ori_off)[0] - 1.0 / 3.0) <= 1e-12);

  CHECK_THROWS_AS(
      vit_loss(g, out, g.leaf(Tensor::zeros({2, 3}), false), g.leaf(g.value(o), false), 2.0),
      ShapeError);
  CHECK_THROWS_AS(
      vit_loss(g, out, g.leaf(g.value(p), false), g.leaf(g.value(o), false), -1.0),
      ContractError);
}

TEST_CASE("loss is non-negative and zero only at equality") {
  Rng rng(31);
  const ViTConfig cfg = micro_vit_config();
  const ViTParams params = init_params(cfg, 6);
  const Tensor images = random_images(rng, 2, cfg.image_h, cfg.image_w);
  Graph g;
  const ViTLeaves leaves = bind_params(g, params);
  const ViTOutputs out = vit_forward(g, leaves, cfg, images);
  const Value loss = vit_loss(g, out, g.leaf(random_targets(rng, 2, 3, -5, 5), false),
                              g.leaf(random_targets(rng, 2, 6, -1, 1), false), 2.0);
  CHECK(g.value(loss)[0] > 0.0);
}

TEST_CASE("lambda 0 kills orientation-head gradients exactly") {
  Rng rng(37);
  const ViTConfig cfg = micro_vit_config();
  const ViTParams params = init_params(cfg, 7);
  const Tensor images = random_images(rng, 2, cfg.image_h, cfg.image_w);

  Graph g;
  const ViTLeaves leaves = bind_params(g, params);
  const ViTOutputs out = vit_forward(g, leaves, cfg, images);
  const Value loss = vit_loss(g, out, g.leaf(random_targets(rng, 2, 3, -5, 5), false),
                              g.leaf(random_targets(rng, 2, 6, -1, 1), false), 0.0);
  g.backward(loss);

  CHECK(g.grad(leaves.head_o_weight).array().abs().maxCoeff() == 0.0);
  CHECK(g.grad(leaves.head_o_bias).array().abs().maxCoeff() == 0.0);
  CHECK(g.grad(leaves.head_p_weight).array().abs().maxCoeff() > 0.0);
}

TEST_CASE("end-to-end micro gradcheck stays under 1e-4") {
  const GradCheckResult r = gradcheck_vit(micro_vit_config(), 2024);
  CHECK(r.params_checked == param_count(micro_vit_config()));
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("config validation catches incompatible dimensions") {
  ViTConfig bad = ViTConfig::desk();
  bad.image_h = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ViTConfig bad2 = ViTConfig::desk();
  bad2.heads = 5;  // 64 % 5 != 0
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}
