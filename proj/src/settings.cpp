#include "icepose/settings.hpp"

#include "icepose/errors.hpp"

namespace icepose {

FanGeometry fan_from(const KeyValues& kv) {
  FanGeometry fan;
  fan.sector_angle_deg = kv.get_double("fan.sector_angle_deg", fan.sector_angle_deg);
  fan.depth_mm = kv.get_double("fan.depth_mm", fan.depth_mm);
  fan.ray_count = static_cast<int>(kv.get_int("fan.ray_count", fan.ray_count));
  fan.samples_per_ray =
      static_cast<int>(kv.get_int("fan.samples_per_ray", fan.samples_per_ray));
  fan.image_h = static_cast<int>(kv.get_int("fan.image_h", fan.image_h));
  fan.image_w = static_cast<int>(kv.get_int("fan.image_w", fan.image_w));
  return fan;
}

PhantomRanges phantom_ranges_from(const KeyValues& kv) {
  PhantomRanges pr;
  pr.la_semi_axis_min = kv.get_double("phantom.la_semi_axis_min", pr.la_semi_axis_min);
  pr.la_semi_axis_max = kv.get_double("phantom.la_semi_axis_max", pr.la_semi_axis_max);
  pr.la_center_span = kv.get_double("phantom.la_center_span", pr.la_center_span);
  pr.la_max_tilt_deg = kv.get_double("phantom.la_max_tilt_deg", pr.la_max_tilt_deg);
  pr.wall_min = kv.get_double("phantom.wall_min", pr.wall_min);
  pr.wall_max = kv.get_double("phantom.wall_max", pr.wall_max);
  pr.pv_radius_min = kv.get_double("phantom.pv_radius_min", pr.pv_radius_min);
  pr.pv_radius_max = kv.get_double("phantom.pv_radius_max", pr.pv_radius_max);
  pr.pv_length_min = kv.get_double("phantom.pv_length_min", pr.pv_length_min);
  pr.pv_length_max = kv.get_double("phantom.pv_length_max", pr.pv_length_max);
  pr.laa_semi_axis_min = kv.get_double("phantom.laa_semi_axis_min", pr.laa_semi_axis_min);
  pr.laa_semi_axis_max = kv.get_double("phantom.laa_semi_axis_max", pr.laa_semi_axis_max);
  pr.eso_radius_min = kv.get_double("phantom.eso_radius_min", pr.eso_radius_min);
  pr.eso_radius_max = kv.get_double("phantom.eso_radius_max", pr.eso_radius_max);
  pr.eso_half_length_min = kv.get_double("phantom.eso_half_length_min", pr.eso_half_length_min);
  pr.eso_half_length_max = kv.get_double("phantom.eso_half_length_max", pr.eso_half_length_max);
  pr.eso_gap_min = kv.get_double("phantom.eso_gap_min", pr.eso_gap_min);
  pr.eso_gap_max = kv.get_double("phantom.eso_gap_max", pr.eso_gap_max);
  pr.bounds_half_extent_mm =
      kv.get_double("phantom.bounds_half_extent_mm", pr.bounds_half_extent_mm);
  return pr;
}

DatasetConfig dataset_config_from(const KeyValues& kv) {
  DatasetConfig c;
  c.master_seed = kv.get_u64("master_seed", c.master_seed);
  c.subjects_train = static_cast<int>(kv.get_int("subjects.train", c.subjects_train));
  c.subjects_val = static_cast<int>(kv.get_int("subjects.val", c.subjects_val));
  c.subjects_test = static_cast<int>(kv.get_int("subjects.test", c.subjects_test));
  c.samples_train = static_cast<int>(kv.get_int("samples.train", c.samples_train));
  c.samples_val = static_cast<int>(kv.get_int("samples.val", c.samples_val));
  c.samples_test = static_cast<int>(kv.get_int("samples.test", c.samples_test));
  c.fan = fan_from(kv);
  c.phantom_ranges = phantom_ranges_from(kv);
  c.shell_inner_mm = kv.get_double("pose.shell_inner_mm", c.shell_inner_mm);
  c.shell_outer_mm = kv.get_double("pose.shell_outer_mm", c.shell_outer_mm);
  c.roll_range_deg = kv.get_double("pose.roll_range_deg", c.roll_range_deg);
  c.cone_half_angle_deg = kv.get_double("pose.cone_half_angle_deg", c.cone_half_angle_deg);
  c.patch = static_cast<int>(kv.get_int("model.patch", c.patch));
  c.rotational_alignment = kv.get_bool("normalize.rotational", c.rotational_alignment);
  return c;
}

ViTConfig vit_config_from(const KeyValues& kv) {
  const std::string preset = kv.get_string("model.preset", "desk");
  ViTConfig c;
  if (preset == "desk")
    c = ViTConfig::desk();
  else if (preset == "paper")
    c = ViTConfig::paper();
  else
    throw ConfigError("unknown model.preset `" + preset + "` (expected desk or paper)");
  c.image_h = static_cast<int>(kv.get_int("fan.image_h", c.image_h));
  c.image_w = static_cast<int>(kv.get_int("fan.image_w", c.image_w));
  c.patch = static_cast<int>(kv.get_int("model.patch", c.patch));
  c.embed_dim = static_cast<int>(kv.get_int("model.embed_dim", c.embed_dim));
  c.depth = static_cast<int>(kv.get_int("model.depth", c.depth));
  c.heads = static_cast<int>(kv.get_int("model.heads", c.heads));
  c.mlp_ratio = static_cast<int>(kv.get_int("model.mlp_ratio", c.mlp_ratio));
  c.validate();
  return c;
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int("train.epochs", c.epochs));
  c.batch_size = static_cast<int>(kv.get_int("train.batch_size", c.batch_size));
  c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.adam_eps = kv.get_double("train.adam_eps", c.adam_eps);
  c.lambda = kv.get_double("train.lambda", c.lambda);
  c.pos_scale = kv.get_double("train.pos_scale", c.pos_scale);
  c.shuffle_seed = kv.get_u64("train.shuffle_seed", c.shuffle_seed);
  c.init_seed = kv.get_u64("train.init_seed", c.init_seed);
  c.checkpoint_every = static_cast<int>(kv.get_int("train.checkpoint_every", c.checkpoint_every));
  c.validate();
  return c;
}

}  // namespace icepose
