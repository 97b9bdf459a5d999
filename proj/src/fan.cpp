#include "icepose/fan.hpp"

#include <cmath>

#include "icepose/errors.hpp"
#include "icepose/rng.hpp"

namespace icepose {

void validate_fan(const FanGeometry& fan) {
  if (!(fan.sector_angle_deg > 0.0) || !(fan.sector_angle_deg < 180.0))
    throw ConfigError("fan sector_angle_deg must be in (0, 180)");
  if (!(fan.depth_mm > 0.0)) throw ConfigError("fan depth_mm must be positive");
  if (fan.ray_count < 2) throw ConfigError("fan ray_count must be >= 2");
  if (fan.samples_per_ray < 2) throw ConfigError("fan samples_per_ray must be >= 2");
  if (fan.image_h < 1 || fan.image_w < 1) throw ConfigError("fan image dimensions must be >= 1");
}

void check_patch_compatible(const FanGeometry& fan, int patch) {
  if (patch < 1) throw ConfigError("patch size must be >= 1");
  if (fan.image_h % patch != 0 || fan.image_w % patch != 0)
    throw ConfigError("fan image " + std::to_string(fan.image_h) + "x" +
                      std::to_string(fan.image_w) + " is not divisible by patch size " +
                      std::to_string(patch));
}

double ray_angle_rad(const FanGeometry& fan, int ray) {
  const double alpha = fan.sector_angle_deg * M_PI / 180.0;
  return -0.5 * alpha + alpha * static_cast<double>(ray) / (fan.ray_count - 1);
}

Vec3 ray_direction_local(const FanGeometry& fan, int ray) {
  const double theta = ray_angle_rad(fan, ray);
  return {std::sin(theta), std::cos(theta), 0.0};
}

Vec3 fan_sample_point(const RigidTransform& pose_world, const FanGeometry& fan, int ray,
                      int sample) {
  const double t = fan.depth_mm * static_cast<double>(sample) / (fan.samples_per_ray - 1);
  return pose_world.apply(ray_direction_local(fan, ray) * t);
}

PolarIndex pixel_to_polar(const FanGeometry& fan, int row, int col) {
  const double alpha = fan.sector_angle_deg * M_PI / 180.0;
  const double half_span = fan.depth_mm * std::sin(0.5 * alpha);
  const double u = (col + 0.5) / fan.image_w * 2.0 * half_span - half_span;  // lateral
  const double v = (row + 0.5) / fan.image_h * fan.depth_mm;                 // axial
  const double rho = std::hypot(u, v);
  const double theta = std::atan2(u, v);
  PolarIndex out;
  if (rho > fan.depth_mm || std::abs(theta) > 0.5 * alpha) return out;
  out.in_sector = true;
  const double rf = (theta + 0.5 * alpha) / alpha * (fan.ray_count - 1);
  const double sf = rho / fan.depth_mm * (fan.samples_per_ray - 1);
  out.ray = std::clamp(static_cast<int>(std::lround(rf)), 0, fan.ray_count - 1);
  out.sample = std::clamp(static_cast<int>(std::lround(sf)), 0, fan.samples_per_ray - 1);
  return out;
}

namespace {

FanImage render_impl(const AnatomyPhantom& phantom, const RigidTransform& pose_world,
                     const FanGeometry& fan, const std::uint64_t* noise_seed) {
  validate_fan(fan);

  // Polar pass, ray-major.
  std::vector<double> polar(static_cast<size_t>(fan.ray_count) * fan.samples_per_ray);
  for (int r = 0; r < fan.ray_count; ++r)
    for (int s = 0; s < fan.samples_per_ray; ++s)
      polar[static_cast<size_t>(r) * fan.samples_per_ray + s] =
          intensity_at(phantom, fan_sample_point(pose_world, fan, r, s));

  if (noise_seed) {
    Rng rng(derive_seed(*noise_seed, 0x7370636bull));  // speckle stream
    for (double& v : polar)
      v = std::clamp(v * rng.uniform(1.0 - kSpeckleSigma, 1.0 + kSpeckleSigma), 0.0, 1.0);
  }

  FanImage img;
  img.height = fan.image_h;
  img.width = fan.image_w;
  img.pose_world = pose_world;
  img.fan = fan;
  img.pixels.assign(static_cast<size_t>(fan.image_h) * fan.image_w, 0.0);
  for (int row = 0; row < fan.image_h; ++row) {
    for (int col = 0; col < fan.image_w; ++col) {
      const PolarIndex p = pixel_to_polar(fan, row, col);
      if (p.in_sector)
        img.at(row, col) = polar[static_cast<size_t>(p.ray) * fan.samples_per_ray + p.sample];
    }
  }
  return img;
}

}  // namespace

FanImage render_fan(const AnatomyPhantom& phantom, const RigidTransform& pose_world,
                    const FanGeometry& fan, std::uint64_t noise_seed) {
  return render_impl(phantom, pose_world, fan, &noise_seed);
}

FanImage render_fan_raw(const AnatomyPhantom& phantom, const RigidTransform& pose_world,
                        const FanGeometry& fan) {
  return render_impl(phantom, pose_world, fan, nullptr);
}

}  // namespace icepose
