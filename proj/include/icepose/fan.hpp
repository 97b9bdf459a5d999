#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "icepose/geometry.hpp"
#include "icepose/phantom.hpp"

namespace icepose {

// Sector geometry of the imaging fan. The fan plane is the transducer's local
// x-y plane: apex at the pose position, centerline along local +y, rays spread
// symmetrically by sector_angle. Ray r has angle
//   theta_r = -alpha/2 + alpha * r / (ray_count - 1),
// and sample s sits at range depth * s / (samples_per_ray - 1), so the grid
// includes the apex and the far edge.
struct FanGeometry {
  double sector_angle_deg = 90.0;
  double depth_mm = 100.0;
  int ray_count = 128;
  int samples_per_ray = 128;
  int image_h = 64;
  int image_w = 64;
};

void validate_fan(const FanGeometry& fan);
// Image dimensions must be divisible by the ViT patch size in use.
void check_patch_compatible(const FanGeometry& fan, int patch);

double ray_angle_rad(const FanGeometry& fan, int ray);
Vec3 ray_direction_local(const FanGeometry& fan, int ray);

// World-space polar sample point; the single source of ray geometry shared by
// the renderer and the scene exporter.
Vec3 fan_sample_point(const RigidTransform& pose_world, const FanGeometry& fan, int ray,
                      int sample);

// Nearest-ray / nearest-sample scan conversion of a pixel center. Depends on
// FanGeometry alone, so the out-of-sector mask is reproducible without a
// render.
struct PolarIndex {
  bool in_sector = false;
  int ray = 0;
  int sample = 0;
};
PolarIndex pixel_to_polar(const FanGeometry& fan, int row, int col);

// Scan-converted sector image. Pixels are row-major H x W in [0, 1]; pixels
// outside the sector are exactly 0. Row 0 holds the apex side.
struct FanImage {
  std::vector<double> pixels;
  int height = 0;
  int width = 0;
  RigidTransform pose_world;
  FanGeometry fan;

  double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
};

inline constexpr double kSpeckleSigma = 0.15;

// Renders intensity_at over the polar grid, applies multiplicative speckle
// (uniform [1-sigma, 1+sigma], seeded, ray-major draw order, clamped to
// [0,1]), then scan-converts. Bit-exact for identical inputs.
FanImage render_fan(const AnatomyPhantom& phantom, const RigidTransform& pose_world,
                    const FanGeometry& fan, std::uint64_t noise_seed);

// Same pipeline without the speckle stage; used by rendering oracles.
FanImage render_fan_raw(const AnatomyPhantom& phantom, const RigidTransform& pose_world,
                        const FanGeometry& fan);

}  // namespace icepose
