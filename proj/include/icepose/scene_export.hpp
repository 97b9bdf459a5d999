#pragma once

#include <string>
#include <vector>

#include "icepose/fan.hpp"
#include "icepose/geometry.hpp"
#include "icepose/phantom.hpp"

namespace icepose {

// All fan sample points (ray-major, ray_count * samples_per_ray entries),
// straight from fan_sample_point; the exporter and the renderer share this
// geometry by construction.
std::vector<Vec3> fan_strip_vertices(const RigidTransform& pose_world, const FanGeometry& fan);

struct SceneTriangle {
  Vec3 a, b, c;
};

// Zero isosurface of the phantom SDF on a uniform grid over its bounding box.
// Cells are polygonized through a six-tetrahedron decomposition, so vertices
// sit on sign-change edges exactly like classic marching cubes.
std::vector<SceneTriangle> phantom_isosurface(const AnatomyPhantom& phantom,
                                              int grid_resolution = 64);

// ASCII OBJ scene: phantom isosurface plus the ground-truth fan sheet (gray)
// and, when given, the predicted fan sheet (green). Also writes `<path>.mtl`
// beside the OBJ. Byte-deterministic for identical inputs.
void export_scene(const AnatomyPhantom& phantom, const RigidTransform& gt_pose,
                  const RigidTransform* pred_pose, const FanGeometry& fan,
                  const std::string& out_path, int grid_resolution = 64);

}  // namespace icepose
