#include "icepose/scene_export.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "icepose/errors.hpp"

namespace icepose {

std::vector<Vec3> fan_strip_vertices(const RigidTransform& pose_world, const FanGeometry& fan) {
  validate_fan(fan);
  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(fan.ray_count) * fan.samples_per_ray);
  for (int r = 0; r < fan.ray_count; ++r)
    for (int s = 0; s < fan.samples_per_ray; ++s)
      out.push_back(fan_sample_point(pose_world, fan, r, s));
  return out;
}

namespace {

Vec3 edge_zero(const Vec3& pa, const Vec3& pb, double sa, double sb) {
  const double t = sa / (sa - sb);  // signs differ, so sa != sb
  return pa + t * (pb - pa);
}

// Polygonizes one tetrahedron of the cell; emits 0, 1, or 2 triangles whose
// vertices lie on sign-change edges.
void polygonize_tet(const std::array<Vec3, 4>& p, const std::array<double, 4>& s,
                    std::vector<SceneTriangle>& out) {
  std::array<int, 4> inside{}, outside{};
  int ni = 0, no = 0;
  for (int i = 0; i < 4; ++i) {
    if (s[static_cast<size_t>(i)] < 0.0)
      inside[static_cast<size_t>(ni++)] = i;
    else
      outside[static_cast<size_t>(no++)] = i;
  }
  auto cross_pt = [&](int a, int b) {
    return edge_zero(p[static_cast<size_t>(a)], p[static_cast<size_t>(b)],
                     s[static_cast<size_t>(a)], s[static_cast<size_t>(b)]);
  };
  if (ni == 1) {
    out.push_back({cross_pt(inside[0], outside[0]), cross_pt(inside[0], outside[1]),
                   cross_pt(inside[0], outside[2])});
  } else if (ni == 3) {
    out.push_back({cross_pt(outside[0], inside[0]), cross_pt(outside[0], inside[1]),
                   cross_pt(outside[0], inside[2])});
  } else if (ni == 2) {
    const Vec3 e00 = cross_pt(inside[0], outside[0]);
    const Vec3 e01 = cross_pt(inside[0], outside[1]);
    const Vec3 e10 = cross_pt(inside[1], outside[0]);
    const Vec3 e11 = cross_pt(inside[1], outside[1]);
    out.push_back({e00, e01, e11});
    out.push_back({e00, e11, e10});
  }
}

// Six tetrahedra sharing the 0-7 body diagonal cover the cube.
constexpr int kTets[6][4] = {{0, 5, 1, 7}, {0, 1, 3, 7}, {0, 3, 2, 7},
                             {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}};

}  // namespace

std::vector<SceneTriangle> phantom_isosurface(const AnatomyPhantom& phantom,
                                              int grid_resolution) {
  if (grid_resolution < 2) throw ConfigError("isosurface grid resolution must be >= 2");
  const int n = grid_resolution;
  const double half = phantom.bounds_half_extent_mm;
  const Vec3 origin = phantom.bounds_center.array() - half;
  const double cell = 2.0 * half / n;

  // Corner grid of (n+1)^3 SDF samples.
  const int stride = n + 1;
  std::vector<double> field(static_cast<size_t>(stride) * stride * stride);
  auto at = [&](int x, int y, int z) -> double& {
    return field[(static_cast<size_t>(z) * stride + static_cast<size_t>(y)) * stride +
                 static_cast<size_t>(x)];
  };
  for (int z = 0; z <= n; ++z)
    for (int y = 0; y <= n; ++y)
      for (int x = 0; x <= n; ++x)
        at(x, y, z) = sdf_eval(phantom, origin + Vec3(x, y, z) * cell);

  std::vector<SceneTriangle> tris;
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        std::array<Vec3, 8> corner;
        std::array<double, 8> value;
        for (int i = 0; i < 8; ++i) {
          const int dx = i & 1, dy = (i >> 1) & 1, dz = (i >> 2) & 1;
          corner[static_cast<size_t>(i)] = origin + Vec3(x + dx, y + dy, z + dz) * cell;
          value[static_cast<size_t>(i)] = at(x + dx, y + dy, z + dz);
        }
        bool any_in = false, any_out = false;
        for (double v : value) (v < 0.0 ? any_in : any_out) = true;
        if (!any_in || !any_out) continue;
        for (const auto& tet : kTets) {
          const std::array<Vec3, 4> p{corner[static_cast<size_t>(tet[0])],
                                      corner[static_cast<size_t>(tet[1])],
                                      corner[static_cast<size_t>(tet[2])],
                                      corner[static_cast<size_t>(tet[3])]};
          const std::array<double, 4> s{value[static_cast<size_t>(tet[0])],
                                        value[static_cast<size_t>(tet[1])],
                                        value[static_cast<size_t>(tet[2])],
                                        value[static_cast<size_t>(tet[3])]};
          polygonize_tet(p, s, tris);
        }
      }
    }
  }
  return tris;
}

namespace {

void emit_vertex(std::string& out, const Vec3& v) {
  char line[96];
  std::snprintf(line, sizeof(line), "v %.5f %.5f %.5f\n", v[0], v[1], v[2]);
  out += line;
}

int emit_fan_group(std::string& out, const char* group, const char* material,
                   const RigidTransform& pose, const FanGeometry& fan, int base_index) {
  out += "g ";
  out += group;
  out += "\nusemtl ";
  out += material;
  out += '\n';
  const std::vector<Vec3> verts = fan_strip_vertices(pose, fan);
  for (const Vec3& v : verts) emit_vertex(out, v);
  const int s_count = fan.samples_per_ray;
  for (int r = 0; r + 1 < fan.ray_count; ++r) {
    for (int s = 0; s + 1 < s_count; ++s) {
      const int a = base_index + r * s_count + s;
      const int b = base_index + (r + 1) * s_count + s;
      char line[96];
      std::snprintf(line, sizeof(line), "f %d %d %d %d\n", a, b, b + 1, a + 1);
      out += line;
    }
  }
  return base_index + static_cast<int>(verts.size());
}

}  // namespace

void export_scene(const AnatomyPhantom& phantom, const RigidTransform& gt_pose,
                  const RigidTransform* pred_pose, const FanGeometry& fan,
                  const std::string& out_path, int grid_resolution) {
  const std::string mtl_path = out_path + ".mtl";
  {
    std::ofstream mtl(mtl_path, std::ios::binary | std::ios::trunc);
    if (!mtl) throw IoError("cannot write material file: " + mtl_path);
    mtl << "newmtl phantom\nKd 0.80 0.78 0.75\nd 0.55\n\n"
           "newmtl gray\nKd 0.55 0.55 0.55\nd 0.85\n\n"
           "newmtl green\nKd 0.10 0.45 0.15\nd 0.85\n";
  }

  std::string obj;
  obj += "# icepose scene export\n";
  // Only the file name, so the pair relocates together.
  const size_t slash = mtl_path.find_last_of('/');
  obj += "mtllib " + (slash == std::string::npos ? mtl_path : mtl_path.substr(slash + 1)) + "\n";

  obj += "g phantom\nusemtl phantom\n";
  const std::vector<SceneTriangle> tris = phantom_isosurface(phantom, grid_resolution);
  for (const SceneTriangle& t : tris) {
    emit_vertex(obj, t.a);
    emit_vertex(obj, t.b);
    emit_vertex(obj, t.c);
  }
  int next = 1;
  for (size_t i = 0; i < tris.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "f %d %d %d\n", next, next + 1, next + 2);
    obj += line;
    next += 3;
  }

  next = emit_fan_group(obj, "fan_target", "gray", gt_pose, fan, next);
  if (pred_pose) next = emit_fan_group(obj, "fan_predicted", "green", *pred_pose, fan, next);

  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write scene: " + out_path);
  out << obj;
  if (!out) throw IoError("scene write failed: " + out_path);
}

}  // namespace icepose
