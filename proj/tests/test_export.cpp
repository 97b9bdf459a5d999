#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icepose/cli.hpp"
#include "icepose/config.hpp"
#include "icepose/dataset.hpp"
#include "icepose/scene_export.hpp"

using namespace icepose;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("tmp_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Vertex lines of one `g <name>` group of an OBJ file.
std::vector<std::string> group_vertices(const std::string& obj, const std::string& group) {
  std::istringstream in(obj);
  std::string line, current;
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    if (line.rfind("g ", 0) == 0) current = line.substr(2);
    else if (line.rfind("v ", 0) == 0 && current == group) out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("key = value parsing: comments, trimming, errors, exact doubles") {
  const KeyValues kv = KeyValues::parse_text(
      "# comment\n"
      "  alpha = 3.5 \n"
      "name = desk run\n"
      "flag = true\n"
      "\n");
  CHECK(kv.get_double("alpha") == 3.5);
  CHECK(kv.get_string("name") == "desk run");
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_int("missing", -7) == -7);

  CHECK_THROWS_AS(KeyValues::parse_text("no equals sign"), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse_text("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(kv.get_double("name"), ConfigError);

  KeyValues out;
  const double tricky = 0.1 + 0.2;  // not representable exactly in decimal
  out.set_double("x", tricky);
  const KeyValues back = KeyValues::parse_text(out.to_text());
  CHECK(back.get_double("x") == tricky);
}

TEST_CASE("fan strip: R rays at 2 samples per ray yields 2R vertices") {
  FanGeometry fan;
  fan.ray_count = 33;
  fan.samples_per_ray = 2;
  RigidTransform pose;
  pose.translation = Vec3(4, -9, 2);
  const std::vector<Vec3> verts = fan_strip_vertices(pose, fan);
  CHECK(verts.size() == 66);

  // Sample 0 is the shared apex; the far ring sits at depth.
  for (int r = 0; r < fan.ray_count; ++r) {
    CHECK((verts[static_cast<size_t>(r) * 2] - pose.translation).norm() < 1e-12);
    CHECK((verts[static_cast<size_t>(r) * 2 + 1] - pose.translation).norm() ==
          doctest::Approx(fan.depth_mm).epsilon(1e-12));
  }
}

TEST_CASE("fan strip vertices equal the renderer's sample points exactly") {
  FanGeometry fan;
  fan.ray_count = 17;
  fan.samples_per_ray = 9;
  Rng rng(3);
  const RigidTransform pose = random_rigid_transform(rng);
  const std::vector<Vec3> verts = fan_strip_vertices(pose, fan);
  for (int r = 0; r < fan.ray_count; ++r)
    for (int s = 0; s < fan.samples_per_ray; ++s) {
      const Vec3 expected = fan_sample_point(pose, fan, r, s);
      const Vec3 got = verts[static_cast<size_t>(r) * fan.samples_per_ray + s];
      CHECK((got - expected).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("isosurface vertices lie near the zero set") {
  const AnatomyPhantom ph = generate_phantom(8);
  const int grid = 48;
  const double cell = 2.0 * ph.bounds_half_extent_mm / grid;
  const std::vector<SceneTriangle> tris = phantom_isosurface(ph, grid);
  REQUIRE(tris.size() > 100);
  for (const SceneTriangle& t : tris)
    for (const Vec3& v : {t.a, t.b, t.c}) CHECK(std::abs(sdf_eval(ph, v)) < 1.5 * cell);
}

TEST_CASE("export_scene: identical poses produce identical fan groups") {
  const AnatomyPhantom ph = generate_phantom(9);
  RigidTransform pose;
  pose.translation = ph.la.center + Vec3(0, -50, 0);
  FanGeometry fan;
  fan.ray_count = 12;
  fan.samples_per_ray = 4;

  TempDir dir("export_same");
  const std::string path = dir.path + "/scene.obj";
  export_scene(ph, pose, &pose, fan, path, 24);
  const std::string obj = slurp(path);

  const auto gt = group_vertices(obj, "fan_target");
  const auto pred = group_vertices(obj, "fan_predicted");
  CHECK(gt.size() == 12 * 4);
  CHECK(gt == pred);

  const auto phantom_verts = group_vertices(obj, "phantom");
  CHECK(phantom_verts.size() > 0);
}

TEST_CASE("export_scene is byte-deterministic") {
  const AnatomyPhantom ph = generate_phantom(10);
  RigidTransform gt, pred;
  gt.translation = ph.la.center + Vec3(0, -45, 0);
  Rng rng(4);
  pred.rotation = random_rotation(rng);
  pred.translation = gt.translation + Vec3(3, 1, -2);
  FanGeometry fan;
  fan.ray_count = 10;
  fan.samples_per_ray = 3;

  TempDir dir("export_det");
  const std::string path = dir.path + "/scene.obj";
  export_scene(ph, gt, &pred, fan, path, 24);
  const std::string first_obj = slurp(path);
  const std::string first_mtl = slurp(path + ".mtl");
  export_scene(ph, gt, &pred, fan, path, 24);
  CHECK(slurp(path) == first_obj);
  CHECK(slurp(path + ".mtl") == first_mtl);
}

TEST_CASE("cli: help exits 0, usage errors exit 1") {
  CHECK(cli_dispatch({"--help"}) == 0);
  CHECK(cli_dispatch({"phantom", "--help"}) == 0);
  CHECK(cli_dispatch({"frobnicate"}) == 1);
  CHECK(cli_dispatch({}) == 1);
  CHECK(cli_dispatch({"dataset"}) == 1);                       // missing --out
  CHECK(cli_dispatch({"dataset", "--bogus-flag", "x"}) == 1);  // unknown flag
}

TEST_CASE("cli: runtime failures exit 2") {
  CHECK(cli_dispatch({"eval", "--dataset", "does_not_exist_dir"}) == 2);
  CHECK(cli_dispatch({"train", "--dataset", "nope", "--out", "also_nope"}) == 2);
}

TEST_CASE("cli: dataset -> train -> eval -> export-scene pipeline") {
  TempDir dir("cli_pipeline");
  const std::string cfg_path = dir.path + "/desk.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "master_seed = 13\n"
           "subjects.train = 2\nsubjects.val = 1\nsubjects.test = 1\n"
           "samples.train = 12\nsamples.val = 4\nsamples.test = 4\n"
           "fan.ray_count = 32\nfan.samples_per_ray = 32\n"
           "fan.image_h = 16\nfan.image_w = 16\n"
           "model.patch = 8\nmodel.embed_dim = 16\nmodel.depth = 1\nmodel.heads = 2\n"
           "train.epochs = 2\ntrain.batch_size = 8\n";
  }
  const std::string ds = dir.path + "/ds";
  const std::string run = dir.path + "/run";
  CHECK(cli_dispatch({"dataset", "--config", cfg_path, "--out", ds}) == 0);
  CHECK(cli_dispatch({"train", "--config", cfg_path, "--dataset", ds, "--out", run}) == 0);
  CHECK(std::filesystem::exists(run + "/ckpt_final.bin"));
  CHECK(std::filesystem::exists(run + "/loss_log.csv"));

  const std::string report = dir.path + "/report";
  CHECK(cli_dispatch({"eval", "--config", cfg_path, "--dataset", ds, "--checkpoint",
                      run + "/ckpt_final.bin", "--split", "test", "--out", report}) == 0);
  CHECK(std::filesystem::exists(report + ".txt"));
  CHECK(std::filesystem::exists(report + ".csv"));
  const std::string txt = slurp(report + ".txt");
  CHECK(txt.find("[mm]") != std::string::npos);
  CHECK(txt.find("[degree]") != std::string::npos);

  CHECK(cli_dispatch({"eval", "--config", cfg_path, "--dataset", ds, "--baseline"}) == 0);

  const std::string scene = dir.path + "/scene.obj";
  CHECK(cli_dispatch({"export-scene", "--dataset", ds, "--split", "test", "--index", "1",
                      "--checkpoint", run + "/ckpt_final.bin", "--out", scene, "--grid", "24",
                      "--fan-rays", "8", "--fan-samples", "3"}) == 0);
  const std::string obj = slurp(scene);
  CHECK(group_vertices(obj, "fan_target").size() == 8 * 3);
  CHECK(group_vertices(obj, "fan_predicted").size() == 8 * 3);

  CHECK(cli_dispatch({"gradcheck", "--seed", "5"}) == 0);
}

TEST_CASE("loss log format is epoch,step,loss") {
  TempDir dir("cli_losslog");
  const std::string cfg_path = dir.path + "/c.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "master_seed = 21\nsubjects.train = 1\nsubjects.val = 1\nsubjects.test = 1\n"
           "samples.train = 8\nsamples.val = 2\nsamples.test = 2\n"
           "fan.ray_count = 16\nfan.samples_per_ray = 16\n"
           "fan.image_h = 8\nfan.image_w = 8\nmodel.patch = 4\n"
           "model.embed_dim = 8\nmodel.depth = 1\nmodel.heads = 2\n"
           "train.epochs = 2\ntrain.batch_size = 4\n";
  }
  const std::string ds = dir.path + "/ds";
  const std::string run = dir.path + "/run";
  REQUIRE(cli_dispatch({"dataset", "--config", cfg_path, "--out", ds}) == 0);
  REQUIRE(cli_dispatch({"train", "--config", cfg_path, "--dataset", ds, "--out", run}) == 0);

  std::ifstream log(run + "/loss_log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "epoch,step,loss");
  int rows = 0;
  std::string line;
  while (std::getline(log, line)) {
    int epoch, step;
    double loss;
    CHECK(std::sscanf(line.c_str(), "%d,%d,%lf", &epoch, &step, &loss) == 3);
    ++rows;
  }
  CHECK(rows == 4);  // 2 epochs x 2 steps
}
