#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "../src/png_io.hpp"
#include "polarpose/dataio.hpp"
#include "polarpose/solver.hpp"
#include "polarpose/synth.hpp"
#include "test_support.hpp"

using namespace polarpose;
namespace fs = std::filesystem;
using testsup::TempDir;

TEST_SUITE_BEGIN("cli");

namespace {

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = (env.empty() ? "" : env + " ") + std::string(POLARPOSE_CLI_PATH) +
                    " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) output += buf;
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, output};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Writes a cube mesh + pose file and synthesizes one frame via the CLI.
struct Fixture {
  TempDir tmp{"cli"};
  fs::path mesh = tmp.path() / "cube.ply";
  fs::path pose = tmp.path() / "pose.json";
  fs::path frame = tmp.path() / "frame";
  posemath::Pose gt;

  explicit Fixture(const std::string& extra_synth_flags = "",
                   const std::string& object = "cup") {
    std::mt19937_64 rng(97);
    gt.rotation = testsup::random_rotation(rng);
    gt.translation = {0.01, -0.02, 0.55};
    write_cube_ply();
    dataio::PoseEstimate est;
    est.pose = gt;
    dataio::save_pose_estimate(pose, est);
    CliResult r = run_cli("synth " + mesh.string() + " " + pose.string() + " " +
                          frame.string() + " --object " + object + " " +
                          extra_synth_flags);
    REQUIRE(r.exit_code == 0);
  }

  void write_cube_ply() const {
    std::ofstream out(mesh);
    out << "ply\nformat ascii 1.0\nelement vertex 8\n"
           "property float x\nproperty float y\nproperty float z\n"
           "element face 6\nproperty list uchar int vertex_indices\nend_header\n";
    for (int i = 0; i < 8; ++i)
      out << ((i & 1) ? 0.05 : -0.05) << " " << ((i & 2) ? 0.05 : -0.05) << " "
          << ((i & 4) ? 0.05 : -0.05) << "\n";
    out << "4 0 2 3 1\n4 4 5 7 6\n4 0 1 5 4\n4 2 6 7 3\n4 0 4 6 2\n4 1 3 7 5\n";
  }
};

}  // namespace

TEST_CASE("--help exits 0 on every subcommand") {
  CHECK(run_cli("--help").exit_code == 0);
  for (const char* sub : {"decode", "priors", "synth", "solve", "eval"}) {
    CliResult r = run_cli(std::string(sub) + " --help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("Usage") != std::string::npos);
  }
  CHECK(run_cli("").exit_code == 1);              // missing subcommand
  CHECK(run_cli("decode").exit_code == 1);        // missing args
  CHECK(run_cli("frobnicate x").exit_code == 1);  // unknown subcommand
}

TEST_CASE("synth then decode/priors/solve/eval round trips the cube frame") {
  Fixture fx;

  // The frame loads back through the dataset layout.
  auto quad = dataio::load_quadruplet(fx.frame);
  CHECK(quad.width() == 256);
  auto ann = dataio::load_annotation(fx.frame / "ann.json");
  CHECK(ann.object_id == "cup");
  CHECK((ann.pose.rotation - fx.gt.rotation).cwiseAbs().maxCoeff() < 1e-9);
  auto mask = dataio::load_mask(fx.frame / "mask.png");
  CHECK(count_set(mask) > 500);

  // decode: stored maps match an in-process decode within encoding error.
  fs::path decoded_dir = fx.tmp.path() / "decoded";
  CliResult dec = run_cli("decode " + fx.frame.string() + " " + decoded_dir.string());
  CHECK(dec.exit_code == 0);
  auto decomp = stokes::decode_image(quad);
  auto stored_dolp = dataio::load_map_scalar(decoded_dir / "dolp.png",
                                             dataio::MapKind::kDolp);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < decomp.valid.size(); ++i) {
    if (!decomp.valid[i]) continue;
    CHECK(std::abs(stored_dolp[i] - decomp.dolp[i]) < 1e-4);
    ++compared;
  }
  CHECK(compared > 500);

  // priors from the frame (eta comes from the annotation).
  fs::path priors_dir = fx.tmp.path() / "frame_priors";
  CHECK(run_cli("priors " + fx.frame.string() + " " + priors_dir.string()).exit_code == 0);
  CHECK(fs::exists(priors_dir / "n_d.png"));
  CHECK(fs::exists(priors_dir / "n_s1.png"));
  CHECK(fs::exists(priors_dir / "n_s2.png"));

  // priors from a decoded directory require an explicit eta.
  fs::path priors2 = fx.tmp.path() / "decoded_priors";
  CHECK(run_cli("priors " + decoded_dir.string() + " " + priors2.string()).exit_code == 1);
  CHECK(run_cli("priors " + decoded_dir.string() + " " + priors2.string() + " --eta 1.5")
            .exit_code == 0);

  // solve: pose error well under the acceptance bounds.
  CliResult solved = run_cli("solve " + fx.frame.string() + " --seed 3 --stride 2");
  CHECK(solved.exit_code == 0);
  auto est = dataio::load_pose_estimate(fx.frame / "pose_est.json");
  CHECK(testsup::rotation_error_deg(est.pose.rotation, fx.gt.rotation) < 0.1);
  CHECK((est.pose.translation - fx.gt.translation).norm() < 1e-4);
  CHECK(est.inlier_ratio > 0.99);

  // eval against the annotation: identity-quality prediction -> 100%.
  fs::path report = fx.tmp.path() / "report.json";
  CliResult ev = run_cli("eval --pred " + (fx.frame / "pose_est.json").string() +
                         " --gt " + fx.frame.string() + " --report " + report.string());
  CHECK(ev.exit_code == 0);
  CHECK(ev.output.find("recall") != std::string::npos);
  CHECK(ev.output.find("100") != std::string::npos);

  std::ifstream in(report);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"schema_version\"") != std::string::npos);
  CHECK(text.find("\"add_recall_pct\": 100.0") != std::string::npos);
}

TEST_CASE("synth is deterministic for a fixed seed") {
  Fixture a("--noise 0.01 --bit-depth 8 --seed 7");
  fs::path second = a.tmp.path() / "frame2";
  CliResult r = run_cli("synth " + a.mesh.string() + " " + a.pose.string() + " " +
                        second.string() + " --object cup --noise 0.01 --bit-depth 8 "
                        "--seed 7");
  REQUIRE(r.exit_code == 0);
  for (const char* name : dataio::kPlaneNames)
    CHECK(read_bytes(a.frame / name) == read_bytes(second / name));

  fs::path third = a.tmp.path() / "frame3";
  REQUIRE(run_cli("synth " + a.mesh.string() + " " + a.pose.string() + " " +
                  third.string() + " --object cup --noise 0.01 --bit-depth 8 --seed 8")
              .exit_code == 0);
  CHECK(read_bytes(a.frame / "I000.png") != read_bytes(third / "I000.png"));
}

TEST_CASE("wrong refractive index degrades the priors") {
  Fixture fx("--eta 2.75", "fork");

  fs::path good = fx.tmp.path() / "priors_correct";
  fs::path bad = fx.tmp.path() / "priors_wrong";
  REQUIRE(run_cli("priors " + fx.frame.string() + " " + good.string() + " --eta 2.75")
              .exit_code == 0);
  REQUIRE(run_cli("priors " + fx.frame.string() + " " + bad.string() + " --eta 1.5")
              .exit_code == 0);

  auto gt_normals = dataio::load_map_vec3(fx.frame / "gt_normals.png",
                                          dataio::MapKind::kNormals);
  auto mask = dataio::load_mask(fx.frame / "mask.png");
  auto mean_err = [&](const fs::path& dir) {
    auto n_d = dataio::load_map_vec3(dir / "n_d.png", dataio::MapKind::kNormals);
    auto valid = dataio::load_mask(dir / "priors_valid.png");
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i] || !valid[i]) continue;
      double zenith = std::acos(std::clamp(gt_normals[i].normalized().z(), -1.0, 1.0));
      if (zenith < 0.17 || zenith > 1.4) continue;
      sum += testsup::ambiguity_aware_angle_deg(n_d[i], gt_normals[i]);
      ++count;
    }
    REQUIRE(count > 200);
    return sum / count;
  };
  double err_correct = mean_err(good);
  double err_wrong = mean_err(bad);
  CHECK(err_correct < err_wrong);
  CHECK(err_correct < 1.0);
}

TEST_CASE("per-channel decode writes three decompositions") {
  TempDir tmp("rgb");
  // RGB quadruplet with per-channel DOLP structure.
  const int w = 16, h = 12;
  auto angles = stokes::canonical_angles();
  const double rho[3] = {0.1, 0.4, 0.7};
  for (int p = 0; p < 4; ++p) {
    std::vector<std::uint16_t> px(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i)
      for (int c = 0; c < 3; ++c) {
        double v = stokes::forward_pixel(0.3, rho[c], 0.9, angles[p]);
        px[3 * i + c] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
    detail::write_png(tmp.path() / dataio::kPlaneNames[p], w, h, 3, 16, px.data());
  }
  write_text(tmp.path() / "meta.json",
             R"({"schema_version":1,"angles_deg":[0,45,90,135],)"
             R"("saturation_level":1.0,"bit_depth":16})");

  fs::path out = tmp.path() / "out";
  CliResult r = run_cli("decode " + tmp.path().string() + " " + out.string() +
                        " --per-channel");
  CHECK(r.exit_code == 0);
  const char* channel[3] = {"r", "g", "b"};
  for (int c = 0; c < 3; ++c) {
    auto dolp = dataio::load_map_scalar(out / channel[c] / "dolp.png",
                                        dataio::MapKind::kDolp);
    CHECK(dolp[0] == doctest::Approx(rho[c]).epsilon(1e-3));
  }

  // Grayscale input cannot be split per channel.
  Fixture fx;
  CHECK(run_cli("decode " + fx.frame.string() + " " + out.string() + " --per-channel")
            .exit_code == 2);
}

TEST_CASE("failure exit codes: data errors, empty masks, behind camera") {
  TempDir tmp("codes");
  fs::create_directories(tmp.path() / "empty");
  CliResult r = run_cli("decode " + (tmp.path() / "empty").string() + " " +
                        (tmp.path() / "out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("I000.png") != std::string::npos);

  // Behind-camera pose: exit 0 with a warning and an empty mask.
  Fixture fx;
  dataio::PoseEstimate behind;
  behind.pose.translation = {0, 0, -0.6};
  fs::path behind_pose = fx.tmp.path() / "behind.json";
  dataio::save_pose_estimate(behind_pose, behind);
  CliResult b = run_cli("synth " + fx.mesh.string() + " " + behind_pose.string() + " " +
                        (fx.tmp.path() / "behind_frame").string());
  CHECK(b.exit_code == 0);
  CHECK(b.output.find("empty mask") != std::string::npos);
  CHECK(count_set(dataio::load_mask(fx.tmp.path() / "behind_frame" / "mask.png")) == 0);

  // All-false mask: no correspondences, exit 3.
  ImageMask zeros(256, 256, 0);
  dataio::save_mask(fx.frame / "mask.png", zeros);
  CliResult s = run_cli("solve " + fx.frame.string());
  CHECK(s.exit_code == 3);
}

TEST_CASE("scene mode with --jobs, env LUT override, eval normal metrics") {
  // Two-frame scene assembled from single-frame synth runs.
  Fixture fx;
  TempDir tmp("scene");
  fs::path scene = tmp.path() / "scene";
  for (const char* id : {"000001", "000002"}) {
    REQUIRE(run_cli("synth " + fx.mesh.string() + " " + fx.pose.string() + " " +
                    (scene / id).string() + " --object cup")
                .exit_code == 0);
  }

  // Scene-wide decode on two worker threads.
  fs::path decoded = tmp.path() / "decoded";
  CHECK(run_cli("decode " + scene.string() + " " + decoded.string() + " --jobs 2")
            .exit_code == 0);
  CHECK(fs::exists(decoded / "000001" / "dolp.png"));
  CHECK(fs::exists(decoded / "000002" / "dolp.png"));

  // Priors written next to the frames; the env var overrides the LUT size.
  CHECK(run_cli("priors " + scene.string() + " " + scene.string() + " --jobs 2",
                "POLARPOSE_LUT_SIZE=4096")
            .exit_code == 0);
  CHECK(fs::exists(scene / "000001" / "n_d.png"));
  CHECK(run_cli("priors " + scene.string() + " " + scene.string(),
                "POLARPOSE_LUT_SIZE=banana")
            .exit_code == 1);
  CHECK(run_cli("priors " + scene.string() + " " + scene.string(),
                "POLARPOSE_LUT_SIZE=32")
            .exit_code == 1);

  // Solve every frame, then evaluate the scene against itself: poses come
  // from <frame>/pose_est.json and normal metrics from the prior maps.
  CHECK(run_cli("solve " + scene.string() + " --jobs 2 --seed 1").exit_code == 0);
  fs::path report = tmp.path() / "report.json";
  CliResult ev = run_cli("eval --pred " + scene.string() + " --gt " + scene.string() +
                         " --report " + report.string());
  CHECK(ev.exit_code == 0);
  CHECK(ev.output.find("recall (0.1d): 100%") != std::string::npos);
  CHECK(ev.output.find("normal mean error") != std::string::npos);

  std::ifstream in(report);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"normal_metrics\"") != std::string::npos);
  CHECK(text.find("\"frame_count\": 2") != std::string::npos);
}

TEST_CASE("eval supports symmetric objects and reports unmatched frames") {
  TempDir tmp("eval");

  // Ring point cloud written as a faceless PLY.
  fs::path mesh_path = tmp.path() / "ring.ply";
  {
    std::ofstream out(mesh_path);
    const int n = 360;
    out << "ply\nformat ascii 1.0\nelement vertex " << n
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    for (int i = 0; i < n; ++i)
      out << 0.05 * std::cos(2 * testsup::kPi * i / n) << " "
          << 0.05 * std::sin(2 * testsup::kPi * i / n) << " 0\n";
  }

  // Scene with one annotated frame (mask/quadruplet are irrelevant to eval).
  fs::path scene = tmp.path() / "scene";
  fs::create_directories(scene / "000001");
  dataio::SceneAnnotation ann;
  ann.object_id = "ring";
  ann.pose.rotation = Eigen::Matrix3d::Identity();
  ann.pose.translation = {0, 0, 0.5};
  ann.bbox = {128, 128, 60, 60, 256};
  ann.symmetry = posemath::SymmetryGroup::revolution(Eigen::Vector3d::UnitZ(), 360);
  dataio::save_annotation(scene / "000001" / "ann.json", ann);

  // Prediction rotated 90 degrees about the symmetry axis.
  fs::path preds = tmp.path() / "preds";
  fs::create_directories(preds);
  dataio::PoseEstimate pred;
  pred.pose.rotation =
      posemath::axis_angle_rotation(Eigen::Vector3d::UnitZ(), testsup::kPi / 2);
  pred.pose.translation = ann.pose.translation;
  dataio::save_pose_estimate(preds / "000001.json", pred);

  std::string base = " --gt " + scene.string() + " --mesh " + mesh_path.string() +
                     " --pred " + preds.string();
  CliResult plain = run_cli("eval" + base);
  CHECK(plain.exit_code == 0);
  CHECK(plain.output.find("recall (0.1d): 0%") != std::string::npos);

  CliResult symmetric = run_cli("eval" + base + " --symmetric");
  CHECK(symmetric.exit_code == 0);
  CHECK(symmetric.output.find("recall (0.1d): 100%") != std::string::npos);

  // A second annotated frame without a prediction is reported and fatal.
  fs::create_directories(scene / "000002");
  dataio::save_annotation(scene / "000002" / "ann.json", ann);
  CliResult mismatch = run_cli("eval" + base);
  CHECK(mismatch.exit_code == 2);
  CHECK(mismatch.output.find("000002") != std::string::npos);
}

TEST_SUITE_END();
