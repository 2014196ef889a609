// polarpose: batch front end for the polarimetric pose toolkit.
//
// Subcommands: decode | priors | synth | solve | eval
// Exit codes:  0 success, 1 usage error, 2 data error, 3 no solution found.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "polarpose/dataio.hpp"
#include "polarpose/fresnel.hpp"
#include "polarpose/metrics.hpp"
#include "polarpose/solver.hpp"
#include "polarpose/stokes.hpp"
#include "polarpose/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polarpose;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- helpers

bool has_quadruplet(const fs::path& dir) {
  return fs::exists(dir / dataio::kPlaneNames[0]);
}

bool has_decomposition(const fs::path& dir) {
  return fs::exists(dir / "dolp.png") && fs::exists(dir / "aolp.png") &&
         fs::exists(dir / "valid.png");
}

// A "scene" is either one frame directory or a directory of frame
// directories; is_frame decides what makes a directory a frame. Returns
// (frame dir, frame id) pairs, sorted by id.
std::vector<std::pair<fs::path, std::string>> find_frames(
    const fs::path& input, const std::function<bool(const fs::path&)>& is_frame,
    const std::string& requirement) {
  if (!fs::exists(input)) throw LoadError("input not found: " + input.string());
  if (is_frame(input)) return {{input, input.filename().string()}};

  std::vector<std::pair<fs::path, std::string>> frames;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_directory() && is_frame(entry.path()))
        frames.push_back({entry.path(), entry.path().filename().string()});
  }
  std::sort(frames.begin(), frames.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  if (frames.empty())
    throw LoadError("no frames under " + input.string() + " (" + requirement + ")");
  return frames;
}

void run_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(jobs, static_cast<int>(count));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

int lut_size_from_env() {
  const char* env = std::getenv(fresnel::kLutSizeEnvVar);
  if (!env) return fresnel::kDefaultLutSize;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (!end || *end != '\0' || v < 64)
    throw UsageError(std::string(fresnel::kLutSizeEnvVar) +
                     " must be an integer >= 64, got '" + env + "'");
  return static_cast<int>(v);
}

std::optional<dataio::SceneAnnotation> try_load_annotation(const fs::path& frame) {
  fs::path path = frame / dataio::kAnnotationName;
  if (!fs::exists(path)) return std::nullopt;
  return dataio::load_annotation(path);
}

// Flag > annotation eta > material table for the annotated object.
double resolve_eta(double flag_eta, const fs::path& frame) {
  if (flag_eta > 0.0) return flag_eta;
  auto ann = try_load_annotation(frame);
  if (!ann)
    throw UsageError("no --eta given and " + (frame / dataio::kAnnotationName).string() +
                     " is absent; the refractive index is required");
  if (ann->eta) return *ann->eta;
  return fresnel::default_refractive_index(ann->object_id);
}

void write_decomposition(const fs::path& dir, const stokes::PolarDecomposition& d) {
  fs::create_directories(dir);
  dataio::save_map(dir / "i_un.png", d.i_un, dataio::MapKind::kDolp);
  dataio::save_map(dir / "dolp.png", d.dolp, dataio::MapKind::kDolp);
  dataio::save_map(dir / "aolp.png", d.aolp, dataio::MapKind::kAolp);
  dataio::save_mask(dir / "valid.png", d.valid);
}

stokes::PolarDecomposition load_decomposition(const fs::path& dir) {
  stokes::PolarDecomposition d;
  d.dolp = dataio::load_map_scalar(dir / "dolp.png", dataio::MapKind::kDolp);
  d.aolp = dataio::load_map_scalar(dir / "aolp.png", dataio::MapKind::kAolp);
  d.valid = dataio::load_mask(dir / "valid.png");
  d.i_un = fs::exists(dir / "i_un.png")
               ? dataio::load_map_scalar(dir / "i_un.png", dataio::MapKind::kDolp)
               : ImageF(d.dolp.width(), d.dolp.height(), 0.0);
  return d;
}

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// ---------------------------------------------------------------- decode

struct DecodeOpts {
  std::string input, output;
  bool per_channel = false;
  int jobs = 1;
};

int run_decode(const DecodeOpts& opt) {
  auto frames = find_frames(opt.input, has_quadruplet,
                            "each frame needs I000.png I045.png I090.png "
                            "I135.png and meta.json");
  const bool single = frames.size() == 1 && frames[0].first == fs::path(opt.input);

  run_jobs(frames.size(), opt.jobs, [&](std::size_t i) {
    const auto& [frame, id] = frames[i];
    fs::path out = single ? fs::path(opt.output) : fs::path(opt.output) / id;
    if (opt.per_channel) {
      auto quads = dataio::load_quadruplet_rgb(frame);
      const char* channel[3] = {"r", "g", "b"};
      for (int c = 0; c < 3; ++c)
        write_decomposition(out / channel[c], stokes::decode_image(quads[c]));
    } else {
      write_decomposition(out, stokes::decode_image(dataio::load_quadruplet(frame)));
    }
    std::cout << "decoded " << id << "\n";
  });
  return 0;
}

// ---------------------------------------------------------------- priors

struct PriorsOpts {
  std::string input, output;
  double eta = 0.0;  // 0 = resolve from annotation
  int jobs = 1;
};

int run_priors(const PriorsOpts& opt) {
  auto frames = find_frames(
      opt.input,
      [](const fs::path& d) { return has_quadruplet(d) || has_decomposition(d); },
      "each frame needs a quadruplet or a decoded dolp/aolp/valid set");
  const bool single = frames.size() == 1 && frames[0].first == fs::path(opt.input);
  const int n_lut = lut_size_from_env();

  run_jobs(frames.size(), opt.jobs, [&](std::size_t i) {
    const auto& [frame, id] = frames[i];
    fs::path out = single ? fs::path(opt.output) : fs::path(opt.output) / id;

    double eta = resolve_eta(opt.eta, frame);
    stokes::PolarDecomposition decomp =
        has_decomposition(frame) ? load_decomposition(frame)
                                 : stokes::decode_image(dataio::load_quadruplet(frame));
    fresnel::NormalPriorTriplet priors =
        fresnel::compute_priors(decomp, fresnel::RefractiveIndex(eta), n_lut);

    fs::create_directories(out);
    dataio::save_map(out / "n_d.png", priors.n_d, dataio::MapKind::kNormals);
    dataio::save_map(out / "n_s1.png", priors.n_s1, dataio::MapKind::kNormals);
    dataio::save_map(out / "n_s2.png", priors.n_s2, dataio::MapKind::kNormals);
    dataio::save_mask(out / "priors_valid.png", priors.valid);
    std::cout << "priors " << id << " (eta " << eta << ")\n";
  });
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string mesh, pose, output;
  std::string object_id = "object";
  std::string mode = "diffuse";
  std::string bit_depth = "float";
  double eta = 0.0;
  double albedo = 0.4;
  std::vector<double> light{0.0, 0.0, 1.0};
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> size{256, 256};
  double focal = 300.0;
};

int run_synth(const SynthOpts& opt) {
  metrics::MeshModel mesh = dataio::load_mesh(opt.mesh);
  posemath::Pose pose = dataio::load_pose_estimate(opt.pose).pose;

  posemath::CameraIntrinsics k;
  k.width = opt.size[0];
  k.height = opt.size[1];
  k.fx = k.fy = opt.focal;
  k.cx = k.width / 2.0;
  k.cy = k.height / 2.0;

  synth::SynthConfig cfg;
  double eta = opt.eta > 0.0 ? opt.eta
                             : fresnel::default_refractive_index(opt.object_id);
  cfg.eta = fresnel::RefractiveIndex(eta);
  if (opt.mode == "diffuse")
    cfg.reflection_mode = fresnel::ReflectionModel::kDiffuse;
  else if (opt.mode == "specular")
    cfg.reflection_mode = fresnel::ReflectionModel::kSpecular;
  else
    throw UsageError("--mode must be diffuse or specular");
  cfg.albedo = opt.albedo;
  cfg.light_dir = Eigen::Vector3d(opt.light[0], opt.light[1], opt.light[2]).normalized();
  cfg.noise_sigma = opt.noise;
  int store_bits = 16;
  if (opt.bit_depth == "8") {
    cfg.bit_depth = synth::BitDepth::k8;
    store_bits = 8;
  } else if (opt.bit_depth == "16") {
    cfg.bit_depth = synth::BitDepth::k16;
  } else if (opt.bit_depth == "float") {
    cfg.bit_depth = synth::BitDepth::kFloat;  // stored at 16 bits
  } else {
    throw UsageError("--bit-depth must be 8, 16 or float");
  }

  synth::RenderOutput frame = synth::render(mesh, pose, k, cfg, opt.seed);

  // Bounding box of the rendered silhouette, for the annotation.
  int x0 = k.width, x1 = -1, y0 = k.height, y1 = -1;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (frame.mask.at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) {
    std::cerr << "warning: mesh projects to an empty mask; writing frame anyway\n";
    x0 = 0, x1 = k.width - 1, y0 = 0, y1 = k.height - 1;
  }

  dataio::SceneAnnotation ann;
  ann.object_id = opt.object_id;
  ann.pose = pose;
  ann.bbox = {(x0 + x1 + 1) / 2.0, (y0 + y1 + 1) / 2.0, double(x1 - x0 + 1),
              double(y1 - y0 + 1), 256.0};
  ann.eta = eta;
  ann.mesh_path = fs::absolute(opt.mesh).string();

  dataio::save_render_frame(opt.output, frame, k, ann, store_bits);
  std::cout << "synthesized " << opt.output << " (" << count_set(frame.mask)
            << " mask pixels)\n";
  return 0;
}

// ---------------------------------------------------------------- solve

struct SolveOpts {
  std::string input;
  std::string out;  // single-frame override
  int stride = 2;
  std::uint64_t seed = 0;
  double threshold = 2.0;
  int max_iterations = 1000;
  int min_inliers = 12;
  int jobs = 1;
};

dataio::PoseEstimate solve_frame(const fs::path& frame, const SolveOpts& opt) {
  auto intrinsics = dataio::load_intrinsics(frame);
  if (!intrinsics)
    throw LoadError(frame.string() + ": meta.json declares no intrinsics");
  ImageMask mask = dataio::load_mask(frame / "mask.png");
  posemath::NocsMap nocs = dataio::load_nocs(frame / "gt_nocs.png", std::move(mask));

  auto t0 = std::chrono::steady_clock::now();
  auto correspondences = solver::extract_correspondences(nocs, opt.stride);

  solver::RansacParams params;
  params.seed = opt.seed;
  params.inlier_threshold = opt.threshold;
  params.max_iterations = opt.max_iterations;
  params.min_inliers = opt.min_inliers;
  solver::RansacResult result = solver::pnp_ransac(correspondences, *intrinsics, params);
  auto t1 = std::chrono::steady_clock::now();

  dataio::PoseEstimate est;
  est.pose = result.pose;
  est.iterations = result.stats.iterations;
  est.inlier_ratio = result.stats.inlier_ratio;
  est.mean_reproj_px = result.stats.mean_reproj_px;
  est.time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  est.num_correspondences = static_cast<int>(correspondences.size());
  return est;
}

int run_solve(const SolveOpts& opt) {
  std::vector<std::pair<fs::path, std::string>> frames;
  fs::path input(opt.input);
  if (fs::exists(input / "gt_nocs.png")) {
    frames.push_back({input, input.filename().string()});
  } else {
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_directory() && fs::exists(entry.path() / "gt_nocs.png"))
        frames.push_back({entry.path(), entry.path().filename().string()});
    std::sort(frames.begin(), frames.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    if (frames.empty())
      throw LoadError("no solvable frames under " + input.string() +
                      " (need gt_nocs.png, mask.png and meta.json intrinsics)");
  }
  if (!opt.out.empty() && frames.size() != 1)
    throw UsageError("--out applies to a single frame input");

  run_jobs(frames.size(), opt.jobs, [&](std::size_t i) {
    const auto& [frame, id] = frames[i];
    dataio::PoseEstimate est = solve_frame(frame, opt);
    fs::path out = opt.out.empty() ? frame / "pose_est.json" : fs::path(opt.out);
    dataio::save_pose_estimate(out, est);
    std::cout << "solved " << id << ": inliers " << est.inlier_ratio * 100 << "% of "
              << est.num_correspondences << ", reproj " << est.mean_reproj_px
              << " px, " << est.time_ms << " ms\n";
  });
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string pred, gt, mesh;
  std::string report;  // optional JSON output path
  double threshold = 0.1;
  bool symmetric = false;
};

int run_eval(const EvalOpts& opt) {
  // Ground-truth frames are directories holding ann.json.
  std::vector<std::pair<fs::path, std::string>> gt_frames;
  fs::path gt_root(opt.gt);
  if (fs::exists(gt_root / dataio::kAnnotationName)) {
    gt_frames.push_back({gt_root, gt_root.filename().string()});
  } else if (fs::is_directory(gt_root)) {
    for (const auto& entry : fs::directory_iterator(gt_root))
      if (entry.is_directory() && fs::exists(entry.path() / dataio::kAnnotationName))
        gt_frames.push_back({entry.path(), entry.path().filename().string()});
    std::sort(gt_frames.begin(), gt_frames.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
  }
  if (gt_frames.empty())
    throw LoadError("no annotated ground-truth frames under " + gt_root.string());

  // Predictions: <pred>/<id>.json or <pred>/<id>/pose_est.json.
  fs::path pred_root(opt.pred);
  std::vector<std::string> missing_pred;
  std::vector<std::pair<fs::path, std::string>> matched;
  for (const auto& [frame, id] : gt_frames) {
    fs::path flat = pred_root / (id + ".json");
    fs::path nested = pred_root / id / "pose_est.json";
    fs::path single = pred_root;  // single-frame eval against one estimate file
    if (fs::exists(flat))
      matched.push_back({flat, id});
    else if (fs::exists(nested))
      matched.push_back({nested, id});
    else if (gt_frames.size() == 1 && fs::is_regular_file(single))
      matched.push_back({single, id});
    else
      missing_pred.push_back(id);
  }
  if (!missing_pred.empty()) {
    std::string list;
    for (const auto& id : missing_pred) list += " " + id;
    throw LoadError("no prediction for frame(s):" + list);
  }

  metrics::MeshModel mesh;
  if (!opt.mesh.empty()) {
    mesh = dataio::load_mesh(opt.mesh);
  } else {
    dataio::SceneAnnotation first =
        dataio::load_annotation(gt_frames[0].first / dataio::kAnnotationName);
    if (first.mesh_path.empty())
      throw UsageError("--mesh required: annotations carry no mesh path");
    fs::path mesh_path = first.mesh_path;
    if (mesh_path.is_relative())
      mesh_path = gt_frames[0].first / mesh_path;
    mesh = dataio::load_mesh(mesh_path);
  }

  json frames_json = json::array();
  std::vector<double> normal_angles;
  double recall_hits = 0, sum_add = 0, sum_rot = 0, sum_trans = 0;

  for (std::size_t i = 0; i < gt_frames.size(); ++i) {
    const auto& [gt_frame, id] = gt_frames[i];
    dataio::SceneAnnotation ann =
        dataio::load_annotation(gt_frame / dataio::kAnnotationName);
    dataio::PoseEstimate est = dataio::load_pose_estimate(matched[i].first);

    double add = metrics::add(est.pose, ann.pose, mesh);
    double add_s = metrics::add_s(est.pose, ann.pose, mesh);
    double used = opt.symmetric ? add_s : add;
    bool hit = used < opt.threshold * mesh.diameter;
    double rot = rotation_error_deg(est.pose.rotation, ann.pose.rotation);
    double trans = (est.pose.translation - ann.pose.translation).norm();

    recall_hits += hit;
    sum_add += used;
    sum_rot += rot;
    sum_trans += trans;

    frames_json.push_back({{"id", id},
                           {"add", add},
                           {"add_s", add_s},
                           {"rotation_error_deg", rot},
                           {"translation_error_m", trans},
                           {"under_threshold", hit},
                           {"inlier_ratio", est.inlier_ratio},
                           {"time_ms", est.time_ms}});

    // Normal metrics when both prior and ground-truth maps are present.
    fs::path pred_dir = pred_root / id;
    if (fs::exists(pred_dir / "n_d.png") && fs::exists(pred_dir / "priors_valid.png") &&
        fs::exists(gt_frame / "gt_normals.png") && fs::exists(gt_frame / "mask.png")) {
      ImageV3 pred_n = dataio::load_map_vec3(pred_dir / "n_d.png",
                                             dataio::MapKind::kNormals);
      ImageV3 gt_n = dataio::load_map_vec3(gt_frame / "gt_normals.png",
                                           dataio::MapKind::kNormals);
      ImageMask pv = dataio::load_mask(pred_dir / "priors_valid.png");
      ImageMask gm = dataio::load_mask(gt_frame / "mask.png");
      ImageMask both(pv.width(), pv.height(), 0);
      for (std::size_t p = 0; p < both.size(); ++p) both[p] = pv[p] && gm[p];
      for (double a : metrics::normal_angle_errors_deg(pred_n, gt_n, both))
        normal_angles.push_back(a);
    }
  }

  const double n = static_cast<double>(gt_frames.size());
  double recall = 100.0 * recall_hits / n;
  json aggregate{{"frame_count", gt_frames.size()},
                 {"add_recall_pct", recall},
                 {"mean_add", sum_add / n},
                 {"mean_rotation_error_deg", sum_rot / n},
                 {"mean_translation_error_m", sum_trans / n}};
  if (!normal_angles.empty()) {
    metrics::NormalMetrics nm = metrics::normal_metrics_from_angles(normal_angles);
    aggregate["normal_metrics"] = {{"mean_deg", nm.mean_deg},
                                   {"median_deg", nm.median_deg},
                                   {"pct_11_25", nm.pct_11_25},
                                   {"pct_22_5", nm.pct_22_5},
                                   {"pct_30", nm.pct_30}};
  }

  json report{{"schema_version", dataio::kFormatVersion},
              {"threshold_fraction", opt.threshold},
              {"symmetric", opt.symmetric},
              {"frames", frames_json},
              {"aggregate", aggregate}};

  std::cout << "ADD" << (opt.symmetric ? "-S" : "") << " recall ("
            << opt.threshold << "d): " << recall << "% over " << gt_frames.size()
            << " frame(s)\n";
  std::cout << "mean add " << sum_add / n << " m, mean rotation error "
            << sum_rot / n << " deg, mean translation error " << sum_trans / n
            << " m\n";
  if (!normal_angles.empty())
    std::cout << "normal mean error "
              << aggregate["normal_metrics"]["mean_deg"].get<double>() << " deg over "
              << normal_angles.size() << " px\n";

  if (!opt.report.empty()) {
    std::ofstream out(opt.report);
    if (!out) throw SaveError("cannot write report " + opt.report);
    out << report.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polarimetric 6D pose toolkit: decode polarization quadruplets, "
               "derive Fresnel normal priors, synthesize ground-truth frames, "
               "solve poses from dense correspondences, evaluate results"};
  app.require_subcommand(1);

  DecodeOpts decode_opts;
  auto* decode = app.add_subcommand(
      "decode", "Decompose a quadruplet frame (or scene of frames) into "
                "unpolarized intensity, DOLP, AOLP and a validity mask");
  decode->add_option("input", decode_opts.input, "frame or scene directory")->required();
  decode->add_option("output", decode_opts.output, "output directory")->required();
  decode->add_flag("--per-channel", decode_opts.per_channel,
                   "decode RGB planes per channel into r/ g/ b/ subdirectories");
  decode->add_option("--jobs", decode_opts.jobs, "parallel frames")->default_val(1);

  PriorsOpts priors_opts;
  auto* priors = app.add_subcommand(
      "priors", "Compute the three Fresnel normal priors (n_d, n_s1, n_s2) "
                "from a decomposition or quadruplet frame");
  priors->add_option("input", priors_opts.input, "frame or scene directory")->required();
  priors->add_option("output", priors_opts.output, "output directory")->required();
  priors->add_option("--eta", priors_opts.eta,
                     "refractive index (default: annotation, then material table)");
  priors->add_option("--jobs", priors_opts.jobs, "parallel frames")->default_val(1);

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Render a mesh under a pose into a full synthetic frame "
               "(quadruplet + ground-truth maps) in the dataset layout");
  synth_cmd->add_option("mesh", synth_opts.mesh, "PLY/OBJ mesh path")->required();
  synth_cmd->add_option("pose", synth_opts.pose,
                        "pose JSON (rotation row-major, translation meters)")
      ->required();
  synth_cmd->add_option("output", synth_opts.output, "output frame directory")
      ->required();
  synth_cmd->add_option("--object", synth_opts.object_id, "object id for ann.json");
  synth_cmd->add_option("--eta", synth_opts.eta,
                        "refractive index (default: material table for --object)");
  synth_cmd->add_option("--mode", synth_opts.mode, "diffuse | specular")
      ->default_val("diffuse");
  synth_cmd->add_option("--albedo", synth_opts.albedo)->default_val(0.4);
  synth_cmd->add_option("--light", synth_opts.light, "light direction x y z")
      ->expected(3);
  synth_cmd->add_option("--noise", synth_opts.noise, "Gaussian sigma")->default_val(0.0);
  synth_cmd->add_option("--seed", synth_opts.seed)->default_val(0);
  synth_cmd->add_option("--bit-depth", synth_opts.bit_depth, "8 | 16 | float")
      ->default_val("float");
  synth_cmd->add_option("--size", synth_opts.size, "image width height")->expected(2);
  synth_cmd->add_option("--focal", synth_opts.focal, "focal length in pixels")
      ->default_val(300.0);

  SolveOpts solve_opts;
  auto* solve = app.add_subcommand(
      "solve", "Recover 6D poses from stored NOCS maps via RANSAC-PnP + LM");
  solve->add_option("input", solve_opts.input, "frame or scene directory")->required();
  solve->add_option("--out", solve_opts.out, "output JSON (single frame only)");
  solve->add_option("--stride", solve_opts.stride, "correspondence grid stride")
      ->default_val(2);
  solve->add_option("--seed", solve_opts.seed)->default_val(0);
  solve->add_option("--threshold", solve_opts.threshold, "inlier threshold in pixels")
      ->default_val(2.0);
  solve->add_option("--iters", solve_opts.max_iterations, "max RANSAC iterations")
      ->default_val(1000);
  solve->add_option("--min-inliers", solve_opts.min_inliers)->default_val(12);
  solve->add_option("--jobs", solve_opts.jobs, "parallel frames")->default_val(1);

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand(
      "eval", "Compare predicted poses against annotations: ADD(-S) recall, "
              "pose errors, normal metrics when maps are present");
  eval->add_option("--pred", eval_opts.pred, "predictions directory or file")
      ->required();
  eval->add_option("--gt", eval_opts.gt, "annotated scene directory")->required();
  eval->add_option("--mesh", eval_opts.mesh,
                   "mesh path (default: annotation mesh_path)");
  eval->add_option("--threshold", eval_opts.threshold,
                   "ADD threshold as a fraction of the model diameter")
      ->default_val(0.1);
  eval->add_flag("--symmetric", eval_opts.symmetric, "use ADD-S instead of ADD");
  eval->add_option("--report", eval_opts.report, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (decode->parsed()) return run_decode(decode_opts);
    if (priors->parsed()) return run_priors(priors_opts);
    if (synth_cmd->parsed()) return run_synth(synth_opts);
    if (solve->parsed()) return run_solve(solve_opts);
    if (eval->parsed()) return run_eval(eval_opts);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NoPoseError& e) {
    std::cerr << "no solution: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
