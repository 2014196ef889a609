#include "polarpose/dataio.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>

#include <json.hpp>

#include "png_io.hpp"
#include "polarpose/error.hpp"
#include "polarpose/fresnel.hpp"

namespace polarpose::dataio {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;
constexpr double kRadToDeg = 180.0 / kPi;
constexpr double kDegToRad = kPi / 180.0;

fs::path sidecar_path(const fs::path& png_path) {
  fs::path p = png_path;
  p.replace_extension(".json");
  return p;
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw SaveError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw SaveError("write failed for " + path.string());
}

const json& require(const json& j, const char* key, const fs::path& path) {
  auto it = j.find(key);
  if (it == j.end())
    throw LoadError(path.string() + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const fs::path& path) {
  try {
    return require(j, key, path).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": bad field '" + key + "': " + e.what());
  }
}

struct MapSpec {
  const char* name;
  double offset;
  double scale;  // value = offset + scale * code, codes in [0, 65535]
};

MapSpec map_spec(MapKind kind) {
  switch (kind) {
    case MapKind::kNormals:
      return {"normals", -1.0, 2.0 / 65535.0};
    case MapKind::kNocs:
      return {"nocs", 0.0, 1.0 / 65535.0};
    case MapKind::kDepth:
      return {"depth", 0.0, 1e-3};  // code is millimeters
    case MapKind::kAolp:
      return {"aolp", 0.0, kPi / 65535.0};
    case MapKind::kDolp:
      return {"dolp", 0.0, 1.0 / 65535.0};
    case MapKind::kMask:
      return {"mask", 0.0, 1.0};
  }
  throw InvalidInputError("unknown map kind");
}

void write_sidecar(const fs::path& png_path, const MapSpec& spec,
                   const std::function<void(json&)>& extend = {}) {
  json j{{"schema_version", kFormatVersion},
         {"kind", spec.name},
         {"encoding", {{"bits", 16}, {"offset", spec.offset}, {"scale", spec.scale}}}};
  if (extend) extend(j);
  write_json_file(sidecar_path(png_path), j);
}

// Returns the sidecar (if any) after validating its kind tag.
std::optional<json> read_sidecar(const fs::path& png_path, const MapSpec& spec) {
  fs::path sc = sidecar_path(png_path);
  if (!fs::exists(sc)) return std::nullopt;
  json j = parse_json_file(sc);
  if (j.contains("kind") && j["kind"].get<std::string>() != spec.name)
    throw LoadError(sc.string() + ": sidecar kind '" +
                    j["kind"].get<std::string>() + "' does not match requested '" +
                    spec.name + "'");
  return j;
}

std::uint16_t encode_code(double value, const MapSpec& spec, const fs::path& path) {
  double code = (value - spec.offset) / spec.scale;
  if (!std::isfinite(code) || code < -0.5 || code > 65535.5)
    throw SaveError(path.string() + ": value " + std::to_string(value) +
                    " outside the '" + spec.name + "' encoding range");
  return static_cast<std::uint16_t>(std::clamp(std::round(code), 0.0, 65535.0));
}

json intrinsics_to_json(const posemath::CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

posemath::CameraIntrinsics intrinsics_from_json(const json& j, const fs::path& path) {
  posemath::CameraIntrinsics k;
  k.fx = get_as<double>(j, "fx", path);
  k.fy = get_as<double>(j, "fy", path);
  k.cx = get_as<double>(j, "cx", path);
  k.cy = get_as<double>(j, "cy", path);
  k.width = get_as<int>(j, "width", path);
  k.height = get_as<int>(j, "height", path);
  try {
    k.validate();
  } catch (const InvalidInputError& e) {
    throw LoadError(path.string() + ": bad intrinsics: " + e.what());
  }
  return k;
}

json rotation_to_json(const Eigen::Matrix3d& r) {
  json out = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.push_back(r(i, j));
  return out;
}

Eigen::Matrix3d rotation_from_json(const json& j, const fs::path& path) {
  if (!j.is_array() || j.size() != 9)
    throw LoadError(path.string() + ": rotation must be a row-major array of 9 numbers");
  Eigen::Matrix3d r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r(i, k) = j[3 * i + k].get<double>();
  return r;
}

Eigen::Vector3d vec3_from_json(const json& j, const fs::path& path, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw LoadError(path.string() + ": " + what + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Loads one quadruplet plane; normalization uses the PNG's own bit depth.
detail::PngImage load_plane(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p))
    throw LoadError("missing quadruplet plane " + p.string());
  return detail::read_png(p);
}

struct FrameMeta {
  std::vector<double> angles;
  double saturation_level = 1.0;
  int bit_depth = 16;
  std::optional<posemath::CameraIntrinsics> intrinsics;
};

FrameMeta load_meta(const fs::path& dir) {
  fs::path path = dir / kMetaName;
  if (!fs::exists(path)) throw LoadError("missing " + path.string());
  json j = parse_json_file(path);

  FrameMeta meta;
  for (double deg : get_as<std::vector<double>>(j, "angles_deg", path))
    meta.angles.push_back(deg * kDegToRad);
  meta.saturation_level = get_as<double>(j, "saturation_level", path);
  meta.bit_depth = get_as<int>(j, "bit_depth", path);
  if (j.contains("intrinsics"))
    meta.intrinsics = intrinsics_from_json(j["intrinsics"], path);
  return meta;
}

template <typename PixelFn>
stokes::PolarQuadruplet assemble_quadruplet(const fs::path& dir, const PixelFn& fn) {
  FrameMeta meta = load_meta(dir);
  if (meta.angles.size() != 4)
    throw LoadError(dir.string() + ": meta.json must declare 4 angles");

  stokes::PolarQuadruplet quad;
  quad.angles = meta.angles;
  quad.saturation_level = meta.saturation_level;

  int w = -1, h = -1;
  for (const char* name : kPlaneNames) {
    detail::PngImage png = load_plane(dir, name);
    if (png.bit_depth != meta.bit_depth)
      throw LoadError(dir.string() + "/" + name + ": bit depth " +
                      std::to_string(png.bit_depth) + " does not match meta.json");
    if (w < 0) {
      w = png.width;
      h = png.height;
    } else if (png.width != w || png.height != h) {
      throw LoadError(dir.string() + "/" + name + ": plane dimensions differ");
    }
    quad.planes.push_back(fn(png));
  }
  quad.validate();
  return quad;
}

ImageF plane_to_luminance(const detail::PngImage& png) {
  ImageF img(png.width, png.height);
  const double norm = 1.0 / png.max_value();
  if (png.channels == 1) {
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = png.pixels[i] * norm;
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const std::uint16_t* px = &png.pixels[3 * i];
      img[i] = (0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2]) * norm;
    }
  }
  return img;
}

posemath::SymmetryGroup symmetry_from_json(const json& j, const fs::path& path) {
  std::string kind = get_as<std::string>(j, "kind", path);
  if (kind == "none") return posemath::SymmetryGroup::none();
  if (kind == "discrete") {
    std::vector<Eigen::Matrix3d> rotations;
    for (const auto& rj : require(j, "rotations", path))
      rotations.push_back(rotation_from_json(rj, path));
    try {
      return posemath::SymmetryGroup::discrete(std::move(rotations));
    } catch (const InvalidInputError& e) {
      throw LoadError(path.string() + ": " + e.what());
    }
  }
  if (kind == "revolution") {
    try {
      return posemath::SymmetryGroup::revolution(
          vec3_from_json(require(j, "axis", path), path, "axis"),
          get_as<int>(j, "n_samples", path));
    } catch (const InvalidInputError& e) {
      throw LoadError(path.string() + ": " + e.what());
    }
  }
  throw LoadError(path.string() + ": unknown symmetry kind '" + kind + "'");
}

json symmetry_to_json(const posemath::SymmetryGroup& g) {
  switch (g.kind) {
    case posemath::SymmetryGroup::Kind::kNone:
      return {{"kind", "none"}};
    case posemath::SymmetryGroup::Kind::kDiscrete: {
      json rotations = json::array();
      for (const auto& r : g.rotations) rotations.push_back(rotation_to_json(r));
      return {{"kind", "discrete"}, {"rotations", rotations}};
    }
    case posemath::SymmetryGroup::Kind::kRevolution:
      return {{"kind", "revolution"},
              {"axis", {g.axis.x(), g.axis.y(), g.axis.z()}},
              {"n_samples", g.n_samples}};
  }
  throw InvalidInputError("unknown symmetry kind");
}

}  // namespace

stokes::PolarQuadruplet load_quadruplet(const fs::path& dir) {
  return assemble_quadruplet(dir, plane_to_luminance);
}

std::array<stokes::PolarQuadruplet, 3> load_quadruplet_rgb(const fs::path& dir) {
  std::array<stokes::PolarQuadruplet, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[c] = assemble_quadruplet(dir, [&](const detail::PngImage& png) {
      if (png.channels != 3)
        throw LoadError(dir.string() + ": per-channel decoding needs RGB planes");
      ImageF img(png.width, png.height);
      const double norm = 1.0 / png.max_value();
      for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = png.pixels[3 * i + c] * norm;
      return img;
    });
  }
  return out;
}

void save_quadruplet(const fs::path& dir, const stokes::PolarQuadruplet& quad,
                     int bit_depth,
                     const std::optional<posemath::CameraIntrinsics>& intrinsics) {
  quad.validate();
  if (quad.planes.size() != 4)
    throw SaveError("save_quadruplet expects the 4 canonical planes");
  if (bit_depth != 8 && bit_depth != 16)
    throw SaveError("quadruplet bit depth must be 8 or 16");
  fs::create_directories(dir);

  const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<std::uint16_t> codes;
  for (int p = 0; p < 4; ++p) {
    const ImageF& plane = quad.planes[p];
    codes.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
      double v = plane[i];
      if (!(v >= 0.0 && v <= 1.0))
        throw SaveError("quadruplet intensity outside [0, 1]");
      codes[i] = static_cast<std::uint16_t>(std::lround(v * max_code));
    }
    detail::write_png(dir / kPlaneNames[p], plane.width(), plane.height(), 1,
                      bit_depth, codes.data());
  }

  json j{{"schema_version", kFormatVersion},
         {"angles_deg", {quad.angles[0] * kRadToDeg, quad.angles[1] * kRadToDeg,
                         quad.angles[2] * kRadToDeg, quad.angles[3] * kRadToDeg}},
         {"saturation_level", quad.saturation_level},
         {"bit_depth", bit_depth}};
  if (intrinsics) j["intrinsics"] = intrinsics_to_json(*intrinsics);
  write_json_file(dir / kMetaName, j);
}

std::optional<posemath::CameraIntrinsics> load_intrinsics(const fs::path& dir) {
  return load_meta(dir).intrinsics;
}

void save_map(const fs::path& path, const ImageF& image, MapKind kind) {
  if (kind != MapKind::kDepth && kind != MapKind::kAolp && kind != MapKind::kDolp)
    throw InvalidInputError("save_map(scalar): kind must be depth/aolp/dolp");
  MapSpec spec = map_spec(kind);
  if (kind == MapKind::kAolp) {
    for (std::size_t i = 0; i < image.size(); ++i)
      if (!(image[i] >= 0.0 && image[i] < kPi + 1e-12))
        throw SaveError(path.string() + ": AOLP outside [0, pi)");
  }

  std::vector<std::uint16_t> codes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    codes[i] = encode_code(image[i], spec, path);
  detail::write_png(path, image.width(), image.height(), 1, 16, codes.data());
  write_sidecar(path, spec);
}

ImageF load_map_scalar(const fs::path& path, MapKind kind) {
  if (kind != MapKind::kDepth && kind != MapKind::kAolp && kind != MapKind::kDolp)
    throw InvalidInputError("load_map_scalar: kind must be depth/aolp/dolp");
  MapSpec spec = map_spec(kind);
  auto sidecar = read_sidecar(path, spec);
  if (sidecar && sidecar->contains("encoding")) {
    const json& enc = (*sidecar)["encoding"];
    if (enc.contains("offset")) spec.offset = enc["offset"].get<double>();
    if (enc.contains("scale")) spec.scale = enc["scale"].get<double>();
  }

  detail::PngImage png = detail::read_png(path);
  if (png.channels != 1)
    throw LoadError(path.string() + ": expected a single-channel map");
  if (kind == MapKind::kDepth && png.bit_depth != 16)
    throw LoadError(path.string() + ": depth maps must be 16-bit");
  const double rescale = 65535.0 / png.max_value();

  ImageF img(png.width, png.height);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = spec.offset + spec.scale * (png.pixels[i] * rescale);
  return img;
}

namespace {

void write_vec3_png(const fs::path& path, const ImageV3& image, const MapSpec& spec,
                    const std::function<void(json&)>& extend = {}) {
  std::vector<std::uint16_t> codes(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i)
    for (int c = 0; c < 3; ++c)
      codes[3 * i + c] = encode_code(image[i][c], spec, path);
  detail::write_png(path, image.width(), image.height(), 3, 16, codes.data());
  write_sidecar(path, spec, extend);
}

ImageV3 read_vec3_png(const fs::path& path, MapSpec spec, json* sidecar_out) {
  auto sidecar = read_sidecar(path, spec);
  if (sidecar && sidecar->contains("encoding")) {
    const json& enc = (*sidecar)["encoding"];
    if (enc.contains("offset")) spec.offset = enc["offset"].get<double>();
    if (enc.contains("scale")) spec.scale = enc["scale"].get<double>();
  }
  if (sidecar_out) *sidecar_out = sidecar ? *sidecar : json::object();

  detail::PngImage png = detail::read_png(path);
  if (png.channels != 3)
    throw LoadError(path.string() + ": expected a 3-channel map");
  const double rescale = 65535.0 / png.max_value();

  ImageV3 img(png.width, png.height);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c)
      img[i][c] = spec.offset + spec.scale * (png.pixels[3 * i + c] * rescale);
  return img;
}

}  // namespace

void save_map(const fs::path& path, const ImageV3& image, MapKind kind) {
  if (kind != MapKind::kNormals && kind != MapKind::kNocs)
    throw InvalidInputError("save_map(vec3): kind must be normals/nocs");
  write_vec3_png(path, image, map_spec(kind));
}

ImageV3 load_map_vec3(const fs::path& path, MapKind kind) {
  if (kind != MapKind::kNormals && kind != MapKind::kNocs)
    throw InvalidInputError("load_map_vec3: kind must be normals/nocs");
  return read_vec3_png(path, map_spec(kind), nullptr);
}

void save_mask(const fs::path& path, const ImageMask& mask) {
  std::vector<std::uint16_t> codes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) codes[i] = mask[i] ? 255 : 0;
  detail::write_png(path, mask.width(), mask.height(), 1, 8, codes.data());
}

ImageMask load_mask(const fs::path& path) {
  detail::PngImage png = detail::read_png(path);
  if (png.channels != 1)
    throw LoadError(path.string() + ": expected a single-channel mask");
  ImageMask mask(png.width, png.height);
  const std::uint16_t half = png.max_value() / 2;
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = png.pixels[i] > half ? 1 : 0;
  return mask;
}

void save_nocs(const fs::path& path, const posemath::NocsMap& nocs) {
  write_vec3_png(path, nocs.coords, map_spec(MapKind::kNocs), [&](json& j) {
    j["diameter"] = nocs.diameter;
    j["center_offset"] = {nocs.center_offset.x(), nocs.center_offset.y(),
                          nocs.center_offset.z()};
  });
}

posemath::NocsMap load_nocs(const fs::path& path, ImageMask mask) {
  json sidecar;
  posemath::NocsMap nocs;
  nocs.coords = read_vec3_png(path, map_spec(MapKind::kNocs), &sidecar);
  if (!sidecar.contains("diameter") || !sidecar.contains("center_offset"))
    throw LoadError(path.string() +
                    ": NOCS sidecar must declare diameter and center_offset");
  nocs.diameter = sidecar["diameter"].get<double>();
  nocs.center_offset = vec3_from_json(sidecar["center_offset"], path, "center_offset");
  if (!nocs.coords.same_size(mask))
    throw LoadError(path.string() + ": NOCS/mask size mismatch");
  nocs.mask = std::move(mask);
  return nocs;
}

SceneAnnotation load_annotation(const fs::path& path) {
  json j = parse_json_file(path);

  SceneAnnotation ann;
  ann.object_id = get_as<std::string>(j, "object_id", path);

  Eigen::Matrix3d r = rotation_from_json(require(j, "rotation", path), path);
  if (r.determinant() < 0.0)
    throw LoadError(path.string() + ": rotation has negative determinant");
  double drift =
      (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (drift > 1e-3)
    throw LoadError(path.string() + ": rotation drifts from orthonormal by " +
                    std::to_string(drift));
  ann.pose.rotation = posemath::nearest_rotation(r);
  ann.pose.translation = vec3_from_json(require(j, "translation", path), path,
                                        "translation");

  const json& bbox = require(j, "bbox", path);
  ann.bbox.bx = get_as<double>(bbox, "bx", path);
  ann.bbox.by = get_as<double>(bbox, "by", path);
  ann.bbox.bw = get_as<double>(bbox, "bw", path);
  ann.bbox.bh = get_as<double>(bbox, "bh", path);
  if (bbox.contains("s_out")) ann.bbox.s_out = bbox["s_out"].get<double>();
  try {
    ann.bbox.validate();
  } catch (const InvalidInputError& e) {
    throw LoadError(path.string() + ": bad bbox: " + e.what());
  }

  if (j.contains("eta")) {
    double eta = j["eta"].get<double>();
    if (!(eta > 1.0 && eta <= 4.0))
      throw LoadError(path.string() + ": refractive index must be in (1, 4]");
    ann.eta = eta;
  }
  if (j.contains("symmetry")) ann.symmetry = symmetry_from_json(j["symmetry"], path);

  if (j.contains("mesh_path")) {
    ann.mesh_path = j["mesh_path"].get<std::string>();
    if (!ann.mesh_path.empty()) {
      fs::path mesh = ann.mesh_path;
      if (mesh.is_relative()) mesh = path.parent_path() / mesh;
      if (!fs::exists(mesh))
        throw LoadError(path.string() + ": referenced mesh not found: " +
                        mesh.string());
    }
  }
  return ann;
}

void save_annotation(const fs::path& path, const SceneAnnotation& ann) {
  json j{{"schema_version", kFormatVersion},
         {"object_id", ann.object_id},
         {"rotation", rotation_to_json(ann.pose.rotation)},
         {"translation",
          {ann.pose.translation.x(), ann.pose.translation.y(), ann.pose.translation.z()}},
         {"bbox",
          {{"bx", ann.bbox.bx}, {"by", ann.bbox.by}, {"bw", ann.bbox.bw},
           {"bh", ann.bbox.bh}, {"s_out", ann.bbox.s_out}}},
         {"symmetry", symmetry_to_json(ann.symmetry)}};
  if (ann.eta) j["eta"] = *ann.eta;
  if (!ann.mesh_path.empty()) j["mesh_path"] = ann.mesh_path;
  write_json_file(path, j);
}

void save_pose_estimate(const fs::path& path, const PoseEstimate& est) {
  json j{{"schema_version", kFormatVersion},
         {"rotation", rotation_to_json(est.pose.rotation)},
         {"translation",
          {est.pose.translation.x(), est.pose.translation.y(), est.pose.translation.z()}},
         {"stats",
          {{"iterations", est.iterations},
           {"inlier_ratio", est.inlier_ratio},
           {"mean_reproj_px", est.mean_reproj_px},
           {"time_ms", est.time_ms},
           {"num_correspondences", est.num_correspondences}}}};
  write_json_file(path, j);
}

PoseEstimate load_pose_estimate(const fs::path& path) {
  json j = parse_json_file(path);
  PoseEstimate est;
  Eigen::Matrix3d r = rotation_from_json(require(j, "rotation", path), path);
  if (!posemath::is_rotation(r, 1e-3))
    throw LoadError(path.string() + ": estimate rotation is not orthonormal");
  est.pose.rotation = posemath::nearest_rotation(r);
  est.pose.translation =
      vec3_from_json(require(j, "translation", path), path, "translation");
  if (j.contains("stats")) {
    const json& s = j["stats"];
    if (s.contains("iterations")) est.iterations = s["iterations"].get<int>();
    if (s.contains("inlier_ratio")) est.inlier_ratio = s["inlier_ratio"].get<double>();
    if (s.contains("mean_reproj_px"))
      est.mean_reproj_px = s["mean_reproj_px"].get<double>();
    if (s.contains("time_ms")) est.time_ms = s["time_ms"].get<double>();
    if (s.contains("num_correspondences"))
      est.num_correspondences = s["num_correspondences"].get<int>();
  }
  return est;
}

void save_render_frame(const fs::path& dir, const synth::RenderOutput& frame,
                       const posemath::CameraIntrinsics& intrinsics,
                       const SceneAnnotation& ann, int bit_depth) {
  fs::create_directories(dir);
  save_quadruplet(dir, frame.quadruplet, bit_depth, intrinsics);
  save_annotation(dir / kAnnotationName, ann);
  save_map(dir / "gt_normals.png", frame.normals, MapKind::kNormals);
  save_nocs(dir / "gt_nocs.png", frame.nocs);
  save_mask(dir / "mask.png", frame.mask);
  save_map(dir / "depth.png", frame.depth, MapKind::kDepth);
}

}  // namespace polarpose::dataio
