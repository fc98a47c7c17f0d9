#include "posekit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "posekit/linalg.hpp"
#include "posekit/metrics.hpp"
#include "posekit/random.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

namespace fs = std::filesystem;

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view token, const std::string& where) {
  // from_chars rejects a leading '+', which we never write.
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\r')) token.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw DataError(where + ": cannot parse number '" + std::string(token) + "'");
  }
  return v;
}

nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

// ---------------------------------------------------------------------------
// Sequence files

void write_sequence(std::ostream& os, const PoseSequence& seq, const SequenceLabels& labels) {
  if (seq.empty()) throw DataError("cannot write an empty sequence");
  if (!(seq.fps > 0)) throw DataError("sequence fps must be positive");
  const auto& topo = standard_topology();
  nlohmann::json header = {{"format", kSequenceFormatName},
                           {"version", kSequenceFormatVersion},
                           {"fps", seq.fps},
                           {"frames", seq.size()},
                           {"joints", topo.joint_names},
                           {"action", labels.action},
                           {"subject", labels.subject},
                           {"units", "mm"}};
  if (labels.root_trajectory) {
    if (labels.root_trajectory->size() != seq.frames.size()) {
      throw DataError("root trajectory length does not match the frame count");
    }
    auto& traj = header["root_trajectory"] = nlohmann::json::array();
    for (const auto& p : *labels.root_trajectory) traj.push_back(vec3_json(p));
  }
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& frame : seq.frames) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) {
        if (j != 0 || k != 0) out.push_back(',');
        append_double(out, frame(j, k));
      }
    }
    out.push_back('\n');
  }
  os << out;
}

LabeledSequence read_sequence(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(source + ": empty file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": header is not valid JSON (" + e.what() + ")");
  }
  LabeledSequence out;
  int declared = 0;
  try {
    if (header.at("format").get<std::string>() != kSequenceFormatName) {
      throw DataError(source + ": not a " + std::string(kSequenceFormatName) + " file");
    }
    const int version = header.at("version").get<int>();
    if (version != kSequenceFormatVersion) {
      throw DataError(source + ": unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kSequenceFormatVersion) + ")");
    }
    const auto joints = header.at("joints").get<std::vector<std::string>>();
    const auto& names = standard_topology().joint_names;
    if (joints.size() != names.size() || !std::equal(joints.begin(), joints.end(), names.begin())) {
      throw DataError(source + ": joint order does not match the canonical 17-joint topology");
    }
    if (header.at("units").get<std::string>() != "mm") throw DataError(source + ": units must be mm");
    out.sequence.fps = header.at("fps").get<double>();
    if (!(out.sequence.fps > 0)) throw DataError(source + ": fps must be positive");
    declared = header.at("frames").get<int>();
    if (declared < 1) throw DataError(source + ": frame count must be at least 1");
    out.labels.action = header.at("action").get<std::string>();
    out.labels.subject = header.at("subject").get<std::string>();
    if (header.contains("root_trajectory")) {
      std::vector<Vec3> traj;
      for (const auto& p : header.at("root_trajectory")) traj.push_back(vec3_from(p));
      if (static_cast<int>(traj.size()) != declared) {
        throw DataError(source + ": root trajectory length does not match the frame count");
      }
      out.labels.root_trajectory = std::move(traj);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed header (" + e.what() + ")");
  }

  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    Pose pose;
    std::string_view rest(line);
    const std::string where = source + ":" + std::to_string(line_no);
    for (int i = 0; i < kNumJoints * 3; ++i) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (i == kNumJoints * 3 - 1)) {
        throw DataError(where + ": expected 51 values per frame");
      }
      pose(i / 3, i % 3) = parse_double(rest.substr(0, comma), where);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    if (!pose.allFinite()) throw DataError(where + ": non-finite coordinate");
    out.sequence.frames.push_back(pose);
  }
  if (out.sequence.size() != declared) {
    throw DataError(source + ": header declares " + std::to_string(declared) + " frames but the body has " +
                    std::to_string(out.sequence.size()));
  }
  return out;
}

void save_sequence(const PoseSequence& seq, const SequenceLabels& labels, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_sequence(os, seq, labels);
  if (!os) throw DataError("failed writing " + path.string());
}

LabeledSequence load_sequence(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return read_sequence(is, path.string());
}

std::string file_digest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
  return hex;
}

// ---------------------------------------------------------------------------
// Camera

CameraModel CameraModel::standard() {
  CameraModel c;
  // Camera x = world x, camera y = -world z (image rows grow downward),
  // camera z = world y (depth).
  c.rotation << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  c.translation = Vec3(0.0, 900.0, 4500.0);
  return c;
}

void CameraModel::validate() const {
  if (!(focal > 0)) throw UsageError("camera focal length must be positive");
  if (width <= 0 || height <= 0) throw UsageError("camera image size must be positive");
  if (!rotation.allFinite() || !translation.allFinite() || !principal_point.allFinite()) {
    throw UsageError("camera parameters must be finite");
  }
  if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      rotation.determinant() <= 0) {
    throw UsageError("camera rotation must be orthogonal with determinant +1");
  }
}

void to_json(nlohmann::json& j, const CameraModel& c) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)});
  j = {{"focal", c.focal},
       {"principal_point", {c.principal_point.x(), c.principal_point.y()}},
       {"width", c.width},
       {"height", c.height},
       {"rotation", rot},
       {"translation", vec3_json(c.translation)}};
}

void from_json(const nlohmann::json& j, CameraModel& c) {
  c.focal = j.at("focal").get<double>();
  c.principal_point = {j.at("principal_point").at(0).get<double>(), j.at("principal_point").at(1).get<double>()};
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) c.rotation(r, k) = j.at("rotation").at(r).at(k).get<double>();
  }
  c.translation = vec3_from(j.at("translation"));
}

std::vector<Keypoints2D> project_2d(const PoseSequence& seq, const CameraModel& camera, double noise_sigma_px,
                                    std::uint64_t seed, const std::vector<Vec3>* root_trajectory) {
  camera.validate();
  if (!(noise_sigma_px >= 0)) throw UsageError("pixel noise sigma must be non-negative");
  if (root_trajectory && root_trajectory->size() != seq.frames.size()) {
    throw DataError("root trajectory length does not match the frame count");
  }
  Rng rng(seed);
  std::vector<Keypoints2D> out;
  out.reserve(seq.frames.size());
  for (int t = 0; t < seq.size(); ++t) {
    Keypoints2D kp;
    for (int j = 0; j < kNumJoints; ++j) {
      Vec3 world = seq[t].row(j).transpose();
      if (root_trajectory) world += (*root_trajectory)[static_cast<std::size_t>(t)];
      const Vec3 cam = camera.rotation * world + camera.translation;
      if (!(cam.z() > 0)) {
        throw DataError("frame " + std::to_string(t) + ", joint " + std::to_string(j) +
                        ": non-positive depth in front of the camera");
      }
      double u = camera.focal * cam.x() / cam.z() + camera.principal_point.x();
      double v = camera.focal * cam.y() / cam.z() + camera.principal_point.y();
      if (noise_sigma_px > 0) {
        u += rng.normal(0.0, noise_sigma_px);
        v += rng.normal(0.0, noise_sigma_px);
      }
      kp(j, 0) = 2.0 * u / camera.width - 1.0;
      kp(j, 1) = 2.0 * v / camera.height - 1.0;
    }
    out.push_back(kp);
  }
  return out;
}

Eigen::MatrixXd keypoints_to_matrix(const std::vector<Keypoints2D>& keypoints) {
  Eigen::MatrixXd out(2 * kNumJoints, static_cast<Eigen::Index>(keypoints.size()));
  for (std::size_t t = 0; t < keypoints.size(); ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      out(2 * j, static_cast<Eigen::Index>(t)) = keypoints[t](j, 0);
      out(2 * j + 1, static_cast<Eigen::Index>(t)) = keypoints[t](j, 1);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic motion

void SynthConfig::validate() const {
  for (double len : bone_lengths) {
    if (!(len > 0)) throw UsageError("synthetic bone lengths must be positive");
  }
  for (const auto& pair : standard_topology().symmetry_pairs) {
    if (bone_lengths[pair.left_bone] != bone_lengths[pair.right_bone]) {
      throw UsageError("synthetic bone lengths must be left/right symmetric");
    }
  }
  const auto n = static_cast<std::size_t>(standard_topology().num_angles());
  if (amplitudes.size() != n || base_angles.size() != n) {
    throw UsageError("synthetic amplitude and base-angle tables need one entry per angle triple");
  }
  if (frames < 3) throw UsageError("synthetic sequences need at least 3 frames");
  if (!(fps > 0)) throw UsageError("fps must be positive");
  if (!(noise_sigma >= 0)) throw UsageError("noise sigma must be non-negative");
  if (!(frequency_hz >= 0)) throw UsageError("gait frequency must be non-negative");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"bone_lengths", c.bone_lengths}, {"frequency_hz", c.frequency_hz}, {"amplitudes", c.amplitudes},
       {"base_angles", c.base_angles},   {"phase", c.phase},               {"heading", c.heading},
       {"heading_rate", c.heading_rate}, {"trunk_lean", c.trunk_lean},     {"leg_abduction", c.leg_abduction},
       {"arm_abduction", c.arm_abduction}, {"root_radius", c.root_radius}, {"root_bob", c.root_bob},
       {"noise_sigma", c.noise_sigma},   {"frames", c.frames},             {"fps", c.fps},
       {"seed", c.seed},                 {"subject", c.subject},           {"action", c.action}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("bone_lengths", c.bone_lengths);
  get("frequency_hz", c.frequency_hz);
  get("amplitudes", c.amplitudes);
  get("base_angles", c.base_angles);
  get("phase", c.phase);
  get("heading", c.heading);
  get("heading_rate", c.heading_rate);
  get("trunk_lean", c.trunk_lean);
  get("leg_abduction", c.leg_abduction);
  get("arm_abduction", c.arm_abduction);
  get("root_radius", c.root_radius);
  get("root_bob", c.root_bob);
  get("noise_sigma", c.noise_sigma);
  get("frames", c.frames);
  get("fps", c.fps);
  get("seed", c.seed);
  get("subject", c.subject);
  get("action", c.action);
}

namespace {

// Indices into the amplitude/base tables (topology angle-triple order).
enum Dof { kRKneeDof = 0, kLKneeDof, kRHipDof, kLHipDof, kRElbowDof, kLElbowDof, kRShoulderDof, kLShoulderDof };

Vec3 limb_direction(double side, double abduction, double pitch) {
  return {side * std::sin(abduction), std::sin(pitch) * std::cos(abduction), -std::cos(pitch) * std::cos(abduction)};
}

Pose synthetic_frame(const SynthConfig& c, double time) {
  using namespace joint;
  const double omega = 2.0 * std::numbers::pi * c.frequency_hz;
  const double right = c.phase;
  const double left = c.phase + std::numbers::pi;
  auto dof = [&](int k, double limb_phase, double offset) {
    const auto i = static_cast<std::size_t>(k);
    return c.base_angles[i] + c.amplitudes[i] * std::sin(omega * time + limb_phase + offset);
  };
  const auto& len = c.bone_lengths;
  constexpr double kKneeLead = std::numbers::pi / 2;

  // Body frame: x toward the subject's left, y forward, z up.
  Pose p = Pose::Zero();
  auto set = [&](int j, const Vec3& v) { p.row(j) = v.transpose(); };
  auto at = [&](int j) -> Vec3 { return p.row(j).transpose(); };

  set(kRHip, Vec3(-len[0], 0, 0));
  set(kLHip, Vec3(len[3], 0, 0));
  for (const auto& [hip, knee, ankle, side, hip_dof, knee_dof, thigh, shin, limb_phase] :
       {std::tuple{kRHip, kRKnee, kRAnkle, -1.0, kRHipDof, kRKneeDof, 1, 2, right},
        std::tuple{kLHip, kLKnee, kLAnkle, 1.0, kLHipDof, kLKneeDof, 4, 5, left}}) {
    const double swing = dof(hip_dof, limb_phase, 0.0);
    const double flex = dof(knee_dof, limb_phase, kKneeLead);
    set(knee, at(hip) + len[thigh] * limb_direction(side, c.leg_abduction, swing));
    set(ankle, at(knee) + len[shin] * limb_direction(side, c.leg_abduction, swing - flex));
  }

  const Vec3 trunk(0, std::sin(c.trunk_lean), std::cos(c.trunk_lean));
  const Vec3 head_dir(0, std::sin(c.trunk_lean + 0.15), std::cos(c.trunk_lean + 0.15));
  set(kSpine, len[6] * trunk);
  set(kThorax, at(kSpine) + len[7] * trunk);
  set(kNeck, at(kThorax) + len[8] * trunk);
  set(kHead, at(kNeck) + len[9] * head_dir);
  set(kLShoulder, at(kThorax) + Vec3(len[10], 0, 0));
  set(kRShoulder, at(kThorax) + Vec3(-len[13], 0, 0));
  // Arms swing against the leg on the same side.
  for (const auto& [shoulder, elbow, wrist, side, sh_dof, el_dof, upper, lower, limb_phase] :
       {std::tuple{kRShoulder, kRElbow, kRWrist, -1.0, kRShoulderDof, kRElbowDof, 14, 15, left},
        std::tuple{kLShoulder, kLElbow, kLWrist, 1.0, kLShoulderDof, kLElbowDof, 11, 12, right}}) {
    const double swing = dof(sh_dof, limb_phase, 0.0);
    const double flex = dof(el_dof, limb_phase, 0.0);
    set(elbow, at(shoulder) + len[upper] * limb_direction(side, c.arm_abduction, swing));
    set(wrist, at(elbow) + len[lower] * limb_direction(side, c.arm_abduction, swing + flex));
  }

  const double yaw = c.heading + c.heading_rate * time;
  const Mat3 rz = axis_angle<double>(Vec3::UnitZ(), yaw);
  return p * rz.transpose();
}

}  // namespace

PoseSequence generate_synthetic(const SynthConfig& config) {
  config.validate();
  PoseSequence seq;
  seq.fps = config.fps;
  seq.frames.reserve(static_cast<std::size_t>(config.frames));
  Rng rng(derive_seed(config.seed, "synthetic-noise"));
  for (int t = 0; t < config.frames; ++t) {
    Pose pose = synthetic_frame(config, t / config.fps);
    if (config.noise_sigma > 0) {
      for (int j = 1; j < kNumJoints; ++j) {
        for (int k = 0; k < 3; ++k) pose(j, k) += rng.normal(0.0, config.noise_sigma);
      }
    }
    seq.frames.push_back(pose);
  }
  return seq;
}

std::vector<Vec3> synthetic_root_trajectory(const SynthConfig& config) {
  config.validate();
  const double omega = 2.0 * std::numbers::pi * config.frequency_hz;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(config.frames));
  for (int t = 0; t < config.frames; ++t) {
    const double time = t / config.fps;
    const double a = config.heading_rate * time;
    const double hip_height = config.bone_lengths[1] + config.bone_lengths[2] - 20.0;
    out.emplace_back(config.root_radius * std::sin(0.5 * a), 0.3 * config.root_radius * std::sin(a),
                     hip_height + config.root_bob * std::sin(2.0 * omega * time + config.phase));
  }
  return out;
}

namespace {

struct ActionMotion {
  const char* name;
  double freq;
  double knee_base, knee_amp;
  double hip_base, hip_amp;
  double elbow_base, elbow_amp;
  double shoulder_base, shoulder_amp;
  double lean;
  double heading_rate;
  double root_radius;
};

// Flexion minima stay >= 0.3 rad so knees and elbows never lock straight.
constexpr ActionMotion kActions[] = {
    {"Directions", 0.40, 0.40, 0.10, 0.00, 0.15, 0.70, 0.40, 0.10, 0.50, 0.05, 0.30, 200},
    {"Discussion", 0.50, 0.40, 0.05, 0.00, 0.05, 0.80, 0.50, 0.20, 0.60, 0.05, 0.20, 100},
    {"Eating", 0.60, 0.45, 0.05, 0.10, 0.05, 1.20, 0.70, 0.30, 0.30, 0.10, 0.00, 50},
    {"Greeting", 0.80, 0.40, 0.10, 0.00, 0.10, 0.80, 0.50, 0.60, 0.90, 0.05, 0.20, 150},
    {"Phoning", 0.30, 0.40, 0.05, 0.00, 0.10, 1.80, 0.30, 0.30, 0.20, 0.05, 0.30, 250},
    {"Photo", 0.30, 0.45, 0.10, 0.05, 0.10, 1.40, 0.30, 0.90, 0.20, 0.10, 0.20, 150},
    {"Posing", 0.25, 0.40, 0.10, 0.00, 0.20, 0.60, 0.30, 0.50, 0.50, 0.05, 0.10, 100},
    {"Purchasing", 0.50, 0.45, 0.10, 0.05, 0.15, 0.70, 0.30, 0.40, 0.40, 0.20, 0.20, 200},
    {"Sitting", 0.30, 1.50, 0.05, 1.40, 0.05, 0.90, 0.30, 0.30, 0.20, 0.10, 0.00, 0},
    {"SittingDown", 0.20, 1.10, 0.60, 1.00, 0.50, 0.60, 0.20, 0.30, 0.20, 0.30, 0.00, 50},
    {"Smoking", 0.40, 0.40, 0.05, 0.00, 0.05, 1.50, 0.60, 0.30, 0.20, 0.05, 0.10, 100},
    {"Waiting", 0.30, 0.40, 0.05, 0.00, 0.05, 0.50, 0.10, 0.10, 0.10, 0.05, 0.10, 100},
    {"WalkDog", 0.90, 0.65, 0.35, 0.05, 0.40, 0.50, 0.15, 0.40, 0.20, 0.10, 0.40, 600},
    {"Walking", 0.90, 0.70, 0.40, 0.05, 0.45, 0.45, 0.15, 0.00, 0.35, 0.05, 0.50, 800},
    {"WalkTogether", 0.80, 0.55, 0.30, 0.05, 0.35, 0.50, 0.10, 0.00, 0.20, 0.05, 0.40, 700},
};

double subject_scale(const std::string& subject) {
  static const std::pair<const char*, double> kScales[] = {{"S1", 0.95}, {"S5", 0.92}, {"S6", 1.05}, {"S7", 0.98},
                                                           {"S8", 1.03}, {"S9", 1.00}, {"S11", 0.97}};
  for (const auto& [name, scale] : kScales) {
    if (subject == name) return scale;
  }
  return 0.9 + 0.2 * Rng(fnv1a64(subject)).uniform();
}

}  // namespace

SynthConfig action_preset(const std::string& action, const std::string& subject, std::uint64_t seed) {
  const ActionMotion* motion = nullptr;
  for (const auto& m : kActions) {
    if (action == m.name) motion = &m;
  }
  if (!motion) throw UsageError("unknown action '" + action + "'");

  SynthConfig c;
  c.action = action;
  c.subject = subject;
  c.seed = derive_seed(seed, "synthetic/" + subject + "/" + action);
  Rng rng(derive_seed(c.seed, "preset"));

  const double scale = subject_scale(subject);
  for (auto& len : c.bone_lengths) len *= scale;
  const double freq_jitter = rng.uniform(0.9, 1.1);
  const double amp_jitter = rng.uniform(0.85, 1.0);
  c.frequency_hz = motion->freq * freq_jitter;
  c.base_angles = {motion->knee_base,  motion->knee_base,  motion->hip_base,      motion->hip_base,
                   motion->elbow_base, motion->elbow_base, motion->shoulder_base, motion->shoulder_base};
  c.amplitudes = {motion->knee_amp,  motion->knee_amp,  motion->hip_amp,      motion->hip_amp,
                  motion->elbow_amp, motion->elbow_amp, motion->shoulder_amp, motion->shoulder_amp};
  for (auto& a : c.amplitudes) a *= amp_jitter;
  c.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  c.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  c.heading_rate = motion->heading_rate * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  c.trunk_lean = motion->lean + rng.uniform(-0.03, 0.03);
  c.leg_abduction = rng.uniform(0.04, 0.12);
  c.arm_abduction = rng.uniform(0.10, 0.25);
  c.root_radius = motion->root_radius;
  return c;
}

// ---------------------------------------------------------------------------
// Corpus

void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"train_subjects", c.train_subjects},
       {"test_subjects", c.test_subjects},
       {"actions", c.actions},
       {"frames", c.frames},
       {"fps", c.fps},
       {"noise_sigma_mm", c.noise_sigma_mm},
       {"noise_2d_px", c.noise_2d_px},
       {"seed", c.seed},
       {"camera", c.camera}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("train_subjects", c.train_subjects);
  get("test_subjects", c.test_subjects);
  get("actions", c.actions);
  get("frames", c.frames);
  get("fps", c.fps);
  get("noise_sigma_mm", c.noise_sigma_mm);
  get("noise_2d_px", c.noise_2d_px);
  get("seed", c.seed);
  get("camera", c.camera);
}

void to_json(nlohmann::json& j, const Manifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"file", e.file},
                       {"subject", e.subject},
                       {"action", e.action},
                       {"frames", e.frames},
                       {"digest", e.digest}});
  }
  j = {{"format", "posekit-manifest"},
       {"version", m.version},
       {"fps", m.fps},
       {"seed", m.seed},
       {"noise_2d_px", m.noise_2d_px},
       {"camera", m.camera},
       {"train_subjects", m.train_subjects},
       {"test_subjects", m.test_subjects},
       {"sequences", entries}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  if (j.at("format").get<std::string>() != "posekit-manifest") throw DataError("not a posekit manifest");
  m.version = j.at("version").get<int>();
  if (m.version != 1) throw DataError("unsupported manifest version " + std::to_string(m.version));
  m.fps = j.at("fps").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.noise_2d_px = j.at("noise_2d_px").get<double>();
  m.camera = j.at("camera").get<CameraModel>();
  m.train_subjects = j.at("train_subjects").get<std::vector<std::string>>();
  m.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
  m.entries.clear();
  for (const auto& e : j.at("sequences")) {
    m.entries.push_back({e.at("file").get<std::string>(), e.at("subject").get<std::string>(),
                         e.at("action").get<std::string>(), e.at("frames").get<int>(),
                         e.at("digest").get<std::string>()});
  }
}

Manifest generate_corpus(const CorpusConfig& config, const fs::path& out_dir) {
  if (config.frames < 3) throw UsageError("--frames must be at least 3 (acceleration terms need 3 frames)");
  if (!(config.fps > 0)) throw UsageError("fps must be positive");
  config.camera.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DataError("cannot create output directory " + out_dir.string());

  Manifest m;
  m.fps = config.fps;
  m.seed = config.seed;
  m.noise_2d_px = config.noise_2d_px;
  m.camera = config.camera;
  m.train_subjects = config.train_subjects;
  m.test_subjects = config.test_subjects;
  const auto& actions = config.actions.empty() ? canonical_actions() : config.actions;

  std::vector<std::string> subjects = config.train_subjects;
  subjects.insert(subjects.end(), config.test_subjects.begin(), config.test_subjects.end());
  for (const auto& subject : subjects) {
    for (const auto& action : actions) {
      SynthConfig synth = action_preset(action, subject, config.seed);
      synth.frames = config.frames;
      synth.fps = config.fps;
      synth.noise_sigma = config.noise_sigma_mm;
      const PoseSequence seq = generate_synthetic(synth);
      SequenceLabels labels{action, subject, synthetic_root_trajectory(synth)};
      const std::string file = subject + "_" + action + ".pkseq";
      save_sequence(seq, labels, out_dir / file);
      m.entries.push_back({file, subject, action, seq.size(), file_digest(out_dir / file)});
    }
  }
  std::ofstream os(out_dir / kManifestName, std::ios::binary);
  if (!os) throw DataError("cannot write manifest in " + out_dir.string());
  os << nlohmann::json(m).dump(2) << '\n';
  return m;
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("no dataset manifest at " + path.string());
  try {
    return nlohmann::json::parse(is).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed manifest (" + e.what() + ")");
  }
}

Dataset load_dataset(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  Dataset ds;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const bool train = contains(m.train_subjects, e.subject);
    const bool test = contains(m.test_subjects, e.subject);
    if (!train && !test) continue;
    LabeledSequence ls = load_sequence(dir / e.file);
    if (ls.sequence.size() != e.frames) throw DataError(e.file + ": frame count differs from the manifest");
    const auto keypoints = project_2d(ls.sequence, m.camera, m.noise_2d_px, derive_seed(m.seed, "project", i),
                                      ls.labels.root_trajectory ? &*ls.labels.root_trajectory : nullptr);
    Clip clip{keypoints_to_matrix(keypoints), std::move(ls.sequence), e.subject, e.action, e.file};
    (train ? ds.train : ds.test).push_back(std::move(clip));
  }
  if (ds.train.empty() && ds.test.empty()) throw DataError("dataset at " + dir.string() + " has no sequences");
  return ds;
}

// ---------------------------------------------------------------------------
// Windows

WindowSet make_windows(std::span<const Clip> clips, int receptive_field, int stride, PadMode pad) {
  if (clips.empty()) throw DataError("make_windows: no sequences");
  if (receptive_field < 1 || receptive_field % 2 == 0) throw UsageError("receptive field must be odd and positive");
  if (stride < 1) throw UsageError("window stride must be positive");
  WindowSet set;
  set.receptive_field = receptive_field;
  set.stride = stride;
  const int half = receptive_field / 2;
  for (int c = 0; c < static_cast<int>(clips.size()); ++c) {
    const int t_len = clips[c].targets.size();
    if (t_len == 0) throw DataError("make_windows: empty sequence " + clips[c].name);
    if (clips[c].inputs.cols() != t_len) throw DataError("make_windows: 2D and 3D lengths differ in " + clips[c].name);
    int first = 0;
    int last = t_len - 1;
    if (pad == PadMode::kValid && t_len >= receptive_field) {
      first = half;
      last = t_len - 1 - half;
    }
    for (int center = first; center <= last; center += stride) set.windows.push_back({c, center});
  }
  return set;
}

Eigen::MatrixXd window_inputs(const Clip& clip, int center, int receptive_field) {
  const int half = receptive_field / 2;
  const auto t_len = static_cast<int>(clip.inputs.cols());
  Eigen::MatrixXd out(clip.inputs.rows(), receptive_field);
  for (int i = 0; i < receptive_field; ++i) {
    out.col(i) = clip.inputs.col(std::clamp(center - half + i, 0, t_len - 1));
  }
  return out;
}

Batch assemble_batch(std::span<const Clip> clips, const WindowSet& set, std::span<const int> indices) {
  const int f = set.receptive_field;
  const int half = f / 2;
  Batch batch;
  batch.inputs.resize(2 * kNumJoints, static_cast<Eigen::Index>(indices.size()) * f);
  batch.targets.reserve(indices.size());
  const WindowRef* prev = nullptr;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const WindowRef& w = set.windows.at(static_cast<std::size_t>(indices[n]));
    const Clip& clip = clips[static_cast<std::size_t>(w.clip)];
    const auto t_len = static_cast<int>(clip.inputs.cols());
    for (int i = 0; i < f; ++i) {
      batch.inputs.col(static_cast<Eigen::Index>(n) * f + i) = clip.inputs.col(std::clamp(w.center - half + i, 0, t_len - 1));
    }
    batch.targets.push_back(clip.targets[w.center]);
    if (prev && prev->clip == w.clip && w.center == prev->center + set.stride) {
      ++batch.groups.back().length;
    } else {
      batch.groups.push_back({static_cast<int>(n), 1});
    }
    prev = &w;
  }
  if (!clips.empty()) batch.fps = clips.front().targets.fps;
  return batch;
}

}  // namespace posekit
