#ifndef POSEKIT_DATA_HPP
#define POSEKIT_DATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posekit/types.hpp"

namespace posekit {

// ---------------------------------------------------------------------------
// Sequence files
//
// Line 1 is a JSON header object; every following line holds one frame as 51
// comma-separated decimals (joint-major x,y,z in canonical joint order) in
// shortest round-trip form. See docs/formats.md.

inline constexpr int kSequenceFormatVersion = 1;
inline constexpr const char* kSequenceFormatName = "posekit-sequence";

struct SequenceLabels {
  std::string action;
  std::string subject;
  /// Global pelvis position per frame (mm), kept apart from the
  /// root-relative poses.
  std::optional<std::vector<Vec3>> root_trajectory;
};

struct LabeledSequence {
  PoseSequence sequence;
  SequenceLabels labels;
};

void write_sequence(std::ostream& os, const PoseSequence& seq, const SequenceLabels& labels);
LabeledSequence read_sequence(std::istream& is, const std::string& source = "<stream>");
void save_sequence(const PoseSequence& seq, const SequenceLabels& labels, const std::filesystem::path& path);
LabeledSequence load_sequence(const std::filesystem::path& path);

/// FNV-1a 64 digest of a file's bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Camera

/// Pinhole camera; world points map to camera coordinates by R x + t.
struct CameraModel {
  double focal = 1145.0;  // px
  Eigen::Vector2d principal_point{500.0, 500.0};
  int width = 1000;
  int height = 1000;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();  // mm

  /// Camera 4.5 m in front of the origin at 0.9 m height, looking along +y.
  static CameraModel standard();
  void validate() const;
};

void to_json(nlohmann::json& j, const CameraModel& c);
void from_json(const nlohmann::json& j, CameraModel& c);

using Keypoints2D = Eigen::Matrix<double, kNumJoints, 2, Eigen::RowMajor>;

/// Projects each frame (plus the optional root trajectory) through the
/// camera, adds seeded pixel noise and maps pixel coordinates to [-1, 1].
std::vector<Keypoints2D> project_2d(const PoseSequence& seq, const CameraModel& camera, double noise_sigma_px,
                                    std::uint64_t seed, const std::vector<Vec3>* root_trajectory = nullptr);

/// Packs keypoints into a 34 x T network input (row = 2 * joint + axis).
Eigen::MatrixXd keypoints_to_matrix(const std::vector<Keypoints2D>& keypoints);

// ---------------------------------------------------------------------------
// Synthetic motion

struct SynthConfig {
  std::array<double, kNumBones> bone_lengths{130, 450, 440, 130, 450, 440, 230, 250,
                                             100, 120, 150, 280, 250, 150, 280, 250};
  double frequency_hz = 0.9;
  /// Sinusoid amplitude of the rotation driving each angle triple
  /// (knees, hips, elbows, shoulders in topology order), radians.
  std::vector<double> amplitudes{0.35, 0.35, 0.4, 0.4, 0.15, 0.15, 0.35, 0.35};
  /// Rest value of the same rotations, radians.
  std::vector<double> base_angles{0.7, 0.7, 0.0, 0.0, 0.45, 0.45, 0.0, 0.0};
  double phase = 0.0;          // rad
  double heading = 0.0;        // rad about the vertical axis
  double heading_rate = 0.0;   // rad/s
  double trunk_lean = 0.05;    // rad
  double leg_abduction = 0.08;
  double arm_abduction = 0.15;
  double root_radius = 0.0;    // mm, horizontal sway of the root trajectory
  double root_bob = 10.0;      // mm, vertical bob at twice the gait frequency
  double noise_sigma = 0.0;    // mm
  int frames = 500;
  double fps = kDefaultFps;
  std::uint64_t seed = 0;
  std::string subject = "S1";
  std::string action = "Walking";

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

/// Gait built by composing the bone tree from the fixed length table with
/// sinusoidal joint rotations (left and right limbs half a cycle apart), plus
/// seeded Gaussian noise on every non-root joint. Poses are pelvis-centered.
PoseSequence generate_synthetic(const SynthConfig& config);

/// Global pelvis trajectory matching generate_synthetic(config).
std::vector<Vec3> synthetic_root_trajectory(const SynthConfig& config);

/// Preset motion parameters for one of the fifteen canonical actions, with
/// subject-specific body scale and seeded per-sequence variation.
SynthConfig action_preset(const std::string& action, const std::string& subject, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus

struct CorpusConfig {
  std::vector<std::string> train_subjects{"S1", "S5", "S6", "S7", "S8"};
  std::vector<std::string> test_subjects{"S9", "S11"};
  std::vector<std::string> actions;  // empty: all fifteen
  int frames = 500;
  double fps = kDefaultFps;
  double noise_sigma_mm = 0.0;
  double noise_2d_px = 3.0;
  std::uint64_t seed = 0;
  CameraModel camera = CameraModel::standard();
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);

struct ManifestEntry {
  std::string file;
  std::string subject;
  std::string action;
  int frames = 0;
  std::string digest;
};

struct Manifest {
  int version = 1;
  double fps = kDefaultFps;
  std::uint64_t seed = 0;
  double noise_2d_px = 3.0;
  CameraModel camera = CameraModel::standard();
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<ManifestEntry> entries;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

inline constexpr const char* kManifestName = "manifest.json";

/// Writes one sequence file per (subject, action) plus manifest.json.
Manifest generate_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);
Manifest read_manifest(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Windows

/// A clip pairs network inputs (34 x T) with root-relative 3D targets.
struct Clip {
  Eigen::MatrixXd inputs;
  PoseSequence targets;
  std::string subject;
  std::string action;
  std::string name;
};

struct Dataset {
  std::vector<Clip> train;
  std::vector<Clip> test;
};

/// Loads every manifest entry and projects it to 2D with the manifest camera,
/// noise level and seed; subjects are split per the manifest.
Dataset load_dataset(const std::filesystem::path& dir);

enum class PadMode {
  /// T >= F: only fully covered centers (T - F + 1 windows at stride 1).
  /// Shorter clips fall back to edge replication.
  kValid,
  /// Every frame is a center; edges replicate the first/last frame.
  kSame,
};

struct WindowRef {
  int clip = 0;
  int center = 0;
};

struct WindowSet {
  int receptive_field = 0;
  int stride = 1;
  std::vector<WindowRef> windows;  // clip-contiguous, ascending centers
};

WindowSet make_windows(std::span<const Clip> clips, int receptive_field, int stride = 1,
                       PadMode pad = PadMode::kValid);

/// Half-open run [begin, begin + length) of batch rows holding consecutive
/// frames of a single clip.
struct Group {
  int begin = 0;
  int length = 0;
};

struct Batch {
  Eigen::MatrixXd inputs;     // 34 x (N * F), window-major
  std::vector<Pose> targets;  // N center-frame poses
  std::vector<Group> groups;  // clip-contiguous runs for temporal terms
  double fps = kDefaultFps;

  [[nodiscard]] int size() const { return static_cast<int>(targets.size()); }
};

/// Gathers the listed windows (edge-replicated where they overrun a clip).
Batch assemble_batch(std::span<const Clip> clips, const WindowSet& set, std::span<const int> indices);

/// The 34 x F input block of a single window.
Eigen::MatrixXd window_inputs(const Clip& clip, int center, int receptive_field);

}  // namespace posekit

#endif  // POSEKIT_DATA_HPP
