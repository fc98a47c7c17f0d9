#ifndef POSEKIT_SKELETON_HPP
#define POSEKIT_SKELETON_HPP

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "posekit/types.hpp"

namespace posekit {

/// Canonical joint indices. Dense and stable; file formats depend on them.
namespace joint {
enum Id : int {
  kPelvis = 0,
  kRHip = 1,
  kRKnee = 2,
  kRAnkle = 3,
  kLHip = 4,
  kLKnee = 5,
  kLAnkle = 6,
  kSpine = 7,
  kThorax = 8,
  kNeck = 9,
  kHead = 10,
  kLShoulder = 11,
  kLElbow = 12,
  kLWrist = 13,
  kRShoulder = 14,
  kRElbow = 15,
  kRWrist = 16,
};
}  // namespace joint

struct Bone {
  int parent = 0;
  int child = 0;
};

struct SymmetryPair {
  int left_bone = 0;
  int right_bone = 0;
};

/// Angle at `b` between bone b->a and bone b->c.
struct AngleTriple {
  int a = 0;
  int b = 0;
  int c = 0;
};

struct RomLimit {
  double min_angle = 0.0;
  double max_angle = 0.0;
};

/// Minimum bone length (mm) below which a bone counts as degenerate.
inline constexpr double kMinBoneLength = 1e-6;

struct SkeletonTopology {
  std::array<std::string, kNumJoints> joint_names;
  std::array<Bone, kNumBones> bones;
  std::array<SymmetryPair, kNumSymmetryPairs> symmetry_pairs;
  std::vector<AngleTriple> angle_triples;
  std::vector<RomLimit> rom_limits;  // one per angle triple

  [[nodiscard]] int num_angles() const { return static_cast<int>(angle_triples.size()); }

  /// Left<->right bone map; bones without a mirror map to themselves.
  [[nodiscard]] int mirror_bone(int bone) const;

  /// Index of the bone joining `u` and `v` in either orientation, or -1.
  [[nodiscard]] int bone_between(int u, int v) const;

  [[nodiscard]] int parent_of(int joint) const;
};

/// The fixed 17-joint topology: 16 bones, 6 symmetry pairs and 8 angle
/// triples (knees, hips, elbows, shoulders) with default ROM limits.
const SkeletonTopology& standard_topology();

/// Throws UsageError if any topology invariant is broken (tree rooted at the
/// pelvis, involutive symmetry map, triples on adjacent bones, sane limits).
void check_topology(const SkeletonTopology& topology);

void to_json(nlohmann::json& j, const SkeletonTopology& topology);
SkeletonTopology topology_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Pose validity

enum class RootPolicy {
  kRootRelative,  // joint 0 must sit exactly at the origin
  kAnyOrigin,
};

struct PoseIssue {
  enum class Kind { kNonFinite, kZeroLengthBone, kRootOffset };
  Kind kind;
  int index;  // joint for kNonFinite/kRootOffset, bone for kZeroLengthBone
  std::string message;
};

using ValidityReport = std::vector<PoseIssue>;

template <typename Scalar>
ValidityReport validate_pose(const PoseT<Scalar>& pose, const SkeletonTopology& topology,
                             RootPolicy policy = RootPolicy::kRootRelative) {
  using std::isfinite;
  ValidityReport report;
  bool finite = true;
  for (int j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < 3; ++k) {
      if (!isfinite(pose(j, k))) {
        report.push_back({PoseIssue::Kind::kNonFinite, j,
                          "joint " + std::to_string(j) + " (" + topology.joint_names[j] +
                              ") has a non-finite coordinate"});
        finite = false;
        break;
      }
    }
  }
  if (finite) {
    for (int b = 0; b < kNumBones; ++b) {
      const auto& bone = topology.bones[b];
      const Scalar len = (pose.row(bone.child) - pose.row(bone.parent)).norm();
      if (len < Scalar(kMinBoneLength)) {
        report.push_back({PoseIssue::Kind::kZeroLengthBone, b,
                          "bone " + std::to_string(b) + " (" + topology.joint_names[bone.parent] + "," +
                              topology.joint_names[bone.child] + ") has zero length"});
      }
    }
  }
  if (policy == RootPolicy::kRootRelative && finite && (pose.row(joint::kPelvis).array() != Scalar(0)).any()) {
    report.push_back({PoseIssue::Kind::kRootOffset, joint::kPelvis, "root joint is not at the origin"});
  }
  return report;
}

/// Throws DataError naming the first issue, if any.
template <typename Scalar>
void require_valid(const PoseT<Scalar>& pose, const SkeletonTopology& topology,
                   RootPolicy policy = RootPolicy::kAnyOrigin) {
  const auto report = validate_pose(pose, topology, policy);
  if (!report.empty()) throw DataError("invalid pose: " + report.front().message);
}

/// child - parent for every bone, in topology order. Translation invariant.
template <typename Scalar>
BoneVectorsT<Scalar> bone_vectors(const PoseT<Scalar>& pose, const SkeletonTopology& topology) {
  require_valid(pose, topology);
  BoneVectorsT<Scalar> out;
  for (int b = 0; b < kNumBones; ++b) {
    out.row(b) = pose.row(topology.bones[b].child) - pose.row(topology.bones[b].parent);
  }
  return out;
}

/// Subtracts the pelvis position from every joint.
template <typename Scalar>
PoseT<Scalar> root_relative(const PoseT<Scalar>& pose) {
  PoseT<Scalar> out = pose;
  out.rowwise() -= pose.row(joint::kPelvis);
  return out;
}

}  // namespace posekit

#endif  // POSEKIT_SKELETON_HPP
