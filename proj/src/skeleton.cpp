#include "posekit/skeleton.hpp"

#include <algorithm>
#include <numbers>

namespace posekit {

namespace {

SkeletonTopology make_standard_topology() {
  using namespace joint;
  SkeletonTopology t;
  t.joint_names = {"Pelvis", "RHip",  "RKnee",     "RAnkle", "LHip",  "LKnee",      "LAnkle",
                   "Spine",  "Thorax", "Neck",     "Head",   "LShoulder", "LElbow", "LWrist",
                   "RShoulder", "RElbow", "RWrist"};
  t.bones = {{
      {kPelvis, kRHip},        // 0  right hip offset
      {kRHip, kRKnee},         // 1  right upper leg
      {kRKnee, kRAnkle},       // 2  right lower leg
      {kPelvis, kLHip},        // 3  left hip offset
      {kLHip, kLKnee},         // 4  left upper leg
      {kLKnee, kLAnkle},       // 5  left lower leg
      {kPelvis, kSpine},       // 6
      {kSpine, kThorax},       // 7
      {kThorax, kNeck},        // 8
      {kNeck, kHead},          // 9
      {kThorax, kLShoulder},   // 10 left shoulder offset
      {kLShoulder, kLElbow},   // 11 left upper arm
      {kLElbow, kLWrist},      // 12 left lower arm
      {kThorax, kRShoulder},   // 13 right shoulder offset
      {kRShoulder, kRElbow},   // 14 right upper arm
      {kRElbow, kRWrist},      // 15 right lower arm
  }};
  t.symmetry_pairs = {{{4, 1}, {5, 2}, {11, 14}, {12, 15}, {3, 0}, {10, 13}}};
  t.angle_triples = {
      {kRHip, kRKnee, kRAnkle},         // right knee
      {kLHip, kLKnee, kLAnkle},         // left knee
      {kPelvis, kRHip, kRKnee},         // right hip
      {kPelvis, kLHip, kLKnee},         // left hip
      {kRShoulder, kRElbow, kRWrist},   // right elbow
      {kLShoulder, kLElbow, kLWrist},   // left elbow
      {kThorax, kRShoulder, kRElbow},   // right shoulder
      {kThorax, kLShoulder, kLElbow},   // left shoulder
  };
  const RomLimit hinge{0.05, 2.90};
  const RomLimit ball{0.05, 3.00};
  t.rom_limits = {hinge, hinge, ball, ball, hinge, hinge, ball, ball};
  return t;
}

}  // namespace

int SkeletonTopology::mirror_bone(int bone) const {
  for (const auto& pair : symmetry_pairs) {
    if (pair.left_bone == bone) return pair.right_bone;
    if (pair.right_bone == bone) return pair.left_bone;
  }
  return bone;
}

int SkeletonTopology::bone_between(int u, int v) const {
  for (int b = 0; b < kNumBones; ++b) {
    if ((bones[b].parent == u && bones[b].child == v) || (bones[b].parent == v && bones[b].child == u)) return b;
  }
  return -1;
}

int SkeletonTopology::parent_of(int joint) const {
  for (const auto& bone : bones) {
    if (bone.child == joint) return bone.parent;
  }
  return -1;
}

const SkeletonTopology& standard_topology() {
  static const SkeletonTopology topology = make_standard_topology();
  return topology;
}

void check_topology(const SkeletonTopology& t) {
  auto fail = [](const std::string& what) { throw UsageError("invalid topology: " + what); };

  std::array<int, kNumJoints> parents;
  parents.fill(-1);
  for (int b = 0; b < kNumBones; ++b) {
    const auto [p, c] = t.bones[b];
    if (p < 0 || p >= kNumJoints || c < 0 || c >= kNumJoints || p == c) fail("bone " + std::to_string(b) + " out of range");
    if (c == joint::kPelvis) fail("the pelvis cannot be a child");
    if (parents[c] != -1) fail("joint " + std::to_string(c) + " has two parents");
    parents[c] = p;
  }
  // Every joint must reach the pelvis without revisiting a joint.
  for (int j = 1; j < kNumJoints; ++j) {
    int cur = j;
    for (int steps = 0; cur != joint::kPelvis; ++steps) {
      if (cur < 0 || steps > kNumJoints) fail("joint " + std::to_string(j) + " is not connected to the pelvis");
      cur = parents[cur];
    }
  }

  std::array<int, kNumBones> seen{};
  for (const auto& pair : t.symmetry_pairs) {
    if (pair.left_bone == pair.right_bone) fail("symmetry pair maps a bone to itself");
    for (int b : {pair.left_bone, pair.right_bone}) {
      if (b < 0 || b >= kNumBones) fail("symmetry bone out of range");
      if (seen[b]++ != 0) fail("bone " + std::to_string(b) + " appears in two symmetry pairs");
    }
  }
  for (int b = 0; b < kNumBones; ++b) {
    if (t.mirror_bone(t.mirror_bone(b)) != b) fail("symmetry map is not an involution");
  }

  if (t.rom_limits.size() != t.angle_triples.size()) fail("one ROM limit is required per angle triple");
  for (std::size_t k = 0; k < t.angle_triples.size(); ++k) {
    const auto& tri = t.angle_triples[k];
    if (t.bone_between(tri.a, tri.b) < 0 || t.bone_between(tri.b, tri.c) < 0) {
      fail("angle triple " + std::to_string(k) + " does not follow two bones");
    }
    const auto& lim = t.rom_limits[k];
    if (!(lim.min_angle >= 0.0 && lim.min_angle < lim.max_angle && lim.max_angle <= std::numbers::pi)) {
      fail("ROM limit " + std::to_string(k) + " must satisfy 0 <= min < max <= pi");
    }
  }
}

void to_json(nlohmann::json& j, const SkeletonTopology& t) {
  j = nlohmann::json::object();
  j["joints"] = t.joint_names;
  auto& bones = j["bones"] = nlohmann::json::array();
  for (const auto& b : t.bones) bones.push_back({b.parent, b.child});
  auto& pairs = j["symmetry_pairs"] = nlohmann::json::array();
  for (const auto& p : t.symmetry_pairs) pairs.push_back({p.left_bone, p.right_bone});
  auto& triples = j["angle_triples"] = nlohmann::json::array();
  for (const auto& a : t.angle_triples) triples.push_back({a.a, a.b, a.c});
  auto& rom = j["rom_limits"] = nlohmann::json::array();
  for (const auto& r : t.rom_limits) rom.push_back({r.min_angle, r.max_angle});
}

SkeletonTopology topology_from_json(const nlohmann::json& j) {
  SkeletonTopology t;
  try {
    const auto names = j.at("joints").get<std::vector<std::string>>();
    const auto bones = j.at("bones").get<std::vector<std::array<int, 2>>>();
    const auto pairs = j.at("symmetry_pairs").get<std::vector<std::array<int, 2>>>();
    if (names.size() != kNumJoints || bones.size() != kNumBones || pairs.size() != kNumSymmetryPairs) {
      throw DataError("topology must have 17 joints, 16 bones and 6 symmetry pairs");
    }
    std::copy(names.begin(), names.end(), t.joint_names.begin());
    for (int b = 0; b < kNumBones; ++b) t.bones[b] = {bones[b][0], bones[b][1]};
    for (int p = 0; p < kNumSymmetryPairs; ++p) t.symmetry_pairs[p] = {pairs[p][0], pairs[p][1]};
    for (const auto& a : j.at("angle_triples").get<std::vector<std::array<int, 3>>>()) {
      t.angle_triples.push_back({a[0], a[1], a[2]});
    }
    for (const auto& r : j.at("rom_limits").get<std::vector<std::array<double, 2>>>()) {
      t.rom_limits.push_back({r[0], r[1]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed topology JSON: ") + e.what());
  }
  check_topology(t);
  return t;
}

}  // namespace posekit
