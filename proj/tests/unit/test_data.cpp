#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "posekit/data.hpp"
#include "posekit/losses.hpp"
#include "posekit/metrics.hpp"
#include "test_support.hpp"

namespace posekit {
namespace {

using posekit::testing::make_clip;
using posekit::testing::TempDir;

PoseSequence walk(int frames, double noise = 0.0, std::uint64_t seed = 1) {
  SynthConfig c = action_preset("Walking", "S1", seed);
  c.frames = frames;
  c.noise_sigma = noise;
  return generate_synthetic(c);
}

std::string to_text(const PoseSequence& seq, const SequenceLabels& labels) {
  std::ostringstream os;
  write_sequence(os, seq, labels);
  return os.str();
}

LabeledSequence from_text(const std::string& text) {
  std::istringstream is(text);
  return read_sequence(is, "test.pkseq");
}

std::string error_of(const std::string& text) {
  try {
    from_text(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(SequenceFile, RoundTripIsBitwise) {
  TempDir dir;
  PoseSequence seq = walk(12, 3.0);
  seq[3](4, 1) = 1.0 / 3.0;
  seq[5](0, 2) = -0.0;
  seq.fps = 25.0;
  SynthConfig c = action_preset("Walking", "S1", 1);
  c.frames = 12;
  const SequenceLabels labels{"Walking", "S1", synthetic_root_trajectory(c)};
  save_sequence(seq, labels, dir / "a.pkseq");
  const LabeledSequence back = load_sequence(dir / "a.pkseq");
  ASSERT_EQ(back.sequence.size(), seq.size());
  EXPECT_EQ(back.sequence.frames, seq.frames);
  EXPECT_EQ(back.sequence.fps, 25.0);
  EXPECT_EQ(back.labels.action, "Walking");
  EXPECT_EQ(back.labels.subject, "S1");
  ASSERT_TRUE(back.labels.root_trajectory.has_value());
  EXPECT_EQ(*back.labels.root_trajectory, *labels.root_trajectory);
  EXPECT_TRUE(std::signbit(back.sequence[5](0, 2)));
}

TEST(SequenceFile, OutputIsStable) {
  const PoseSequence seq = walk(5, 2.0);
  const SequenceLabels labels{"Walking", "S1", std::nullopt};
  const std::string text = to_text(seq, labels);
  EXPECT_EQ(to_text(seq, labels), text);
  EXPECT_EQ(to_text(from_text(text).sequence, labels), text);
}

TEST(SequenceFile, ReorderedJointsRejected) {
  std::string text = to_text(walk(4), {"Walking", "S1", std::nullopt});
  const auto pos = text.find("\"RHip\",\"RKnee\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 14, "\"RKnee\",\"RHip\"");
  EXPECT_NE(error_of(text).find("joint order"), std::string::npos) << error_of(text);
}

TEST(SequenceFile, FrameCountMismatchRejected) {
  std::string text = to_text(walk(4), {"Walking", "S1", std::nullopt});
  const auto pos = text.find("\"frames\":4");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 10, "\"frames\":5");
  EXPECT_NE(error_of(text).find("frames"), std::string::npos) << error_of(text);
}

TEST(SequenceFile, VersionAndBodyErrors) {
  const std::string good = to_text(walk(4), {"Walking", "S1", std::nullopt});
  std::string version = good;
  version.replace(version.find("\"version\":1"), 11, "\"version\":9");
  EXPECT_NE(error_of(version).find("version"), std::string::npos);

  std::string short_line = good;
  short_line.erase(short_line.rfind(','), std::string::npos);
  short_line += "\n";
  EXPECT_NE(error_of(short_line).find("51 values"), std::string::npos) << error_of(short_line);

  std::string junk = good;
  const auto line3 = junk.find('\n', junk.find('\n') + 1) + 1;
  junk.replace(line3, 1, "x");
  EXPECT_NE(error_of(junk).find(":3:"), std::string::npos) << error_of(junk);

  EXPECT_FALSE(error_of("").empty());
  EXPECT_FALSE(error_of("{not json\n").empty());
  EXPECT_THROW(load_sequence("/nonexistent/file.pkseq"), DataError);
}

TEST(Synthetic, ZeroNoiseIsKinematicallyConsistent) {
  const PoseSequence seq = walk(100);
  const auto& t = standard_topology();
  const auto first = bone_lengths(seq[0], t);
  for (int f = 0; f < seq.size(); ++f) {
    EXPECT_LT((bone_lengths(seq[f], t) - first).cwiseAbs().maxCoeff(), 1e-9) << "frame " << f;
    EXPECT_LT(symmetry_residuals(seq[f], t).cwiseAbs().maxCoeff(), 1e-9) << "frame " << f;
    EXPECT_EQ(seq[f].row(0), Eigen::RowVector3d::Zero());
  }
  const auto loss = constraint_loss(seq, seq);
  EXPECT_EQ(loss.total, 0.0);
  EXPECT_EQ(compute_constraints(seq, t).r.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Synthetic, SeedDeterminesNoise) {
  EXPECT_EQ(walk(20, 5.0, 3).frames, walk(20, 5.0, 3).frames);
  EXPECT_NE(walk(20, 5.0, 3).frames, walk(20, 5.0, 4).frames);
  // Noise leaves the root at the origin.
  for (const auto& p : walk(20, 5.0, 3).frames) EXPECT_EQ(p.row(0), Eigen::RowVector3d::Zero());
}

TEST(Synthetic, ZeroAmplitudeIsStatic) {
  SynthConfig c;
  c.frames = 10;
  c.amplitudes.assign(8, 0.0);
  c.root_bob = 0.0;
  const PoseSequence seq = generate_synthetic(c);
  for (const auto& v : temporal_derivative(seq, 1)) EXPECT_EQ(v, Pose::Zero());
  for (const auto& a : temporal_derivative(seq, 2)) EXPECT_EQ(a, Pose::Zero());
}

TEST(Synthetic, InvalidConfigRejected) {
  SynthConfig c;
  c.frames = 2;
  EXPECT_THROW(generate_synthetic(c), UsageError);
  c = SynthConfig{};
  c.bone_lengths[3] = 0.0;
  EXPECT_THROW(generate_synthetic(c), UsageError);
  c = SynthConfig{};
  c.noise_sigma = -1.0;
  EXPECT_THROW(generate_synthetic(c), UsageError);
  EXPECT_THROW(action_preset("Juggling", "S1", 0), UsageError);
}

TEST(Synthetic, EveryActionPresetIsValid) {
  for (const auto& action : canonical_actions()) {
    SynthConfig c = action_preset(action, "S11", 7);
    c.frames = 30;
    const PoseSequence seq = generate_synthetic(c);
    for (const auto& p : seq.frames) EXPECT_TRUE(validate_pose(p, standard_topology()).empty()) << action;
    const nlohmann::json j = c;
    EXPECT_EQ(generate_synthetic(j.get<SynthConfig>()).frames, seq.frames) << action;
  }
}

TEST(Projection, OpticalAxisHitsPrincipalPoint) {
  CameraModel cam;  // identity extrinsics
  cam.principal_point = {480.0, 520.0};
  for (double depth : {500.0, 2000.0, 9000.0}) {
    PoseSequence seq;
    Pose p = walk(3)[0];
    p.rowwise() += Eigen::RowVector3d(0, 0, 10000);
    p.row(5) << 0, 0, depth;
    seq.frames.push_back(p);
    const auto kp = project_2d(seq, cam, 0.0, 0);
    EXPECT_NEAR(kp[0](5, 0), 2 * 480.0 / 1000 - 1, 1e-15);
    EXPECT_NEAR(kp[0](5, 1), 2 * 520.0 / 1000 - 1, 1e-15);
  }
}

TEST(Projection, DoublingDepthHalvesOffset) {
  CameraModel cam;
  PoseSequence near_seq;
  PoseSequence far_seq;
  Pose p = Pose::Zero();
  for (int j = 0; j < kNumJoints; ++j) p.row(j) << 30.0 * j - 200, 10.0 * j, 3000;
  Pose q = p;
  q.col(2).setConstant(6000);
  near_seq.frames.push_back(p);
  far_seq.frames.push_back(q);
  const auto a = project_2d(near_seq, cam, 0.0, 0)[0];
  const auto b = project_2d(far_seq, cam, 0.0, 0)[0];
  for (int j = 0; j < kNumJoints; ++j) {
    EXPECT_NEAR(b(j, 0), 0.5 * a(j, 0), 1e-12);
    EXPECT_NEAR(b(j, 1), 0.5 * a(j, 1), 1e-12);
  }
}

TEST(Projection, HandComputedJoint) {
  const PoseSequence seq = walk(3);
  const auto kp = project_2d(seq, CameraModel::standard(), 0.0, 0);
  // The standard camera maps world (x, y, z) to camera (x, 900 - z, 4500 + y).
  const double x = seq[1](joint::kLWrist, 0);
  const double y = seq[1](joint::kLWrist, 1);
  const double z = seq[1](joint::kLWrist, 2);
  const double u = 1145.0 * x / (4500.0 + y) + 500.0;
  const double v = 1145.0 * (900.0 - z) / (4500.0 + y) + 500.0;
  EXPECT_NEAR(kp[1](joint::kLWrist, 0), u / 500.0 - 1.0, 1e-9);
  EXPECT_NEAR(kp[1](joint::kLWrist, 1), v / 500.0 - 1.0, 1e-9);
}

TEST(Projection, NoiseIsSeededAndDepthChecked) {
  const PoseSequence seq = walk(5);
  const auto cam = CameraModel::standard();
  EXPECT_EQ(project_2d(seq, cam, 3.0, 9), project_2d(seq, cam, 3.0, 9));
  EXPECT_NE(project_2d(seq, cam, 3.0, 9), project_2d(seq, cam, 3.0, 10));
  PoseSequence behind = seq;
  behind[2](7, 1) = -5000.0;
  try {
    project_2d(behind, cam, 0.0, 0);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("frame 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("joint 7"), std::string::npos) << msg;
  }
}

TEST(Camera, ValidationAndJson) {
  CameraModel c = CameraModel::standard();
  EXPECT_NO_THROW(c.validate());
  const nlohmann::json j = c;
  const CameraModel back = j.get<CameraModel>();
  EXPECT_EQ(back.rotation, c.rotation);
  EXPECT_EQ(back.translation, c.translation);
  CameraModel bad = c;
  bad.rotation(0, 0) = -1.0;  // reflection
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.focal = 0.0;
  EXPECT_THROW(bad.validate(), UsageError);
}

Clip random_clip(int frames, std::uint64_t seed) {
  Rng rng(seed);
  Clip c;
  c.inputs.resize(34, frames);
  for (Eigen::Index i = 0; i < c.inputs.size(); ++i) c.inputs.data()[i] = rng.uniform(-1, 1);
  c.targets.frames.assign(static_cast<std::size_t>(frames), Pose::Zero());
  for (int t = 0; t < frames; ++t) c.targets[t](1, 0) = t;
  c.name = "clip";
  return c;
}

TEST(Windows, SingleFullWindow) {
  const std::vector<Clip> clips{random_clip(243, 1)};
  const WindowSet w = make_windows(clips, 243);
  ASSERT_EQ(w.windows.size(), 1u);
  EXPECT_EQ(w.windows[0].center, 121);
  const std::vector<int> idx{0};
  const Batch b = assemble_batch(clips, w, idx);
  EXPECT_EQ(b.inputs, clips[0].inputs);
  EXPECT_EQ(b.targets[0], clips[0].targets[121]);
}

TEST(Windows, CountIsLengthMinusFieldPlusOne) {
  const std::vector<Clip> clips{random_clip(245, 2)};
  EXPECT_EQ(make_windows(clips, 243).windows.size(), 3u);
  const std::vector<Clip> many{random_clip(50, 3), random_clip(31, 4)};
  EXPECT_EQ(make_windows(many, 9).windows.size(), std::size_t(50 - 9 + 1 + 31 - 9 + 1));
  EXPECT_EQ(make_windows(many, 9, 2).windows.size(), std::size_t(21 + 12));
  EXPECT_EQ(make_windows(many, 9, 1, PadMode::kSame).windows.size(), std::size_t(81));
  EXPECT_THROW(make_windows(std::vector<Clip>{}, 9), DataError);
}

TEST(Windows, PaddingReplicatesEdgesOnly) {
  const Clip long_clip = random_clip(30, 5);
  Clip short_clip = long_clip;
  short_clip.inputs = long_clip.inputs.leftCols(6);
  short_clip.targets.frames.resize(6);
  // A clip shorter than the field falls back to every-frame windows.
  const std::vector<Clip> shorts{short_clip};
  const WindowSet w = make_windows(shorts, 9);
  ASSERT_EQ(w.windows.size(), 6u);
  const Eigen::MatrixXd first = window_inputs(short_clip, 0, 9);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(first.col(k), short_clip.inputs.col(0));
  EXPECT_EQ(first.rightCols(5), short_clip.inputs.leftCols(5));
  const Eigen::MatrixXd last = window_inputs(short_clip, 5, 9);
  for (int k = 5; k < 9; ++k) EXPECT_EQ(last.col(k), short_clip.inputs.col(5));
  // Interior windows of a padded clip match the unpadded long clip.
  for (int c = 4; c + 4 < 30; ++c) EXPECT_EQ(window_inputs(long_clip, c, 9), long_clip.inputs.middleCols(c - 4, 9));
}

TEST(Windows, BatchGroupsFollowConsecutiveCenters) {
  const std::vector<Clip> clips{random_clip(20, 6), random_clip(20, 7)};
  const WindowSet w = make_windows(clips, 9);
  ASSERT_EQ(w.windows.size(), 24u);
  // Windows 10, 11 end the first clip and 12, 13 start the second.
  const std::vector<int> idx{0, 1, 2, 5, 10, 11, 12, 13};
  const Batch b = assemble_batch(clips, w, idx);
  EXPECT_EQ(b.size(), 8);
  ASSERT_EQ(b.groups.size(), 4u);
  EXPECT_EQ(b.groups[0].begin, 0);
  EXPECT_EQ(b.groups[0].length, 3);
  EXPECT_EQ(b.groups[1].length, 1);
  EXPECT_EQ(b.groups[2].begin, 4);
  EXPECT_EQ(b.groups[2].length, 2);
  EXPECT_EQ(b.groups[3].length, 2);
}

TEST(Corpus, GeneratesManifestAndFiles) {
  TempDir a;
  TempDir b;
  CorpusConfig c;
  c.train_subjects = {"S1", "S5"};
  c.test_subjects = {"S9"};
  c.actions = {"Walking", "Eating"};
  c.frames = 12;
  c.seed = 4;
  const Manifest m = generate_corpus(c, a.path());
  ASSERT_EQ(m.entries.size(), 6u);
  for (const auto& e : m.entries) {
    EXPECT_EQ(e.file, e.subject + "_" + e.action + ".pkseq");
    EXPECT_EQ(file_digest(a / e.file), e.digest);
    EXPECT_EQ(e.frames, 12);
  }
  const Manifest read = read_manifest(a.path());
  EXPECT_EQ(read.entries.size(), 6u);
  EXPECT_EQ(read.seed, 4u);

  generate_corpus(c, b.path());
  for (const auto& e : m.entries) EXPECT_EQ(file_digest(b / e.file), e.digest);
  EXPECT_EQ(file_digest(a / kManifestName), file_digest(b / kManifestName));

  const Dataset ds = load_dataset(a.path());
  EXPECT_EQ(ds.train.size(), 4u);
  EXPECT_EQ(ds.test.size(), 2u);
  EXPECT_EQ(ds.train[0].inputs.cols(), 12);
  const Dataset again = load_dataset(a.path());
  EXPECT_EQ(again.train[1].inputs, ds.train[1].inputs);

  c.frames = 2;
  EXPECT_THROW(generate_corpus(c, b.path()), UsageError);
}

TEST(Corpus, TamperedFileIsDetectedByDigest) {
  TempDir dir;
  CorpusConfig c;
  c.train_subjects = {"S1"};
  c.test_subjects = {};
  c.actions = {"Walking"};
  c.frames = 5;
  const Manifest m = generate_corpus(c, dir.path());
  {
    std::ofstream os(dir / m.entries[0].file, std::ios::app);
    os << "\n";
  }
  EXPECT_NE(file_digest(dir / m.entries[0].file), m.entries[0].digest);
  EXPECT_THROW(read_manifest(dir / "missing"), DataError);
}

TEST(Corpus, ConfigJsonRoundTrip) {
  CorpusConfig c;
  c.actions = {"Walking"};
  c.noise_2d_px = 1.5;
  c.seed = 77;
  const nlohmann::json j = c;
  const CorpusConfig back = j.get<CorpusConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(MakeClip, ProjectionDeterministic) {
  EXPECT_EQ(make_clip("Walking", "S1", 20, 3).inputs, make_clip("Walking", "S1", 20, 3).inputs);
}

}  // namespace
}  // namespace posekit
