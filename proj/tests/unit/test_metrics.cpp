#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "posekit/data.hpp"
#include "posekit/linalg.hpp"
#include "posekit/metrics.hpp"
#include "posekit/random.hpp"

namespace posekit {
namespace {

PoseSequence motion(const std::string& action, int frames, std::uint64_t seed) {
  SynthConfig c = action_preset(action, "S9", seed);
  c.frames = frames;
  return generate_synthetic(c);
}

PoseSequence noisy(const PoseSequence& seq, double sigma, Rng& rng) {
  PoseSequence out = seq;
  for (auto& p : out.frames) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) p(j, k) += rng.normal(0.0, sigma);
    }
  }
  return out;
}

Mat3 random_rotation(Rng& rng) {
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  return axis_angle<double>(axis, rng.uniform(-std::numbers::pi, std::numbers::pi));
}

double naive_mpjpe(const PoseSequence& a, const PoseSequence& b) {
  double acc = 0;
  for (int t = 0; t < a.size(); ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      double sq = 0;
      for (int k = 0; k < 3; ++k) sq += (a[t](j, k) - b[t](j, k)) * (a[t](j, k) - b[t](j, k));
      acc += std::sqrt(sq);
    }
  }
  return acc / (a.size() * kNumJoints);
}

double sum_sq(const Pose& a, const Pose& b) { return (a - b).squaredNorm(); }

TEST(Mpjpe, IdentityAndPythagoreanOffset) {
  const PoseSequence gt = motion("Walking", 10, 1);
  EXPECT_EQ(mpjpe(gt, gt), 0.0);
  PoseSequence pred = gt;
  for (auto& p : pred.frames) p.rowwise() += Eigen::RowVector3d(3, 0, 4);
  EXPECT_NEAR(mpjpe(pred, gt), 5.0, 1e-12);
}

TEST(Mpjpe, MatchesNaiveLoop) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const PoseSequence gt = motion("Eating", 7, trial);
    const PoseSequence pred = noisy(gt, 30.0, rng);
    EXPECT_NEAR(mpjpe(pred, gt), naive_mpjpe(pred, gt), 1e-12);
  }
}

TEST(Mpjpe, LengthMismatchThrows) {
  EXPECT_THROW(mpjpe(motion("Walking", 5, 1), motion("Walking", 6, 1)), DataError);
}

TEST(Procrustes, RecoversExactSimilarity) {
  const Pose gt = motion("Walking", 3, 3)[1];
  const Mat3 rz = axis_angle<double>(Vec3::UnitZ(), std::numbers::pi / 2);
  Pose pred = gt * rz.transpose();
  pred.rowwise() += Eigen::RowVector3d(100, 0, 0);
  const auto a = procrustes_align(pred, gt);
  EXPECT_LT((a.aligned - gt).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((a.transform.rotation - rz.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(a.transform.scale, 1.0, 1e-12);
}

TEST(Procrustes, RecoversPureScale) {
  const Pose gt = motion("Walking", 3, 4)[0];
  const auto a = procrustes_align<double>(2.0 * gt, gt);
  EXPECT_NEAR(a.transform.scale, 0.5, 1e-12);
  EXPECT_LT((a.aligned - gt).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Procrustes, RotationIsProper) {
  Rng rng(5);
  const Pose gt = motion("Sitting", 3, 5)[0];
  // A mirrored prediction tempts an unconstrained solver into a reflection.
  Pose pred = gt;
  pred.col(0) *= -1.0;
  const auto a = procrustes_align(noisy({{pred}}, 5.0, rng)[0], gt);
  EXPECT_NEAR(a.transform.rotation.determinant(), 1.0, 1e-12);
  EXPECT_LT((a.transform.rotation.transpose() * a.transform.rotation - Mat3::Identity()).norm(), 1e-12);
}

TEST(Procrustes, BeatsRandomSimilarityTransforms) {
  Rng rng(6);
  const PoseSequence gt = motion("Photo", 5, 6);
  const PoseSequence pred = noisy(gt, 40.0, rng);
  for (int t = 0; t < pred.size(); ++t) {
    const auto best = procrustes_align(pred[t], gt[t]);
    const double residual = sum_sq(best.aligned, gt[t]);
    for (int trial = 0; trial < 2000; ++trial) {
      SimilarityTransform tr;
      // Sample near the optimum so the competition is not trivially weak.
      tr.rotation = axis_angle<double>(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized(),
                                       rng.normal(0.0, 0.05)) *
                    best.transform.rotation;
      tr.scale = best.transform.scale * std::exp(rng.normal(0.0, 0.05));
      tr.translation = best.transform.translation + Vec3(rng.normal(), rng.normal(), rng.normal()) * 20.0;
      EXPECT_GE(sum_sq(tr.apply(pred[t]), gt[t]), residual * (1 - 1e-12));
    }
  }
}

TEST(Procrustes, DegenerateInputThrows) {
  const Pose gt = motion("Walking", 3, 7)[0];
  Pose line = Pose::Zero();
  for (int j = 0; j < kNumJoints; ++j) line(j, 0) = j;
  EXPECT_THROW(procrustes_align(line, gt), NumericalError);
  EXPECT_THROW(procrustes_align(gt, line), NumericalError);
  EXPECT_THROW(procrustes_align<double>(Pose::Zero(), gt), NumericalError);
}

TEST(PMpjpe, InvariantToPerFrameSimilarity) {
  Rng rng(8);
  const PoseSequence gt = motion("Greeting", 6, 8);
  const PoseSequence pred = noisy(gt, 20.0, rng);
  PoseSequence moved = pred;
  for (auto& p : moved.frames) {
    SimilarityTransform tr;
    tr.rotation = random_rotation(rng);
    tr.scale = rng.uniform(0.3, 3.0);
    tr.translation = Vec3(rng.normal(), rng.normal(), rng.normal()) * 500.0;
    p = tr.apply(p);
  }
  EXPECT_NEAR(p_mpjpe(moved, gt), p_mpjpe(pred, gt), 1e-9);
  EXPECT_LT(p_mpjpe(moved, pred), 1e-9);
  EXPECT_EQ(p_mpjpe(gt, gt) < 1e-9, true);
}

TEST(NMpjpe, ScaleRemoved) {
  const PoseSequence gt = motion("Walking", 5, 9);
  PoseSequence pred = gt;
  for (auto& p : pred.frames) p *= 3.0;
  EXPECT_LT(n_mpjpe(pred, gt), 1e-9);
  EXPECT_NEAR(optimal_scale(gt[0], gt[0]), 1.0, 1e-15);
  EXPECT_THROW(n_mpjpe(PoseSequence{{Pose::Zero()}}, PoseSequence{{gt[0]}}), NumericalError);
}

TEST(NMpjpe, InvariantToPerFrameScale) {
  Rng rng(10);
  const PoseSequence gt = motion("Smoking", 6, 10);
  const PoseSequence pred = noisy(gt, 25.0, rng);
  PoseSequence scaled = pred;
  for (auto& p : scaled.frames) p *= rng.uniform(0.2, 5.0);
  EXPECT_NEAR(n_mpjpe(scaled, gt), n_mpjpe(pred, gt), 1e-9);
}

// The nested alignment families (similarity, scale only, none) give an exact
// ordering of the per-frame sums of squared errors, which is what each
// alignment minimizes.
TEST(Metrics, SquaredErrorOrderingOnRandomPairs) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const PoseSequence gt = motion(canonical_actions()[trial % 15], 4, trial);
    const PoseSequence pred = noisy(gt, rng.uniform(5.0, 60.0), rng);
    for (int t = 0; t < gt.size(); ++t) {
      const Pose x = pred[t].rowwise() - pred[t].colwise().mean();
      const Pose y = gt[t].rowwise() - gt[t].colwise().mean();
      const double p = sum_sq(procrustes_align(pred[t], gt[t]).aligned, gt[t]);
      const double n = sum_sq(optimal_scale(pred[t], gt[t]) * x, y);
      const double c = sum_sq(x, y);
      EXPECT_LE(p, n * (1 + 1e-12)) << "trial " << trial;
      EXPECT_LE(n, c * (1 + 1e-12)) << "trial " << trial;
      EXPECT_LE(c, sum_sq(pred[t], gt[t]) * (1 + 1e-12)) << "trial " << trial;
    }
  }
}

// The reported metrics average unsquared distances, so the least-squares
// alignments are not guaranteed to order them; on random pairs the ordering
// holds to within a small fraction of the error.
TEST(Metrics, MeanDistanceOrderingOnRandomPairs) {
  Rng rng(11);
  int inversions = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PoseSequence gt = motion(canonical_actions()[trial % 15], 4, trial);
    const PoseSequence pred = noisy(gt, rng.uniform(5.0, 60.0), rng);
    const double p = p_mpjpe(pred, gt);
    const double n = n_mpjpe(pred, gt);
    const double c = centered_mpjpe(pred, gt);
    EXPECT_LE(p, mpjpe(pred, gt) * 1.01) << "trial " << trial;
    EXPECT_LE(p, n * 1.01) << "trial " << trial;
    EXPECT_LE(n, c * 1.01) << "trial " << trial;
    if (p > n || n > c) ++inversions;
  }
  RecordProperty("inversions", inversions);
  EXPECT_LT(inversions, 10);
}

TEST(Mpjve, ConstantOffsetCancels) {
  const PoseSequence gt = motion("Walking", 8, 12);
  PoseSequence pred = gt;
  for (auto& p : pred.frames) p.rowwise() += Eigen::RowVector3d(17, -5, 9);
  EXPECT_LT(mpjve(pred, gt), 1e-12);
  EXPECT_LT(mpjae(pred, gt), 1e-12);
}

TEST(Mpjve, HandComputedSingleMovingJoint) {
  PoseSequence gt;
  gt.frames.assign(3, Pose::Zero());
  PoseSequence pred = gt;
  for (int t = 0; t < 3; ++t) pred[t](4, 0) = t;
  // One joint of 17 moves 1 mm per frame.
  EXPECT_NEAR(mpjve(pred, gt), 1.0 / kNumJoints, 1e-15);
  for (auto& p : pred.frames) p.col(0).setConstant(p(4, 0));
  EXPECT_DOUBLE_EQ(mpjve(pred, gt), 1.0);
  EXPECT_THROW(mpjve(PoseSequence{{Pose::Zero()}}, PoseSequence{{Pose::Zero()}}), DataError);
}

TEST(Mpjae, AffineDriftCancelsQuadraticGivesTwo) {
  const PoseSequence gt = motion("Walking", 9, 13);
  PoseSequence linear = gt;
  PoseSequence quadratic = gt;
  for (int t = 0; t < gt.size(); ++t) {
    linear[t].rowwise() += Eigen::RowVector3d(3, 1, -2) + t * Eigen::RowVector3d(0.5, -1, 2);
    quadratic[t].col(0).array() += double(t * t);
  }
  EXPECT_LT(mpjae(linear, gt), 1e-9);
  EXPECT_NEAR(mpjae(quadratic, gt), 2.0, 1e-9);
  EXPECT_THROW(mpjae(PoseSequence{{gt[0], gt[1]}}, PoseSequence{{gt[0], gt[1]}}), DataError);
}

TEST(Evaluate, SingleActionPerfectPrediction) {
  const std::vector<PoseSequence> gt{motion("Walking", 20, 14)};
  const auto report = evaluate(gt, gt, {"Walking"});
  EXPECT_EQ(report.overall.mpjpe, 0.0);
  EXPECT_LT(report.overall.p_mpjpe, 1e-9);
  EXPECT_LT(report.overall.n_mpjpe, 1e-9);
  EXPECT_EQ(report.overall.mpjve, 0.0);
  EXPECT_EQ(report.overall.mpjae, 0.0);
  ASSERT_EQ(report.per_action.size(), 1u);
  EXPECT_EQ(report.per_action[0].label, "Walking");
  EXPECT_EQ(report.frames, 20);
}

TEST(Evaluate, OverallIsFrameWeightedMean) {
  Rng rng(15);
  const std::vector<PoseSequence> gt{motion("Walking", 30, 1), motion("Eating", 12, 2), motion("Walking", 7, 3)};
  std::vector<PoseSequence> pred;
  for (const auto& g : gt) pred.push_back(noisy(g, 20.0, rng));
  const std::vector<std::string> labels{"Walking", "Eating", "Walking"};
  const auto report = evaluate(pred, gt, labels);
  double acc = 0;
  long frames = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    acc += mpjpe(pred[i], gt[i]) * gt[i].size();
    frames += gt[i].size();
  }
  EXPECT_NEAR(report.overall.mpjpe, acc / frames, 1e-12);
  double per_action = 0;
  for (const auto& a : report.per_action) per_action += a.values.mpjve * a.frames;
  EXPECT_NEAR(report.overall.mpjve, per_action / frames, 1e-12);
  // Canonical order puts Eating before Walking.
  ASSERT_EQ(report.per_action.size(), 2u);
  EXPECT_EQ(report.per_action[0].label, "Eating");
  EXPECT_EQ(report.per_action[1].frames, 37);
  EXPECT_EQ(evaluate(pred, gt, labels, 3), report);
}

TEST(Evaluate, CountMismatchThrows) {
  const std::vector<PoseSequence> gt{motion("Walking", 5, 1)};
  EXPECT_THROW(evaluate(gt, gt, {}), DataError);
  EXPECT_THROW(evaluate(gt, {}, {"Walking"}), DataError);
}

TEST(Evaluate, JsonRoundTripAndTable) {
  Rng rng(16);
  const std::vector<PoseSequence> gt{motion("Directions", 10, 1), motion("Discussion", 10, 2)};
  std::vector<PoseSequence> pred;
  for (const auto& g : gt) pred.push_back(noisy(g, 10.0, rng));
  const auto report = evaluate(pred, gt, {"Directions", "Discussion"});
  const nlohmann::json j = report;
  EXPECT_EQ(j.get<MetricReport>(), report);
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<MetricReport>(), report);
  const std::string table = format_report_table(report);
  EXPECT_NE(table.find("Dir."), std::string::npos);
  EXPECT_NE(table.find("Dis."), std::string::npos);
}

TEST(Actions, FifteenWithAbbreviations) {
  const std::vector<std::string> expected{"Dir.", "Dis.", "Eat", "Grt", "Phn",  "Pht", "Pos", "Pur",
                                          "Sit",  "SitD", "Smk", "Wat", "WD",   "Wlk", "WT"};
  ASSERT_EQ(canonical_actions().size(), 15u);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(action_abbreviation(canonical_actions()[i]), expected[i]) << canonical_actions()[i];
  }
}

}  // namespace
}  // namespace posekit
