#ifndef POSEKIT_METRICS_HPP
#define POSEKIT_METRICS_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "json.hpp"
#include "posekit/linalg.hpp"
#include "posekit/types.hpp"

namespace posekit {

/// x -> scale * rotation * x + translation, applied to row vectors.
template <typename Scalar>
struct SimilarityTransformT {
  Mat3T<Scalar> rotation = Mat3T<Scalar>::Identity();
  Scalar scale = Scalar(1);
  Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();

  PoseT<Scalar> apply(const PoseT<Scalar>& pose) const {
    PoseT<Scalar> out = scale * pose * rotation.transpose();
    out.rowwise() += translation.transpose();
    return out;
  }
};

using SimilarityTransform = SimilarityTransformT<double>;

template <typename Scalar>
struct AlignmentT {
  PoseT<Scalar> aligned;
  SimilarityTransformT<Scalar> transform;
};

using Alignment = AlignmentT<double>;

namespace detail {

template <typename Scalar>
void require_same_length(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt, int min_frames) {
  if (pred.size() != gt.size()) {
    throw DataError("sequence length mismatch: " + std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  }
  if (pred.size() < min_frames) {
    throw DataError("metric needs at least " + std::to_string(min_frames) + " frames, got " +
                    std::to_string(pred.size()));
  }
}

template <typename Scalar>
Scalar mean_joint_distance(const PoseT<Scalar>& a, const PoseT<Scalar>& b) {
  Scalar acc(0);
  for (int j = 0; j < kNumJoints; ++j) acc += (a.row(j) - b.row(j)).norm();
  return acc / Scalar(kNumJoints);
}

template <typename Scalar>
Scalar mean_over_frames(const std::vector<PoseT<Scalar>>& a, const std::vector<PoseT<Scalar>>& b) {
  Scalar acc(0);
  for (std::size_t t = 0; t < a.size(); ++t) acc += mean_joint_distance(a[t], b[t]);
  return acc / Scalar(a.size());
}

template <typename Scalar>
void require_spread(const PoseT<Scalar>& centered, const char* which) {
  const Mat3T<Scalar> scatter = centered.transpose() * centered;
  const auto svd = svd3(scatter);
  if (!(svd.S(0) > Scalar(0)) || svd.S(1) <= Scalar(1e-12) * svd.S(0)) {
    throw NumericalError(std::string("procrustes_align: degenerate (rank < 2) ") + which + " point set");
  }
}

}  // namespace detail

/// Protocol 1: mean Euclidean joint distance over all frames and joints.
template <typename Scalar>
Scalar mpjpe(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 1);
  return detail::mean_over_frames(pred.frames, gt.frames);
}

/// Least-squares similarity transform taking `pred` onto `gt`.
template <typename Scalar>
AlignmentT<Scalar> procrustes_align(const PoseT<Scalar>& pred, const PoseT<Scalar>& gt) {
  const Eigen::Matrix<Scalar, 1, 3> mu_pred = pred.colwise().mean();
  const Eigen::Matrix<Scalar, 1, 3> mu_gt = gt.colwise().mean();
  const PoseT<Scalar> x = pred.rowwise() - mu_pred;
  const PoseT<Scalar> y = gt.rowwise() - mu_gt;
  detail::require_spread(x, "predicted");
  detail::require_spread(y, "ground-truth");

  const Mat3T<Scalar> h = x.transpose() * y;
  const auto svd = svd3(h);
  const Scalar det = (svd.V * svd.U.transpose()).determinant();
  const Scalar sign = det < Scalar(0) ? Scalar(-1) : Scalar(1);
  Vec3T<Scalar> corr(Scalar(1), Scalar(1), sign);

  AlignmentT<Scalar> out;
  out.transform.rotation = svd.V * corr.asDiagonal() * svd.U.transpose();
  out.transform.scale = svd.S.dot(corr) / x.squaredNorm();
  out.transform.translation =
      mu_gt.transpose() - out.transform.scale * out.transform.rotation * mu_pred.transpose();
  out.aligned = out.transform.apply(pred);
  return out;
}

/// Protocol 2: MPJPE after per-frame similarity alignment.
template <typename Scalar>
Scalar p_mpjpe(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 1);
  Scalar acc(0);
  for (int t = 0; t < pred.size(); ++t) {
    acc += detail::mean_joint_distance(procrustes_align(pred[t], gt[t]).aligned, gt[t]);
  }
  return acc / Scalar(pred.size());
}

/// Least-squares uniform scale <pred, gt> / <pred, pred> over centered joints.
template <typename Scalar>
Scalar optimal_scale(const PoseT<Scalar>& pred, const PoseT<Scalar>& gt) {
  const PoseT<Scalar> x = pred.rowwise() - pred.colwise().mean();
  const PoseT<Scalar> y = gt.rowwise() - gt.colwise().mean();
  const Scalar norm = x.squaredNorm();
  if (!(norm > Scalar(0))) throw NumericalError("n_mpjpe: predicted frame has zero norm");
  return x.cwiseProduct(y).sum() / norm;
}

/// Protocol 3: MPJPE after per-frame optimal uniform scaling; both frames
/// are centered on their joint mean first.
template <typename Scalar>
Scalar n_mpjpe(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 1);
  Scalar acc(0);
  for (int t = 0; t < pred.size(); ++t) {
    const Scalar s = optimal_scale(pred[t], gt[t]);
    const PoseT<Scalar> x = pred[t].rowwise() - pred[t].colwise().mean();
    const PoseT<Scalar> y = gt[t].rowwise() - gt[t].colwise().mean();
    acc += detail::mean_joint_distance<Scalar>(s * x, y);
  }
  return acc / Scalar(pred.size());
}

/// MPJPE of both sequences after subtracting each frame's joint centroid.
template <typename Scalar>
Scalar centered_mpjpe(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 1);
  Scalar acc(0);
  for (int t = 0; t < pred.size(); ++t) {
    const PoseT<Scalar> x = pred[t].rowwise() - pred[t].colwise().mean();
    const PoseT<Scalar> y = gt[t].rowwise() - gt[t].colwise().mean();
    acc += detail::mean_joint_distance(x, y);
  }
  return acc / Scalar(pred.size());
}

/// Mean per-joint velocity error, mm/frame.
template <typename Scalar>
Scalar mpjve(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 2);
  std::vector<PoseT<Scalar>> dp, dg;
  for (int t = 0; t + 1 < pred.size(); ++t) {
    dp.push_back(pred[t + 1] - pred[t]);
    dg.push_back(gt[t + 1] - gt[t]);
  }
  return detail::mean_over_frames(dp, dg);
}

/// Mean per-joint acceleration error, mm/frame^2.
template <typename Scalar>
Scalar mpjae(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  detail::require_same_length(pred, gt, 3);
  std::vector<PoseT<Scalar>> ap, ag;
  for (int t = 0; t + 2 < pred.size(); ++t) {
    ap.push_back(pred[t + 2] - Scalar(2) * pred[t + 1] + pred[t]);
    ag.push_back(gt[t + 2] - Scalar(2) * gt[t + 1] + gt[t]);
  }
  return detail::mean_over_frames(ap, ag);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricValues {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  double mpjve = 0.0;  // mm/frame
  double mpjae = 0.0;  // mm/frame^2

  bool operator==(const MetricValues&) const = default;
};

struct ActionMetrics {
  std::string label;
  MetricValues values;
  long frames = 0;

  bool operator==(const ActionMetrics&) const = default;
};

struct MetricReport {
  MetricValues overall;
  std::vector<ActionMetrics> per_action;  // canonical action order
  long frames = 0;
  double fps = kDefaultFps;

  bool operator==(const MetricReport&) const = default;
};

/// All five metrics for one sequence pair.
MetricValues evaluate_sequence(const PoseSequence& pred, const PoseSequence& gt);

/// Five metrics per action label and overall. Every aggregate is a
/// frame-count-weighted mean of per-sequence values.
MetricReport evaluate(const std::vector<PoseSequence>& pred_set, const std::vector<PoseSequence>& gt_set,
                      const std::vector<std::string>& action_labels, int workers = 1);

/// Short column label for a known action name ("Directions" -> "Dir.").
std::string action_abbreviation(const std::string& action);

/// The fifteen action names in reporting order.
const std::vector<std::string>& canonical_actions();

void to_json(nlohmann::json& j, const MetricValues& v);
void from_json(const nlohmann::json& j, MetricValues& v);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// Aligned plain-text table: one row per action plus an average row.
std::string format_report_table(const MetricReport& report);

}  // namespace posekit

#endif  // POSEKIT_METRICS_HPP
