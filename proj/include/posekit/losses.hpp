#ifndef POSEKIT_LOSSES_HPP
#define POSEKIT_LOSSES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posekit/skeleton.hpp"
#include "posekit/types.hpp"

namespace posekit {

// The seven kinematic constraint quantities compared between a predicted and
// a ground-truth sequence:
//   theta      angle between limbs at each angle triple        (rad)
//   d          bone length                                      (mm)
//   s          left minus right length per symmetry pair        (mm)
//   r          range-of-motion hinge penalty per angle triple   (rad)
//   xdot       joint linear velocity, forward difference        (mm/frame)
//   xddot      joint linear acceleration, second difference     (mm/frame^2)
//   thetaddot  second difference of the joint angles            (rad/frame^2)
// Each term is the mean squared difference over all of its elements; the
// total is the weighted sum of the terms.

enum class Term : int {
  kTheta = 0,
  kBoneLength,
  kSymmetry,
  kRom,
  kVelocity,
  kAcceleration,
  kAngularAcceleration,
};

inline constexpr int kNumTerms = 7;
inline constexpr std::array<std::string_view, kNumTerms> kTermNames{"theta", "d",     "s",        "r",
                                                                    "xdot",  "xddot", "thetaddot"};

inline std::optional<Term> term_from_name(std::string_view name) {
  for (int i = 0; i < kNumTerms; ++i) {
    if (kTermNames[i] == name) return static_cast<Term>(i);
  }
  return std::nullopt;
}

struct LossWeights {
  std::array<double, kNumTerms> values{1, 1, 1, 1, 1, 1, 1};

  static LossWeights unit() { return {}; }
  static LossWeights zeros() {
    LossWeights w;
    w.values.fill(0.0);
    return w;
  }
  static LossWeights only(Term t) {
    LossWeights w = zeros();
    w[t] = 1.0;
    return w;
  }

  double& operator[](Term t) { return values[static_cast<int>(t)]; }
  double operator[](Term t) const { return values[static_cast<int>(t)]; }
  [[nodiscard]] bool any_angle_term() const {
    return (*this)[Term::kTheta] != 0 || (*this)[Term::kRom] != 0 || (*this)[Term::kAngularAcceleration] != 0;
  }
  bool operator==(const LossWeights&) const = default;
};

template <typename Scalar>
struct LossBreakdownT {
  std::array<Scalar, kNumTerms> terms{};
  std::array<double, kNumTerms> weights{};
  Scalar total = Scalar(0);

  Scalar operator[](Term t) const { return terms[static_cast<int>(t)]; }
};

using LossBreakdown = LossBreakdownT<double>;

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json::object();
  for (int i = 0; i < kNumTerms; ++i) j[std::string(kTermNames[i])] = w.values[i];
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
  for (int i = 0; i < kNumTerms; ++i) {
    const std::string key(kTermNames[i]);
    if (j.contains(key)) w.values[i] = j.at(key).get<double>();
  }
  for (const auto& [key, value] : j.items()) {
    if (!term_from_name(key)) throw UsageError("unknown loss term '" + key + "'");
  }
}

inline void to_json(nlohmann::json& j, const LossBreakdown& b) {
  nlohmann::json terms = nlohmann::json::object();
  nlohmann::json weights = nlohmann::json::object();
  for (int i = 0; i < kNumTerms; ++i) {
    terms[std::string(kTermNames[i])] = b.terms[i];
    weights[std::string(kTermNames[i])] = b.weights[i];
  }
  j = {{"terms", terms}, {"weights", weights}, {"total", b.total}};
}

inline void from_json(const nlohmann::json& j, LossBreakdown& b) {
  for (int i = 0; i < kNumTerms; ++i) {
    const std::string key(kTermNames[i]);
    b.terms[i] = j.at("terms").at(key).get<double>();
    b.weights[i] = j.at("weights").at(key).get<double>();
  }
  b.total = j.at("total").get<double>();
}

/// How angle computations treat their singular points.
enum class AngleMode {
  /// Degenerate bones and gradients at theta in {0, pi} raise NumericalError.
  kStrict,
  /// Training path: the cosine is clamped to [-1+1e-12, 1-1e-12] and bone
  /// lengths are floored, so values and gradients stay finite.
  kClamped,
};

inline constexpr double kCosineClamp = 1e-12;

template <typename Scalar>
using AnglesT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using FrameTableT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename Scalar>
Scalar clamped_cosine(const Vec3T<Scalar>& u, const Vec3T<Scalar>& v, Scalar nu, Scalar nv, AngleMode mode) {
  const Scalar c = u.dot(v) / (nu * nv);
  const Scalar bound = mode == AngleMode::kClamped ? Scalar(1 - kCosineClamp) : Scalar(1);
  return std::clamp(c, -bound, bound);
}

inline std::string triple_label(const SkeletonTopology& topology, int k) {
  const auto& tri = topology.angle_triples[static_cast<std::size_t>(k)];
  return "triple " + std::to_string(k) + " (" + topology.joint_names[tri.a] + "," + topology.joint_names[tri.b] +
         "," + topology.joint_names[tri.c] + ")";
}

}  // namespace detail

/// Unsigned angle at b between b->a and b->c for every angle triple.
template <typename Scalar>
AnglesT<Scalar> joint_angles(const PoseT<Scalar>& pose, const SkeletonTopology& topology,
                             AngleMode mode = AngleMode::kStrict) {
  using std::acos;
  using std::max;
  const int n = topology.num_angles();
  AnglesT<Scalar> out(n);
  for (int k = 0; k < n; ++k) {
    const auto& tri = topology.angle_triples[static_cast<std::size_t>(k)];
    const Vec3T<Scalar> u = (pose.row(tri.a) - pose.row(tri.b)).transpose();
    const Vec3T<Scalar> v = (pose.row(tri.c) - pose.row(tri.b)).transpose();
    Scalar nu = u.norm();
    Scalar nv = v.norm();
    if (!(nu >= Scalar(kMinBoneLength) && nv >= Scalar(kMinBoneLength))) {
      if (mode == AngleMode::kStrict) {
        throw NumericalError("degenerate bone in angle " + detail::triple_label(topology, k));
      }
      nu = max(nu, Scalar(kMinBoneLength));
      nv = max(nv, Scalar(kMinBoneLength));
    }
    out(k) = acos(detail::clamped_cosine(u, v, nu, nv, mode));
  }
  return out;
}

/// Euclidean length of every bone, in topology order.
template <typename Scalar>
Eigen::Matrix<Scalar, kNumBones, 1> bone_lengths(const PoseT<Scalar>& pose, const SkeletonTopology& topology) {
  return bone_vectors(pose, topology).rowwise().norm();
}

/// Left bone length minus right bone length for every symmetry pair.
template <typename Scalar>
Eigen::Matrix<Scalar, kNumSymmetryPairs, 1> symmetry_residuals(const PoseT<Scalar>& pose,
                                                               const SkeletonTopology& topology) {
  const auto lengths = bone_lengths(pose, topology);
  Eigen::Matrix<Scalar, kNumSymmetryPairs, 1> out;
  for (int p = 0; p < kNumSymmetryPairs; ++p) {
    out(p) = lengths(topology.symmetry_pairs[p].left_bone) - lengths(topology.symmetry_pairs[p].right_bone);
  }
  return out;
}

/// Hinge penalty max(0, theta - max) + max(0, min - theta); zero inside.
template <typename Scalar>
AnglesT<Scalar> rom_penalties(const AnglesT<Scalar>& angles, const std::vector<RomLimit>& limits) {
  using std::max;
  if (static_cast<std::size_t>(angles.size()) != limits.size()) {
    throw UsageError("rom_penalties: one limit per angle is required");
  }
  AnglesT<Scalar> out(angles.size());
  for (Eigen::Index k = 0; k < angles.size(); ++k) {
    const auto& lim = limits[static_cast<std::size_t>(k)];
    out(k) = max(Scalar(0), angles(k) - Scalar(lim.max_angle)) + max(Scalar(0), Scalar(lim.min_angle) - angles(k));
  }
  return out;
}

/// Forward differences (order 1, length T-1) or second differences (order 2,
/// length T-2), in per-frame units.
template <typename Scalar>
std::vector<PoseT<Scalar>> temporal_derivative(const PoseSequenceT<Scalar>& seq, int order) {
  if (order != 1 && order != 2) throw UsageError("temporal_derivative: order must be 1 or 2");
  const int t_len = seq.size();
  if (t_len < order + 1) {
    throw DataError("temporal_derivative of order " + std::to_string(order) + " needs at least " +
                    std::to_string(order + 1) + " frames, got " + std::to_string(t_len));
  }
  std::vector<PoseT<Scalar>> out;
  out.reserve(static_cast<std::size_t>(t_len - order));
  for (int t = 0; t + order < t_len; ++t) {
    if (order == 1) {
      out.push_back(seq[t + 1] - seq[t]);
    } else {
      out.push_back(seq[t + 2] - Scalar(2) * seq[t + 1] + seq[t]);
    }
  }
  return out;
}

/// Joint angles of every frame, one row per frame.
template <typename Scalar>
FrameTableT<Scalar> angle_table(const PoseSequenceT<Scalar>& seq, const SkeletonTopology& topology,
                                AngleMode mode = AngleMode::kStrict) {
  FrameTableT<Scalar> out(seq.size(), topology.num_angles());
  for (int t = 0; t < seq.size(); ++t) {
    try {
      out.row(t) = joint_angles(seq[t], topology, mode).transpose();
    } catch (const NumericalError& e) {
      throw NumericalError("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

/// Second temporal difference of the joint angles, (T-2) rows.
template <typename Scalar>
FrameTableT<Scalar> angular_acceleration(const PoseSequenceT<Scalar>& seq, const SkeletonTopology& topology,
                                         AngleMode mode = AngleMode::kStrict) {
  if (seq.size() < 3) {
    throw DataError("angular_acceleration needs at least 3 frames, got " + std::to_string(seq.size()));
  }
  const FrameTableT<Scalar> theta = angle_table(seq, topology, mode);
  const Eigen::Index n = theta.rows() - 2;
  return theta.bottomRows(n) - Scalar(2) * theta.middleRows(1, n) + theta.topRows(n);
}

template <typename Scalar>
struct ConstraintSetT {
  FrameTableT<Scalar> theta;      // T x A
  FrameTableT<Scalar> d;          // T x 16
  FrameTableT<Scalar> s;          // T x 6
  FrameTableT<Scalar> r;          // T x A
  std::vector<PoseT<Scalar>> xdot;   // T-1
  std::vector<PoseT<Scalar>> xddot;  // T-2
  FrameTableT<Scalar> thetaddot;  // (T-2) x A
};

using ConstraintSet = ConstraintSetT<double>;

template <typename Scalar>
ConstraintSetT<Scalar> compute_constraints(const PoseSequenceT<Scalar>& seq, const SkeletonTopology& topology,
                                           AngleMode mode = AngleMode::kStrict) {
  using std::max;
  if (seq.size() < 3) throw DataError("constraint terms need at least 3 frames, got " + std::to_string(seq.size()));
  const int t_len = seq.size();
  const int n_angles = topology.num_angles();
  ConstraintSetT<Scalar> c;
  c.theta = angle_table(seq, topology, mode);
  c.d.resize(t_len, kNumBones);
  c.s.resize(t_len, kNumSymmetryPairs);
  c.r.resize(t_len, n_angles);
  for (int t = 0; t < t_len; ++t) {
    for (int b = 0; b < kNumBones; ++b) {
      const auto& bone = topology.bones[b];
      Scalar len = (seq[t].row(bone.child) - seq[t].row(bone.parent)).norm();
      if (!(len >= Scalar(kMinBoneLength))) {
        if (mode == AngleMode::kStrict) {
          throw NumericalError("frame " + std::to_string(t) + ": bone " + std::to_string(b) + " is degenerate");
        }
        len = max(len, Scalar(kMinBoneLength));
      }
      c.d(t, b) = len;
    }
    for (int p = 0; p < kNumSymmetryPairs; ++p) {
      c.s(t, p) = c.d(t, topology.symmetry_pairs[p].left_bone) - c.d(t, topology.symmetry_pairs[p].right_bone);
    }
    c.r.row(t) = rom_penalties<Scalar>(c.theta.row(t).transpose(), topology.rom_limits).transpose();
  }
  c.xdot = temporal_derivative(seq, 1);
  c.xddot = temporal_derivative(seq, 2);
  const Eigen::Index n = t_len - 2;
  c.thetaddot = c.theta.bottomRows(n) - Scalar(2) * c.theta.middleRows(1, n) + c.theta.topRows(n);
  return c;
}

namespace detail {

template <typename Scalar>
void check_pair(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt) {
  if (pred.size() != gt.size()) {
    throw DataError("sequence length mismatch: " + std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  }
  if (pred.fps != gt.fps) throw DataError("sequence fps mismatch");
  if (pred.size() < 3) throw DataError("constraint loss needs at least 3 frames, got " + std::to_string(pred.size()));
}

template <typename Derived>
typename Derived::Scalar mean_sq(const Eigen::MatrixBase<Derived>& diff) {
  using Scalar = typename Derived::Scalar;
  if (diff.size() == 0) return Scalar(0);
  // Fixed left-to-right order keeps the reduction reproducible.
  Scalar acc(0);
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    for (Eigen::Index j = 0; j < diff.cols(); ++j) acc += diff(i, j) * diff(i, j);
  }
  return acc / Scalar(diff.size());
}

template <typename Scalar>
Scalar mean_sq(const std::vector<PoseT<Scalar>>& a, const std::vector<PoseT<Scalar>>& b) {
  Scalar acc(0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    const PoseT<Scalar> diff = a[t] - b[t];
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) acc += diff(j, k) * diff(j, k);
    }
  }
  return a.empty() ? Scalar(0) : acc / Scalar(a.size() * kNumJoints * 3);
}

template <typename Scalar>
LossBreakdownT<Scalar> breakdown_from(const ConstraintSetT<Scalar>& p, const ConstraintSetT<Scalar>& g,
                                      const LossWeights& weights) {
  LossBreakdownT<Scalar> out;
  out.terms[0] = mean_sq(p.theta - g.theta);
  out.terms[1] = mean_sq(p.d - g.d);
  out.terms[2] = mean_sq(p.s - g.s);
  out.terms[3] = mean_sq(p.r - g.r);
  out.terms[4] = mean_sq(p.xdot, g.xdot);
  out.terms[5] = mean_sq(p.xddot, g.xddot);
  out.terms[6] = mean_sq(p.thetaddot - g.thetaddot);
  out.weights = weights.values;
  out.total = Scalar(0);
  for (int i = 0; i < kNumTerms; ++i) out.total += Scalar(weights.values[i]) * out.terms[i];
  return out;
}

}  // namespace detail

/// Weighted sum over the seven terms of the mean squared difference between
/// the predicted and ground-truth constraint quantities.
template <typename Scalar>
LossBreakdownT<Scalar> constraint_loss(const PoseSequenceT<Scalar>& pred, const PoseSequenceT<Scalar>& gt,
                                       const LossWeights& weights = {},
                                       const SkeletonTopology& topology = standard_topology(),
                                       AngleMode mode = AngleMode::kStrict) {
  detail::check_pair(pred, gt);
  const auto p = compute_constraints(pred, topology, mode);
  const auto g = compute_constraints(gt, topology, mode);
  return detail::breakdown_from(p, g, weights);
}

template <typename Scalar>
struct LossAndGradientT {
  LossBreakdownT<Scalar> loss;
  std::vector<PoseT<Scalar>> gradient;  // d total / d pred, one pose per frame
};

/// Loss and its analytic gradient with respect to every predicted coordinate.
/// In strict mode an angle at 0 or pi (where d theta / dx is unbounded) raises
/// NumericalError naming the frame and joint.
template <typename Scalar>
LossAndGradientT<Scalar> constraint_loss_and_gradient(const PoseSequenceT<Scalar>& pred,
                                                      const PoseSequenceT<Scalar>& gt, const LossWeights& weights = {},
                                                      const SkeletonTopology& topology = standard_topology(),
                                                      AngleMode mode = AngleMode::kStrict) {
  using std::abs;
  using std::max;
  using std::sqrt;
  detail::check_pair(pred, gt);
  const auto p = compute_constraints(pred, topology, mode);
  const auto g = compute_constraints(gt, topology, mode);

  LossAndGradientT<Scalar> out;
  out.loss = detail::breakdown_from(p, g, weights);

  const int t_len = pred.size();
  const int n_angles = topology.num_angles();
  out.gradient.assign(static_cast<std::size_t>(t_len), PoseT<Scalar>::Zero());
  auto& grad = out.gradient;

  // Angle-based terms collapse onto dL/dtheta per frame and triple.
  if (weights.any_angle_term() && n_angles > 0) {
    FrameTableT<Scalar> dtheta = FrameTableT<Scalar>::Zero(t_len, n_angles);
    const Scalar angle_count = Scalar(t_len * n_angles);
    const Scalar w_theta = Scalar(weights[Term::kTheta]);
    const Scalar w_rom = Scalar(weights[Term::kRom]);
    const Scalar w_acc = Scalar(weights[Term::kAngularAcceleration]);
    for (int t = 0; t < t_len; ++t) {
      for (int k = 0; k < n_angles; ++k) {
        const Scalar theta = p.theta(t, k);
        const auto& lim = topology.rom_limits[static_cast<std::size_t>(k)];
        Scalar drom(0);
        if (theta > Scalar(lim.max_angle)) drom = Scalar(1);
        if (theta < Scalar(lim.min_angle)) drom = Scalar(-1);
        dtheta(t, k) = w_theta * Scalar(2) * (p.theta(t, k) - g.theta(t, k)) / angle_count +
                       w_rom * Scalar(2) * (p.r(t, k) - g.r(t, k)) * drom / angle_count;
      }
    }
    const Scalar acc_count = Scalar((t_len - 2) * n_angles);
    for (int t = 0; t + 2 < t_len; ++t) {
      for (int k = 0; k < n_angles; ++k) {
        const Scalar e = w_acc * Scalar(2) * (p.thetaddot(t, k) - g.thetaddot(t, k)) / acc_count;
        dtheta(t, k) += e;
        dtheta(t + 1, k) -= Scalar(2) * e;
        dtheta(t + 2, k) += e;
      }
    }
    for (int t = 0; t < t_len; ++t) {
      for (int k = 0; k < n_angles; ++k) {
        const Scalar coeff = dtheta(t, k);
        if (coeff == Scalar(0)) continue;
        const auto& tri = topology.angle_triples[static_cast<std::size_t>(k)];
        const Vec3T<Scalar> u = (pred[t].row(tri.a) - pred[t].row(tri.b)).transpose();
        const Vec3T<Scalar> v = (pred[t].row(tri.c) - pred[t].row(tri.b)).transpose();
        const Scalar nu = max(u.norm(), Scalar(kMinBoneLength));
        const Scalar nv = max(v.norm(), Scalar(kMinBoneLength));
        const Scalar cosine = detail::clamped_cosine(u, v, nu, nv, AngleMode::kClamped);
        if (mode == AngleMode::kStrict && abs(u.dot(v) / (nu * nv)) >= Scalar(1 - kCosineClamp)) {
          throw NumericalError("gradient singularity at frame " + std::to_string(t) + ", joint " +
                               topology.joint_names[tri.b] + ": angle at 0 or pi");
        }
        const Scalar sine = sqrt(Scalar(1) - cosine * cosine);
        const Vec3T<Scalar> uh = u / nu;
        const Vec3T<Scalar> vh = v / nv;
        const Vec3T<Scalar> du = -(vh - cosine * uh) / (nu * sine);
        const Vec3T<Scalar> dv = -(uh - cosine * vh) / (nv * sine);
        grad[t].row(tri.a) += coeff * du.transpose();
        grad[t].row(tri.c) += coeff * dv.transpose();
        grad[t].row(tri.b) -= coeff * (du + dv).transpose();
      }
    }
  }

  // Length-based terms collapse onto dL/d(bone length).
  const Scalar w_d = Scalar(weights[Term::kBoneLength]);
  const Scalar w_s = Scalar(weights[Term::kSymmetry]);
  if (w_d != Scalar(0) || w_s != Scalar(0)) {
    for (int t = 0; t < t_len; ++t) {
      Eigen::Matrix<Scalar, kNumBones, 1> dlen;
      for (int b = 0; b < kNumBones; ++b) {
        dlen(b) = w_d * Scalar(2) * (p.d(t, b) - g.d(t, b)) / Scalar(t_len * kNumBones);
      }
      for (int q = 0; q < kNumSymmetryPairs; ++q) {
        const Scalar e = w_s * Scalar(2) * (p.s(t, q) - g.s(t, q)) / Scalar(t_len * kNumSymmetryPairs);
        dlen(topology.symmetry_pairs[q].left_bone) += e;
        dlen(topology.symmetry_pairs[q].right_bone) -= e;
      }
      for (int b = 0; b < kNumBones; ++b) {
        if (dlen(b) == Scalar(0)) continue;
        const auto& bone = topology.bones[b];
        const Eigen::Matrix<Scalar, 1, 3> vec = pred[t].row(bone.child) - pred[t].row(bone.parent);
        const Eigen::Matrix<Scalar, 1, 3> step = dlen(b) * vec / p.d(t, b);
        grad[t].row(bone.child) += step;
        grad[t].row(bone.parent) -= step;
      }
    }
  }

  const Scalar w_v = Scalar(weights[Term::kVelocity]);
  if (w_v != Scalar(0)) {
    const Scalar count = Scalar((t_len - 1) * kNumJoints * 3);
    for (int t = 0; t + 1 < t_len; ++t) {
      const PoseT<Scalar> e = w_v * Scalar(2) * (p.xdot[t] - g.xdot[t]) / count;
      grad[t + 1] += e;
      grad[t] -= e;
    }
  }
  const Scalar w_a = Scalar(weights[Term::kAcceleration]);
  if (w_a != Scalar(0)) {
    const Scalar count = Scalar((t_len - 2) * kNumJoints * 3);
    for (int t = 0; t + 2 < t_len; ++t) {
      const PoseT<Scalar> e = w_a * Scalar(2) * (p.xddot[t] - g.xddot[t]) / count;
      grad[t + 2] += e;
      grad[t + 1] -= Scalar(2) * e;
      grad[t] += e;
    }
  }
  return out;
}

template <typename Scalar>
std::vector<PoseT<Scalar>> constraint_loss_gradient(const PoseSequenceT<Scalar>& pred,
                                                    const PoseSequenceT<Scalar>& gt, const LossWeights& weights = {},
                                                    const SkeletonTopology& topology = standard_topology(),
                                                    AngleMode mode = AngleMode::kStrict) {
  return constraint_loss_and_gradient(pred, gt, weights, topology, mode).gradient;
}

}  // namespace posekit

#endif  // POSEKIT_LOSSES_HPP
