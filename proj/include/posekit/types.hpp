#ifndef POSEKIT_TYPES_HPP
#define POSEKIT_TYPES_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace posekit {

inline constexpr int kNumJoints = 17;
inline constexpr int kNumBones = 16;
inline constexpr int kNumSymmetryPairs = 6;
inline constexpr double kDefaultFps = 50.0;

/// One frame of 17 joint positions in millimeters, one joint per row.
template <typename Scalar>
using PoseT = Eigen::Matrix<Scalar, kNumJoints, 3, Eigen::RowMajor>;
template <typename Scalar>
using BoneVectorsT = Eigen::Matrix<Scalar, kNumBones, 3, Eigen::RowMajor>;
template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Pose = PoseT<double>;
using BoneVectors = BoneVectorsT<double>;
using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;

/// Time-ordered poses sharing the canonical topology.
template <typename Scalar>
struct PoseSequenceT {
  std::vector<PoseT<Scalar>> frames;
  Scalar fps = Scalar(kDefaultFps);

  [[nodiscard]] int size() const { return static_cast<int>(frames.size()); }
  [[nodiscard]] bool empty() const { return frames.empty(); }
  PoseT<Scalar>& operator[](int t) { return frames[static_cast<std::size_t>(t)]; }
  const PoseT<Scalar>& operator[](int t) const { return frames[static_cast<std::size_t>(t)]; }
};

using PoseSequence = PoseSequenceT<double>;

// Error hierarchy. The CLI maps each class onto a stable exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, bad configuration values. Exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, mismatched or corrupted inputs. Exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry, non-finite values, failed checks. Exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace posekit

#endif  // POSEKIT_TYPES_HPP
