#ifndef POSEKIT_TEST_SUPPORT_HPP
#define POSEKIT_TEST_SUPPORT_HPP

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "posekit/data.hpp"
#include "posekit/random.hpp"

namespace posekit::testing {

/// One projected synthetic clip built in memory.
inline Clip make_clip(const std::string& action, const std::string& subject, int frames, std::uint64_t seed) {
  SynthConfig c = action_preset(action, subject, seed);
  c.frames = frames;
  const PoseSequence seq = generate_synthetic(c);
  const auto root = synthetic_root_trajectory(c);
  const auto keypoints = project_2d(seq, CameraModel::standard(), 2.0, seed, &root);
  return Clip{keypoints_to_matrix(keypoints), seq, subject, action, subject + "_" + action};
}

/// A few short clips per split, enough for a training epoch of a tiny model.
inline Dataset tiny_dataset(int frames = 40) {
  Dataset ds;
  ds.train.push_back(make_clip("Walking", "S1", frames, 1));
  ds.train.push_back(make_clip("Eating", "S5", frames, 2));
  ds.train.push_back(make_clip("Greeting", "S6", frames, 3));
  ds.test.push_back(make_clip("Walking", "S9", frames, 4));
  ds.test.push_back(make_clip("Sitting", "S11", frames, 5));
  return ds;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "posekit_test";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    for (char& ch : name) {
      if (ch == '/') ch = '_';
    }
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace posekit::testing

#endif  // POSEKIT_TEST_SUPPORT_HPP
