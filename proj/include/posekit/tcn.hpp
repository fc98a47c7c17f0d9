#ifndef POSEKIT_TCN_HPP
#define POSEKIT_TCN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posekit/random.hpp"
#include "posekit/types.hpp"

namespace posekit {

struct ModelConfig {
  int channels = 64;
  std::vector<int> filter_widths{3, 3, 3, 3, 3};
  double dropout_rate = 0.25;
  int num_joints = kNumJoints;
  int input_dims = 2;
  int output_dims = 3;
  /// The network regresses meters; outputs are multiplied by this to give mm.
  double output_scale = 1000.0;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] int in_features() const { return num_joints * input_dims; }
  [[nodiscard]] int out_features() const { return num_joints * output_dims; }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Product of the filter widths.
int receptive_field(const ModelConfig& config);

/// Dilation of each convolution stage: 1, w0, w0*w1, ...
std::vector<int> layer_dilations(const ModelConfig& config);

/// Closed-form parameter count (convolution weights, normalization scale and
/// shift, output bias).
Eigen::Index parameter_count(const ModelConfig& config);

/// A named contiguous slice of the flat parameter vector.
struct ParameterBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  int layer = 0;
};

/// Dilated temporal convolution network mapping 34 x F windows of 2D
/// keypoints to the 17 x 3 pose of the center frame.
///
/// Stage 0 expands the input to `channels` with a width-w0 convolution;
/// every later stage is a residual block of a width-w convolution followed by
/// a width-1 convolution. Each convolution is followed by batch
/// normalization, ReLU and dropout. A width-1 convolution with bias projects
/// to 51 outputs.
///
/// Training evaluates each window only where the center output needs it: a
/// width-w stage at dilation d consumes w inputs spaced d apart, so stage k
/// reduces to a strided convolution over the previous stage's outputs.
class TcnModel {
 public:
  explicit TcnModel(ModelConfig config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] int receptive_field() const { return field_; }
  [[nodiscard]] Eigen::Index num_parameters() const { return params_.size(); }

  Eigen::VectorXd& parameters() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& parameters() const { return params_; }
  /// Running means of every normalization layer followed by running variances.
  Eigen::VectorXd& running_stats() { return running_; }
  [[nodiscard]] const Eigen::VectorXd& running_stats() const { return running_; }

  [[nodiscard]] const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  /// Number of convolution layers (expansion, two per block, output).
  [[nodiscard]] int num_layers() const { return num_layers_; }
  void set_frozen(int layer, bool frozen);
  [[nodiscard]] bool frozen(int layer) const { return frozen_.at(static_cast<std::size_t>(layer)); }

  /// inputs: 34 x (N * F), window-major (window n occupies columns
  /// [n F, (n + 1) F)). Returns 51 x N in mm. Training mode uses batch
  /// statistics, updates running statistics, draws dropout masks from
  /// `dropout_rng` and caches activations for backward().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, bool training, Rng* dropout_rng = nullptr);

  /// Evaluation-mode forward without touching the cache.
  [[nodiscard]] Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const;

  /// Evaluation-mode outputs for every frame of a 34 x T sequence whose edges
  /// are replicated by (F - 1) / 2 frames; runs the dilated convolutions over
  /// the whole sequence at once. Returns 51 x T.
  [[nodiscard]] Eigen::MatrixXd predict_sequence(const Eigen::MatrixXd& sequence) const;

  /// Gradient of sum(grad_output .* output) with respect to every parameter,
  /// for the most recent forward(). Frozen layers get zero gradient.
  Eigen::VectorXd backward(const Eigen::MatrixXd& grad_output);

  [[nodiscard]] bool has_cache() const { return cache_.valid; }
  void clear_cache() { cache_ = {}; }

 private:
  struct Unit {
    int width = 1;
    int in_channels = 0;
    Eigen::Index weight = 0;  // C x (in_channels * width), column-major
    Eigen::Index gamma = 0;
    Eigen::Index beta = 0;
    Eigen::Index stat = 0;  // index into running means / variances
    int layer = 0;
  };

  struct UnitCache {
    Eigen::MatrixXd input;  // conv input viewed as (in * width) x M
    Eigen::MatrixXd zhat;
    Eigen::VectorXd inv_std;
    Eigen::MatrixXd y;     // post-normalization, pre-ReLU
    Eigen::MatrixXd mask;  // dropout multipliers, empty when not applied
  };

  struct Cache {
    bool valid = false;
    bool training = false;
    Eigen::Index windows = 0;
    std::vector<UnitCache> units;
    Eigen::MatrixXd final_input;  // C x N
  };

  Eigen::MatrixXd run_unit(const Unit& unit, const Eigen::MatrixXd& input, bool training, Rng* rng,
                           UnitCache* cache);
  [[nodiscard]] Eigen::MatrixXd eval_unit(const Unit& unit, const Eigen::MatrixXd& input) const;
  [[nodiscard]] Eigen::MatrixXd project(const Eigen::MatrixXd& features) const;
  void check_inputs(const Eigen::MatrixXd& inputs) const;

  ModelConfig config_;
  int field_ = 0;
  int num_layers_ = 0;
  std::vector<Unit> units_;  // expansion, then two per residual block
  Eigen::Index out_weight_ = 0;
  Eigen::Index out_bias_ = 0;
  Eigen::VectorXd params_;
  Eigen::VectorXd running_;
  std::vector<ParameterBlock> blocks_;
  std::vector<bool> frozen_;
  Cache cache_;
};

/// Validates the configuration and initializes parameters from the seed:
/// weights and output bias uniform in +-1/sqrt(fan_in), normalization scale 1
/// and shift 0, running mean 0 and variance 1.
TcnModel build_model(const ModelConfig& config);

/// Column n of a 51 x N output as a 17 x 3 pose.
Pose output_pose(const Eigen::MatrixXd& outputs, Eigen::Index n);
std::vector<Pose> output_poses(const Eigen::MatrixXd& outputs);
/// Inverse of output_poses: N poses into a 51 x N matrix.
Eigen::MatrixXd poses_to_output(const std::vector<Pose>& poses);

}  // namespace posekit

#endif  // POSEKIT_TCN_HPP
