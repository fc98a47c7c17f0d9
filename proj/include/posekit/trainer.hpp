#ifndef POSEKIT_TRAINER_HPP
#define POSEKIT_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posekit/data.hpp"
#include "posekit/losses.hpp"
#include "posekit/metrics.hpp"
#include "posekit/tcn.hpp"

namespace posekit {

struct TrainConfig {
  double initial_lr = 1e-3;
  double lr_decay = 0.95;
  int epochs = 20;
  int batch_size = 32;
  /// Consecutive windows per clip-contiguous group; the temporal terms see
  /// one short predicted sequence per group.
  int group_length = 4;
  /// Stride between training window centers.
  int window_stride = 1;
  /// Weight of the positional mean squared error.
  double position_weight = 1.0;
  LossWeights loss_weights = LossWeights::unit();
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Epochs between validation passes; the final epoch is always validated.
  int eval_every = 1;
  int workers = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// initial_lr * lr_decay^epoch.
double lr_at(const TrainConfig& config, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double position_loss = 0.0;
  LossBreakdown constraint;
  double total_loss = 0.0;
  std::optional<MetricValues> validation;
  std::optional<double> wall_seconds;

  bool operator==(const EpochRecord& o) const;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainLog {
  std::vector<EpochRecord> records;

  /// One JSON object per line.
  [[nodiscard]] std::string to_jsonl() const;
  /// Epoch, lr, losses and validation Protocol-1 error in aligned columns.
  [[nodiscard]] std::string curve_table() const;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// Everything needed to continue training bit-exactly.
struct TrainerState {
  TcnModel model;
  TrainConfig config;
  AdamState adam;
  int next_epoch = 0;
  TrainLog log;
};

TrainerState make_trainer_state(const ModelConfig& model_config, const TrainConfig& config);

/// Loss of one batch of predictions and its gradient with respect to the
/// 51 x N network output.
struct BatchLoss {
  double position = 0.0;
  LossBreakdown constraint;
  double total = 0.0;
  Eigen::MatrixXd grad_output;
};

/// position_weight * mean over (window, joint) of the squared joint error, plus
/// the constraint loss averaged over the batch's groups of at least 3 frames.
BatchLoss batch_loss(const Eigen::MatrixXd& outputs, const Batch& batch, const TrainConfig& config,
                     const SkeletonTopology& topology = standard_topology());

/// The training-window schedule for one epoch: windows are chunked into runs
/// of group_length consecutive centers, chunks are shuffled with a seed
/// derived from (seed, epoch) and packed batch_size / group_length per batch.
std::vector<std::vector<int>> epoch_batches(const WindowSet& windows, const TrainConfig& config, int epoch);

/// One shuffled pass over the training clips with Adam at lr_at(epoch).
/// Throws NumericalError naming the batch if a loss is not finite.
EpochRecord train_epoch(TcnModel& model, AdamState& adam, std::span<const Clip> train, const TrainConfig& config,
                        int epoch);

/// Evaluation-mode predictions for every frame of every clip.
std::vector<PoseSequence> predict_clips(const TcnModel& model, std::span<const Clip> clips, int workers = 1);

/// Five-metric report of the model on the clips (dropout off, running
/// normalization statistics).
MetricReport validate_model(const TcnModel& model, std::span<const Clip> clips, int workers = 1);

using EpochCallback = std::function<void(const EpochRecord&, const TrainerState&)>;

/// Trains from state.next_epoch through config.epochs - 1, validating on
/// `test` per eval_every.
void train(TrainerState& state, const Dataset& data, const EpochCallback& on_epoch = {}, bool record_time = false);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian layout:
//   "PKCK" | u32 version | u64 header bytes | JSON header
//   | u64 block count | per block: u64 length, length x f64
//   | u64 FNV-1a digest of every preceding byte
// Blocks: parameters, running statistics, Adam first moment, second moment.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path);
std::string checkpoint_bytes(const TrainerState& state);
TrainerState load_checkpoint(const std::filesystem::path& path);
TrainerState parse_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

/// Throws DataError when a checkpoint's model configuration differs from the
/// requested one.
void require_compatible(const ModelConfig& checkpoint, const ModelConfig& requested);

// ---------------------------------------------------------------------------
// Experiments

struct Variant {
  std::string name;
  ModelConfig model;
  TrainConfig train;
};

/// Zero constraint weights (baseline) or unit weights (joint-aware).
Variant make_variant(const std::string& name, const ModelConfig& model, TrainConfig train);

struct VariantResult {
  std::string name;
  TrainLog log;
  std::optional<MetricReport> report;
  std::string error;
};

struct ExperimentResult {
  std::vector<VariantResult> variants;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Protocol-1 curves side by side, then one row of final metrics per variant.
  [[nodiscard]] std::string to_text() const;
};

/// Trains every variant independently on the same data; a failing variant
/// records its error and the others still run.
ExperimentResult run_experiment(const std::vector<Variant>& variants, const Dataset& data,
                                const EpochCallback& on_epoch = {});

}  // namespace posekit

#endif  // POSEKIT_TRAINER_HPP
