#include "posekit/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "posekit/parallel.hpp"
#include "posekit/random.hpp"

namespace posekit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void TrainConfig::validate() const {
  if (!(initial_lr >= 0) || !std::isfinite(initial_lr)) throw UsageError("initial_lr must be finite and non-negative");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw UsageError("lr_decay must lie in (0, 1]");
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (group_length < 3) throw UsageError("group_length must be at least 3 (acceleration terms need 3 frames)");
  if (window_stride < 1) throw UsageError("window_stride must be at least 1");
  if (!(position_weight >= 0)) throw UsageError("position_weight must be non-negative");
  for (double w : loss_weights.values) {
    if (!(w >= 0) || !std::isfinite(w)) throw UsageError("loss weights must be finite and non-negative");
  }
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_epsilon > 0)) {
    throw UsageError("invalid Adam hyperparameters");
  }
  if (eval_every < 1) throw UsageError("eval_every must be at least 1");
  if (workers < 1) throw UsageError("workers must be at least 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"initial_lr", c.initial_lr},
       {"lr_decay", c.lr_decay},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"group_length", c.group_length},
       {"window_stride", c.window_stride},
       {"position_weight", c.position_weight},
       {"loss_weights", c.loss_weights},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_epsilon", c.adam_epsilon},
       {"seed", c.seed},
       {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("initial_lr", c.initial_lr);
  get("lr_decay", c.lr_decay);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("group_length", c.group_length);
  get("window_stride", c.window_stride);
  get("position_weight", c.position_weight);
  get("loss_weights", c.loss_weights);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_epsilon", c.adam_epsilon);
  get("seed", c.seed);
  get("eval_every", c.eval_every);
  get("workers", c.workers);
}

double lr_at(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw UsageError("epoch must be non-negative");
  return config.initial_lr * std::pow(config.lr_decay, epoch);
}

// ---------------------------------------------------------------------------
// Log

bool EpochRecord::operator==(const EpochRecord& o) const {
  return epoch == o.epoch && lr == o.lr && position_loss == o.position_loss && constraint.terms == o.constraint.terms &&
         constraint.weights == o.constraint.weights && constraint.total == o.constraint.total &&
         total_loss == o.total_loss && validation == o.validation && wall_seconds == o.wall_seconds;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"lr", r.lr},
       {"position_loss", r.position_loss},
       {"constraint", r.constraint},
       {"total_loss", r.total_loss}};
  j["validation"] = r.validation ? nlohmann::json(*r.validation) : nlohmann::json(nullptr);
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.lr = j.at("lr").get<double>();
  r.position_loss = j.at("position_loss").get<double>();
  r.constraint = j.at("constraint").get<LossBreakdown>();
  r.total_loss = j.at("total_loss").get<double>();
  r.validation.reset();
  if (!j.at("validation").is_null()) r.validation = j.at("validation").get<MetricValues>();
  r.wall_seconds.reset();
  if (j.contains("wall_seconds")) r.wall_seconds = j.at("wall_seconds").get<double>();
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

std::string TrainLog::curve_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%6s %12s %14s %14s %14s %12s\n", "epoch", "lr", "position", "constraint", "total",
                "val_mpjpe");
  os << line;
  for (const auto& r : records) {
    char val[32] = "-";
    if (r.validation) std::snprintf(val, sizeof val, "%.4f", r.validation->mpjpe);
    std::snprintf(line, sizeof line, "%6d %12.6g %14.6g %14.6g %14.6g %12s\n", r.epoch, r.lr, r.position_loss,
                  r.constraint.total, r.total_loss, val);
    os << line;
  }
  return os.str();
}

TrainerState make_trainer_state(const ModelConfig& model_config, const TrainConfig& config) {
  config.validate();
  TrainerState state{build_model(model_config), config, {}, 0, {}};
  state.adam.m = VectorXd::Zero(state.model.num_parameters());
  state.adam.v = VectorXd::Zero(state.model.num_parameters());
  return state;
}

// ---------------------------------------------------------------------------
// Loss

BatchLoss batch_loss(const MatrixXd& outputs, const Batch& batch, const TrainConfig& config,
                     const SkeletonTopology& topology) {
  const Index n = outputs.cols();
  if (n != batch.size()) throw UsageError("batch_loss: output and target counts differ");
  BatchLoss out;
  out.grad_output = MatrixXd::Zero(outputs.rows(), n);
  const MatrixXd targets = poses_to_output(batch.targets);

  const double denom = static_cast<double>(n) * kNumJoints;
  const MatrixXd diff = outputs - targets;
  double sq = 0.0;
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r < diff.rows(); ++r) sq += diff(r, c) * diff(r, c);
  }
  out.position = config.position_weight * sq / denom;
  if (config.position_weight != 0) out.grad_output = (2.0 * config.position_weight / denom) * diff;

  std::vector<const Group*> groups;
  for (const auto& g : batch.groups) {
    if (g.length >= 3) groups.push_back(&g);
  }
  out.constraint.weights = config.loss_weights.values;
  if (!groups.empty()) {
    const bool needs_grad = std::any_of(config.loss_weights.values.begin(), config.loss_weights.values.end(),
                                        [](double w) { return w != 0; });
    const double share = 1.0 / static_cast<double>(groups.size());
    for (const Group* g : groups) {
      PoseSequence pred;
      PoseSequence gt;
      pred.fps = gt.fps = batch.fps;
      for (int i = 0; i < g->length; ++i) {
        pred.frames.push_back(output_pose(outputs, g->begin + i));
        gt.frames.push_back(batch.targets[static_cast<std::size_t>(g->begin + i)]);
      }
      LossBreakdown part;
      if (needs_grad) {
        auto lg = constraint_loss_and_gradient(pred, gt, config.loss_weights, topology, AngleMode::kClamped);
        part = lg.loss;
        for (int i = 0; i < g->length; ++i) {
          const Pose& gp = lg.gradient[static_cast<std::size_t>(i)];
          for (int j = 0; j < kNumJoints; ++j) {
            for (int k = 0; k < 3; ++k) out.grad_output(3 * j + k, g->begin + i) += share * gp(j, k);
          }
        }
      } else {
        part = constraint_loss(pred, gt, config.loss_weights, topology, AngleMode::kClamped);
      }
      for (int t = 0; t < kNumTerms; ++t) out.constraint.terms[t] += share * part.terms[t];
      out.constraint.total += share * part.total;
    }
  }
  out.total = out.position + out.constraint.total;
  return out;
}

// ---------------------------------------------------------------------------
// Epochs

std::vector<std::vector<int>> epoch_batches(const WindowSet& windows, const TrainConfig& config, int epoch) {
  std::vector<std::vector<int>> chunks;
  std::vector<int> current;
  const WindowRef* prev = nullptr;
  auto flush = [&] {
    if (current.size() >= 3) chunks.push_back(current);
    current.clear();
  };
  for (int i = 0; i < static_cast<int>(windows.windows.size()); ++i) {
    const WindowRef& w = windows.windows[static_cast<std::size_t>(i)];
    if (prev && (prev->clip != w.clip || w.center != prev->center + windows.stride)) flush();
    current.push_back(i);
    if (static_cast<int>(current.size()) == config.group_length) flush();
    prev = &w;
  }
  flush();
  if (chunks.empty()) throw DataError("no training group of at least 3 consecutive windows");

  Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = chunks.size() - 1; i > 0; --i) {
    std::swap(chunks[i], chunks[rng.below(i + 1)]);
  }
  const std::size_t per_batch = static_cast<std::size_t>(std::max(1, config.batch_size / config.group_length));
  std::vector<std::vector<int>> batches;
  for (std::size_t c = 0; c < chunks.size(); c += per_batch) {
    std::vector<int> batch;
    for (std::size_t k = c; k < std::min(chunks.size(), c + per_batch); ++k) {
      batch.insert(batch.end(), chunks[k].begin(), chunks[k].end());
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace {

void adam_step(Eigen::VectorXd& params, AdamState& adam, const VectorXd& grad, const TrainConfig& c, double lr) {
  ++adam.step;
  adam.m = c.adam_beta1 * adam.m + (1.0 - c.adam_beta1) * grad;
  adam.v = c.adam_beta2 * adam.v + (1.0 - c.adam_beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(adam.step));
  params.array() -= lr * (adam.m.array() / bc1) / ((adam.v.array() / bc2).sqrt() + c.adam_epsilon);
}

}  // namespace

EpochRecord train_epoch(TcnModel& model, AdamState& adam, std::span<const Clip> train, const TrainConfig& config,
                        int epoch) {
  config.validate();
  if (train.empty()) throw DataError("training set is empty");
  if (adam.m.size() != model.num_parameters() || adam.v.size() != model.num_parameters()) {
    throw UsageError("optimizer state does not match the model");
  }
  const WindowSet windows = make_windows(train, model.receptive_field(), config.window_stride, PadMode::kValid);
  const auto batches = epoch_batches(windows, config, epoch);
  Rng dropout(derive_seed(config.seed, "dropout", static_cast<std::uint64_t>(epoch)));
  const double lr = lr_at(config, epoch);

  EpochRecord rec;
  rec.epoch = epoch;
  rec.lr = lr;
  rec.constraint.weights = config.loss_weights.values;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch batch = assemble_batch(train, windows, batches[b]);
    const MatrixXd out = model.forward(batch.inputs, true, &dropout);
    const BatchLoss loss = batch_loss(out, batch, config);
    if (!std::isfinite(loss.total) || !loss.grad_output.allFinite()) {
      throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": non-finite loss");
    }
    const VectorXd grad = model.backward(loss.grad_output);
    if (!grad.allFinite()) {
      throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": non-finite gradient");
    }
    adam_step(model.parameters(), adam, grad, config, lr);
    rec.position_loss += loss.position;
    for (int t = 0; t < kNumTerms; ++t) rec.constraint.terms[t] += loss.constraint.terms[t];
    rec.constraint.total += loss.constraint.total;
    rec.total_loss += loss.total;
  }
  model.clear_cache();
  const double count = static_cast<double>(batches.size());
  rec.position_loss /= count;
  for (auto& t : rec.constraint.terms) t /= count;
  rec.constraint.total /= count;
  rec.total_loss /= count;
  return rec;
}

std::vector<PoseSequence> predict_clips(const TcnModel& model, std::span<const Clip> clips, int workers) {
  std::vector<PoseSequence> out(clips.size());
  parallel_for(static_cast<int>(clips.size()), workers, [&](int i) {
    const Clip& clip = clips[static_cast<std::size_t>(i)];
    auto& seq = out[static_cast<std::size_t>(i)];
    seq.fps = clip.targets.fps;
    seq.frames = output_poses(model.predict_sequence(clip.inputs));
  });
  return out;
}

MetricReport validate_model(const TcnModel& model, std::span<const Clip> clips, int workers) {
  if (clips.empty()) throw DataError("validation set is empty");
  std::vector<PoseSequence> gt;
  std::vector<std::string> labels;
  for (const auto& clip : clips) {
    gt.push_back(clip.targets);
    labels.push_back(clip.action);
  }
  return evaluate(predict_clips(model, clips, workers), gt, labels, workers);
}

void train(TrainerState& state, const Dataset& data, const EpochCallback& on_epoch, bool record_time) {
  state.config.validate();
  if (data.train.empty()) throw DataError("dataset has no training sequences");
  for (int epoch = state.next_epoch; epoch < state.config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec = train_epoch(state.model, state.adam, data.train, state.config, epoch);
    const bool last = epoch + 1 == state.config.epochs;
    if (!data.test.empty() && (last || (epoch + 1) % state.config.eval_every == 0)) {
      rec.validation = validate_model(state.model, data.test, state.config.workers).overall;
    }
    if (record_time) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    state.log.records.push_back(rec);
    state.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(rec, state);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'P', 'K', 'C', 'K'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_block(std::string& out, const VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(v(i)));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::string source)
      : bytes_(bytes), end_(end), source_(std::move(source)) {}

  std::uint64_t u64() { return read(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  VectorXd block(Index expected, const char* what) {
    const std::uint64_t n = u64();
    if (n != static_cast<std::uint64_t>(expected)) {
      throw DataError(source_ + ": " + what + " block has " + std::to_string(n) + " values, expected " +
                      std::to_string(expected));
    }
    VectorXd v(expected);
    for (Index i = 0; i < expected; ++i) v(i) = std::bit_cast<double>(u64());
    return v;
  }

  [[nodiscard]] std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw DataError(source_ + ": truncated checkpoint");
  }

  std::uint64_t read(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace

std::string checkpoint_bytes(const TrainerState& state) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : state.log.records) records.push_back(r);
  const nlohmann::json header = {{"model", state.model.config()},
                                 {"train", state.config},
                                 {"next_epoch", state.next_epoch},
                                 {"adam_step", state.adam.step},
                                 {"log", records}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  put_u64(out, 4);
  put_block(out, state.model.parameters());
  put_block(out, state.model.running_stats());
  put_block(out, state.adam.m);
  put_block(out, state.adam.v);
  put_u64(out, fnv1a64(out));
  return out;
}

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(state);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

TrainerState parse_checkpoint(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(source + ": not a posekit checkpoint (bad magic bytes)");
  }
  if (bytes.size() < 12) throw DataError(source + ": truncated checkpoint");
  Reader head(bytes, bytes.size(), source);
  head.raw(4);
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 4 + 4 + 8 + 8) throw DataError(source + ": truncated checkpoint");
  const std::size_t body_end = bytes.size() - 8;
  Reader tail(bytes, bytes.size(), source);
  tail.raw(body_end);
  const std::uint64_t stored = tail.u64();

  Reader r(bytes, body_end, source);
  r.raw(8);
  const std::uint64_t header_len = r.u64();
  if (header_len > body_end) throw DataError(source + ": truncated checkpoint");
  const std::string text = r.raw(static_cast<std::size_t>(header_len));
  if (fnv1a64(std::string_view(bytes).substr(0, body_end)) != stored) {
    throw DataError(source + ": checkpoint digest mismatch (file is corrupted or truncated)");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed checkpoint header (" + e.what() + ")");
  }
  ModelConfig model_config;
  TrainConfig train_config;
  TrainLog log;
  int next_epoch = 0;
  long adam_step = 0;
  try {
    model_config = header.at("model").get<ModelConfig>();
    train_config = header.at("train").get<TrainConfig>();
    next_epoch = header.at("next_epoch").get<int>();
    adam_step = header.at("adam_step").get<long>();
    for (const auto& rec : header.at("log")) log.records.push_back(rec.get<EpochRecord>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed checkpoint header (" + e.what() + ")");
  }
  TrainerState state{TcnModel(model_config), train_config, {}, next_epoch, std::move(log)};
  if (r.u64() != 4) throw DataError(source + ": unexpected checkpoint block count");
  const Index n = state.model.num_parameters();
  state.model.parameters() = r.block(n, "parameter");
  state.model.running_stats() = r.block(state.model.running_stats().size(), "running statistics");
  state.adam.m = r.block(n, "first moment");
  state.adam.v = r.block(n, "second moment");
  state.adam.step = adam_step;
  if (r.pos() != body_end) throw DataError(source + ": trailing bytes in checkpoint");
  return state;
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint(ss.str(), path.string());
}

void require_compatible(const ModelConfig& checkpoint, const ModelConfig& requested) {
  if (checkpoint == requested) return;
  throw DataError("checkpoint model configuration " + nlohmann::json(checkpoint).dump() +
                  " does not match the requested " + nlohmann::json(requested).dump());
}

// ---------------------------------------------------------------------------
// Experiments

Variant make_variant(const std::string& name, const ModelConfig& model, TrainConfig train) {
  if (name == "baseline") {
    train.loss_weights = LossWeights::zeros();
  } else if (name == "joint-aware") {
    train.loss_weights = LossWeights::unit();
  } else {
    throw UsageError("unknown variant '" + name + "' (expected baseline or joint-aware)");
  }
  return {name, model, train};
}

ExperimentResult run_experiment(const std::vector<Variant>& variants, const Dataset& data,
                                const EpochCallback& on_epoch) {
  if (variants.empty()) throw UsageError("run_experiment needs at least one variant");
  if (data.test.empty()) throw DataError("experiment needs test sequences");
  ExperimentResult result;
  for (const auto& v : variants) {
    VariantResult vr;
    vr.name = v.name;
    try {
      TrainerState state = make_trainer_state(v.model, v.train);
      train(state, data, on_epoch);
      vr.log = state.log;
      vr.report = validate_model(state.model, data.test, v.train.workers);
    } catch (const Error& e) {
      vr.error = e.what();
    }
    result.variants.push_back(std::move(vr));
  }
  return result;
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : variants) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& r : v.log.records) {
      curve.push_back({{"epoch", r.epoch},
                       {"mpjpe", r.validation ? nlohmann::json(r.validation->mpjpe) : nlohmann::json(nullptr)}});
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : v.log.records) records.push_back(r);
    out.push_back({{"name", v.name},
                   {"curve", curve},
                   {"log", records},
                   {"report", v.report ? nlohmann::json(*v.report) : nlohmann::json(nullptr)},
                   {"error", v.error}});
  }
  return {{"variants", out}};
}

std::string ExperimentResult::to_text() const {
  std::ostringstream os;
  char cell[64];
  std::size_t epochs = 0;
  for (const auto& v : variants) epochs = std::max(epochs, v.log.records.size());
  os << "Protocol #1 error (mm) per epoch\n";
  std::snprintf(cell, sizeof cell, "%6s", "epoch");
  os << cell;
  for (const auto& v : variants) {
    std::snprintf(cell, sizeof cell, " %14s", v.name.c_str());
    os << cell;
  }
  os << '\n';
  for (std::size_t e = 0; e < epochs; ++e) {
    std::snprintf(cell, sizeof cell, "%6zu", e + 1);
    os << cell;
    for (const auto& v : variants) {
      if (e < v.log.records.size() && v.log.records[e].validation) {
        std::snprintf(cell, sizeof cell, " %14.4f", v.log.records[e].validation->mpjpe);
      } else {
        std::snprintf(cell, sizeof cell, " %14s", "-");
      }
      os << cell;
    }
    os << '\n';
  }
  os << "\nFinal metrics\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %10s %10s\n", "Variant", "MPJPE", "P-MPJPE", "N-MPJPE",
                "MPJVE", "MPJAE");
  os << line;
  for (const auto& v : variants) {
    if (v.report) {
      const auto& m = v.report->overall;
      std::snprintf(line, sizeof line, "%-14s %10.4f %10.4f %10.4f %10.4f %10.4f\n", v.name.c_str(), m.mpjpe,
                    m.p_mpjpe, m.n_mpjpe, m.mpjve, m.mpjae);
    } else {
      std::snprintf(line, sizeof line, "%-14s failed: %s\n", v.name.c_str(), v.error.c_str());
    }
    os << line;
  }
  return os.str();
}

}  // namespace posekit
