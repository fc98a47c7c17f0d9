#include "posekit/tcn.hpp"

#include <algorithm>
#include <cmath>

namespace posekit {

using Eigen::Index;
using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void ModelConfig::validate() const {
  if (channels < 1) throw UsageError("channels must be at least 1");
  if (filter_widths.empty()) throw UsageError("filter_widths must not be empty");
  for (int w : filter_widths) {
    if (w < 1 || w % 2 == 0) throw UsageError("filter widths must be odd and positive, got " + std::to_string(w));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw UsageError("dropout_rate must lie in [0, 1)");
  if (num_joints != kNumJoints) throw UsageError("num_joints must be 17");
  if (input_dims != 2 || output_dims != 3) throw UsageError("input_dims must be 2 and output_dims 3");
  if (!(output_scale > 0)) throw UsageError("output_scale must be positive");
  if (!(bn_momentum > 0 && bn_momentum <= 1)) throw UsageError("bn_momentum must lie in (0, 1]");
  if (!(bn_epsilon > 0)) throw UsageError("bn_epsilon must be positive");
  double field = 1;
  for (int w : filter_widths) field *= w;
  if (field > 1e6) throw UsageError("receptive field is unreasonably large");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"channels", c.channels},         {"filter_widths", c.filter_widths}, {"dropout_rate", c.dropout_rate},
       {"num_joints", c.num_joints},     {"input_dims", c.input_dims},       {"output_dims", c.output_dims},
       {"output_scale", c.output_scale}, {"bn_momentum", c.bn_momentum},     {"bn_epsilon", c.bn_epsilon},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("channels", c.channels);
  get("filter_widths", c.filter_widths);
  get("dropout_rate", c.dropout_rate);
  get("num_joints", c.num_joints);
  get("input_dims", c.input_dims);
  get("output_dims", c.output_dims);
  get("output_scale", c.output_scale);
  get("bn_momentum", c.bn_momentum);
  get("bn_epsilon", c.bn_epsilon);
  get("seed", c.seed);
}

int receptive_field(const ModelConfig& config) {
  int field = 1;
  for (int w : config.filter_widths) field *= w;
  return field;
}

std::vector<int> layer_dilations(const ModelConfig& config) {
  std::vector<int> out;
  int d = 1;
  for (int w : config.filter_widths) {
    out.push_back(d);
    d *= w;
  }
  return out;
}

Index parameter_count(const ModelConfig& config) {
  const Index c = config.channels;
  Index n = Index(config.in_features()) * config.filter_widths.front() * c + 2 * c;
  for (std::size_t i = 1; i < config.filter_widths.size(); ++i) {
    n += c * c * config.filter_widths[i] + 2 * c;  // dilated conv + norm
    n += c * c + 2 * c;                            // width-1 conv + norm
  }
  return n + c * config.out_features() + config.out_features();
}

TcnModel::TcnModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  field_ = posekit::receptive_field(config_);
  const int c = config_.channels;
  Index offset = 0;
  Index stat = 0;
  int layer = 0;
  auto add_unit = [&](const std::string& name, int width, int in_channels) {
    Unit u;
    u.width = width;
    u.in_channels = in_channels;
    u.layer = layer;
    u.weight = offset;
    blocks_.push_back({name + ".weight", offset, Index(c) * in_channels * width, layer});
    offset += Index(c) * in_channels * width;
    u.gamma = offset;
    blocks_.push_back({name + ".bn.gamma", offset, c, layer});
    offset += c;
    u.beta = offset;
    blocks_.push_back({name + ".bn.beta", offset, c, layer});
    offset += c;
    u.stat = stat;
    stat += c;
    units_.push_back(u);
    ++layer;
  };
  add_unit("expand", config_.filter_widths.front(), config_.in_features());
  for (std::size_t i = 1; i < config_.filter_widths.size(); ++i) {
    const std::string block = "block" + std::to_string(i);
    add_unit(block + ".dilated", config_.filter_widths[i], c);
    add_unit(block + ".pointwise", 1, c);
  }
  out_weight_ = offset;
  blocks_.push_back({"output.weight", offset, Index(config_.out_features()) * c, layer});
  offset += Index(config_.out_features()) * c;
  out_bias_ = offset;
  blocks_.push_back({"output.bias", offset, config_.out_features(), layer});
  offset += config_.out_features();
  num_layers_ = layer + 1;

  params_ = VectorXd::Zero(offset);
  running_.resize(2 * stat);
  running_.head(stat).setZero();
  running_.tail(stat).setOnes();
  frozen_.assign(static_cast<std::size_t>(num_layers_), false);
}

void TcnModel::set_frozen(int layer, bool frozen) {
  if (layer < 0 || layer >= num_layers_) throw UsageError("layer index out of range");
  frozen_[static_cast<std::size_t>(layer)] = frozen;
}

void TcnModel::check_inputs(const MatrixXd& inputs) const {
  if (inputs.rows() != config_.in_features()) {
    throw DataError("expected " + std::to_string(config_.in_features()) + " input rows, got " +
                    std::to_string(inputs.rows()));
  }
  if (inputs.cols() == 0 || inputs.cols() % field_ != 0) {
    throw DataError("expected window length " + std::to_string(field_) + " (input columns must be a multiple of it), got " +
                    std::to_string(inputs.cols()) + " columns");
  }
  if (!inputs.allFinite()) throw DataError("non-finite network input");
}

MatrixXd TcnModel::run_unit(const Unit& u, const MatrixXd& input, bool training, Rng* rng, UnitCache* cache) {
  const int c = config_.channels;
  const Map<const MatrixXd> w(params_.data() + u.weight, c, Index(u.in_channels) * u.width);
  const Map<const VectorXd> gamma(params_.data() + u.gamma, c);
  const Map<const VectorXd> beta(params_.data() + u.beta, c);
  const Index stats = running_.size() / 2;
  auto mean_run = running_.segment(u.stat, c);
  auto var_run = running_.segment(stats + u.stat, c);

  const MatrixXd z = w * input;
  const Index m = z.cols();
  VectorXd mean;
  VectorXd var;
  if (training) {
    mean = z.rowwise().mean();
    var = (z.colwise() - mean).array().square().rowwise().mean();
    const double mom = config_.bn_momentum;
    const double unbias = m > 1 ? double(m) / double(m - 1) : 1.0;
    mean_run = (1.0 - mom) * mean_run + mom * mean;
    var_run = (1.0 - mom) * var_run + (mom * unbias) * var;
  } else {
    mean = mean_run;
    var = var_run;
  }
  const VectorXd inv_std = (var.array() + config_.bn_epsilon).rsqrt();
  MatrixXd zhat = (z.colwise() - mean).array().colwise() * inv_std.array();
  MatrixXd y = (zhat.array().colwise() * gamma.array()).colwise() + beta.array();
  MatrixXd out = y.cwiseMax(0.0);
  MatrixXd mask;
  if (training && config_.dropout_rate > 0) {
    if (!rng) throw UsageError("training-mode forward with dropout needs a random generator");
    const double keep = 1.0 / (1.0 - config_.dropout_rate);
    mask.resize(out.rows(), out.cols());
    for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng->uniform() < config_.dropout_rate ? 0.0 : keep;
    out.array() *= mask.array();
  }
  if (cache) {
    cache->input = input;
    cache->zhat = std::move(zhat);
    cache->inv_std = inv_std;
    cache->y = std::move(y);
    cache->mask = std::move(mask);
  }
  return out;
}

MatrixXd TcnModel::eval_unit(const Unit& u, const MatrixXd& input) const {
  const int c = config_.channels;
  const Map<const MatrixXd> w(params_.data() + u.weight, c, Index(u.in_channels) * u.width);
  const Map<const VectorXd> gamma(params_.data() + u.gamma, c);
  const Map<const VectorXd> beta(params_.data() + u.beta, c);
  const Index stats = running_.size() / 2;
  const VectorXd mean = running_.segment(u.stat, c);
  const VectorXd scale = gamma.array() * (running_.segment(stats + u.stat, c).array() + config_.bn_epsilon).rsqrt();
  MatrixXd z = w * input;
  z = ((z.colwise() - mean).array().colwise() * scale.array()).colwise() + beta.array();
  return z.cwiseMax(0.0);
}

MatrixXd TcnModel::project(const MatrixXd& features) const {
  const Map<const MatrixXd> w(params_.data() + out_weight_, config_.out_features(), config_.channels);
  const Map<const VectorXd> b(params_.data() + out_bias_, config_.out_features());
  return config_.output_scale * ((w * features).colwise() + b);
}

MatrixXd TcnModel::forward(const MatrixXd& inputs, bool training, Rng* dropout_rng) {
  check_inputs(inputs);
  cache_ = {};
  cache_.training = training;
  cache_.windows = inputs.cols() / field_;
  cache_.units.resize(units_.size());
  const int c = config_.channels;

  const Unit& first = units_.front();
  MatrixXd a = run_unit(first, Map<const MatrixXd>(inputs.data(), Index(first.in_channels) * first.width,
                                                   inputs.cols() / first.width),
                        training, dropout_rng, &cache_.units.front());
  for (std::size_t k = 1; k < units_.size(); k += 2) {
    const Unit& dilated = units_[k];
    const Map<const MatrixXd> view(a.data(), Index(c) * dilated.width, a.cols() / dilated.width);
    const MatrixXd residual = view.middleRows(Index(c) * (dilated.width / 2), c);
    const MatrixXd h = run_unit(dilated, view, training, dropout_rng, &cache_.units[k]);
    a = residual + run_unit(units_[k + 1], h, training, dropout_rng, &cache_.units[k + 1]);
  }
  cache_.final_input = a;
  cache_.valid = true;
  return project(a);
}

MatrixXd TcnModel::predict(const MatrixXd& inputs) const {
  check_inputs(inputs);
  const int c = config_.channels;
  const Unit& first = units_.front();
  MatrixXd a = eval_unit(
      first, Map<const MatrixXd>(inputs.data(), Index(first.in_channels) * first.width, inputs.cols() / first.width));
  for (std::size_t k = 1; k < units_.size(); k += 2) {
    const Unit& dilated = units_[k];
    const Map<const MatrixXd> view(a.data(), Index(c) * dilated.width, a.cols() / dilated.width);
    const MatrixXd residual = view.middleRows(Index(c) * (dilated.width / 2), c);
    a = residual + eval_unit(units_[k + 1], eval_unit(dilated, view));
  }
  return project(a);
}

MatrixXd TcnModel::predict_sequence(const MatrixXd& sequence) const {
  if (sequence.rows() != config_.in_features() || sequence.cols() == 0) {
    throw DataError("predict_sequence expects a non-empty " + std::to_string(config_.in_features()) + " x T input");
  }
  if (!sequence.allFinite()) throw DataError("non-finite network input");
  const Index t_len = sequence.cols();
  const Index half = field_ / 2;
  MatrixXd padded(sequence.rows(), t_len + 2 * half);
  for (Index i = 0; i < padded.cols(); ++i) padded.col(i) = sequence.col(std::clamp<Index>(i - half, 0, t_len - 1));

  auto stack = [](const MatrixXd& x, int width, Index dilation) {
    const Index len = x.cols() - (width - 1) * dilation;
    MatrixXd s(x.rows() * width, len);
    for (int k = 0; k < width; ++k) s.middleRows(x.rows() * k, x.rows()) = x.middleCols(k * dilation, len);
    return s;
  };
  const auto dilations = layer_dilations(config_);
  MatrixXd a = eval_unit(units_.front(), stack(padded, units_.front().width, dilations.front()));
  for (std::size_t k = 1; k < units_.size(); k += 2) {
    const Unit& dilated = units_[k];
    const Index d = dilations[(k + 1) / 2];
    const Index len = a.cols() - (dilated.width - 1) * d;
    const MatrixXd residual = a.middleCols((dilated.width / 2) * d, len);
    a = residual + eval_unit(units_[k + 1], eval_unit(dilated, stack(a, dilated.width, d)));
  }
  return project(a);
}

VectorXd TcnModel::backward(const MatrixXd& grad_output) {
  if (!cache_.valid) throw UsageError("backward() called without a preceding forward()");
  if (grad_output.rows() != config_.out_features() || grad_output.cols() != cache_.windows) {
    throw UsageError("output gradient must be " + std::to_string(config_.out_features()) + " x " +
                     std::to_string(cache_.windows));
  }
  const int c = config_.channels;
  const Index stats = running_.size() / 2;
  VectorXd grad = VectorXd::Zero(params_.size());

  const MatrixXd g_out = config_.output_scale * grad_output;
  const Map<const MatrixXd> w_out(params_.data() + out_weight_, config_.out_features(), c);
  Map<MatrixXd>(grad.data() + out_weight_, config_.out_features(), c) = g_out * cache_.final_input.transpose();
  grad.segment(out_bias_, config_.out_features()) = g_out.rowwise().sum();
  MatrixXd da = w_out.transpose() * g_out;

  // Returns the gradient with respect to the unit's (viewed) input.
  auto unit_backward = [&](const Unit& u, const UnitCache& uc, MatrixXd dout) {
    if (uc.mask.size() > 0) dout.array() *= uc.mask.array();
    dout.array() *= (uc.y.array() > 0.0).cast<double>();
    const Map<const VectorXd> gamma(params_.data() + u.gamma, c);
    grad.segment(u.gamma, c) = dout.cwiseProduct(uc.zhat).rowwise().sum();
    grad.segment(u.beta, c) = dout.rowwise().sum();
    MatrixXd dzhat = dout.array().colwise() * gamma.array();
    MatrixXd dz;
    if (cache_.training) {
      const double m = static_cast<double>(dzhat.cols());
      const VectorXd sum_d = dzhat.rowwise().sum();
      const VectorXd sum_dz = dzhat.cwiseProduct(uc.zhat).rowwise().sum();
      dz = ((m * dzhat).colwise() - sum_d - (uc.zhat.array().colwise() * sum_dz.array()).matrix());
      dz.array().colwise() *= uc.inv_std.array() / m;
    } else {
      const VectorXd inv_std = (running_.segment(stats + u.stat, c).array() + config_.bn_epsilon).rsqrt();
      dz = dzhat.array().colwise() * inv_std.array();
    }
    const Index cols = Index(u.in_channels) * u.width;
    const Map<const MatrixXd> w(params_.data() + u.weight, c, cols);
    Map<MatrixXd>(grad.data() + u.weight, c, cols) = dz * uc.input.transpose();
    return MatrixXd(w.transpose() * dz);
  };

  for (std::size_t k = units_.size() - 1; k >= 1; k -= 2) {
    const Unit& dilated = units_[k - 1];
    const MatrixXd dh = unit_backward(units_[k], cache_.units[k], da);
    MatrixXd dview = unit_backward(dilated, cache_.units[k - 1], dh);
    dview.middleRows(Index(c) * (dilated.width / 2), c) += da;
    da = Map<const MatrixXd>(dview.data(), c, dview.size() / c);
  }
  unit_backward(units_.front(), cache_.units.front(), da);

  for (const auto& block : blocks_) {
    if (frozen_[static_cast<std::size_t>(block.layer)]) grad.segment(block.offset, block.size).setZero();
  }
  return grad;
}

TcnModel build_model(const ModelConfig& config) {
  TcnModel model(config);
  Rng rng(derive_seed(config.seed, "init"));
  auto& p = model.parameters();
  for (const auto& block : model.blocks()) {
    const bool gamma = block.name.ends_with(".gamma");
    const bool beta = block.name.ends_with(".beta");
    if (gamma || beta) {
      p.segment(block.offset, block.size).setConstant(gamma ? 1.0 : 0.0);
      continue;
    }
    Index fan_in = 0;
    if (block.name.starts_with("output")) {
      fan_in = config.channels;
    } else {
      fan_in = block.size / config.channels;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < block.size; ++i) p(block.offset + i) = rng.uniform(-bound, bound);
  }
  return model;
}

Pose output_pose(const MatrixXd& outputs, Index n) {
  Pose pose;
  for (int j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < 3; ++k) pose(j, k) = outputs(3 * j + k, n);
  }
  return pose;
}

std::vector<Pose> output_poses(const MatrixXd& outputs) {
  std::vector<Pose> out;
  out.reserve(static_cast<std::size_t>(outputs.cols()));
  for (Index n = 0; n < outputs.cols(); ++n) out.push_back(output_pose(outputs, n));
  return out;
}

MatrixXd poses_to_output(const std::vector<Pose>& poses) {
  MatrixXd out(3 * kNumJoints, static_cast<Index>(poses.size()));
  for (std::size_t n = 0; n < poses.size(); ++n) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) out(3 * j + k, static_cast<Index>(n)) = poses[n](j, k);
    }
  }
  return out;
}

}  // namespace posekit
