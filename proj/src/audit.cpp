#include "posekit/audit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "posekit/data.hpp"
#include "posekit/linalg.hpp"
#include "posekit/metrics.hpp"
#include "posekit/random.hpp"
#include "posekit/skeleton.hpp"
#include "posekit/tcn.hpp"

namespace posekit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

VectorXd flatten(const PoseSequence& seq) {
  VectorXd x(static_cast<Index>(seq.size()) * kNumJoints * 3);
  for (int t = 0; t < seq.size(); ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) x(t * 51 + 3 * j + k) = seq[t](j, k);
    }
  }
  return x;
}

PoseSequence unflatten(const VectorXd& x, double fps) {
  PoseSequence seq;
  seq.fps = fps;
  for (Index t = 0; t < x.size() / 51; ++t) {
    Pose p;
    for (int j = 0; j < kNumJoints; ++j) {
      for (int k = 0; k < 3; ++k) p(j, k) = x(t * 51 + 3 * j + k);
    }
    seq.frames.push_back(p);
  }
  return seq;
}

VectorXd flatten(const std::vector<Pose>& grad) {
  PoseSequence seq;
  seq.frames = grad;
  return flatten(seq);
}

std::vector<Index> distinct_indices(Rng& rng, Index n, int count) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  const auto take = static_cast<std::size_t>(std::min<Index>(count, n));
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(all[i], all[i + rng.below(all.size() - i)]);
  }
  all.resize(take);
  return all;
}

// Random pair away from every non-smooth point of the loss: no angle within
// `margin` of 0, pi or a range-of-motion limit.
struct LossCase {
  PoseSequence pred;
  PoseSequence gt;
  SkeletonTopology topology;
};

bool smooth_enough(const PoseSequence& seq, const SkeletonTopology& topo, double margin) {
  for (const auto& pose : seq.frames) {
    const auto angles = joint_angles(pose, topo, AngleMode::kClamped);
    for (Index k = 0; k < angles.size(); ++k) {
      const auto& lim = topo.rom_limits[static_cast<std::size_t>(k)];
      const double a = angles(k);
      if (a < margin || a > std::numbers::pi - margin) return false;
      if (std::abs(a - lim.min_angle) < margin || std::abs(a - lim.max_angle) < margin) return false;
    }
  }
  return true;
}

LossCase random_case(Rng& rng, int frames) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SynthConfig synth = action_preset(canonical_actions()[rng.below(canonical_actions().size())], "S1", rng.next());
    synth.frames = frames + static_cast<int>(rng.below(40));
    synth.noise_sigma = 0.0;
    const PoseSequence base = generate_synthetic(synth);
    LossCase c;
    c.pred.fps = c.gt.fps = base.fps;
    for (int t = 0; t < frames; ++t) {
      const Pose& src = base[static_cast<int>(base.frames.size()) - frames + t];
      Pose p = src;
      Pose g = src;
      for (int j = 0; j < kNumJoints; ++j) {
        for (int k = 0; k < 3; ++k) {
          p(j, k) += rng.normal(0.0, 20.0);
          g(j, k) += rng.normal(0.0, 5.0);
        }
      }
      c.pred.frames.push_back(p);
      c.gt.frames.push_back(g);
    }
    // Tight limits around the first predicted frame keep the range-of-motion
    // hinge active on both sides.
    c.topology = standard_topology();
    const auto angles = joint_angles(c.pred[0], c.topology, AngleMode::kClamped);
    for (Index k = 0; k < angles.size(); ++k) {
      const double centre = angles(k) + rng.uniform(-0.05, 0.05);
      c.topology.rom_limits[static_cast<std::size_t>(k)] = {std::max(0.01, centre - 0.03),
                                                            std::min(std::numbers::pi - 0.01, centre + 0.03)};
    }
    if (smooth_enough(c.pred, c.topology, 1e-3)) return c;
  }
  throw NumericalError("gradient audit: could not draw a smooth random pose pair");
}

void record(AuditCheck& check, double rel, const std::string& where, double analytic, double numeric) {
  ++check.probes;
  if (rel > check.max_rel_error || check.worst.empty()) {
    check.max_rel_error = rel;
    check.worst = where;
    check.worst_analytic = analytic;
    check.worst_numeric = numeric;
  }
}

AuditCheck audit_term(const AuditConfig& config, Term term, Rng& rng, const GradientHook& hook) {
  AuditCheck check;
  check.suite = "loss:" + std::string(kTermNames[static_cast<int>(term)]);
  const LossWeights weights = LossWeights::only(term);
  for (int pair = 0; pair < config.pairs; ++pair) {
    const LossCase c = random_case(rng, config.frames);
    auto loss = [&](const VectorXd& x) {
      return constraint_loss(unflatten(x, c.pred.fps), c.gt, weights, c.topology, AngleMode::kStrict).total;
    };
    const VectorXd x = flatten(c.pred);
    VectorXd analytic =
        flatten(constraint_loss_gradient(c.pred, c.gt, weights, c.topology, AngleMode::kStrict));
    if (hook) hook(check.suite, analytic);
    VectorXd probe = x;
    for (Index i : distinct_indices(rng, x.size(), config.probes_per_pair)) {
      const double h = fd_step(config.step, x(i));
      probe(i) = x(i) + h;
      const double plus = loss(probe);
      probe(i) = x(i) - h;
      const double minus = loss(probe);
      probe(i) = x(i);
      const double numeric = (plus - minus) / (2.0 * h);
      const int frame = static_cast<int>(i / 51);
      const int joint = static_cast<int>((i % 51) / 3);
      const char axis = "xyz"[i % 3];
      record(check, relative_error(analytic(i), numeric, config.error_floor),
             check.suite + " pair " + std::to_string(pair) + " frame " + std::to_string(frame) + " joint " +
                 standard_topology().joint_names[static_cast<std::size_t>(joint)] + " " + axis,
             analytic(i), numeric);
    }
  }
  return check;
}

AuditCheck audit_model(const AuditConfig& config, Rng& rng, const GradientHook& hook) {
  AuditCheck check;
  check.suite = "model";
  ModelConfig mc;
  mc.channels = config.model_channels;
  mc.filter_widths = config.model_widths;
  mc.seed = rng.next();
  TcnModel model = build_model(mc);
  const int f = model.receptive_field();
  MatrixXd inputs(mc.in_features(), Index(config.model_windows) * f);
  for (Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.uniform(-1.0, 1.0);
  MatrixXd weights(mc.out_features(), config.model_windows);
  for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.normal();

  // Reseeding before every forward pass fixes the dropout mask, so the
  // training-mode output is a smooth function of the parameters.
  const std::uint64_t mask_seed = rng.next();
  auto objective = [&]() {
    Rng dropout(mask_seed);
    return model.forward(inputs, true, &dropout).cwiseProduct(weights).sum();
  };
  objective();
  VectorXd analytic = model.backward(weights);
  if (hook) hook(check.suite, analytic);

  VectorXd& params = model.parameters();
  for (Index i : distinct_indices(rng, params.size(), config.model_probes)) {
    const double x = params(i);
    const double h = fd_step(config.step, x);
    params(i) = x + h;
    const double plus = objective();
    params(i) = x - h;
    const double minus = objective();
    params(i) = x;
    const double numeric = (plus - minus) / (2.0 * h);
    std::string where = "model parameter " + std::to_string(i);
    for (const auto& block : model.blocks()) {
      if (i >= block.offset && i < block.offset + block.size) {
        where = "model " + block.name + "[" + std::to_string(i - block.offset) + "]";
      }
    }
    record(check, relative_error(analytic(i), numeric, config.error_floor), where, analytic(i), numeric);
  }
  return check;
}

}  // namespace

AuditReport run_gradient_audit(const AuditConfig& config, const GradientHook& hook) {
  if (config.pairs < 1 || config.frames < 3 || config.probes_per_pair < 1) {
    throw UsageError("gradient audit needs at least one pair of 3+ frames and one probe");
  }
  if (!(config.step > 0) || !(config.threshold > 0) || !(config.error_floor > 0)) {
    throw UsageError("gradient audit step, threshold and floor must be positive");
  }
  if (config.terms.empty() && !config.include_model) throw UsageError("gradient audit has nothing to check");
  const auto start = std::chrono::steady_clock::now();
  AuditReport report;
  report.threshold = config.threshold;
  for (Term term : config.terms) {
    Rng rng(derive_seed(config.seed, "audit", static_cast<std::uint64_t>(term)));
    report.checks.push_back(audit_term(config, term, rng, hook));
  }
  if (config.include_model) {
    Rng rng(derive_seed(config.seed, "audit-model"));
    report.checks.push_back(audit_model(config, rng, hook));
  }
  for (const auto& c : report.checks) {
    report.total_probes += c.probes;
    if (c.max_rel_error > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = c.max_rel_error;
      report.worst = c.worst;
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json checks_json = nlohmann::json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"suite", c.suite},
                           {"probes", c.probes},
                           {"max_rel_error", c.max_rel_error},
                           {"worst", c.worst},
                           {"worst_analytic", c.worst_analytic},
                           {"worst_numeric", c.worst_numeric}});
  }
  return {{"passed", passed()},      {"threshold", threshold}, {"max_rel_error", max_rel_error},
          {"worst", worst},          {"total_probes", total_probes}, {"checks", checks_json}};
}

std::string AuditReport::to_text() const {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-16s %7s %14s  %s\n", "suite", "probes", "max rel err", "worst coordinate");
  os << line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-16s %7d %14.3e  %s\n", c.suite.c_str(), c.probes, c.max_rel_error,
                  c.worst.c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "%s: max relative error %.3e over %d probes (threshold %.0e), worst at %s\n",
                passed() ? "PASS" : "FAIL", max_rel_error, total_probes, threshold, worst.c_str());
  os << line;
  return os.str();
}

}  // namespace posekit
