#ifndef POSEKIT_AUDIT_HPP
#define POSEKIT_AUDIT_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "posekit/losses.hpp"

namespace posekit {

struct AuditConfig {
  std::vector<Term> terms{Term::kTheta,        Term::kBoneLength,   Term::kSymmetry,           Term::kRom,
                          Term::kVelocity,     Term::kAcceleration, Term::kAngularAcceleration};
  int pairs = 4;            // random sequence pairs per term
  int frames = 4;           // frames per sequence
  int probes_per_pair = 8;  // coordinates compared per pair
  bool include_model = true;
  int model_channels = 4;
  std::vector<int> model_widths{3, 3};
  int model_windows = 4;
  int model_probes = 200;
  double step = 1e-5;        // relative central-difference step
  double threshold = 1e-4;   // maximum admissible relative error
  double error_floor = 1e-7; // denominator floor for near-zero gradients
  std::uint64_t seed = 0;
};

struct AuditCheck {
  std::string suite;  // "loss:<term>" or "model"
  int probes = 0;
  double max_rel_error = 0.0;
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  double max_rel_error = 0.0;
  std::string worst;
  int total_probes = 0;
  double threshold = 0.0;
  double seconds = 0.0;

  [[nodiscard]] bool passed() const { return max_rel_error < threshold; }
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_text() const;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Called with the suite name and the analytic gradient before it is compared
/// against finite differences; lets tests inject faults.
using GradientHook = std::function<void(const std::string& suite, Eigen::VectorXd& analytic)>;

/// Compares analytic gradients of each selected loss term (on random pose
/// sequence pairs) and of a small network (against a random linear functional
/// of its output) with central finite differences at randomly probed
/// coordinates.
AuditReport run_gradient_audit(const AuditConfig& config, const GradientHook& hook = {});

}  // namespace posekit

#endif  // POSEKIT_AUDIT_HPP
