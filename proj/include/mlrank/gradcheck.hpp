#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mlrank {

/// Central finite-difference check of an analytic gradient: perturbs each
/// coordinate by +/- h and returns
///   ||analytic - numeric||_inf / max(1, ||analytic||_inf, ||numeric||_inf).
double fd_relative_error(
    const std::function<double(const Eigen::VectorXd&)>& value_at,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& analytic, double h);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  int trials = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const;
  bool pass(double tol) const { return worst() <= tol; }
};

/// Finite-difference suites over randomized instances:
///   - every score-space loss (gradient w.r.t. the score vector),
///   - both predictor architectures end-to-end (loss of the forward pass,
///     gradient w.r.t. all parameters, pre-drawn pairs held fixed),
///   - both decision-head losses (gradient w.r.t. head parameters),
///   - the conditional-risk gradient.
/// Kinked losses are checked at margin-safe points (instances are redrawn
/// when any hinge slack, score tie, or hidden pre-activation sits within
/// 1e-3 of a kink, where finite differences are meaningless).
GradCheckReport run_gradcheck(std::uint64_t seed, int trials);

}  // namespace mlrank
