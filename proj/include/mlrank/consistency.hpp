#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "mlrank/data.hpp"

namespace mlrank {

/// P(label u present) per label, by pass-through (independent mode) or
/// exact subset enumeration (joint mode).
std::vector<double> marginals(const LabelDistribution& dist);

/// beta(u, v) = P(u in Y, v not in Y), exact. Diagonal is zero/unused.
/// Independent mode: p_u * (1 - p_v); joint mode: subset enumeration.
Eigen::MatrixXd pair_probs(const LabelDistribution& dist);

struct RiskEval {
  double value = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hessian;  // symmetric PSD (the risk is convex)
};

/// Conditional surrogate risk of a score vector under exact pair
/// probabilities: sum over ordered pairs u != v of
/// beta(u, v) * exp(-(f_u - f_v) / 2), with analytic gradient and Hessian.
/// Translation-invariant in f.
RiskEval risk(const Eigen::VectorXd& f, const Eigen::MatrixXd& beta);

struct RiskMinimizer {
  Eigen::VectorXd f_star;
  bool converged = false;
  double grad_norm = 0;  // infinity norm of the gauge-projected gradient
  int iterations = 0;
};

/// Damped Newton descent (Armijo backtracking, gradient fallback) on the
/// convex risk, under the gauge fix sum(f) = 0 (removing the translation
/// degeneracy). Converged when the projected gradient infinity-norm drops
/// to `tol`; plain gradient steps stall near 1e-8 in double precision,
/// Newton steps do not.
RiskMinimizer minimize_risk(const Eigen::MatrixXd& beta, double tol,
                            int max_iters);

struct PairCheck {
  int u = 0;
  int v = 0;
  double log_odds = 0;    // log(beta(u,v) / beta(v,u))
  double residual = 0;    // |(f*_u - f*_v) - log_odds|
  bool order_agrees = false;
  bool skipped = false;   // a zero beta made the log-odds undefined
};

struct RankConsistencyReport {
  bool pass = false;
  bool converged = false;
  double max_residual = 0;
  bool all_orders_agree = false;
  std::vector<PairCheck> pairs;                 // all ordered pairs u != v
  std::vector<std::pair<int, int>> excluded;    // pairs skipped (zero beta)
  Eigen::VectorXd f_star;
  std::vector<double> marginal;
  /// Independent mode only: max_u |f*_u - log p_u - c| with c the mean
  /// offset. Reported for analysis; not part of `pass` (the pairwise
  /// log-odds identity, which is what the minimizer provably satisfies,
  /// generally differs from this absolute log-marginal form).
  std::optional<double> log_marginal_residual;
};

/// Minimizes the risk for `dist` and checks, for every ordered pair, that
///   (a) f*_u - f*_v matches log(beta(u,v)/beta(v,u)) within tol, and
///   (b) sign(f*_u - f*_v) agrees with sign(P(u) - P(v)), ties within tol.
/// pass = converged and (a) holds for all non-excluded pairs and (b) holds
/// everywhere. Pairs with a zero beta on either side are excluded from (a)
/// and listed.
RankConsistencyReport verify_rank_consistency(const LabelDistribution& dist,
                                              double tol, double opt_tol = 1e-8,
                                              int max_iters = 200000);

}  // namespace mlrank
