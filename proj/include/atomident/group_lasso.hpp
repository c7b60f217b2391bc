#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "atomident/lti.hpp"

namespace atomident {

/// min_G ||y - sum_i Z_i g_i||^2 + 2 lambda sum_i w_i ||g_i||_2 over groups of
/// two coefficients.
struct GroupLassoProblem {
  Vector y;
  std::vector<FeatureMatrix> features;
  double lambda = 1.0;
  /// Per-group penalty multipliers; empty means all ones.
  Vector weights;

  std::size_t groups() const { return features.size(); }
  double weight(std::size_t i) const {
    return weights.size() == 0 ? 1.0 : weights(static_cast<Eigen::Index>(i));
  }
  /// Throws InvalidInput on shape mismatch, lambda <= 0 or bad weights.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-8;      // on the KKT violation
  long max_iter = 100000;  // coordinate sweeps
  bool record_objective = false;
};

struct GroupLassoSolution {
  std::vector<GroupCoefficients> gammas;
  double objective = 0.0;
  Vector residual;
  double kkt_violation = 0.0;
  long iterations = 0;
  bool converged = false;
  /// Objective after every sweep when SolverOptions::record_objective is set.
  std::vector<double> objective_history;
};

/// Raised by callers that cannot continue after a non-converged solve.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KktReport {
  double max_violation = 0.0;
  Vector per_group;
};

/// Exact cyclic block coordinate descent. On hitting max_iter the best
/// iterate is returned with converged == false.
GroupLassoSolution solve(const GroupLassoProblem& problem,
                         const SolverOptions& options = {},
                         std::span<const GroupCoefficients> warm_start = {});

KktReport kkt_violation(const GroupLassoProblem& problem,
                        std::span<const GroupCoefficients> gammas);

double objective_value(const GroupLassoProblem& problem,
                       std::span<const GroupCoefficients> gammas);

Vector residual_of(const GroupLassoProblem& problem,
                   std::span<const GroupCoefficients> gammas);

/// ||Z^T r||_2.
double violation_score(const FeatureMatrix& zeta, const Vector& residual);
double violation_score(const AtomicFeature& feature, const Vector& residual);

/// Minimizer of ||r - Z g||^2 + 2 penalty ||g||_2 for one group, given
/// b = Z^T r and the Gram Z^T Z. Exposed for testing.
GroupCoefficients solve_block(const Eigen::Matrix2d& gram,
                              const Eigen::Vector2d& b, double penalty);

}  // namespace atomident
