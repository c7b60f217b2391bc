#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "atomident/group_lasso.hpp"
#include "atomident/lti.hpp"

namespace atomident {

struct CandidateSearchConfig {
  int n_alpha = 60;
  int n_beta = 60;
  int multistart_count = 8;
  double local_tol = 1e-9;  // smallest pattern-search step in (alpha, beta)
  int max_local_iter = 200;
  void validate() const;
};

struct GreedyConfig {
  int p0 = 50;
  double epsilon = 1e-5;
  int l_max = 200;
  double lambda = 1.0;
  CandidateSearchConfig search;
  // Before stopping, repeat the search on a grid this many times finer.
  // 1 (default) stops on the first search.
  int confirm_factor = 1;
  std::uint64_t seed = 0;
  SolverOptions solver;
  void validate() const;
};

struct CandidateResult {
  Pole pole;
  double score = 0.0;
};

struct GreedyStep {
  int iter = 0;
  Pole pole;
  double score = 0.0;
  double objective = 0.0;
  int active_count = 0;
};

enum class Termination { converged, l_max_reached };

struct GreedyTrace {
  double initial_objective = 0.0;
  std::vector<GreedyStep> steps;
  /// Score of the last candidate examined (the rejected one on convergence).
  double final_score = 0.0;
  Termination terminated_by = Termination::converged;

  int added() const { return static_cast<int>(steps.size()); }
};

struct GreedyResult {
  SparseModel model;
  GreedyTrace trace;
  std::vector<Pole> atoms;
  GroupLassoSolution solution;
};

/// Raised when an inner group lasso solve fails to converge.
class ConvergenceError : public SolverFailure {
 public:
  ConvergenceError(const std::string& what, GreedyTrace trace)
      : SolverFailure(what), trace_(std::move(trace)) {}
  const GreedyTrace& trace() const { return trace_; }

 private:
  GreedyTrace trace_;
};

/// p0 poles with alpha ~ U[0,1) and beta ~ U[0,pi].
std::vector<Pole> init_atoms(int p0, std::uint64_t seed);

/// 2 |<phi_k, r>| = ||zeta_k^T r||_2 without forming zeta_k.
double pole_score(const Pole& pole, const Vector& u, const Vector& residual);

/// Coarse grid plus multistart pattern search for argmax_k ||zeta_k^T r||.
/// Rows that do not take part in the loss must be zero in `residual`.
/// Candidates within 1e-10 of a pole in `exclude` are skipped.
CandidateResult search_candidate(const Vector& residual, const Vector& u,
                                 const CandidateSearchConfig& cfg,
                                 std::span<const Pole> exclude = {});

/// Largest score over an n x n grid on [0, kMaxRadius] x [0, pi].
CandidateResult grid_max_score(const Vector& residual, const Vector& u,
                               int n_alpha, int n_beta);

/// Feature-generation loop for the infinite-dimensional group lasso.
/// When `rows` is non-empty the loss only uses those rows of y and zeta.
GreedyResult run_greedy(const IdentDataset& data, const GreedyConfig& cfg,
                        std::span<const Eigen::Index> rows = {});

/// Same loop starting from a caller-provided atom set.
GreedyResult run_greedy_from(const IdentDataset& data,
                             std::vector<Pole> atoms, const GreedyConfig& cfg,
                             std::span<const Eigen::Index> rows = {});

/// `iter,alpha,beta,score,objective,active_count`
void write_trace_csv(std::ostream& os, const GreedyTrace& trace);

}  // namespace atomident
