#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atomident/config.hpp"
#include "atomident/greedy.hpp"
#include "atomident/lti.hpp"
#include "atomident/refine.hpp"

namespace atomident::bench {

/// What one method produced on one dataset.
struct MethodResult {
  std::string method;
  double lambda = 0.0;       // 0 for ARX
  Vector impulse;            // g(1..horizon)
  std::vector<Pole> poles;   // active poles (upper half plane)
  int model_order = 0;       // conjugates counted
  std::optional<SparseModel> model;   // absent for ARX
  std::optional<GreedyTrace> trace;   // greedy-based methods
  std::vector<int> adaptive_counts;   // AdpInfA only
  std::optional<SelectionFrequencies> frequencies;  // SS only
};

/// Seeds used by a single method call.
struct MethodSeeds {
  std::uint64_t atoms = 0;      // init_atoms / Atom baselines
  std::uint64_t stability = 0;  // subsample draws
};

/// Least-squares ARX fit; impulse and poles come from the fitted polynomials.
struct ArxModel {
  Vector a;  // y(t) = sum a_i y(t-i) + sum b_j u(t-nk-j+1)
  Vector b;
  ArxOrders orders;
  Vector impulse(int horizon) const;
  std::vector<std::complex<double>> roots() const;
};
ArxModel fit_arx(const IdentDataset& data, const ArxOrders& orders);

/// Group lasso on a fixed atom set (the discretized baselines).
GreedyResult fit_fixed_atoms(const IdentDataset& data, std::vector<Pole> atoms,
                             double lambda, const SolverOptions& solver,
                             std::span<const Eigen::Index> rows = {});

/// Runs one method at one lambda. `horizon` sets the impulse length.
MethodResult run_method(const MethodSpec& method, const IdentDataset& data,
                        double lambda, const MethodSeeds& seeds,
                        const ExperimentConfig& cfg, int horizon);

/// Estimation / validation row split(s) for the configured scheme.
struct CvFold {
  std::vector<Eigen::Index> estimation;
  std::vector<Eigen::Index> validation;
};
std::vector<CvFold> cv_folds(Eigen::Index n, const CrossValidationConfig& cv);

/// Summed squared simulation error on validation rows for every grid value.
/// A fit that fails to converge scores +inf.
std::vector<double> cv_scores(const MethodSpec& method, const IdentDataset& data,
                              std::span<const double> grid,
                              const MethodSeeds& seeds,
                              const ExperimentConfig& cfg);

/// Grid value with the smallest score; ties go to the larger lambda.
double select_lambda_cv(const MethodSpec& method, const IdentDataset& data,
                        std::span<const double> grid, const MethodSeeds& seeds,
                        const ExperimentConfig& cfg);

struct MethodRun {
  bool ok = false;
  std::string error;
  double lambda = 0.0;
  double fit = 0.0;  // W
  int model_order = 0;
  int active_count = 0;
  int greedy_added = -1;  // -1 when no greedy loop ran
  std::vector<Pole> poles;
  Vector impulse;
  std::vector<int> adaptive_counts;
};

struct SweepPoint {
  double lambda = 0.0;
  int added = 0;  // -1 if the fit failed
  Termination terminated_by = Termination::converged;
};

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  std::map<std::string, MethodRun> methods;
  std::optional<GreedyTrace> trace;  // InfA's greedy trace
  std::vector<SweepPoint> sweep;
};

struct MethodAggregate {
  std::string method;
  int runs_ok = 0;
  int runs_failed = 0;
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  double median_fit = 0.0;
  double median_order = 0.0;
};

struct BenchReport {
  nlohmann::json config;
  std::vector<std::string> methods;
  Vector g_true;  // reference over the evaluation horizon
  std::vector<RunRecord> runs;
  std::vector<MethodAggregate> aggregates;
  double seconds = 0.0;  // wall time; kept out of report.json
};

/// Raised when more than 10% of the runs of some method fail.
class StudyAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// True impulse response over `horizon` samples, H2-normalized on a long
/// horizon when the config asks for it.
Vector true_impulse(const ExperimentConfig& cfg, int horizon);

/// One complete run (dataset, lambda selection, every method).
RunRecord run_single(const ExperimentConfig& cfg, int run);

BenchReport run_monte_carlo(const ExperimentConfig& cfg);

/// Recomputes aggregates from the per-run records.
std::vector<MethodAggregate> aggregate(const std::vector<std::string>& methods,
                                       const Vector& g_true,
                                       const std::vector<RunRecord>& runs);

/// Evaluation lags 1..N-1 of a horizon-N response (drops lag 0).
Vector evaluation_lags(const Vector& g);

double median(std::vector<double> v);

}  // namespace atomident::bench
