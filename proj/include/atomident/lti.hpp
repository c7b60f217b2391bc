#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace atomident {

using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
/// N x 2 real response matrix of one atom.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;
/// [Re c_k, Im c_k] for one atom.
using GroupCoefficients = Eigen::Vector2d;

/// Thrown on malformed arguments (non-finite samples, bad shapes, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by fit_metric when the reference response is constant.
class DegenerateReference : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Groups with ||gamma||_2 at or below this count as inactive.
inline constexpr double kActivityThreshold = 1e-8;

/// Largest admissible pole radius used by searches and random draws.
inline constexpr double kMaxRadius = 1.0 - 1e-9;

/// Samples used for the benchmark impulse response. The slowest mode has
/// modulus 0.976; the normalized tail energy past 600 samples is ~2e-13.
inline constexpr int kBenchmarkHorizon = 600;

/// Stable pole k = alpha * exp(j beta) in the closed upper half of the unit
/// disk.
class Pole {
 public:
  Pole() = default;
  /// Throws InvalidInput unless 0 <= alpha < 1 and 0 <= beta <= pi.
  Pole(double alpha, double beta);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// Exactly real when beta is 0 or pi.
  std::complex<double> value() const;
  bool is_real() const;
  /// 1 for a real pole, 2 when the conjugate is implied.
  int order() const { return is_real() ? 1 : 2; }

  friend bool operator==(const Pole&, const Pole&) = default;

 private:
  double alpha_ = 0.0;
  double beta_ = 0.0;
};

struct AtomicFeature {
  Pole pole;
  FeatureMatrix zeta;
};

struct ModelTerm {
  Pole pole;
  GroupCoefficients gamma = GroupCoefficients::Zero();
};

struct SolverStats {
  long iterations = 0;
  double objective = 0.0;
};

/// Sum of atoms plus their implicit conjugates.
class SparseModel {
 public:
  SparseModel() = default;
  /// Throws InvalidInput on duplicate poles or non-finite coefficients.
  SparseModel(std::vector<ModelTerm> terms, double lambda = 0.0,
              SolverStats stats = {});
  SparseModel(std::span<const Pole> poles,
              std::span<const GroupCoefficients> gammas, double lambda = 0.0,
              SolverStats stats = {});

  const std::vector<ModelTerm>& terms() const { return terms_; }
  double lambda() const { return lambda_; }
  const SolverStats& stats() const { return stats_; }
  bool empty() const { return terms_.empty(); }

  std::vector<ModelTerm> active_terms(
      double threshold = kActivityThreshold) const;
  /// Number of estimated poles, conjugates included.
  int model_order(double threshold = kActivityThreshold) const;
  int active_count(double threshold = kActivityThreshold) const;

 private:
  std::vector<ModelTerm> terms_;
  double lambda_ = 0.0;
  SolverStats stats_;
};

struct IdentDataset {
  Vector u;
  Vector y;
  double sigma2 = 0.0;  // annotation only

  Eigen::Index size() const { return u.size(); }
  /// Throws InvalidInput unless u and y have equal, positive length.
  void validate() const;
};

/// Response of (1 - |k|^2) / (q - k) to u from a zero initial state.
ComplexVector atom_response(const Pole& pole, const Vector& u);

AtomicFeature build_feature(const Pole& pole, const Vector& u);

/// Keeps only the listed rows of a feature (subsampled losses).
FeatureMatrix select_rows(const FeatureMatrix& zeta,
                          std::span<const Eigen::Index> rows);
Vector select_rows(const Vector& v, std::span<const Eigen::Index> rows);

/// g(1..horizon) where g(t) is the lag t-1 coefficient.
Vector model_impulse_response(const SparseModel& model, int horizon);

/// Impulse response of num(q)/den(q), coefficients in descending powers of q.
Vector transfer_function_impulse(std::span<const double> num,
                                 std::span<const double> den, int horizon);

inline const std::vector<double> kBenchmarkNumerator{0.10884, 0.19513};
inline const std::vector<double> kBenchmarkDenominator{
    1.0, -1.41833, 1.58939, -1.31608, 0.88642};

/// Fourth-order benchmark system scaled to unit H2 norm over `horizon`.
Vector benchmark_system(int horizon = kBenchmarkHorizon);

/// Scales g so that sum g(t)^2 = 1.
Vector normalize_h2(const Vector& g);

/// y(t) = sum_{s<=t} g(s) u(t-s+1), truncated to u.size() samples.
Vector convolve_truncated(const Vector& g, const Vector& u);

/// Output of g driven by a given input plus N(0, sigma2) noise.
IdentDataset simulate_output(const Vector& g_true, const Vector& u,
                             double sigma2, std::uint64_t seed);

/// Unit Gaussian input of length n, then simulate_output.
IdentDataset generate_dataset(const Vector& g_true, int n, double sigma2,
                              std::uint64_t seed);

/// Impulse response fit W in percent over all given samples.
double fit_metric(const Vector& g_true, const Vector& g_hat);

struct BiasVariance {
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

/// Summed-over-lags decomposition of the estimation error across runs.
BiasVariance bias_variance_mse(const Vector& g_true,
                               std::span<const Vector> runs);

// CSV helpers. Headers are `t,u,y` and `t,g`; t starts at 1.
void write_dataset_csv(std::ostream& os, const IdentDataset& data);
IdentDataset read_dataset_csv(std::istream& is);
void write_impulse_csv(std::ostream& os, const Vector& g);
Vector read_impulse_csv(std::istream& is);

/// Formats a double with 17 significant digits.
std::string format_double(double x);

}  // namespace atomident
