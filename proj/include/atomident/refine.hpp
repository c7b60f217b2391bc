#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "atomident/group_lasso.hpp"
#include "atomident/lti.hpp"

namespace atomident {

struct AdaptiveConfig {
  int m_s = 2;
  double eps_prime = 1e-5;
  double lambda = 1.0;
  SolverOptions solver;
  void validate() const;
};

struct AdaptiveResult {
  SparseModel model;
  /// Active group count before the first pass and after each pass (m_s + 1).
  std::vector<int> active_counts;
  std::vector<double> objectives;
};

/// Iteratively reweighted group lasso on a fixed atom set with weights
/// 1 / (||gamma^{m-1}_i|| + eps'). A non-empty `rows` restricts the loss.
AdaptiveResult adaptive_refine(const IdentDataset& data,
                               std::span<const Pole> atoms,
                               std::span<const GroupCoefficients> gamma0,
                               const AdaptiveConfig& cfg,
                               std::span<const Eigen::Index> rows = {});

struct StabilityConfig {
  double tau = 0.9;
  int n_s = 50;
  double lambda_fixed = 0.5;
  std::uint64_t seed = 0;
  double activity_threshold = kActivityThreshold;
  SolverOptions solver;
  int threads = 1;
  void validate() const;
};

struct SelectionFrequencies {
  std::vector<Pole> poles;
  /// counts[i] / (2 n_s) is the inclusion frequency of poles[i].
  std::vector<int> counts;
  int fits = 0;  // always 2 n_s
  /// Subsample fits whose solver did not converge (recorded as all-inactive).
  int failed_fits = 0;

  double frequency(std::size_t i) const {
    return static_cast<double>(counts[i]) / fits;
  }
  /// Poles with frequency >= tau, in atom order.
  std::vector<Pole> select(double tau) const;
};

struct StabilityResult {
  std::vector<Pole> selected;
  SelectionFrequencies freqs;
};

/// Draws floor(n/2) sorted indices from [0, n) and returns (B, complement).
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>
complementary_split(Eigen::Index n, std::uint64_t seed, std::uint64_t pair);

/// Complementary pairs stability selection over a fixed atom set.
StabilityResult stability_select(const IdentDataset& data,
                                 std::span<const Pole> atoms,
                                 const StabilityConfig& cfg);

/// Minimum-norm least squares of y on the selected atoms' features.
SparseModel ls_refit(const IdentDataset& data, std::span<const Pole> selected);

/// Estimated model order of a pole set, conjugates included.
int pole_set_order(std::span<const Pole> poles);

/// `alpha,beta,frequency`
void write_frequencies_csv(std::ostream& os, const SelectionFrequencies& f);

}  // namespace atomident
