#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomident/greedy.hpp"
#include "atomident/refine.hpp"

namespace atomident::bench {

enum class MethodKind { InfA, AdpInfA, SS, Atom, Atom2, ARX };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::InfA;
  int atoms = 0;                 // Atom / Atom2 atom count
  std::optional<double> lambda;  // overrides cross-validation
};

/// Parses "InfA", "AdpInfA", "SS", "Atom", "Atom2" or "ARX".
MethodSpec method_from_name(const std::string& name);

struct ArxOrders {
  int na = 4;
  int nb = 2;
  int nk = 3;
};

struct CrossValidationConfig {
  double holdout_fraction = 0.25;  // contiguous tail of the record
  int k_folds = 0;                 // > 1 switches to contiguous k-fold
  void validate() const;
};

struct ExperimentConfig {
  std::vector<double> numerator = kBenchmarkNumerator;
  std::vector<double> denominator = kBenchmarkDenominator;
  bool normalize = true;
  int n_samples = 100;
  double sigma2 = 0.1;
  int n_runs = 100;
  std::uint64_t base_seed = 0;
  std::vector<MethodSpec> methods;
  std::vector<double> lambda_grid;
  std::optional<double> lambda_fixed;
  CrossValidationConfig cv;
  GreedyConfig greedy;
  AdaptiveConfig adaptive;
  StabilityConfig stability;
  ArxOrders arx;
  /// Also run the greedy loop at every grid lambda on the full record.
  bool record_lambda_sweep = false;
  int threads = 1;

  void validate() const;
};

/// 15 log-spaced points in [sigma2 / 2, 50 sigma2]; [0.005, 0.5] if sigma2 = 0.
std::vector<double> default_lambda_grid(double sigma2);

/// Points log-spaced between lo and hi inclusive.
std::vector<double> log_space(double lo, double hi, int points);

/// Missing keys keep their defaults; no `methods` means all six.
/// Throws InvalidInput on bad values.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace atomident::bench
