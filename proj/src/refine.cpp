#include "atomident/refine.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>

#include "atomident/parallel.hpp"
#include "atomident/rng.hpp"

namespace atomident {

void AdaptiveConfig::validate() const {
  if (m_s < 1) throw InvalidInput("m_s must be at least 1");
  if (!(eps_prime > 0.0)) throw InvalidInput("eps_prime must be positive");
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
}

void StabilityConfig::validate() const {
  if (!(tau > 0.5 && tau <= 1.0)) throw InvalidInput("tau must lie in (0.5, 1]");
  if (n_s < 1) throw InvalidInput("n_s must be at least 1");
  if (!(lambda_fixed > 0.0)) throw InvalidInput("lambda_fixed must be positive");
}

AdaptiveResult adaptive_refine(const IdentDataset& data,
                               std::span<const Pole> atoms,
                               std::span<const GroupCoefficients> gamma0,
                               const AdaptiveConfig& cfg,
                               std::span<const Eigen::Index> rows) {
  data.validate();
  cfg.validate();
  if (atoms.size() != gamma0.size()) {
    throw InvalidInput("atom and coefficient counts differ");
  }

  GroupLassoProblem problem;
  problem.y = rows.empty() ? data.y : select_rows(data.y, rows);
  problem.lambda = cfg.lambda;
  for (const auto& p : atoms) {
    const FeatureMatrix z = build_feature(p, data.u).zeta;
    problem.features.push_back(rows.empty() ? z : select_rows(z, rows));
  }
  problem.weights.resize(static_cast<Eigen::Index>(atoms.size()));

  auto count_active = [](std::span<const GroupCoefficients> g) {
    return static_cast<int>(std::count_if(g.begin(), g.end(), [](const auto& x) {
      return x.norm() > kActivityThreshold;
    }));
  };

  AdaptiveResult out;
  std::vector<GroupCoefficients> prev(gamma0.begin(), gamma0.end());
  out.active_counts.push_back(count_active(prev));
  GroupLassoSolution sol;
  for (int m = 1; m <= cfg.m_s; ++m) {
    for (std::size_t i = 0; i < prev.size(); ++i) {
      problem.weights(static_cast<Eigen::Index>(i)) =
          1.0 / (prev[i].norm() + cfg.eps_prime);
    }
    sol = solve(problem, cfg.solver, prev);
    if (!sol.converged) {
      throw SolverFailure("reweighted group lasso pass " + std::to_string(m) +
                          " did not converge");
    }
    prev = sol.gammas;
    out.active_counts.push_back(count_active(prev));
    out.objectives.push_back(sol.objective);
  }
  out.model = SparseModel(atoms, prev, cfg.lambda, {sol.iterations, sol.objective});
  return out;
}

std::vector<Pole> SelectionFrequencies::select(double tau) const {
  std::vector<Pole> out;
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (fits > 0 && frequency(i) >= tau) out.push_back(poles[i]);
  }
  return out;
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>
complementary_split(Eigen::Index n, std::uint64_t seed, std::uint64_t pair) {
  if (n < 1) throw InvalidInput("sample count must be positive");
  Rng rng(seed, /*stream=*/1000 + pair);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const std::size_t half = static_cast<std::size_t>(n / 2);
  // Partial Fisher-Yates: the first `half` slots are a uniform subset.
  for (std::size_t i = 0; i < half; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Eigen::Index> b(idx.begin(), idx.begin() + static_cast<long>(half));
  std::vector<Eigen::Index> rest(idx.begin() + static_cast<long>(half), idx.end());
  std::sort(b.begin(), b.end());
  std::sort(rest.begin(), rest.end());
  return {std::move(b), std::move(rest)};
}

StabilityResult stability_select(const IdentDataset& data,
                                 std::span<const Pole> atoms,
                                 const StabilityConfig& cfg) {
  data.validate();
  cfg.validate();

  std::vector<FeatureMatrix> full;
  full.reserve(atoms.size());
  for (const auto& p : atoms) full.push_back(build_feature(p, data.u).zeta);

  const std::size_t fits = 2 * static_cast<std::size_t>(cfg.n_s);
  std::vector<std::vector<Eigen::Index>> subsets(fits);
  for (int i = 0; i < cfg.n_s; ++i) {
    auto [b, rest] = complementary_split(data.size(), cfg.seed,
                                         static_cast<std::uint64_t>(i));
    subsets[2 * static_cast<std::size_t>(i)] = std::move(b);
    subsets[2 * static_cast<std::size_t>(i) + 1] = std::move(rest);
  }

  // 1 = active, 0 = inactive; one row per fit.
  std::vector<std::vector<char>> active(fits, std::vector<char>(atoms.size(), 0));
  std::vector<char> failed(fits, 0);
  parallel_for(fits, cfg.threads, [&](std::size_t f) {
    const auto& rows = subsets[f];
    GroupLassoProblem problem;
    problem.y = select_rows(data.y, rows);
    problem.lambda = cfg.lambda_fixed;
    problem.features.reserve(full.size());
    for (const auto& z : full) problem.features.push_back(select_rows(z, rows));
    const GroupLassoSolution sol = solve(problem, cfg.solver);
    if (!sol.converged) {
      failed[f] = 1;
      return;
    }
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      active[f][i] = sol.gammas[i].norm() > cfg.activity_threshold ? 1 : 0;
    }
  });

  StabilityResult out;
  out.freqs.poles.assign(atoms.begin(), atoms.end());
  out.freqs.counts.assign(atoms.size(), 0);
  out.freqs.fits = static_cast<int>(fits);
  for (std::size_t f = 0; f < fits; ++f) {
    out.freqs.failed_fits += failed[f];
    for (std::size_t i = 0; i < atoms.size(); ++i) out.freqs.counts[i] += active[f][i];
  }
  out.selected = out.freqs.select(cfg.tau);
  return out;
}

SparseModel ls_refit(const IdentDataset& data, std::span<const Pole> selected) {
  data.validate();
  if (selected.empty()) return SparseModel{};
  const Eigen::Index cols = 2 * static_cast<Eigen::Index>(selected.size());
  Eigen::MatrixXd z(data.size(), cols);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    z.middleCols(2 * static_cast<Eigen::Index>(i), 2) =
        build_feature(selected[i], data.u).zeta;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(z);
  const Vector coef = cod.solve(data.y);
  std::vector<GroupCoefficients> gammas(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    gammas[i] = coef.segment<2>(2 * static_cast<Eigen::Index>(i));
  }
  const double rss = (data.y - z * coef).squaredNorm();
  return SparseModel(selected, gammas, 0.0, {0, rss});
}

int pole_set_order(std::span<const Pole> poles) {
  int n = 0;
  for (const auto& p : poles) n += p.order();
  return n;
}

void write_frequencies_csv(std::ostream& os, const SelectionFrequencies& f) {
  os << "alpha,beta,frequency\n";
  for (std::size_t i = 0; i < f.poles.size(); ++i) {
    os << format_double(f.poles[i].alpha()) << ','
       << format_double(f.poles[i].beta()) << ','
       << format_double(f.fits > 0 ? f.frequency(i) : 0.0) << '\n';
  }
}

}  // namespace atomident
