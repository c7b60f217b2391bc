#include "atomident/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "atomident/rng.hpp"

namespace atomident {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDuplicateTol = 1e-10;

bool near_any(double alpha, double beta, std::span<const Pole> poles) {
  return std::any_of(poles.begin(), poles.end(), [&](const Pole& p) {
    return std::abs(p.alpha() - alpha) <= kDuplicateTol &&
           std::abs(p.beta() - beta) <= kDuplicateTol;
  });
}

double grid_alpha(int i, int n) {
  return n == 1 ? 0.0 : kMaxRadius * static_cast<double>(i) / (n - 1);
}

double grid_beta(int j, int n) {
  if (n == 1) return 0.0;
  if (j == n - 1) return kPi;
  return kPi * static_cast<double>(j) / (n - 1);
}

struct Scored {
  double alpha;
  double beta;
  double score;
};

// Coordinate pattern search with step halving, clamped to the half disk.
Scored refine(Scored start, double da, double db, const Vector& residual,
              const Vector& u, const CandidateSearchConfig& cfg) {
  Scored cur = start;
  for (int it = 0; it < cfg.max_local_iter; ++it) {
    Scored best = cur;
    const double moves[4][2] = {{da, 0.0}, {-da, 0.0}, {0.0, db}, {0.0, -db}};
    for (const auto& m : moves) {
      const double a = std::clamp(cur.alpha + m[0], 0.0, kMaxRadius);
      const double b = std::clamp(cur.beta + m[1], 0.0, kPi);
      if (a == cur.alpha && b == cur.beta) continue;
      const double s = pole_score(Pole(a, b), u, residual);
      if (s > best.score) best = {a, b, s};
    }
    if (best.score > cur.score) {
      cur = best;
    } else {
      da *= 0.5;
      db *= 0.5;
      if (da < cfg.local_tol && db < cfg.local_tol) break;
    }
  }
  return cur;
}

}  // namespace

void CandidateSearchConfig::validate() const {
  if (n_alpha < 2 || n_beta < 2 || multistart_count < 1 || !(local_tol > 0.0) ||
      max_local_iter < 1) {
    throw InvalidInput("candidate search settings must be positive (grid >= 2)");
  }
}

void GreedyConfig::validate() const {
  if (p0 < 1) throw InvalidInput("p0 must be at least 1");
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  if (l_max < 1) throw InvalidInput("l_max must be at least 1");
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
  if (confirm_factor < 1) throw InvalidInput("confirm_factor must be at least 1");
  search.validate();
}

std::vector<Pole> init_atoms(int p0, std::uint64_t seed) {
  if (p0 < 1) throw InvalidInput("p0 must be at least 1");
  Rng rng(seed, /*stream=*/7);
  std::uniform_real_distribution<double> radius(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kPi);
  std::vector<Pole> out;
  out.reserve(static_cast<std::size_t>(p0));
  while (static_cast<int>(out.size()) < p0) {
    const double a = radius(rng);
    const double b = angle(rng);
    if (near_any(a, b, out)) continue;
    out.emplace_back(a, b);
  }
  return out;
}

double pole_score(const Pole& pole, const Vector& u, const Vector& residual) {
  if (u.size() != residual.size()) {
    throw InvalidInput("input and residual lengths differ");
  }
  const std::complex<double> k = pole.value();
  const double kr = k.real();
  const double ki = k.imag();
  const double gain = 1.0 - (kr * kr + ki * ki);
  double pr = 0.0, pi = 0.0, sr = 0.0, si = 0.0;
  const double* up = u.data();
  const double* rp = residual.data();
  for (Eigen::Index t = 1; t < u.size(); ++t) {
    const double nr = kr * pr - ki * pi + gain * up[t - 1];
    const double ni = kr * pi + ki * pr;
    pr = nr;
    pi = ni;
    sr += pr * rp[t];
    si += pi * rp[t];
  }
  return 2.0 * std::hypot(sr, si);
}

CandidateResult grid_max_score(const Vector& residual, const Vector& u,
                               int n_alpha, int n_beta) {
  CandidateResult best{Pole(0.0, 0.0), -1.0};
  for (int i = 0; i < n_alpha; ++i) {
    const double a = grid_alpha(i, n_alpha);
    for (int j = 0; j < n_beta; ++j) {
      if (a == 0.0 && j > 0) break;
      const Pole p(a, grid_beta(j, n_beta));
      const double s = pole_score(p, u, residual);
      if (s > best.score) best = {p, s};
    }
  }
  return best;
}

CandidateResult search_candidate(const Vector& residual, const Vector& u,
                                 const CandidateSearchConfig& cfg,
                                 std::span<const Pole> exclude) {
  cfg.validate();
  if (u.size() != residual.size()) {
    throw InvalidInput("input and residual lengths differ");
  }

  std::vector<Scored> grid;
  grid.reserve(static_cast<std::size_t>(cfg.n_alpha) * cfg.n_beta);
  for (int i = 0; i < cfg.n_alpha; ++i) {
    const double a = grid_alpha(i, cfg.n_alpha);
    for (int j = 0; j < cfg.n_beta; ++j) {
      if (a == 0.0 && j > 0) break;  // every angle gives k = 0
      const double b = grid_beta(j, cfg.n_beta);
      grid.push_back({a, b, pole_score(Pole(a, b), u, residual)});
    }
  }
  auto by_score = [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.alpha != y.alpha) return x.alpha < y.alpha;
    return x.beta < y.beta;
  };
  const std::size_t starts =
      std::min(grid.size(), static_cast<std::size_t>(cfg.multistart_count));
  std::partial_sort(grid.begin(), grid.begin() + static_cast<long>(starts),
                    grid.end(), by_score);

  const double da = kMaxRadius / (cfg.n_alpha - 1);
  const double db = kPi / (cfg.n_beta - 1);
  std::vector<Scored> refined;
  refined.reserve(starts);
  for (std::size_t s = 0; s < starts; ++s) {
    refined.push_back(refine(grid[s], da, db, residual, u, cfg));
  }
  std::sort(refined.begin(), refined.end(), by_score);

  for (const auto& c : refined) {
    if (!near_any(c.alpha, c.beta, exclude)) {
      return {Pole(c.alpha, c.beta), c.score};
    }
  }
  // Every refined start collapsed onto an existing atom; fall back to the
  // best grid point that is still new.
  std::sort(grid.begin(), grid.end(), by_score);
  for (const auto& c : grid) {
    if (!near_any(c.alpha, c.beta, exclude)) {
      return {Pole(c.alpha, c.beta), c.score};
    }
  }
  return {Pole(refined.front().alpha, refined.front().beta),
          refined.front().score};
}

GreedyResult run_greedy(const IdentDataset& data, const GreedyConfig& cfg,
                        std::span<const Eigen::Index> rows) {
  cfg.validate();
  return run_greedy_from(data, init_atoms(cfg.p0, cfg.seed), cfg, rows);
}

GreedyResult run_greedy_from(const IdentDataset& data,
                             std::vector<Pole> atoms, const GreedyConfig& cfg,
                             std::span<const Eigen::Index> rows) {
  data.validate();
  cfg.validate();
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> all_rows;
  if (rows.empty()) {
    all_rows.resize(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), Eigen::Index{0});
    rows = all_rows;
  }
  for (Eigen::Index r : rows) {
    if (r < 0 || r >= n) throw InvalidInput("row index out of range");
  }

  GroupLassoProblem problem;
  problem.y = select_rows(data.y, rows);
  problem.lambda = cfg.lambda;
  for (const auto& pole : atoms) {
    problem.features.push_back(select_rows(build_feature(pole, data.u).zeta, rows));
  }

  GreedyResult out;
  GreedyTrace& trace = out.trace;
  GroupLassoSolution sol = solve(problem, cfg.solver);
  if (!sol.converged) {
    throw ConvergenceError("initial group lasso solve did not converge", trace);
  }
  trace.initial_objective = sol.objective;

  Vector full_residual = Vector::Zero(n);
  int added = 0;
  trace.terminated_by = Termination::l_max_reached;
  while (added < cfg.l_max) {
    full_residual.setZero();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      full_residual(rows[i]) = sol.residual(static_cast<Eigen::Index>(i));
    }
    CandidateResult cand =
        search_candidate(full_residual, data.u, cfg.search, atoms);
    if (cand.score < cfg.lambda + cfg.epsilon && cfg.confirm_factor > 1) {
      CandidateSearchConfig fine = cfg.search;
      fine.n_alpha *= cfg.confirm_factor;
      fine.n_beta *= cfg.confirm_factor;
      const CandidateResult again =
          search_candidate(full_residual, data.u, fine, atoms);
      if (again.score > cand.score) cand = again;
    }
    trace.final_score = cand.score;
    if (cand.score < cfg.lambda + cfg.epsilon) {
      trace.terminated_by = Termination::converged;
      break;
    }

    atoms.push_back(cand.pole);
    problem.features.push_back(
        select_rows(build_feature(cand.pole, data.u).zeta, rows));
    std::vector<GroupCoefficients> warm = sol.gammas;
    warm.push_back(GroupCoefficients::Zero());
    sol = solve(problem, cfg.solver, warm);
    ++added;

    GreedyStep step;
    step.iter = added;
    step.pole = cand.pole;
    step.score = cand.score;
    step.objective = sol.objective;
    for (const auto& g : sol.gammas) {
      if (g.norm() > kActivityThreshold) ++step.active_count;
    }
    trace.steps.push_back(step);
    if (!sol.converged) {
      throw ConvergenceError("group lasso solve did not converge after adding atom " +
                                 std::to_string(added),
                             trace);
    }
  }

  out.model = SparseModel(atoms, sol.gammas, cfg.lambda,
                          {sol.iterations, sol.objective});
  out.atoms = std::move(atoms);
  out.solution = std::move(sol);
  return out;
}

void write_trace_csv(std::ostream& os, const GreedyTrace& trace) {
  os << "iter,alpha,beta,score,objective,active_count\n";
  for (const auto& s : trace.steps) {
    os << s.iter << ',' << format_double(s.pole.alpha()) << ','
       << format_double(s.pole.beta()) << ',' << format_double(s.score) << ','
       << format_double(s.objective) << ',' << s.active_count << '\n';
  }
}

}  // namespace atomident
