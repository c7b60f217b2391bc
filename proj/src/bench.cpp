#include "atomident/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "atomident/parallel.hpp"
#include "atomident/rng.hpp"

namespace atomident::bench {

namespace {

using GreedyCache = std::map<double, GreedyResult>;

GreedyConfig greedy_config(const ExperimentConfig& cfg, double lambda,
                           std::uint64_t seed) {
  GreedyConfig g = cfg.greedy;
  g.lambda = lambda;
  g.seed = seed;
  return g;
}

const GreedyResult& cached_greedy(GreedyCache& cache, const IdentDataset& data,
                                  double lambda, const MethodSeeds& seeds,
                                  const ExperimentConfig& cfg,
                                  std::span<const Eigen::Index> rows) {
  auto it = cache.find(lambda);
  if (it == cache.end()) {
    it = cache.emplace(lambda, run_greedy(data, greedy_config(cfg, lambda, seeds.atoms),
                                          rows)).first;
  }
  return it->second;
}

std::vector<Pole> upper_half_poles(const std::vector<std::complex<double>>& roots) {
  std::vector<Pole> out;
  for (const auto& r : roots) {
    const double a = std::abs(r);
    if (!(a < 1.0) || r.imag() < -1e-12) continue;
    double b = std::abs(r.imag()) <= 1e-12 ? (r.real() >= 0.0 ? 0.0 : std::numbers::pi)
                                           : std::arg(r);
    b = std::clamp(b, 0.0, std::numbers::pi);
    out.emplace_back(a, b);
  }
  return out;
}

// Sparse-model methods; ARX handled separately.
SparseModel fit_sparse(const MethodSpec& method, const IdentDataset& data,
                       double lambda, const MethodSeeds& seeds,
                       const ExperimentConfig& cfg,
                       std::span<const Eigen::Index> rows, GreedyCache& cache,
                       MethodResult* out) {
  switch (method.kind) {
    case MethodKind::InfA: {
      const GreedyResult& g = cached_greedy(cache, data, lambda, seeds, cfg, rows);
      if (out) out->trace = g.trace;
      return g.model;
    }
    case MethodKind::AdpInfA: {
      const GreedyResult& g = cached_greedy(cache, data, lambda, seeds, cfg, rows);
      AdaptiveConfig a = cfg.adaptive;
      a.lambda = lambda;
      AdaptiveResult r = adaptive_refine(data, g.atoms, g.solution.gammas, a, rows);
      if (out) {
        out->trace = g.trace;
        out->adaptive_counts = r.active_counts;
      }
      return r.model;
    }
    case MethodKind::Atom:
    case MethodKind::Atom2: {
      const int p = method.atoms > 0 ? method.atoms
                                     : (method.kind == MethodKind::Atom ? 50 : 500);
      return fit_fixed_atoms(data, init_atoms(p, seeds.atoms), lambda,
                             cfg.greedy.solver, rows)
          .model;
    }
    case MethodKind::SS: {
      if (!rows.empty()) throw InvalidInput("SS does not support row-restricted fits");
      const GreedyResult& g = cached_greedy(cache, data, lambda, seeds, cfg, rows);
      StabilityConfig s = cfg.stability;
      s.lambda_fixed = lambda;
      s.seed = seeds.stability;
      s.threads = 1;
      StabilityResult r = stability_select(data, g.atoms, s);
      if (out) {
        out->trace = g.trace;
        out->frequencies = r.freqs;
      }
      return ls_refit(data, r.selected);
    }
    case MethodKind::ARX:
      break;
  }
  throw InvalidInput("ARX is not a sparse atomic model");
}

std::vector<std::vector<double>> cv_table(std::span<const MethodSpec> methods,
                                          const IdentDataset& data,
                                          std::span<const double> grid,
                                          const MethodSeeds& seeds,
                                          const ExperimentConfig& cfg) {
  if (grid.empty()) throw InvalidInput("lambda grid is empty");
  for (const auto& m : methods) {
    if (m.kind == MethodKind::ARX || m.kind == MethodKind::SS) {
      throw InvalidInput(m.name + " does not take a cross-validated lambda");
    }
  }
  const auto folds = cv_folds(data.size(), cfg.cv);
  std::vector<std::vector<double>> scores(methods.size(),
                                          std::vector<double>(grid.size(), 0.0));
  for (const auto& fold : folds) {
    GreedyCache cache;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        double& s = scores[m][j];
        if (!std::isfinite(s)) continue;
        try {
          const SparseModel model = fit_sparse(methods[m], data, grid[j], seeds, cfg,
                                               fold.estimation, cache, nullptr);
          const Vector yhat = convolve_truncated(
              model_impulse_response(model, static_cast<int>(data.size())), data.u);
          for (Eigen::Index r : fold.validation) {
            const double e = data.y(r) - yhat(r);
            s += e * e;
          }
        } catch (const SolverFailure&) {
          s = std::numeric_limits<double>::infinity();
        }
      }
      cache.clear();
    }
  }
  return scores;
}

std::size_t best_index(std::span<const double> grid, std::span<const double> score) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (score[j] < score[best] || (score[j] == score[best] && grid[j] > grid[best])) {
      best = j;
    }
  }
  return best;
}

MethodRun summarize(const MethodResult& r, const Vector& g_true) {
  MethodRun m;
  m.ok = true;
  m.lambda = r.lambda;
  m.impulse = r.impulse;
  m.poles = r.poles;
  m.model_order = r.model_order;
  m.active_count = static_cast<int>(r.poles.size());
  m.fit = fit_metric(evaluation_lags(g_true), evaluation_lags(r.impulse));
  if (r.trace) m.greedy_added = r.trace->added();
  m.adaptive_counts = r.adaptive_counts;
  return m;
}

}  // namespace

Vector ArxModel::impulse(int horizon) const {
  if (horizon < 1) throw InvalidInput("horizon must be positive");
  Vector g = Vector::Zero(horizon);
  // Impulse at t = 0; g(t) is the output at lag t - 1.
  for (int t = 0; t < horizon; ++t) {
    double v = 0.0;
    for (int i = 1; i <= orders.na && t - i >= 0; ++i) v += a(i - 1) * g(t - i);
    for (int j = 1; j <= orders.nb; ++j) {
      if (t - orders.nk - j + 1 == 0) v += b(j - 1);
    }
    g(t) = v;
  }
  return g;
}

std::vector<std::complex<double>> ArxModel::roots() const {
  const int n = orders.na;
  if (n == 0) return {};
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  c.row(0) = a.transpose();
  for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
  std::vector<std::complex<double>> out(es.eigenvalues().data(),
                                        es.eigenvalues().data() + n);
  return out;
}

ArxModel fit_arx(const IdentDataset& data, const ArxOrders& orders) {
  data.validate();
  if (orders.na < 0 || orders.nb < 1 || orders.nk < 0) {
    throw InvalidInput("ARX orders must satisfy na >= 0, nb >= 1, nk >= 0");
  }
  const Eigen::Index n = data.size();
  const int k = orders.na + orders.nb;
  if (n < k) throw InvalidInput("too few samples for the ARX structure");
  // Zero initial conditions: regressors before t = 0 are zero.
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int i = 1; i <= orders.na; ++i) {
      if (t - i >= 0) phi(t, i - 1) = data.y(t - i);
    }
    for (int j = 1; j <= orders.nb; ++j) {
      const Eigen::Index s = t - orders.nk - j + 1;
      if (s >= 0) phi(t, orders.na + j - 1) = data.u(s);
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
  const Vector theta = cod.solve(data.y);
  ArxModel m;
  m.orders = orders;
  m.a = theta.head(orders.na);
  m.b = theta.tail(orders.nb);
  return m;
}

GreedyResult fit_fixed_atoms(const IdentDataset& data, std::vector<Pole> atoms,
                             double lambda, const SolverOptions& solver,
                             std::span<const Eigen::Index> rows) {
  data.validate();
  GroupLassoProblem problem;
  problem.y = rows.empty() ? data.y : select_rows(data.y, rows);
  problem.lambda = lambda;
  for (const auto& p : atoms) {
    const FeatureMatrix z = build_feature(p, data.u).zeta;
    problem.features.push_back(rows.empty() ? z : select_rows(z, rows));
  }
  GreedyResult out;
  out.solution = solve(problem, solver);
  if (!out.solution.converged) {
    throw SolverFailure("group lasso on fixed atoms did not converge");
  }
  out.model = SparseModel(atoms, out.solution.gammas, lambda,
                          {out.solution.iterations, out.solution.objective});
  out.trace.initial_objective = out.solution.objective;
  out.atoms = std::move(atoms);
  return out;
}

MethodResult run_method(const MethodSpec& method, const IdentDataset& data,
                        double lambda, const MethodSeeds& seeds,
                        const ExperimentConfig& cfg, int horizon) {
  MethodResult out;
  out.method = method.name;
  if (method.kind == MethodKind::ARX) {
    const ArxModel arx = fit_arx(data, cfg.arx);
    out.impulse = arx.impulse(horizon);
    out.poles = upper_half_poles(arx.roots());
    out.model_order = cfg.arx.na;
    return out;
  }
  GreedyCache cache;
  SparseModel model = fit_sparse(method, data, lambda, seeds, cfg, {}, cache, &out);
  out.lambda = lambda;
  out.impulse = model_impulse_response(model, horizon);
  for (const auto& t : model.active_terms()) out.poles.push_back(t.pole);
  out.model_order = model.model_order();
  out.model = std::move(model);
  return out;
}

std::vector<CvFold> cv_folds(Eigen::Index n, const CrossValidationConfig& cv) {
  cv.validate();
  std::vector<CvFold> folds;
  auto make = [&](Eigen::Index lo, Eigen::Index hi) {
    CvFold f;
    for (Eigen::Index i = 0; i < n; ++i) {
      (i >= lo && i < hi ? f.validation : f.estimation).push_back(i);
    }
    if (f.validation.empty() || f.estimation.empty()) {
      throw InvalidInput("cross-validation split leaves an empty part");
    }
    folds.push_back(std::move(f));
  };
  if (cv.k_folds > 1) {
    for (int k = 0; k < cv.k_folds; ++k) {
      make(n * k / cv.k_folds, n * (k + 1) / cv.k_folds);
    }
  } else {
    const auto hold = static_cast<Eigen::Index>(std::llround(cv.holdout_fraction * n));
    make(n - std::max<Eigen::Index>(hold, 1), n);
  }
  return folds;
}

std::vector<double> cv_scores(const MethodSpec& method, const IdentDataset& data,
                              std::span<const double> grid,
                              const MethodSeeds& seeds,
                              const ExperimentConfig& cfg) {
  return cv_table(std::span<const MethodSpec>(&method, 1), data, grid, seeds, cfg)[0];
}

double select_lambda_cv(const MethodSpec& method, const IdentDataset& data,
                        std::span<const double> grid, const MethodSeeds& seeds,
                        const ExperimentConfig& cfg) {
  if (grid.size() == 1) return grid[0];
  const auto s = cv_scores(method, data, grid, seeds, cfg);
  return grid[best_index(grid, s)];
}

Vector true_impulse(const ExperimentConfig& cfg, int horizon) {
  const int long_h = std::max(horizon, kBenchmarkHorizon);
  Vector g = transfer_function_impulse(cfg.numerator, cfg.denominator, long_h);
  if (cfg.normalize) g = normalize_h2(g);
  return g.head(horizon);
}

Vector evaluation_lags(const Vector& g) {
  if (g.size() < 2) throw InvalidInput("need at least two impulse samples");
  return g.tail(g.size() - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

RunRecord run_single(const ExperimentConfig& cfg, int run) {
  const int n = cfg.n_samples;
  const Vector g_true = true_impulse(cfg, n);
  RunRecord rec;
  rec.run = run;
  rec.seed = cfg.base_seed + static_cast<std::uint64_t>(run);
  const Vector g_sim = true_impulse(cfg, std::max(n, kBenchmarkHorizon));
  const IdentDataset data = generate_dataset(g_sim, n, cfg.sigma2, rec.seed);
  const MethodSeeds seeds{derive_seed(rec.seed, 1), derive_seed(rec.seed, 2)};

  // Lambda per method: explicit, fixed, SS default, or cross-validated.
  std::map<std::string, double> lambdas;
  std::vector<MethodSpec> to_cv;
  for (const auto& m : cfg.methods) {
    if (m.kind == MethodKind::ARX) {
      lambdas[m.name] = 0.0;
    } else if (m.lambda) {
      lambdas[m.name] = *m.lambda;
    } else if (m.kind == MethodKind::SS) {
      lambdas[m.name] = cfg.stability.lambda_fixed;
    } else if (cfg.lambda_fixed) {
      lambdas[m.name] = *cfg.lambda_fixed;
    } else {
      to_cv.push_back(m);
    }
  }
  if (!to_cv.empty()) {
    std::vector<std::vector<double>> table;
    try {
      table = cv_table(to_cv, data, cfg.lambda_grid, seeds, cfg);
    } catch (const std::exception& e) {
      for (const auto& m : to_cv) rec.methods[m.name].error = e.what();
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
      lambdas[to_cv[i].name] = cfg.lambda_grid[best_index(cfg.lambda_grid, table[i])];
    }
  }

  for (const auto& m : cfg.methods) {
    if (!lambdas.count(m.name)) continue;  // CV failed
    try {
      MethodResult r = run_method(m, data, lambdas[m.name], seeds, cfg, n);
      rec.methods[m.name] = summarize(r, g_true);
      if (m.kind == MethodKind::InfA && r.trace) rec.trace = r.trace;
    } catch (const std::exception& e) {
      MethodRun f;
      f.error = e.what();
      f.lambda = lambdas[m.name];
      rec.methods[m.name] = f;
    }
  }

  if (cfg.record_lambda_sweep) {
    for (double l : cfg.lambda_grid) {
      SweepPoint p{l, -1, Termination::converged};
      try {
        const GreedyResult g = run_greedy(data, greedy_config(cfg, l, seeds.atoms));
        p.added = g.trace.added();
        p.terminated_by = g.trace.terminated_by;
      } catch (const SolverFailure& e) {
        if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
          p.added = ce->trace().added();
        }
      }
      rec.sweep.push_back(p);
    }
  }
  return rec;
}

std::vector<MethodAggregate> aggregate(const std::vector<std::string>& methods,
                                       const Vector& g_true,
                                       const std::vector<RunRecord>& runs) {
  std::vector<MethodAggregate> out;
  const Vector ref = evaluation_lags(g_true);
  for (const auto& name : methods) {
    MethodAggregate a;
    a.method = name;
    std::vector<Vector> impulses;
    std::vector<double> fits, orders;
    for (const auto& r : runs) {
      auto it = r.methods.find(name);
      if (it == r.methods.end() || !it->second.ok) {
        ++a.runs_failed;
        continue;
      }
      ++a.runs_ok;
      impulses.push_back(evaluation_lags(it->second.impulse));
      fits.push_back(it->second.fit);
      orders.push_back(it->second.model_order);
    }
    if (impulses.size() >= 2) {
      const BiasVariance bv = bias_variance_mse(ref, impulses);
      a.bias2 = bv.bias2;
      a.variance = bv.variance;
      a.mse = bv.mse;
    } else if (impulses.size() == 1) {
      a.bias2 = (impulses[0] - ref).squaredNorm();
      a.mse = a.bias2;
    }
    a.median_fit = median(fits);
    a.median_order = median(orders);
    out.push_back(a);
  }
  return out;
}

BenchReport run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  BenchReport rep;
  rep.config = to_json(cfg);
  for (const auto& m : cfg.methods) rep.methods.push_back(m.name);
  rep.g_true = true_impulse(cfg, cfg.n_samples);
  rep.runs.resize(static_cast<std::size_t>(cfg.n_runs));
  parallel_for(rep.runs.size(), cfg.threads, [&](std::size_t i) {
    rep.runs[i] = run_single(cfg, static_cast<int>(i) + 1);
  });
  rep.aggregates = aggregate(rep.methods, rep.g_true, rep.runs);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& a : rep.aggregates) {
    if (10 * a.runs_failed > cfg.n_runs) {
      throw StudyAborted(a.method + ": " + std::to_string(a.runs_failed) + " of " +
                         std::to_string(cfg.n_runs) + " runs failed");
    }
  }
  return rep;
}

}  // namespace atomident::bench
