#include "atomident/group_lasso.hpp"

#include <algorithm>
#include <cmath>

namespace atomident {

namespace {

// Eigen-directions of a 2x2 Gram with eigenvalues below this fraction of the
// largest one are treated as exact null directions.
constexpr double kNullEigenRatio = 1e-14;

// Sweeps over the active groups between full sweeps.
constexpr int kActiveSweeps = 10;

struct BlockGram {
  Eigen::Matrix2d gram;
  double mu[2];
  Eigen::Vector2d vec[2];
};

BlockGram decompose(const Eigen::Matrix2d& g) {
  BlockGram out;
  out.gram = g;
  const double a = g(0, 0);
  const double c = 0.5 * (g(0, 1) + g(1, 0));
  const double d = g(1, 1);
  const double mid = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), c);
  out.mu[0] = mid + rad;
  out.mu[1] = std::max(mid - rad, 0.0);
  if (c == 0.0) {
    out.vec[0] = a >= d ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
  } else {
    out.vec[0] = Eigen::Vector2d(out.mu[0] - d, c).normalized();
  }
  out.vec[1] = Eigen::Vector2d(-out.vec[0](1), out.vec[0](0));
  return out;
}

GroupCoefficients solve_block_decomposed(const BlockGram& bg,
                                         const Eigen::Vector2d& b,
                                         double penalty) {
  if (b.norm() <= penalty) return GroupCoefficients::Zero();

  double coef[2];
  double mu[2];
  int kept = 0;
  Eigen::Vector2d dirs[2];
  const double cutoff = kNullEigenRatio * bg.mu[0];
  for (int j = 0; j < 2; ++j) {
    if (bg.mu[j] <= cutoff || bg.mu[j] == 0.0) continue;
    coef[kept] = bg.vec[j].dot(b);
    mu[kept] = bg.mu[j];
    dirs[kept] = bg.vec[j];
    ++kept;
  }
  double bnorm2 = 0.0;
  double mu_min = 0.0;
  for (int j = 0; j < kept; ++j) {
    bnorm2 += coef[j] * coef[j];
    mu_min = j == 0 ? mu[j] : std::min(mu_min, mu[j]);
  }
  const double bnorm = std::sqrt(bnorm2);
  if (kept == 0 || bnorm <= penalty) return GroupCoefficients::Zero();

  // ||g|| = rho solves h(rho) = sum c_j^2 / (mu_j rho + penalty)^2 - 1 = 0.
  // h is convex and decreasing, so Newton from the left end of the bracket
  // climbs monotonically to the root; bisection guards the bracket.
  auto h = [&](double rho, double* dh) {
    double val = -1.0;
    double der = 0.0;
    for (int j = 0; j < kept; ++j) {
      const double den = mu[j] * rho + penalty;
      const double q = coef[j] * coef[j] / (den * den);
      val += q;
      der -= 2.0 * q * mu[j] / den;
    }
    if (dh) *dh = der;
    return val;
  };
  double lo = 0.0;
  double hi = (bnorm - penalty) / mu_min;
  double rho = lo;
  for (int it = 0; it < 200; ++it) {
    double der = 0.0;
    const double val = h(rho, &der);
    if (val > 0.0) {
      lo = rho;
    } else {
      hi = rho;
    }
    if (hi - lo <= 1e-12 * hi) break;
    double next = der < 0.0 ? rho - val / der : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == rho) break;
    rho = next;
  }

  GroupCoefficients g = GroupCoefficients::Zero();
  for (int j = 0; j < kept; ++j) {
    g += (coef[j] * rho / (mu[j] * rho + penalty)) * dirs[j];
  }
  return g;
}

}  // namespace

void GroupLassoProblem::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("lambda must be positive and finite");
  }
  for (const auto& z : features) {
    if (z.rows() != y.size()) {
      throw InvalidInput("feature rows do not match target length");
    }
  }
  if (weights.size() != 0) {
    if (weights.size() != static_cast<Eigen::Index>(features.size())) {
      throw InvalidInput("weight count does not match group count");
    }
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      if (!(weights(i) > 0.0) || !std::isfinite(weights(i))) {
        throw InvalidInput("weights must be positive and finite");
      }
    }
  }
}

GroupCoefficients solve_block(const Eigen::Matrix2d& gram,
                              const Eigen::Vector2d& b, double penalty) {
  return solve_block_decomposed(decompose(gram), b, penalty);
}

Vector residual_of(const GroupLassoProblem& problem,
                   std::span<const GroupCoefficients> gammas) {
  Vector r = problem.y;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (gammas[i].isZero(0.0)) continue;
    r.noalias() -= problem.features[i] * gammas[i];
  }
  return r;
}

double objective_value(const GroupLassoProblem& problem,
                       std::span<const GroupCoefficients> gammas) {
  double pen = 0.0;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    pen += problem.weight(i) * gammas[i].norm();
  }
  return residual_of(problem, gammas).squaredNorm() + 2.0 * problem.lambda * pen;
}

KktReport kkt_violation(const GroupLassoProblem& problem,
                        std::span<const GroupCoefficients> gammas) {
  if (gammas.size() != problem.groups()) {
    throw InvalidInput("coefficient count does not match group count");
  }
  const Vector r = residual_of(problem, gammas);
  KktReport rep{0.0, Vector::Zero(static_cast<Eigen::Index>(gammas.size()))};
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const Eigen::Vector2d corr = problem.features[i].transpose() * r;
    const double pen = problem.lambda * problem.weight(i);
    const double gn = gammas[i].norm();
    const double v = gn == 0.0 ? std::max(0.0, corr.norm() - pen)
                               : (corr - pen * gammas[i] / gn).norm();
    rep.per_group(static_cast<Eigen::Index>(i)) = v;
    rep.max_violation = std::max(rep.max_violation, v);
  }
  return rep;
}

double violation_score(const FeatureMatrix& zeta, const Vector& residual) {
  if (zeta.rows() != residual.size()) {
    throw InvalidInput("feature rows do not match residual length");
  }
  return (zeta.transpose() * residual).norm();
}

double violation_score(const AtomicFeature& feature, const Vector& residual) {
  return violation_score(feature.zeta, residual);
}

GroupLassoSolution solve(const GroupLassoProblem& problem,
                         const SolverOptions& options,
                         std::span<const GroupCoefficients> warm_start) {
  problem.validate();
  if (!(options.tol > 0.0)) throw InvalidInput("tolerance must be positive");
  if (warm_start.size() > problem.groups()) {
    throw InvalidInput("warm start has more groups than the problem");
  }

  const std::size_t p = problem.groups();
  GroupLassoSolution sol;
  sol.gammas.assign(p, GroupCoefficients::Zero());
  std::copy(warm_start.begin(), warm_start.end(), sol.gammas.begin());

  std::vector<BlockGram> grams;
  std::vector<double> penalty(p);
  grams.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& z = problem.features[i];
    grams.push_back(decompose(z.transpose() * z));
    penalty[i] = problem.lambda * problem.weight(i);
  }

  Vector r = residual_of(problem, sol.gammas);
  auto objective = [&] {
    double pen = 0.0;
    for (std::size_t i = 0; i < p; ++i) pen += penalty[i] * sol.gammas[i].norm();
    return r.squaredNorm() + 2.0 * pen;
  };

  // One exact block update; returns ||G_i (g_new - g_old)|| as a step size.
  auto update = [&](std::size_t i) {
    const auto& z = problem.features[i];
    const BlockGram& bg = grams[i];
    const GroupCoefficients old = sol.gammas[i];
    const Eigen::Vector2d b = z.transpose() * r + bg.gram * old;
    const GroupCoefficients next = solve_block_decomposed(bg, b, penalty[i]);
    const Eigen::Vector2d delta = next - old;
    if (delta.isZero(0.0)) return 0.0;
    r.noalias() -= z * delta;
    sol.gammas[i] = next;
    return (bg.gram * delta).norm();
  };

  // Newton iterations on the smooth restriction of the objective to the
  // current active groups. BCD identifies the support; this removes the slow
  // linear tail BCD shows on strongly correlated atoms.
  auto newton_polish = [&](const std::vector<std::size_t>& act) {
    const Eigen::Index m = 2 * static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd z(problem.y.size(), m);
    Vector x(m);
    Vector pen(static_cast<Eigen::Index>(act.size()));
    for (std::size_t a = 0; a < act.size(); ++a) {
      const Eigen::Index c = 2 * static_cast<Eigen::Index>(a);
      z.middleCols(c, 2) = problem.features[act[a]];
      x.segment<2>(c) = sol.gammas[act[a]];
      pen(static_cast<Eigen::Index>(a)) = penalty[act[a]];
    }
    const Eigen::MatrixXd ztz = 2.0 * (z.transpose() * z);
    auto f = [&](const Vector& v) {
      double total = (problem.y - z * v).squaredNorm();
      for (Eigen::Index a = 0; a < pen.size(); ++a) {
        total += 2.0 * pen(a) * v.segment<2>(2 * a).norm();
      }
      return total;
    };
    double fx = f(x);
    for (int it = 0; it < 100 && sol.iterations < options.max_iter; ++it) {
      const Vector res = problem.y - z * x;
      Vector grad = -2.0 * (z.transpose() * res);
      Eigen::MatrixXd hess = ztz;
      double worst = 0.0;
      bool degenerate = false;
      for (Eigen::Index a = 0; a < pen.size(); ++a) {
        const Eigen::Vector2d g = x.segment<2>(2 * a);
        const double rho = g.norm();
        if (rho <= kActivityThreshold * 1e-4) {
          degenerate = true;
          break;
        }
        grad.segment<2>(2 * a) += 2.0 * pen(a) * g / rho;
        worst = std::max(worst, 0.5 * grad.segment<2>(2 * a).norm());
        hess.block<2, 2>(2 * a, 2 * a) +=
            (2.0 * pen(a) / rho) *
            (Eigen::Matrix2d::Identity() - g * g.transpose() / (rho * rho));
      }
      if (degenerate || worst <= 0.1 * options.tol) break;

      Vector d = hess.ldlt().solve(-grad);
      double slope = grad.dot(d);
      if (!d.allFinite() || !(slope < 0.0)) {
        d = -grad;
        slope = -grad.squaredNorm();
      }
      // Trial points zero any group whose direction reverses (the step went
      // through the kink), so groups can leave the support exactly.
      double t = 1.0;
      bool accepted = false;
      bool dropped = false;
      for (int bt = 0; bt < 60; ++bt) {
        Vector trial = x + t * d;
        bool zeroed = false;
        for (Eigen::Index a = 0; a < pen.size(); ++a) {
          if (trial.segment<2>(2 * a).dot(x.segment<2>(2 * a)) <= 0.0) {
            trial.segment<2>(2 * a).setZero();
            zeroed = true;
          }
        }
        const double ft = f(trial);
        if (ft <= fx + 1e-4 * t * slope || (zeroed && ft < fx)) {
          x = trial;
          fx = ft;
          accepted = true;
          dropped = zeroed;
          break;
        }
        t *= 0.5;
      }
      if (accepted && dropped) {
        ++sol.iterations;
        for (std::size_t a = 0; a < act.size(); ++a) {
          sol.gammas[act[a]] = x.segment<2>(2 * static_cast<Eigen::Index>(a));
        }
        if (options.record_objective) {
          r = residual_of(problem, sol.gammas);
          sol.objective_history.push_back(objective());
        }
        r = residual_of(problem, sol.gammas);
        return true;
      }
      if (!accepted) break;
      ++sol.iterations;
      for (std::size_t a = 0; a < act.size(); ++a) {
        sol.gammas[act[a]] = x.segment<2>(2 * static_cast<Eigen::Index>(a));
      }
      if (options.record_objective) {
        r = residual_of(problem, sol.gammas);
        sol.objective_history.push_back(objective());
      }
    }
    r = residual_of(problem, sol.gammas);
    return false;
  };

  std::vector<std::size_t> active;
  while (sol.iterations < options.max_iter) {
    for (std::size_t i = 0; i < p; ++i) update(i);
    ++sol.iterations;
    if (options.record_objective) sol.objective_history.push_back(objective());

    active.clear();
    for (std::size_t i = 0; i < p; ++i) {
      if (!sol.gammas[i].isZero(0.0)) active.push_back(i);
    }
    for (int sweep = 0; sweep < kActiveSweeps && !active.empty() &&
                        sol.iterations < options.max_iter;
         ++sweep) {
      double step = 0.0;
      for (std::size_t i : active) step = std::max(step, update(i));
      ++sol.iterations;
      if (options.record_objective) sol.objective_history.push_back(objective());
      if (step < 0.1 * options.tol) break;
    }
    active.clear();
    for (std::size_t i = 0; i < p; ++i) {
      if (!sol.gammas[i].isZero(0.0)) active.push_back(i);
    }
    while (!active.empty() && newton_polish(active)) {
      active.erase(std::remove_if(active.begin(), active.end(),
                                  [&](std::size_t i) {
                                    return sol.gammas[i].isZero(0.0);
                                  }),
                   active.end());
    }

    r = residual_of(problem, sol.gammas);
    sol.kkt_violation = kkt_violation(problem, sol.gammas).max_violation;
    if (sol.kkt_violation <= options.tol) break;
  }

  sol.residual = residual_of(problem, sol.gammas);
  sol.kkt_violation = kkt_violation(problem, sol.gammas).max_violation;
  sol.converged = sol.kkt_violation <= options.tol;
  sol.objective = objective_value(problem, sol.gammas);
  return sol;
}

}  // namespace atomident
