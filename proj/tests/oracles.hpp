#pragma once

// Reference implementations used only by the tests. None of them call the
// library routine they are compared against.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "atomident/group_lasso.hpp"
#include "atomident/lti.hpp"

namespace oracle {

using atomident::FeatureMatrix;
using atomident::GroupCoefficients;
using atomident::GroupLassoProblem;
using atomident::Pole;
using atomident::Vector;

/// y(t) = sum_{s=0}^{t} g(s) u(t-s), all zero-based.
inline Vector convolve(const Vector& g, const Vector& u) {
  Vector y = Vector::Zero(u.size());
  for (Eigen::Index t = 0; t < u.size(); ++t) {
    long double acc = 0.0L;
    for (Eigen::Index s = 0; s <= t && s < g.size(); ++s) acc += g(s) * u(t - s);
    y(t) = static_cast<double>(acc);
  }
  return y;
}

/// phi(t) = (1-|k|^2) sum_{s<t} k^{t-1-s} u(s), from explicit powers.
inline Eigen::VectorXcd atom_direct(const Pole& p, const Vector& u) {
  const std::complex<double> k = std::polar(p.alpha(), p.beta());
  const double gain = 1.0 - std::norm(k);
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(u.size());
  for (Eigen::Index t = 1; t < u.size(); ++t) {
    std::complex<long double> acc = 0.0L;
    for (Eigen::Index s = 0; s < t; ++s) {
      const std::complex<double> kp =
          std::polar(std::pow(p.alpha(), static_cast<double>(t - 1 - s)),
                     p.beta() * static_cast<double>(t - 1 - s));
      acc += std::complex<long double>(kp) * static_cast<long double>(u(s));
    }
    phi(t) = gain * std::complex<double>(acc);
  }
  return phi;
}

/// ||[2 Re phi, -2 Im phi]^T r||_2 from the direct atom response.
inline double score_direct(const Pole& p, const Vector& u, const Vector& r) {
  const Eigen::VectorXcd phi = atom_direct(p, u);
  const double a = 2.0 * phi.real().dot(r);
  const double b = -2.0 * phi.imag().dot(r);
  return std::hypot(a, b);
}

/// Objective ||y - Z x||^2 + 2 lambda sum w_i ||x_i||, written out by hand.
inline double objective(const GroupLassoProblem& p, const Vector& x) {
  Vector r = p.y;
  double pen = 0.0;
  for (std::size_t i = 0; i < p.features.size(); ++i) {
    const Eigen::Vector2d g = x.segment<2>(2 * static_cast<Eigen::Index>(i));
    r -= p.features[i] * g;
    pen += p.weight(i) * g.norm();
  }
  return r.squaredNorm() + 2.0 * p.lambda * pen;
}

/// Long-run accelerated proximal gradient with adaptive restart. Returns the
/// stacked coefficient vector.
inline Vector proximal_gradient(const GroupLassoProblem& p, int iters = 200000) {
  const Eigen::Index n = p.y.size();
  const Eigen::Index m = 2 * static_cast<Eigen::Index>(p.features.size());
  Eigen::MatrixXd z(n, m);
  for (std::size_t i = 0; i < p.features.size(); ++i) {
    z.middleCols(2 * static_cast<Eigen::Index>(i), 2) = p.features[i];
  }
  const double smax = Eigen::JacobiSVD<Eigen::MatrixXd>(z).singularValues()(0);
  const double lip = 2.0 * smax * smax;
  const double step = 1.0 / lip;
  Vector x = Vector::Zero(m), xo = x, v = x;
  double t = 1.0;
  double fo = objective(p, x);
  for (int it = 0; it < iters; ++it) {
    const Vector grad = -2.0 * z.transpose() * (p.y - z * v);
    Vector w = v - step * grad;
    for (Eigen::Index i = 0; i < m / 2; ++i) {
      const double thr = 2.0 * p.lambda * p.weight(static_cast<std::size_t>(i)) * step;
      const double nrm = w.segment<2>(2 * i).norm();
      w.segment<2>(2 * i) *= nrm > thr ? 1.0 - thr / nrm : 0.0;
    }
    xo = x;
    x = w;
    const double f = objective(p, x);
    if (f > fo) {  // restart momentum
      t = 1.0;
      v = x;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = x + ((t - 1.0) / tn) * (x - xo);
      t = tn;
    }
    fo = f;
  }
  return x;
}

/// Least squares through the normal equations (LDLT of Z^T Z).
inline Vector normal_equations(const Eigen::MatrixXd& z, const Vector& y) {
  return (z.transpose() * z).ldlt().solve(z.transpose() * y);
}

/// Poles drawn uniformly in [0.1, 0.95] x [0, pi].
inline std::vector<Pole> random_poles(std::mt19937_64& gen, int count) {
  std::uniform_real_distribution<double> a(0.1, 0.95), b(0.0, 3.14159);
  std::vector<Pole> out;
  for (int i = 0; i < count; ++i) out.emplace_back(a(gen), b(gen));
  return out;
}

inline Vector randn(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> d;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(gen);
  return v;
}

}  // namespace oracle
