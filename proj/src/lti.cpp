#include "atomident/lti.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "atomident/rng.hpp"

namespace atomident {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInput(std::string(what) + " contains non-finite samples");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidInput("malformed number in CSV: '" + s + "'");
  }
  while (pos < s.size() && (s[pos] == '\r' || s[pos] == ' ')) ++pos;
  if (pos != s.size()) throw InvalidInput("malformed number in CSV: '" + s + "'");
  return v;
}

std::string read_header(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw InvalidInput("empty CSV input");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  return header;
}

}  // namespace

Pole::Pole(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw InvalidInput("pole radius must lie in [0, 1)");
  }
  if (!(beta >= 0.0 && beta <= std::numbers::pi)) {
    throw InvalidInput("pole angle must lie in [0, pi]");
  }
}

std::complex<double> Pole::value() const {
  if (beta_ == 0.0) return {alpha_, 0.0};
  if (beta_ == std::numbers::pi) return {-alpha_, 0.0};
  return std::polar(alpha_, beta_);
}

bool Pole::is_real() const {
  return beta_ == 0.0 || beta_ == std::numbers::pi;
}

SparseModel::SparseModel(std::vector<ModelTerm> terms, double lambda,
                         SolverStats stats)
    : terms_(std::move(terms)), lambda_(lambda), stats_(stats) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!terms_[i].gamma.allFinite()) {
      throw InvalidInput("model coefficients must be finite");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (terms_[i].pole == terms_[j].pole) {
        throw InvalidInput("duplicate pole in model");
      }
    }
  }
}

SparseModel::SparseModel(std::span<const Pole> poles,
                         std::span<const GroupCoefficients> gammas,
                         double lambda, SolverStats stats)
    : SparseModel(
          [&] {
            if (poles.size() != gammas.size()) {
              throw InvalidInput("pole and coefficient counts differ");
            }
            std::vector<ModelTerm> t;
            t.reserve(poles.size());
            for (std::size_t i = 0; i < poles.size(); ++i) {
              t.push_back({poles[i], gammas[i]});
            }
            return t;
          }(),
          lambda, stats) {}

std::vector<ModelTerm> SparseModel::active_terms(double threshold) const {
  std::vector<ModelTerm> out;
  for (const auto& t : terms_) {
    if (t.gamma.norm() > threshold) out.push_back(t);
  }
  return out;
}

int SparseModel::model_order(double threshold) const {
  int n = 0;
  for (const auto& t : terms_) {
    if (t.gamma.norm() > threshold) n += t.pole.order();
  }
  return n;
}

int SparseModel::active_count(double threshold) const {
  int n = 0;
  for (const auto& t : terms_) {
    if (t.gamma.norm() > threshold) ++n;
  }
  return n;
}

void IdentDataset::validate() const {
  if (u.size() == 0) throw InvalidInput("dataset is empty");
  if (u.size() != y.size()) {
    throw InvalidInput("input and output lengths differ");
  }
  require_finite(u, "input");
  require_finite(y, "output");
}

ComplexVector atom_response(const Pole& pole, const Vector& u) {
  if (u.size() == 0) throw InvalidInput("input sequence is empty");
  require_finite(u, "input");
  const std::complex<double> k = pole.value();
  const double gain = 1.0 - std::norm(k);
  ComplexVector phi(u.size());
  phi(0) = 0.0;
  for (Eigen::Index t = 1; t < u.size(); ++t) {
    phi(t) = k * phi(t - 1) + gain * u(t - 1);
  }
  return phi;
}

AtomicFeature build_feature(const Pole& pole, const Vector& u) {
  const ComplexVector phi = atom_response(pole, u);
  AtomicFeature f{pole, FeatureMatrix(u.size(), 2)};
  f.zeta.col(0) = 2.0 * phi.real();
  f.zeta.col(1) = -2.0 * phi.imag();
  return f;
}

FeatureMatrix select_rows(const FeatureMatrix& zeta,
                          std::span<const Eigen::Index> rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = zeta.row(rows[i]);
  }
  return out;
}

Vector select_rows(const Vector& v, std::span<const Eigen::Index> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  }
  return out;
}

Vector model_impulse_response(const SparseModel& model, int horizon) {
  if (horizon < 1) throw InvalidInput("horizon must be positive");
  Vector g = Vector::Zero(horizon);
  for (const auto& term : model.terms()) {
    const std::complex<double> k = term.pole.value();
    const double kr = k.real();
    const double ki = k.imag();
    const double scale = 2.0 * (1.0 - (kr * kr + ki * ki));
    // Re(c k^m) with c = gamma0 + j gamma1, k^m tracked as a real pair.
    double pr = 1.0;
    double pi = 0.0;
    for (int t = 1; t < horizon; ++t) {
      g(t) += scale * (term.gamma(0) * pr - term.gamma(1) * pi);
      const double nr = pr * kr - pi * ki;
      const double ni = pr * ki + pi * kr;
      pr = nr;
      pi = ni;
    }
  }
  return g;
}

Vector transfer_function_impulse(std::span<const double> num,
                                 std::span<const double> den, int horizon) {
  if (horizon < 1) throw InvalidInput("horizon must be positive");
  if (den.empty() || den[0] == 0.0) {
    throw InvalidInput("denominator leading coefficient must be nonzero");
  }
  if (num.size() > den.size()) throw InvalidInput("transfer function is improper");
  const std::size_t n = den.size() - 1;
  // Numerator in powers of q^{-1}, aligned with the denominator.
  std::vector<double> b(n + 1, 0.0);
  const std::size_t offset = den.size() - num.size();
  for (std::size_t i = 0; i < num.size(); ++i) b[offset + i] = num[i];

  Vector h = Vector::Zero(horizon);
  for (int j = 0; j < horizon; ++j) {
    double acc = static_cast<std::size_t>(j) <= n ? b[j] : 0.0;
    for (std::size_t i = 1; i <= n && i <= static_cast<std::size_t>(j); ++i) {
      acc -= den[i] * h(j - static_cast<int>(i));
    }
    h(j) = acc / den[0];
  }
  return h;
}

Vector normalize_h2(const Vector& g) {
  const double norm = g.norm();
  if (norm == 0.0) throw InvalidInput("cannot normalize a zero response");
  return g / norm;
}

Vector benchmark_system(int horizon) {
  return normalize_h2(transfer_function_impulse(
      kBenchmarkNumerator, kBenchmarkDenominator, horizon));
}

Vector convolve_truncated(const Vector& g, const Vector& u) {
  const Eigen::Index n = u.size();
  Vector y = Vector::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index lags = std::min<Eigen::Index>(t + 1, g.size());
    double acc = 0.0;
    for (Eigen::Index s = 0; s < lags; ++s) acc += g(s) * u(t - s);
    y(t) = acc;
  }
  return y;
}

IdentDataset simulate_output(const Vector& g_true, const Vector& u,
                             double sigma2, std::uint64_t seed) {
  if (u.size() < 1) throw InvalidInput("sample count must be positive");
  if (!(sigma2 >= 0.0)) throw InvalidInput("noise variance must be >= 0");
  require_finite(u, "input");
  IdentDataset data{u, convolve_truncated(g_true, u), sigma2};
  if (sigma2 > 0.0) {
    Rng rng(seed, /*stream=*/1);
    std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
    for (Eigen::Index t = 0; t < data.y.size(); ++t) data.y(t) += noise(rng);
  }
  return data;
}

IdentDataset generate_dataset(const Vector& g_true, int n, double sigma2,
                              std::uint64_t seed) {
  if (n < 1) throw InvalidInput("sample count must be positive");
  Rng rng(seed, /*stream=*/0);
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector u(n);
  for (int t = 0; t < n; ++t) u(t) = unit(rng);
  return simulate_output(g_true, u, sigma2, seed);
}

double fit_metric(const Vector& g_true, const Vector& g_hat) {
  if (g_true.size() != g_hat.size() || g_true.size() == 0) {
    throw InvalidInput("impulse responses must have equal, positive length");
  }
  const double mean = g_true.mean();
  const double denom = (g_true.array() - mean).square().sum();
  if (!(denom > 0.0)) {
    throw DegenerateReference("reference impulse response is constant");
  }
  const double num = (g_true - g_hat).squaredNorm();
  return 100.0 * (1.0 - std::sqrt(num / denom));
}

BiasVariance bias_variance_mse(const Vector& g_true,
                               std::span<const Vector> runs) {
  if (runs.size() < 2) throw InvalidInput("need at least two runs");
  for (const auto& r : runs) {
    if (r.size() != g_true.size()) {
      throw InvalidInput("run length does not match the true response");
    }
  }
  Vector mean = Vector::Zero(g_true.size());
  for (const auto& r : runs) mean += r;
  mean /= static_cast<double>(runs.size());

  BiasVariance out;
  out.bias2 = (mean - g_true).squaredNorm();
  for (const auto& r : runs) out.variance += (r - mean).squaredNorm();
  out.variance /= static_cast<double>(runs.size());
  out.mse = out.bias2 + out.variance;
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x,
                           std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_dataset_csv(std::ostream& os, const IdentDataset& data) {
  data.validate();
  os << "t,u,y\n";
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    os << (t + 1) << ',' << format_double(data.u(t)) << ','
       << format_double(data.y(t)) << '\n';
  }
}

IdentDataset read_dataset_csv(std::istream& is) {
  if (read_header(is) != "t,u,y") throw InvalidInput("expected header t,u,y");
  std::vector<double> u, y;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw InvalidInput("expected 3 fields per row");
    u.push_back(parse_double(f[1]));
    y.push_back(parse_double(f[2]));
  }
  IdentDataset data{Eigen::Map<Vector>(u.data(), u.size()),
                    Eigen::Map<Vector>(y.data(), y.size())};
  data.validate();
  return data;
}

void write_impulse_csv(std::ostream& os, const Vector& g) {
  os << "t,g\n";
  for (Eigen::Index t = 0; t < g.size(); ++t) {
    os << (t + 1) << ',' << format_double(g(t)) << '\n';
  }
}

Vector read_impulse_csv(std::istream& is) {
  if (read_header(is) != "t,g") throw InvalidInput("expected header t,g");
  std::vector<double> g;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw InvalidInput("expected 2 fields per row");
    g.push_back(parse_double(f[1]));
  }
  return Eigen::Map<Vector>(g.data(), g.size());
}

}  // namespace atomident
