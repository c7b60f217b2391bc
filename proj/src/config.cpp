#include "atomident/config.hpp"

#include <cmath>

namespace atomident::bench {

using nlohmann::json;

namespace {

const char* method_name(MethodKind k) {
  switch (k) {
    case MethodKind::InfA: return "InfA";
    case MethodKind::AdpInfA: return "AdpInfA";
    case MethodKind::SS: return "SS";
    case MethodKind::Atom: return "Atom";
    case MethodKind::Atom2: return "Atom2";
    case MethodKind::ARX: return "ARX";
  }
  return "?";
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

MethodSpec method_from_name(const std::string& name) {
  for (auto k : {MethodKind::InfA, MethodKind::AdpInfA, MethodKind::SS,
                 MethodKind::Atom, MethodKind::Atom2, MethodKind::ARX}) {
    if (name == method_name(k)) {
      MethodSpec m;
      m.name = name;
      m.kind = k;
      if (k == MethodKind::Atom) m.atoms = 50;
      if (k == MethodKind::Atom2) m.atoms = 500;
      return m;
    }
  }
  throw InvalidInput("unknown method '" + name + "'");
}

void CrossValidationConfig::validate() const {
  if (k_folds > 1) return;
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw InvalidInput("holdout_fraction must lie in (0, 1)");
  }
}

std::vector<double> log_space(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi >= lo) || points < 1) {
    throw InvalidInput("log_space needs 0 < lo <= hi and points >= 1");
  }
  std::vector<double> out(static_cast<std::size_t>(points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    out[static_cast<std::size_t>(i)] = std::pow(10.0, a + frac * (b - a));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_lambda_grid(double sigma2) {
  if (sigma2 > 0.0) return log_space(0.5 * sigma2, 50.0 * sigma2, 15);
  return log_space(0.005, 0.5, 15);
}

void ExperimentConfig::validate() const {
  if (n_samples < 2) throw InvalidInput("data.N must be at least 2");
  if (!(sigma2 >= 0.0)) throw InvalidInput("data.sigma2 must be >= 0");
  if (n_runs < 1) throw InvalidInput("mc.n_runs must be at least 1");
  if (methods.empty()) throw InvalidInput("at least one method is required");
  if (denominator.empty() || numerator.size() > denominator.size()) {
    throw InvalidInput("system must be a proper transfer function");
  }
  bool needs_grid = false;
  for (const auto& m : methods) {
    if (m.kind != MethodKind::ARX && m.kind != MethodKind::SS && !m.lambda) {
      needs_grid = true;
    }
  }
  if (needs_grid && !lambda_fixed && lambda_grid.empty()) {
    throw InvalidInput("lambda grid must be non-empty for cross-validated methods");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw InvalidInput("lambda grid values must be positive");
  }
  if (threads < 1) throw InvalidInput("threads must be at least 1");
  cv.validate();
  greedy.search.validate();
  stability.validate();
  adaptive.validate();
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("system")) {
      const json& s = j.at("system");
      if (s.is_string()) {
        if (s.get<std::string>() != "benchmark") {
          throw InvalidInput("system must be \"benchmark\" or {num, den}");
        }
      } else {
        cfg.numerator = s.at("num").get<std::vector<double>>();
        cfg.denominator = s.at("den").get<std::vector<double>>();
        read_if(s, "normalize", cfg.normalize);
        // Known orders for the ARX baseline follow the custom system.
        const int n = static_cast<int>(cfg.denominator.size()) - 1;
        const int m = static_cast<int>(cfg.numerator.size()) - 1;
        cfg.arx = {n, m + 1, n - m};
      }
    }
    if (j.contains("data")) {
      read_if(j.at("data"), "N", cfg.n_samples);
      read_if(j.at("data"), "sigma2", cfg.sigma2);
    }
    if (j.contains("mc")) {
      read_if(j.at("mc"), "n_runs", cfg.n_runs);
      read_if(j.at("mc"), "base_seed", cfg.base_seed);
    }
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) {
        if (m.is_string()) {
          cfg.methods.push_back(method_from_name(m.get<std::string>()));
          continue;
        }
        MethodSpec spec = method_from_name(m.at("name").get<std::string>());
        read_if(m, "atoms", spec.atoms);
        if (m.contains("lambda")) spec.lambda = m.at("lambda").get<double>();
        if (m.contains("label")) spec.name = m.at("label").get<std::string>();
        cfg.methods.push_back(spec);
      }
    }
    if (cfg.methods.empty()) {
      for (const char* m : {"InfA", "AdpInfA", "SS", "Atom", "Atom2", "ARX"}) {
        cfg.methods.push_back(method_from_name(m));
      }
    }
    cfg.lambda_grid = default_lambda_grid(cfg.sigma2);
    cfg.stability.lambda_fixed = cfg.sigma2 > 0.0 ? 5.0 * cfg.sigma2 : 0.05;
    if (j.contains("lambda")) {
      const json& l = j.at("lambda");
      if (l.contains("grid")) cfg.lambda_grid = l.at("grid").get<std::vector<double>>();
      if (l.contains("grid_min") || l.contains("grid_max")) {
        cfg.lambda_grid = log_space(l.at("grid_min").get<double>(),
                                    l.at("grid_max").get<double>(),
                                    l.value("grid_points", 15));
      }
      if (l.contains("fixed")) cfg.lambda_fixed = l.at("fixed").get<double>();
    }
    if (j.contains("cv")) {
      read_if(j.at("cv"), "holdout_fraction", cfg.cv.holdout_fraction);
      read_if(j.at("cv"), "k_folds", cfg.cv.k_folds);
    }
    if (j.contains("greedy")) {
      const json& g = j.at("greedy");
      read_if(g, "p0", cfg.greedy.p0);
      read_if(g, "epsilon", cfg.greedy.epsilon);
      read_if(g, "l_max", cfg.greedy.l_max);
      if (g.contains("grid")) {
        const auto grid = g.at("grid").get<std::vector<int>>();
        if (grid.size() != 2) throw InvalidInput("greedy.grid must be [n_alpha, n_beta]");
        cfg.greedy.search.n_alpha = grid[0];
        cfg.greedy.search.n_beta = grid[1];
      }
      read_if(g, "multistart", cfg.greedy.search.multistart_count);
      read_if(g, "local_tol", cfg.greedy.search.local_tol);
      read_if(g, "confirm_factor", cfg.greedy.confirm_factor);
      read_if(g, "record_lambda_sweep", cfg.record_lambda_sweep);
    }
    if (j.contains("solver")) {
      read_if(j.at("solver"), "tol", cfg.greedy.solver.tol);
      read_if(j.at("solver"), "max_iter", cfg.greedy.solver.max_iter);
      cfg.adaptive.solver = cfg.greedy.solver;
      cfg.stability.solver = cfg.greedy.solver;
    }
    if (j.contains("adaptive")) {
      read_if(j.at("adaptive"), "m_s", cfg.adaptive.m_s);
      read_if(j.at("adaptive"), "eps_prime", cfg.adaptive.eps_prime);
    }
    if (j.contains("stability")) {
      read_if(j.at("stability"), "tau", cfg.stability.tau);
      read_if(j.at("stability"), "n_s", cfg.stability.n_s);
      read_if(j.at("stability"), "lambda_fixed", cfg.stability.lambda_fixed);
    }
    if (j.contains("arx")) {
      read_if(j.at("arx"), "na", cfg.arx.na);
      read_if(j.at("arx"), "nb", cfg.arx.nb);
      read_if(j.at("arx"), "nk", cfg.arx.nk);
    }
    read_if(j, "threads", cfg.threads);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (const auto& m : cfg.methods) {
    json jm{{"name", method_name(m.kind)}, {"label", m.name}};
    if (m.atoms > 0) jm["atoms"] = m.atoms;
    if (m.lambda) jm["lambda"] = *m.lambda;
    methods.push_back(jm);
  }
  json lambda{{"grid", cfg.lambda_grid}};
  if (cfg.lambda_fixed) lambda["fixed"] = *cfg.lambda_fixed;
  return json{
      {"system", {{"num", cfg.numerator}, {"den", cfg.denominator},
                  {"normalize", cfg.normalize}}},
      {"data", {{"N", cfg.n_samples}, {"sigma2", cfg.sigma2}}},
      {"mc", {{"n_runs", cfg.n_runs}, {"base_seed", cfg.base_seed}}},
      {"methods", methods},
      {"lambda", lambda},
      {"cv", {{"holdout_fraction", cfg.cv.holdout_fraction},
              {"k_folds", cfg.cv.k_folds}}},
      {"greedy", {{"p0", cfg.greedy.p0},
                  {"epsilon", cfg.greedy.epsilon},
                  {"l_max", cfg.greedy.l_max},
                  {"grid", {cfg.greedy.search.n_alpha, cfg.greedy.search.n_beta}},
                  {"multistart", cfg.greedy.search.multistart_count},
                  {"local_tol", cfg.greedy.search.local_tol},
                  {"confirm_factor", cfg.greedy.confirm_factor},
                  {"record_lambda_sweep", cfg.record_lambda_sweep}}},
      {"solver", {{"tol", cfg.greedy.solver.tol},
                  {"max_iter", cfg.greedy.solver.max_iter}}},
      {"adaptive", {{"m_s", cfg.adaptive.m_s},
                    {"eps_prime", cfg.adaptive.eps_prime}}},
      {"stability", {{"tau", cfg.stability.tau},
                     {"n_s", cfg.stability.n_s},
                     {"lambda_fixed", cfg.stability.lambda_fixed}}},
      {"arx", {{"na", cfg.arx.na}, {"nb", cfg.arx.nb}, {"nk", cfg.arx.nk}}},
  };
}

}  // namespace atomident::bench
