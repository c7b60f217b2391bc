#include "atomident/report.hpp"

#include <fstream>
#include <stdexcept>

namespace atomident::bench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto x = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

json poles_json(const std::vector<Pole>& poles) {
  json a = json::array();
  for (const auto& p : poles) a.push_back({p.alpha(), p.beta()});
  return a;
}

std::vector<Pole> poles_from(const json& j) {
  std::vector<Pole> out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

const char* term_name(Termination t) {
  return t == Termination::converged ? "converged" : "l_max_reached";
}

Termination term_from(const std::string& s) {
  if (s == "converged") return Termination::converged;
  if (s == "l_max_reached") return Termination::l_max_reached;
  throw InvalidInput("unknown termination '" + s + "'");
}

json trace_json(const GreedyTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"iter", s.iter}, {"alpha", s.pole.alpha()}, {"beta", s.pole.beta()},
                     {"score", s.score}, {"objective", s.objective},
                     {"active_count", s.active_count}});
  }
  return {{"initial_objective", t.initial_objective}, {"final_score", t.final_score},
          {"terminated_by", term_name(t.terminated_by)}, {"steps", steps}};
}

GreedyTrace trace_from(const json& j) {
  GreedyTrace t;
  t.initial_objective = j.at("initial_objective").get<double>();
  t.final_score = j.at("final_score").get<double>();
  t.terminated_by = term_from(j.at("terminated_by").get<std::string>());
  for (const auto& s : j.at("steps")) {
    t.steps.push_back({s.at("iter").get<int>(),
                       Pole(s.at("alpha").get<double>(), s.at("beta").get<double>()),
                       s.at("score").get<double>(), s.at("objective").get<double>(),
                       s.at("active_count").get<int>()});
  }
  return t;
}

json run_json(const MethodRun& m) {
  json j{{"ok", m.ok}, {"lambda", m.lambda}};
  if (!m.ok) {
    j["error"] = m.error;
    return j;
  }
  j["fit"] = m.fit;
  j["model_order"] = m.model_order;
  j["active_count"] = m.active_count;
  j["greedy_added"] = m.greedy_added;
  j["poles"] = poles_json(m.poles);
  j["impulse"] = vec_json(m.impulse);
  j["adaptive_counts"] = m.adaptive_counts;
  return j;
}

MethodRun run_from(const json& j) {
  MethodRun m;
  m.ok = j.at("ok").get<bool>();
  m.lambda = j.at("lambda").get<double>();
  if (!m.ok) {
    m.error = j.value("error", "");
    return m;
  }
  m.fit = j.at("fit").get<double>();
  m.model_order = j.at("model_order").get<int>();
  m.active_count = j.at("active_count").get<int>();
  m.greedy_added = j.at("greedy_added").get<int>();
  m.poles = poles_from(j.at("poles"));
  m.impulse = vec_from(j.at("impulse"));
  m.adaptive_counts = j.at("adaptive_counts").get<std::vector<int>>();
  return m;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

}  // namespace

json model_to_json(const SparseModel& model, std::optional<double> kkt_violation) {
  json terms = json::array();
  for (const auto& t : model.terms()) {
    terms.push_back({{"alpha", t.pole.alpha()}, {"beta", t.pole.beta()},
                     {"gamma", {t.gamma(0), t.gamma(1)}}});
  }
  json j{{"lambda", model.lambda()}, {"objective", model.stats().objective},
         {"iterations", model.stats().iterations}, {"model_order", model.model_order()},
         {"terms", terms}};
  if (kkt_violation) j["kkt_violation"] = *kkt_violation;
  return j;
}

SparseModel model_from_json(const json& j) {
  try {
    std::vector<ModelTerm> terms;
    for (const auto& t : j.at("terms")) {
      terms.push_back({Pole(t.at("alpha").get<double>(), t.at("beta").get<double>()),
                       GroupCoefficients(t.at("gamma").at(0).get<double>(),
                                         t.at("gamma").at(1).get<double>())});
    }
    return SparseModel(std::move(terms), j.at("lambda").get<double>(),
                       {j.at("iterations").get<long>(), j.at("objective").get<double>()});
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad model: ") + e.what());
  }
}

json report_to_json(const BenchReport& r) {
  json runs = json::array();
  for (const auto& rec : r.runs) {
    json methods = json::object();
    for (const auto& [name, m] : rec.methods) methods[name] = run_json(m);
    json sweep = json::array();
    for (const auto& p : rec.sweep) {
      sweep.push_back({{"lambda", p.lambda}, {"added", p.added},
                       {"terminated_by", term_name(p.terminated_by)}});
    }
    json jr{{"run", rec.run}, {"seed", rec.seed}, {"methods", methods}, {"sweep", sweep}};
    if (rec.trace) jr["trace"] = trace_json(*rec.trace);
    runs.push_back(jr);
  }
  json aggs = json::array();
  for (const auto& a : r.aggregates) {
    aggs.push_back({{"method", a.method}, {"runs_ok", a.runs_ok},
                    {"runs_failed", a.runs_failed}, {"bias2", a.bias2},
                    {"variance", a.variance}, {"mse", a.mse},
                    {"median_fit", a.median_fit}, {"median_order", a.median_order}});
  }
  return {{"config", r.config.is_null() ? json::object() : r.config},
          {"methods", r.methods},
          {"g_true", vec_json(r.g_true)},
          {"aggregates", aggs},
          {"runs", runs}};
}

BenchReport report_from_json(const json& j) {
  BenchReport r;
  try {
    r.config = j.at("config");
    r.methods = j.at("methods").get<std::vector<std::string>>();
    r.g_true = vec_from(j.at("g_true"));
    for (const auto& a : j.at("aggregates")) {
      MethodAggregate m;
      m.method = a.at("method").get<std::string>();
      m.runs_ok = a.at("runs_ok").get<int>();
      m.runs_failed = a.at("runs_failed").get<int>();
      m.bias2 = a.at("bias2").get<double>();
      m.variance = a.at("variance").get<double>();
      m.mse = a.at("mse").get<double>();
      // NaN medians are written as null.
      m.median_fit = a.at("median_fit").is_null() ? std::nan("") : a.at("median_fit").get<double>();
      m.median_order = a.at("median_order").is_null() ? std::nan("") : a.at("median_order").get<double>();
      r.aggregates.push_back(m);
    }
    for (const auto& jr : j.at("runs")) {
      RunRecord rec;
      rec.run = jr.at("run").get<int>();
      rec.seed = jr.at("seed").get<std::uint64_t>();
      for (const auto& [name, m] : jr.at("methods").items()) rec.methods[name] = run_from(m);
      for (const auto& p : jr.at("sweep")) {
        rec.sweep.push_back({p.at("lambda").get<double>(), p.at("added").get<int>(),
                             term_from(p.at("terminated_by").get<std::string>())});
      }
      if (jr.contains("trace")) rec.trace = trace_from(jr.at("trace"));
      r.runs.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad report: ") + e.what());
  }
  return r;
}

void emit_report(const BenchReport& r, const fs::path& dir) {
  fs::create_directories(dir);

  auto fits = open_out(dir / "fits.csv");
  fits << "method,run,W\n";
  auto orders = open_out(dir / "model_orders.csv");
  orders << "method,run,model_order,active_count\n";
  auto poles = open_out(dir / "poles.csv");
  poles << "method,run,alpha,beta\n";
  auto sweep = open_out(dir / "lambda_sweep.csv");
  sweep << "run,lambda,added,terminated_by\n";
  auto adapt = open_out(dir / "adaptive_counts.csv");
  adapt << "run,pass,active_count\n";
  for (const auto& name : r.methods) {
    for (const auto& rec : r.runs) {
      auto it = rec.methods.find(name);
      if (it == rec.methods.end() || !it->second.ok) continue;
      const MethodRun& m = it->second;
      fits << name << ',' << rec.run << ',' << format_double(m.fit) << '\n';
      orders << name << ',' << rec.run << ',' << m.model_order << ',' << m.active_count
             << '\n';
      for (const auto& p : m.poles) {
        poles << name << ',' << rec.run << ',' << format_double(p.alpha()) << ','
              << format_double(p.beta()) << '\n';
      }
    }
  }
  for (const auto& rec : r.runs) {
    for (const auto& p : rec.sweep) {
      sweep << rec.run << ',' << format_double(p.lambda) << ',' << p.added << ','
            << term_name(p.terminated_by) << '\n';
    }
    for (const auto& [name, m] : rec.methods) {
      if (!m.ok || m.adaptive_counts.empty()) continue;
      for (std::size_t k = 0; k < m.adaptive_counts.size(); ++k) {
        adapt << rec.run << ',' << k << ',' << m.adaptive_counts[k] << '\n';
      }
    }
    if (rec.trace) {
      auto tr = open_out(dir / ("greedy_trace_" + std::to_string(rec.run) + ".csv"));
      write_trace_csv(tr, *rec.trace);
    }
  }

  auto bv = open_out(dir / "bias_variance.csv");
  bv << "method,bias2,var,mse\n";
  for (const auto& a : r.aggregates) {
    bv << a.method << ',' << format_double(a.bias2) << ',' << format_double(a.variance)
       << ',' << format_double(a.mse) << '\n';
  }

  auto js = open_out(dir / "report.json");
  js << report_to_json(r).dump(2) << '\n';
  auto timing = open_out(dir / "timing.json");
  timing << json{{"seconds", r.seconds}}.dump(2) << '\n';
}

BenchReport load_report(const fs::path& dir) {
  std::ifstream is(dir / "report.json");
  if (!is) throw std::runtime_error("cannot read " + (dir / "report.json").string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad report.json: ") + e.what());
  }
  BenchReport r = report_from_json(j);
  std::ifstream t(dir / "timing.json");
  if (t) {
    try {
      r.seconds = json::parse(t).value("seconds", 0.0);
    } catch (const json::exception&) {
    }
  }
  return r;
}

}  // namespace atomident::bench
