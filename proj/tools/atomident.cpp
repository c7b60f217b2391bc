#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "atomident/bench.hpp"
#include "atomident/config.hpp"
#include "atomident/greedy.hpp"
#include "atomident/refine.hpp"
#include "atomident/report.hpp"
#include "atomident/rng.hpp"

using namespace atomident;
using namespace atomident::bench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_config(const Common& c) {
  json j = json::object();
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw std::runtime_error("cannot read " + c.config);
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("bad config: ") + e.what());
    }
  }
  ExperimentConfig cfg = parse_config(j);
  if (c.threads) cfg.threads = *c.threads;
  if (c.seed) cfg.base_seed = *c.seed;
  cfg.validate();
  return cfg;
}

IdentDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_dataset_csv(is);
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "base seed");
}

int cmd_generate(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  const Vector g = true_impulse(cfg, std::max(cfg.n_samples, kBenchmarkHorizon));
  const IdentDataset data = generate_dataset(g, cfg.n_samples, cfg.sigma2, cfg.base_seed);
  auto d = open_out(fs::path(c.out) / "dataset.csv");
  write_dataset_csv(d, data);
  auto gi = open_out(fs::path(c.out) / "impulse_true.csv");
  write_impulse_csv(gi, g);
  std::cout << "wrote " << cfg.n_samples << " samples to " << c.out << "\n";
  return 0;
}

int cmd_identify(const Common& c, const std::string& data_path,
                 const std::string& method_name, std::optional<double> lambda) {
  const ExperimentConfig cfg = load_config(c);
  const IdentDataset data = load_dataset(data_path);
  const MethodSpec method = method_from_name(method_name);
  const MethodSeeds seeds{derive_seed(cfg.base_seed, 1), derive_seed(cfg.base_seed, 2)};
  double lam = 0.0;
  if (lambda) {
    lam = *lambda;
  } else if (method.kind == MethodKind::SS) {
    lam = cfg.stability.lambda_fixed;
  } else if (method.kind != MethodKind::ARX) {
    lam = cfg.lambda_fixed ? *cfg.lambda_fixed
                           : select_lambda_cv(method, data, cfg.lambda_grid, seeds, cfg);
  }
  const MethodResult r = run_method(method, data, lam, seeds, cfg,
                                    static_cast<int>(data.size()));
  const fs::path out(c.out);
  json j{{"method", method.name}, {"lambda", lam}, {"model_order", r.model_order}};
  if (r.model) j["model"] = model_to_json(*r.model);
  json poles = json::array();
  for (const auto& p : r.poles) poles.push_back({p.alpha(), p.beta()});
  j["poles"] = poles;
  auto mj = open_out(out / "model.json");
  mj << j.dump(2) << "\n";
  auto gi = open_out(out / "impulse.csv");
  write_impulse_csv(gi, r.impulse);
  if (r.trace) {
    auto tr = open_out(out / "greedy_trace.csv");
    write_trace_csv(tr, *r.trace);
  }
  if (r.frequencies) {
    auto fr = open_out(out / "frequencies.csv");
    write_frequencies_csv(fr, *r.frequencies);
  }
  std::cout << method.name << ": lambda " << lam << ", model order " << r.model_order
            << "\n";
  return 0;
}

int cmd_select(const Common& c, const std::string& data_path) {
  ExperimentConfig cfg = load_config(c);
  const IdentDataset data = load_dataset(data_path);
  GreedyConfig g = cfg.greedy;
  g.lambda = cfg.stability.lambda_fixed;
  g.seed = derive_seed(cfg.base_seed, 1);
  const GreedyResult gr = run_greedy(data, g);
  StabilityConfig s = cfg.stability;
  s.seed = derive_seed(cfg.base_seed, 2);
  s.threads = cfg.threads;
  const StabilityResult sr = stability_select(data, gr.atoms, s);
  const SparseModel refit = ls_refit(data, sr.selected);
  const fs::path out(c.out);
  auto fr = open_out(out / "frequencies.csv");
  write_frequencies_csv(fr, sr.freqs);
  json sel = json::array();
  for (const auto& p : sr.selected) sel.push_back({p.alpha(), p.beta()});
  auto mj = open_out(out / "selection.json");
  mj << json{{"selected", sel},
             {"model_order", pole_set_order(sr.selected)},
             {"failed_fits", sr.freqs.failed_fits},
             {"refit", model_to_json(refit)}}
            .dump(2)
     << "\n";
  auto gi = open_out(out / "impulse.csv");
  write_impulse_csv(gi, model_impulse_response(refit, static_cast<int>(data.size())));
  std::cout << sr.selected.size() << " of " << gr.atoms.size()
            << " atoms selected, model order " << pole_set_order(sr.selected) << "\n";
  return 0;
}

void print_table(const BenchReport& r) {
  std::cout << std::left << std::setw(10) << "method" << std::right << std::setw(8) << "ok"
            << std::setw(8) << "failed" << std::setw(13) << "bias2" << std::setw(13)
            << "var" << std::setw(13) << "mse" << std::setw(10) << "median W"
            << std::setw(8) << "order\n";
  std::cout << std::setprecision(4);
  for (const auto& a : r.aggregates) {
    std::cout << std::left << std::setw(10) << a.method << std::right << std::setw(8)
              << a.runs_ok << std::setw(8) << a.runs_failed << std::setw(13) << a.bias2
              << std::setw(13) << a.variance << std::setw(13) << a.mse << std::setw(10)
              << a.median_fit << std::setw(8) << a.median_order << "\n";
  }
}

int cmd_bench(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  const BenchReport r = run_monte_carlo(cfg);
  emit_report(r, c.out);
  print_table(r);
  std::cout << "wall time " << r.seconds << " s; results in " << c.out << "\n";
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  BenchReport r = load_report(in);
  // Aggregates are recomputed from the per-run records.
  r.aggregates = aggregate(r.methods, r.g_true, r.runs);
  print_table(r);
  if (!out.empty()) emit_report(r, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse pole-location identification of linear systems"};
  app.require_subcommand(1);

  Common gen_c, id_c, sel_c, bench_c;
  auto* gen = app.add_subcommand("generate", "simulate an identification dataset");
  add_common(gen, gen_c);

  auto* id = app.add_subcommand("identify", "fit one method to a dataset");
  add_common(id, id_c);
  std::string id_data, id_method = "InfA";
  std::optional<double> id_lambda;
  id->add_option("--data", id_data, "dataset CSV (t,u,y)")->required();
  id->add_option("--method", id_method, "InfA, AdpInfA, SS, Atom, Atom2 or ARX");
  id->add_option("--lambda", id_lambda, "regularization weight (default: cross-validated)");

  auto* sel = app.add_subcommand("select", "complementary pairs stability selection");
  add_common(sel, sel_c);
  std::string sel_data;
  sel->add_option("--data", sel_data, "dataset CSV (t,u,y)")->required();

  auto* bench = app.add_subcommand("bench", "Monte Carlo study");
  add_common(bench, bench_c);

  auto* rep = app.add_subcommand("report", "summarize a bench output directory");
  std::string rep_in, rep_out;
  rep->add_option("--in", rep_in, "bench output directory")->required();
  rep->add_option("--out", rep_out, "re-emit the report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_c);
    if (*id) return cmd_identify(id_c, id_data, id_method, id_lambda);
    if (*sel) return cmd_select(sel_c, sel_data);
    if (*bench) return cmd_bench(bench_c);
    if (*rep) return cmd_report(rep_in, rep_out);
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
