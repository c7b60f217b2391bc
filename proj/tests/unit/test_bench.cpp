#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "atomident/bench.hpp"
#include "atomident/report.hpp"
#include "atomident/rng.hpp"
#include "oracles.hpp"

using namespace atomident;
using namespace atomident::bench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(std::vector<std::string> methods, int runs = 3) {
  json j{{"data", {{"N", 40}, {"sigma2", 0.1}}},
         {"mc", {{"n_runs", runs}, {"base_seed", 5}}},
         {"methods", methods},
         {"lambda", {{"grid", {0.1, 0.4, 1.6}}}},
         {"greedy", {{"p0", 10}, {"grid", {30, 30}}}},
         {"stability", {{"n_s", 4}}}};
  return parse_config(j);
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("atomident_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_config(json::object());
  EXPECT_EQ(c.n_samples, 100);
  EXPECT_EQ(c.methods.size(), 6u);
  ASSERT_EQ(c.lambda_grid.size(), 15u);
  EXPECT_DOUBLE_EQ(c.lambda_grid.front(), 0.05);
  EXPECT_DOUBLE_EQ(c.lambda_grid.back(), 5.0);
  EXPECT_DOUBLE_EQ(c.stability.lambda_fixed, 0.5);
  EXPECT_EQ(c.arx.na, 4);
  EXPECT_EQ(c.arx.nb, 2);
  EXPECT_EQ(c.arx.nk, 3);
}

TEST(Config, LowNoiseGrid) {
  const ExperimentConfig c = parse_config(json{{"data", {{"sigma2", 0.01}}}});
  EXPECT_DOUBLE_EQ(c.lambda_grid.front(), 0.005);
  EXPECT_DOUBLE_EQ(c.lambda_grid.back(), 0.5);
  EXPECT_DOUBLE_EQ(c.stability.lambda_fixed, 0.05);
  // Log spacing: constant ratio.
  for (std::size_t i = 2; i < c.lambda_grid.size(); ++i) {
    EXPECT_NEAR(c.lambda_grid[i] / c.lambda_grid[i - 1], c.lambda_grid[1] / c.lambda_grid[0], 1e-12);
  }
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config(json{{"mc", {{"n_runs", 0}}}}), InvalidInput);
  EXPECT_THROW(parse_config(json{{"methods", {"TCK"}}}), InvalidInput);
  EXPECT_THROW(parse_config(json{{"lambda", {{"grid", json::array()}}}}), InvalidInput);
  EXPECT_THROW(parse_config(json{{"cv", {{"holdout_fraction", 1.0}}}}), InvalidInput);
  EXPECT_THROW(parse_config(json{{"data", {{"N", "many"}}}}), InvalidInput);
  EXPECT_THROW(parse_config(json{{"stability", {{"tau", 0.4}}}}), InvalidInput);
}

TEST(Config, RoundTripThroughJson) {
  const ExperimentConfig c = small_config({"InfA", "Atom2"});
  const ExperimentConfig d = parse_config(to_json(c));
  EXPECT_EQ(to_json(c).dump(), to_json(d).dump());
}

TEST(Config, CustomSystemSetsArxOrders) {
  const ExperimentConfig c =
      parse_config(json{{"system", {{"num", {1.0}}, {"den", {1.0, -0.5}}}}, {"methods", {"ARX"}}});
  EXPECT_EQ(c.arx.na, 1);
  EXPECT_EQ(c.arx.nb, 1);
  EXPECT_EQ(c.arx.nk, 1);
}

TEST(CvFolds, HoldoutAndKFold) {
  CrossValidationConfig cv;
  const auto h = cv_folds(100, cv);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].validation.size(), 25u);
  EXPECT_EQ(h[0].validation.front(), 75);
  cv.k_folds = 4;
  const auto k = cv_folds(10, cv);
  ASSERT_EQ(k.size(), 4u);
  std::size_t total = 0;
  for (const auto& f : k) {
    total += f.validation.size();
    EXPECT_EQ(f.validation.size() + f.estimation.size(), 10u);
  }
  EXPECT_EQ(total, 10u);
}

TEST(Arx, NoiselessExactClass) {
  const ExperimentConfig cfg = parse_config(json{{"data", {{"sigma2", 0.0}}}, {"methods", {"ARX"}}});
  const Vector g = true_impulse(cfg, 600);
  const IdentDataset d = generate_dataset(g, 100, 0.0, 3);
  const MethodResult r = run_method(cfg.methods[0], d, 0.0, {}, cfg, 100);
  EXPECT_NEAR(fit_metric(evaluation_lags(g.head(100)), evaluation_lags(r.impulse)), 100.0, 1e-6);
  EXPECT_EQ(r.model_order, 4);
  EXPECT_EQ(r.poles.size(), 2u);
  EXPECT_FALSE(r.model.has_value());
}

TEST(Arx, ImpulseMatchesFilter) {
  ArxModel m;
  m.orders = {2, 1, 1};
  m.a = Vector(2);
  m.a << 0.5, -0.1;
  m.b = Vector::Constant(1, 2.0);
  // 2 q^{-1} / (1 - 0.5 q^{-1} + 0.1 q^{-2}) = 2q / (q^2 - 0.5 q + 0.1)
  const std::vector<double> num{2.0, 0.0}, den{1.0, -0.5, 0.1};
  EXPECT_LE((m.impulse(30) - transfer_function_impulse(num, den, 30)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(FixedAtoms, TruePoleFirstOrder) {
  const Pole k(0.7, 0.0);
  std::mt19937_64 gen(1);
  IdentDataset d;
  d.u = oracle::randn(gen, 80);
  d.y = build_feature(k, d.u).zeta * GroupCoefficients(0.8, 0.0);
  const auto r = fit_fixed_atoms(d, {k}, 1e-4, {});
  const SparseModel truth({ModelTerm{k, {0.8, 0.0}}});
  EXPECT_GE(fit_metric(evaluation_lags(model_impulse_response(truth, 80)),
                       evaluation_lags(model_impulse_response(r.model, 80))),
            99.0);
}

TEST(RunMethod, InfADegeneratesToAtom) {
  ExperimentConfig cfg = parse_config(json{{"greedy", {{"p0", 50}}}});
  const std::uint64_t seed = 17;
  const auto atoms = init_atoms(50, seed);
  IdentDataset d;
  std::mt19937_64 gen(2);
  d.u = oracle::randn(gen, 60);
  d.y = build_feature(atoms[3], d.u).zeta * GroupCoefficients(1.0, 0.3);
  MethodSpec inf = method_from_name("InfA"), atom = method_from_name("Atom");
  // Raise lambda until the fixed-atom fit already leaves no violating pole
  // on a fine grid; then the greedy loop has nothing to add.
  double lambda = 0.2 * (build_feature(atoms[3], d.u).zeta.transpose() * d.y).norm();
  for (;; lambda *= 1.5) {
    const MethodResult b = run_method(atom, d, lambda, {seed, 0}, cfg, 60);
    const Vector r = d.y - convolve_truncated(model_impulse_response(*b.model, 60), d.u);
    CandidateSearchConfig fine;
    fine.n_alpha = fine.n_beta = 240;
    if (search_candidate(r, d.u, fine).score < 0.9 * lambda) break;
  }
  const MethodResult a = run_method(inf, d, lambda, {seed, 0}, cfg, 60);
  const MethodResult b = run_method(atom, d, lambda, {seed, 0}, cfg, 60);
  ASSERT_TRUE(a.trace.has_value());
  ASSERT_EQ(a.trace->added(), 0);
  EXPECT_TRUE(a.impulse == b.impulse);
  EXPECT_EQ(a.poles, b.poles);
}

TEST(SelectLambda, SingleGrid) {
  const ExperimentConfig cfg = small_config({"InfA"});
  const IdentDataset d = generate_dataset(true_impulse(cfg, 600), 40, 0.1, 1);
  const std::vector<double> grid{0.3};
  EXPECT_EQ(select_lambda_cv(cfg.methods[0], d, grid, {1, 2}, cfg), 0.3);
}

TEST(SelectLambda, TinyBeatsHugeOnNoiselessData) {
  // Enough rows that the tiny-lambda fixed-atom fit is not underdetermined.
  ExperimentConfig cfg = small_config({"Atom"});
  const IdentDataset d = generate_dataset(true_impulse(cfg, 600), 300, 0.0, 1);
  const std::vector<double> grid{1e-3, 1e6};
  EXPECT_EQ(select_lambda_cv(cfg.methods[0], d, grid, {1, 2}, cfg), 1e-3);
}

TEST(SelectLambda, DeterministicAndTieBreak) {
  const ExperimentConfig cfg = small_config({"InfA"});
  const IdentDataset d = generate_dataset(true_impulse(cfg, 600), 40, 0.1, 2);
  const auto a = select_lambda_cv(cfg.methods[0], d, cfg.lambda_grid, {3, 4}, cfg);
  const auto b = select_lambda_cv(cfg.methods[0], d, cfg.lambda_grid, {3, 4}, cfg);
  EXPECT_EQ(a, b);
  // Two huge values both zero the model: equal scores, larger wins.
  const std::vector<double> grid{1e5, 1e6};
  EXPECT_EQ(select_lambda_cv(cfg.methods[0], d, grid, {3, 4}, cfg), 1e6);
  EXPECT_THROW(cv_scores(method_from_name("ARX"), d, grid, {}, cfg), InvalidInput);
}

TEST(MonteCarlo, NoiselessArx) {
  const ExperimentConfig cfg =
      parse_config(json{{"data", {{"N", 60}, {"sigma2", 0.0}}}, {"mc", {{"n_runs", 2}}},
                        {"methods", {"ARX"}}});
  const BenchReport r = run_monte_carlo(cfg);
  ASSERT_EQ(r.aggregates.size(), 1u);
  EXPECT_LE(r.aggregates[0].mse, 1e-10);
  EXPECT_EQ(r.aggregates[0].runs_ok, 2);
}

TEST(MonteCarlo, AggregatesAndIdentity) {
  const ExperimentConfig cfg = small_config({"InfA", "AdpInfA", "SS", "Atom", "ARX"});
  const BenchReport r = run_monte_carlo(cfg);
  EXPECT_EQ(r.runs.size(), 3u);
  for (const auto& a : r.aggregates) {
    EXPECT_EQ(a.runs_ok + a.runs_failed, 3);
    EXPECT_NEAR(a.mse, a.bias2 + a.variance, 1e-12);
  }
  // Recompute from the stored per-run artifacts.
  const auto again = aggregate(r.methods, r.g_true, r.runs);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].mse, r.aggregates[i].mse);
    EXPECT_EQ(again[i].median_fit, r.aggregates[i].median_fit);
  }
  for (const auto& run : r.runs) {
    const auto& m = run.methods.at("InfA");
    ASSERT_TRUE(m.ok);
    EXPECT_NEAR(m.fit, fit_metric(evaluation_lags(r.g_true), evaluation_lags(m.impulse)), 1e-12);
    EXPECT_TRUE(run.trace.has_value());
    const auto& ad = run.methods.at("AdpInfA");
    ASSERT_TRUE(ad.ok);
    EXPECT_EQ(ad.adaptive_counts.size(), 3u);
  }
}

TEST(MonteCarlo, DeterministicAcrossThreads) {
  ExperimentConfig cfg = small_config({"InfA", "SS", "ARX"});
  cfg.record_lambda_sweep = true;
  const std::string a = report_to_json(run_monte_carlo(cfg)).dump();
  cfg.threads = 3;
  const std::string b = report_to_json(run_monte_carlo(cfg)).dump();
  EXPECT_EQ(a, b);
}

TEST(Report, EmitAndLoadRoundTrip) {
  ExperimentConfig cfg = small_config({"InfA", "ARX"}, 2);
  cfg.record_lambda_sweep = true;
  const BenchReport r = run_monte_carlo(cfg);
  const fs::path dir = temp_dir("roundtrip");
  emit_report(r, dir);
  for (const char* f : {"fits.csv", "bias_variance.csv", "model_orders.csv", "poles.csv",
                        "lambda_sweep.csv", "greedy_trace_1.csv", "greedy_trace_2.csv",
                        "report.json", "timing.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const BenchReport back = load_report(dir);
  EXPECT_EQ(report_to_json(back).dump(), report_to_json(r).dump());
  const auto again = aggregate(back.methods, back.g_true, back.runs);
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].bias2, r.aggregates[i].bias2);
    EXPECT_EQ(again[i].variance, r.aggregates[i].variance);
  }
  // bias_variance.csv: header plus one row per method.
  std::istringstream bv(slurp(dir / "bias_variance.csv"));
  std::string line;
  int rows = 0;
  std::getline(bv, line);
  EXPECT_EQ(line, "method,bias2,var,mse");
  while (std::getline(bv, line)) ++rows;
  EXPECT_EQ(rows, 2);
  // 17 significant digits in CSVs.
  std::istringstream fits(slurp(dir / "fits.csv"));
  std::getline(fits, line);
  std::getline(fits, line);
  EXPECT_EQ(line.substr(line.rfind(',') + 1), format_double(r.runs[0].methods.at("InfA").fit));
  fs::remove_all(dir);
}

TEST(Report, EmptyReport) {
  const fs::path dir = temp_dir("empty");
  emit_report(BenchReport{}, dir);
  EXPECT_EQ(slurp(dir / "fits.csv"), "method,run,W\n");
  EXPECT_EQ(slurp(dir / "bias_variance.csv"), "method,bias2,var,mse\n");
  EXPECT_EQ(slurp(dir / "poles.csv"), "method,run,alpha,beta\n");
  const json j = json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(j.at("runs").empty());
  EXPECT_NO_THROW(load_report(dir));
  fs::remove_all(dir);
}

TEST(Report, ModelJsonRoundTrip) {
  const SparseModel m({ModelTerm{Pole(0.5, 1.0), {0.25, -1.5}}, ModelTerm{Pole(0.9, 0.0), {2.0, 0.0}}},
                      0.3, {12, 4.5});
  const json j = model_to_json(m, 1e-9);
  EXPECT_EQ(j.at("kkt_violation").get<double>(), 1e-9);
  const SparseModel back = model_from_json(j);
  ASSERT_EQ(back.terms().size(), 2u);
  EXPECT_EQ(back.terms()[0].pole, m.terms()[0].pole);
  EXPECT_EQ(back.terms()[1].gamma, m.terms()[1].gamma);
  EXPECT_EQ(back.lambda(), 0.3);
  EXPECT_THROW(model_from_json(json{{"terms", 3}}), InvalidInput);
}

TEST(Report, LoadRejectsGarbage) {
  const fs::path dir = temp_dir("garbage");
  fs::create_directories(dir);
  std::ofstream(dir / "report.json") << "{not json";
  EXPECT_THROW(load_report(dir), InvalidInput);
  fs::remove_all(dir);
}
