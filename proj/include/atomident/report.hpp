#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "atomident/bench.hpp"

namespace atomident::bench {

/// Machine-readable form of the whole report (timing excluded).
nlohmann::json report_to_json(const BenchReport& report);
BenchReport report_from_json(const nlohmann::json& j);

/// {lambda, objective, iterations, kkt_violation?, terms: [{alpha, beta,
/// gamma: [re, im]}]}
nlohmann::json model_to_json(const SparseModel& model,
                             std::optional<double> kkt_violation = {});
SparseModel model_from_json(const nlohmann::json& j);

/// Writes fits.csv, bias_variance.csv, model_orders.csv, poles.csv,
/// lambda_sweep.csv, adaptive_counts.csv, greedy_trace_<run>.csv,
/// report.json and timing.json into `dir` (created if missing).
void emit_report(const BenchReport& report, const std::filesystem::path& dir);

/// Reads report.json back from a directory written by emit_report.
BenchReport load_report(const std::filesystem::path& dir);

}  // namespace atomident::bench
