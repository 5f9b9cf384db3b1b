#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mltsf/config.hpp"

// Variant grids over the synthetic benchmark.
namespace mltsf {

struct AblationRow {
  std::string name;
  TrainConfig config;
};

struct AblationResult {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> dev_wer;  // final-epoch dev WER per seed
  double median_wer = 0.0;
  double seconds = 0.0;
};

// "scales", "ptc", "selector", "aggregator", "attention"
std::vector<std::string> ablation_suites();

/// Rows of a suite, derived from `base`. Rows that change the radii turn off
/// strict_receptive_field. Throws ConfigError for an unknown suite name.
std::vector<AblationRow> ablation_suite(const std::string& suite, const TrainConfig& base);

// Called after each (row, seed) run.
using AblationProgress = std::function<void(const std::string& row, std::uint64_t seed, double dev_wer)>;

/// Trains every row once per seed. For seed s both the training seed and the
/// synthetic data seed are set to s, so all rows of a seed share one dataset.
std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds,
                                         const AblationProgress& progress = {});

std::string format_ablation_table(const std::vector<AblationResult>& results);

double median(std::vector<double> values);

}  // namespace mltsf
