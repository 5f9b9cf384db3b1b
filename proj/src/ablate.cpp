#include "mltsf/ablate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>

#include "mltsf/error.hpp"
#include "mltsf/train.hpp"

namespace mltsf {

namespace {

std::string radii_name(const std::vector<std::size_t>& radii) {
  std::string out = "k={";
  for (std::size_t i = 0; i < radii.size(); ++i) out += (i ? "," : "") + std::to_string(radii[i]);
  return out + "}";
}

TrainConfig with_scales(TrainConfig c, std::vector<std::size_t> radii) {
  c.model.scales.radii = std::move(radii);
  c.model.strict_receptive_field = false;
  return c;
}

}  // namespace

std::vector<std::string> ablation_suites() { return {"scales", "ptc", "selector", "aggregator", "attention"}; }

std::vector<AblationRow> ablation_suite(const std::string& suite, const TrainConfig& base) {
  std::vector<AblationRow> rows;
  if (suite == "scales") {
    TrainConfig none = base;
    none.model.use_mltsf = false;
    rows.push_back({"none", none});
    for (std::size_t r : base.model.scales.radii) rows.push_back({radii_name({r}), with_scales(base, {r})});
    rows.push_back({radii_name(base.model.scales.radii), base});
  } else if (suite == "ptc") {
    rows.push_back({"full", base});
    TrainConfig c = base;
    c.model.variant.use_rpe = false;
    rows.push_back({"w/o rpe", c});
    c = base;
    c.model.variant.use_tcn = false;
    rows.push_back({"w/o tcn", c});
    c = base;
    c.model.variant.pool = ops::PoolMode::kMean;
    rows.push_back({"mean pool", c});
  } else if (suite == "selector") {
    for (auto [name, mode] : {std::pair{"local", SelectorMode::kLocalTopK}, std::pair{"center", SelectorMode::kCenter},
                              std::pair{"global", SelectorMode::kGlobal}}) {
      TrainConfig c = base;
      c.model.variant.selector = mode;
      rows.push_back({name, c});
    }
  } else if (suite == "aggregator") {
    for (auto [name, mode] : {std::pair{"dynamic", AggregatorMode::kDynamic}, std::pair{"average", AggregatorMode::kAverage}}) {
      TrainConfig c = base;
      c.model.variant.aggregator = mode;
      rows.push_back({name, c});
    }
  } else if (suite == "attention") {
    rows.push_back({"convolver", base});
    TrainConfig c = base;
    c.model.variant.fusion = FusionMode::kSparseAttention;
    rows.push_back({"sparse attention", c});
  } else {
    throw ConfigError("unknown ablation suite \"" + suite + "\"");
  }
  for (auto& row : rows) row.config.validate();
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw MetricError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AblationResult> run_ablation(const std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seeds,
                                         const AblationProgress& progress) {
  std::vector<AblationResult> results(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) results[i].name = rows[i].name;
  for (std::uint64_t seed : seeds) {
    // Data depends only on the synthetic settings, which rows share.
    TrainConfig data_cfg = rows.front().config;
    data_cfg.synth.seed = seed;
    const SyntheticSplits data = make_synthetic_splits(data_cfg);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      TrainConfig c = rows[i].config;
      c.seed = seed;
      c.synth.seed = seed;
      TrainOptions opts;
      opts.eval_every_epoch = false;
      const auto start = std::chrono::steady_clock::now();
      const TrainResult r = train(c, data.train, data.dev, opts);
      results[i].seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const double w = r.trace.back().dev_wer;
      results[i].seeds.push_back(seed);
      results[i].dev_wer.push_back(w);
      if (progress) progress(rows[i].name, seed, w);
    }
  }
  for (auto& r : results) r.median_wer = median(r.dev_wer);
  return results;
}

std::string format_ablation_table(const std::vector<AblationResult>& results) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %10s  %s\n", "variant", "median WER", "per-seed WER (%)");
  out += line;
  for (const auto& r : results) {
    std::string per;
    for (std::size_t i = 0; i < r.dev_wer.size(); ++i) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%s%llu:%.1f", i ? " " : "", static_cast<unsigned long long>(r.seeds[i]),
                    100.0 * r.dev_wer[i]);
      per += buf;
    }
    std::snprintf(line, sizeof line, "%-20s %9.1f%%  %s\n", r.name.c_str(), 100.0 * r.median_wer, per.c_str());
    out += line;
  }
  return out;
}

}  // namespace mltsf
