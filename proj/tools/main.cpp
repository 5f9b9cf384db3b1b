// mltsf command-line tool: train, eval, decode, gradcheck, synth, ablate.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mltsf/ablate.hpp"
#include "mltsf/ctc.hpp"
#include "mltsf/feature_io.hpp"
#include "mltsf/train.hpp"

namespace {

using namespace mltsf;

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out) {
  const TrainConfig config = load_config(config_path);
  const Dataset train_set = load_dataset(data_dir, "train");
  Dataset dev_set;
  if (std::filesystem::is_directory(std::filesystem::path(data_dir) / "dev")) dev_set = load_dataset(data_dir, "dev");
  TrainOptions opts;
  opts.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %3zu  lr %.3g  loss %.4f", r.epoch + 1, r.lr, r.mean_loss);
    if (r.dev_wer >= 0.0) std::printf("  dev WER %.2f%%", 100.0 * r.dev_wer);
    std::printf("\n");
    std::fflush(stdout);
  };
  try {
    const TrainResult result = train(config, train_set, dev_set, opts);
    save_checkpoint(out, result.checkpoint);
  } catch (const DivergenceError& e) {
    save_checkpoint(out, e.last_finite());
    std::fprintf(stderr, "%s\nlast finite state written to %s\n", e.what(), out.c_str());
    return 3;
  }
  std::printf("checkpoint written to %s\n", out.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& report_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto dir = std::filesystem::path(data_dir);
  const Dataset data = std::filesystem::is_directory(dir / "dev") ? load_dataset(dir, "dev") : load_dataset(dir);
  const WerReport report = evaluate(ckpt, data);
  std::printf("%s\n", format_report_text(report).c_str());
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << format_report_kv(report);
  }
  return 0;
}

int cmd_decode(const std::string& ckpt_path, const std::string& features_path, const std::string& vocab_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Model model(ckpt.config.model, ckpt.params);
  const std::size_t v = ckpt.config.model.encoder.vocab_size;
  const LabeledSample sample = read_features(features_path, v);
  const GlossVocabulary vocab = vocab_path.empty() ? GlossVocabulary::synthetic(v) : GlossVocabulary::load(vocab_path);
  const GlossSequence hyp = model.decode(sample.features);
  std::string line;
  for (GlossId g : hyp) line += (line.empty() ? "" : " ") + vocab.name(g);
  std::printf("%s\n", line.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& config_path, double eps) {
  const TrainConfig config = load_config(config_path);
  const GradReport report = model_gradcheck(config, eps);
  for (const auto& [name, e] : report.per_param) {
    std::printf("%-36s max rel err %.3e\n", name.c_str(), e.max_rel_error);
  }
  std::printf("global max %.3e (%s)  threshold %.0e  nudged %zu  unresolved %zu  %s\n", report.global_max,
              report.worst_param.c_str(), report.threshold, report.nudged, report.unresolved,
              report.passed ? "PASS" : "FAIL");
  return report.passed ? 0 : 1;
}

int cmd_synth(const std::string& config_path, std::size_t n, const std::string& out) {
  TrainConfig config = load_config(config_path);
  config.train_samples = n;
  if (config.dev_samples == 0) config.dev_samples = 1;
  const SyntheticSplits splits = make_synthetic_splits(config);
  write_dataset(out, "train", splits.train);
  write_dataset(out, "dev", splits.dev);
  std::printf("wrote %zu train and %zu dev samples to %s\n", splits.train.samples.size(), splits.dev.samples.size(),
              out.c_str());
  return 0;
}

int cmd_ablate(const std::string& suite, const std::string& config_path, std::vector<std::uint64_t> seeds) {
  const TrainConfig base = config_path.empty() ? TrainConfig{} : load_config(config_path);
  const auto rows = ablation_suite(suite, base);
  const auto results = run_ablation(rows, seeds, [](const std::string& row, std::uint64_t seed, double w) {
    std::fprintf(stderr, "  %-20s seed %llu  dev WER %.2f%%\n", row.c_str(), static_cast<unsigned long long>(seed),
                 100.0 * w);
  });
  std::printf("%s", format_ablation_table(results).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mLTSF-Net continuous sign recognition on frame features"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out, ckpt, features, vocab, report, suite;
  double eps = 1e-4;
  std::size_t n = 0;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--data-dir", data_dir)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", out)->required();

  auto* eval_cmd = app.add_subcommand("eval", "WER of a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data-dir", data_dir)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--report", report, "also write key=value report here");

  auto* decode_cmd = app.add_subcommand("decode", "greedy-decode one feature file");
  decode_cmd->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--features", features)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--vocab", vocab, "vocab.txt for gloss names")->check(CLI::ExistingFile);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter");
  grad_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  grad_cmd->add_option("--eps", eps)->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--n", n, "training samples")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", out)->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "variant grid on the synthetic benchmark");
  std::string suites;
  for (const auto& s : ablation_suites()) suites += (suites.empty() ? "" : ", ") + s;
  ablate_cmd->add_option("--suite", suite, suites)->required();
  ablate_cmd->add_option("--config", config_path, "base config (defaults otherwise)")->check(CLI::ExistingFile);
  ablate_cmd->add_option("--seeds", seeds)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(config_path, data_dir, out);
    if (*eval_cmd) return cmd_eval(ckpt, data_dir, report);
    if (*decode_cmd) return cmd_decode(ckpt, features, vocab);
    if (*grad_cmd) return cmd_gradcheck(config_path, eps);
    if (*synth_cmd) return cmd_synth(config_path, n, out);
    if (*ablate_cmd) return cmd_ablate(suite, config_path, seeds);
  } catch (const mltsf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
