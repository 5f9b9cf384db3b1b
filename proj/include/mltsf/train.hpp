#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mltsf/config.hpp"
#include "mltsf/error.hpp"
#include "mltsf/gradcheck.hpp"
#include "mltsf/metrics.hpp"
#include "mltsf/model.hpp"
#include "mltsf/param_store.hpp"
#include "mltsf/synth.hpp"

namespace mltsf {

struct Dataset {
  GlossVocabulary vocab = GlossVocabulary::synthetic(2);
  std::vector<LabeledSample> samples;
};

// Train and dev splits of the synthetic benchmark described by config.
struct SyntheticSplits {
  Dataset train;
  Dataset dev;
};
SyntheticSplits make_synthetic_splits(const TrainConfig& config);

/// CTC loss plus lambda times the squared L2 norm of every parameter whose
/// name ends in ".weight" (conv filters and linear maps; biases, layer-norm
/// parameters and position embeddings are not regularised).
Tensor total_loss(const Tensor& ctc, const ParamStore& params, double lambda);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One bias-corrected Adam update from the gradients currently stored in
/// params. Throws NumericError naming the parameter if a gradient is not finite.
void adam_step(ParamStore& params, AdamState& state, double lr);

// lr * factor^floor(max(0, epoch - decay_start) / decay_interval)
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct Checkpoint {
  TrainConfig config;
  ParamStore params;
  ParamStore best_params;  // parameters at the best dev WER so far (may be empty)
  AdamState adam;
  std::size_t epoch = 0;   // completed epochs
  std::mt19937_64 rng;
  double best_dev_wer = -1.0;  // < 0 when no dev set was evaluated
  std::size_t best_epoch = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::vector<double> step_losses;  // total loss of each optimiser step
  double mean_loss = 0.0;
  double dev_wer = -1.0;
};

struct TrainOptions {
  std::optional<Checkpoint> resume;
  // Stop once this many epochs are complete (0: config.epochs).
  std::size_t stop_after = 0;
  // Evaluate dev WER after every epoch (otherwise only after the last one).
  bool eval_every_epoch = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> trace;
};

// Raised when the loss or a gradient stops being finite. Carries the state
// after the last finite optimiser step.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::shared_ptr<const Checkpoint> last)
      : NumericError(what), last_(std::move(last)) {}
  const Checkpoint& last_finite() const { return *last_; }

 private:
  std::shared_ptr<const Checkpoint> last_;
};

/// Mini-batch Adam on the mean per-sample CTC loss plus the weight penalty.
/// Each epoch shuffles with the seeded generator, optionally rescales each
/// sample in time by a factor from {0.8, 1.0, 1.2}, and pads short sequences
/// so that every label stays feasible. Bit-reproducible for a fixed seed.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& dev_set,
                  const TrainOptions& options = {});

// One sample's CTC loss, with padding applied.
Tensor sample_loss(const Model& model, const ParamStore& params, const LabeledSample& sample);

/// Greedy-decodes every sample and aggregates edit counts over the corpus.
/// Throws ConfigError naming both sizes if the vocabularies differ.
WerReport evaluate(const Model& model, const Dataset& data);
WerReport evaluate(const Checkpoint& ckpt, const Dataset& data);

/// Finite-difference check of the full training loss (CTC plus weight
/// penalty) over every model parameter, on one seeded T = gradcheck_frames
/// input with Gaussian features and labels {1, 2}.
GradReport model_gradcheck(const TrainConfig& config, double eps, double threshold = 1e-4);

// Dataset directory: vocab.txt plus *.mlts feature files, optionally split
// into train/ and dev/ subdirectories.
Dataset load_dataset(const std::filesystem::path& dir, const std::string& split = "");
void write_dataset(const std::filesystem::path& dir, const std::string& split, const Dataset& data);

}  // namespace mltsf
