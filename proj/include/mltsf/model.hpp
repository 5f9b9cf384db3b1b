#pragma once

#include <cstddef>
#include <cstdint>

#include "mltsf/encoder.hpp"
#include "mltsf/mltsf.hpp"
#include "mltsf/param_store.hpp"
#include "mltsf/synth.hpp"

namespace mltsf {

struct ModelConfig {
  bool use_mltsf = true;
  ScaleSet scales{{10, 7, 4}};
  MltsfVariant variant;
  EncoderConfig encoder{16, 32, 13, 3};
  // When set, the largest radius must equal the level-1 receptive field.
  // Ablations that vary the radii alone switch it off.
  bool strict_receptive_field = true;

  void validate() const;
  // Minimum T accepted by the forward pass (before label feasibility).
  std::size_t min_frames() const;
  // Minimum T for training on `labels`: also leaves room for every CTC alignment.
  std::size_t min_frames(const GlossSequence& labels) const;
};

/// Frame features -> [mLTSF] -> level-1 encoder -> level-2 encoder -> classifier.
/// Throws ConfigError when the configuration is inconsistent, including a
/// largest radius that differs from the encoder receptive field.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(ModelConfig config, ParamStore params);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // T x C' features (T >= min_frames()) -> T' x V logits, against `params`.
  Tensor logits(const Tensor& features, const ParamStore& params) const;
  Tensor logits(const FeatureSequence& features, const ParamStore& params) const;
  Tensor logits(const FeatureSequence& features) const { return logits(features, params_); }

  // Pads to min_frames() and decodes greedily with detached parameters.
  GlossSequence decode(const FeatureSequence& features) const;

 private:
  ModelConfig config_;
  ParamStore params_;
};

// Parameter store with the layout Model expects, freshly initialised from seed.
ParamStore init_model_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace mltsf
