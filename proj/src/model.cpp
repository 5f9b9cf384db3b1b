#include "mltsf/model.hpp"

#include <algorithm>
#include <random>

#include "mltsf/ctc.hpp"
#include "mltsf/error.hpp"

namespace mltsf {

void ModelConfig::validate() const {
  encoder.validate();
  if (!use_mltsf) return;
  scales.validate();
  const std::size_t field = level1_receptive_field(encoder.level1_filter);
  if (strict_receptive_field && scales.largest() != field) {
    throw ConfigError("largest selection radius " + std::to_string(scales.largest()) +
                      " must equal the level-1 receptive field " + std::to_string(field) + " (filter " +
                      std::to_string(encoder.level1_filter) + ")");
  }
}

std::size_t ModelConfig::min_frames() const {
  std::size_t n = 4;
  if (use_mltsf) n = std::max(n, scales.largest() + 1);
  return n;
}

std::size_t ModelConfig::min_frames(const GlossSequence& labels) const {
  return std::max(min_frames(), 4 * ctc_min_frames(labels));
}

ParamStore init_model_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParamStore store;
  if (config.use_mltsf) init_mltsf_params(store, config.encoder.channels, config.scales, rng);
  init_encoder_params(store, config.encoder, rng);
  return store;
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(init_model_params(config_, seed)) {}

Model::Model(ModelConfig config, ParamStore params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const ParamStore reference = init_model_params(config_, 0);
  if (reference.size() != params_.size()) throw ConfigError("parameter set does not match model configuration");
  for (const auto& [name, t] : reference) {
    if (!params_.contains(name) || params_.get(name).shape() != t.shape()) {
      throw ConfigError("parameter " + name + " missing or mis-shaped for this configuration");
    }
  }
}

Tensor Model::logits(const Tensor& features, const ParamStore& params) const {
  if (features.rank() != 2 || features.dim(1) != config_.encoder.channels) {
    throw GeometryError("model expects T x " + std::to_string(config_.encoder.channels) + " features, got " +
                        shape_string(features.shape()));
  }
  Tensor x = features;
  if (config_.use_mltsf) x = mltsf_forward(x, params, config_.scales, config_.variant);
  const EncoderParams enc = EncoderParams::bind(params);
  return classify(level2_forward(level1_forward(x, enc), enc), enc);
}

Tensor Model::logits(const FeatureSequence& features, const ParamStore& params) const {
  return logits(features.to_tensor(), params);
}

GlossSequence Model::decode(const FeatureSequence& features) const {
  const ParamStore frozen = params_.detached();
  return greedy_decode(logits(pad_short_sequence(features, config_.min_frames()), frozen));
}

}  // namespace mltsf
