#include "mltsf/encoder.hpp"

#include <cmath>
#include <string>

#include "mltsf/error.hpp"
#include "mltsf/ops.hpp"

namespace mltsf {

void EncoderConfig::validate() const {
  if (channels < 1 || out_channels < 1) throw ConfigError("encoder: channel counts must be >= 1");
  if (vocab_size < 2) throw ConfigError("encoder: vocabulary must hold blank plus one gloss");
  if (level1_filter < 1 || level1_filter % 2 == 0) {
    throw ConfigError("encoder: level-1 filter size must be odd, got " + std::to_string(level1_filter));
  }
}

std::size_t level1_receptive_field(std::size_t filter) {
  // r grows by (kernel - 1) * jump per layer; jump doubles after each pool.
  struct Layer {
    std::size_t kernel, stride;
  };
  const Layer layers[] = {{filter, 1}, {2, 2}, {filter, 1}, {2, 2}};
  std::size_t field = 1;
  std::size_t jump = 1;
  for (const Layer& l : layers) {
    field += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return field;
}

std::size_t encoded_length(std::size_t frames) { return frames / 2 / 2; }

EncoderParams EncoderParams::bind(const ParamStore& store) {
  EncoderParams p;
  p.l1_conv1_weight = store.get("encoder.level1.conv1.weight");
  p.l1_conv1_bias = store.get("encoder.level1.conv1.bias");
  p.l1_conv2_weight = store.get("encoder.level1.conv2.weight");
  p.l1_conv2_bias = store.get("encoder.level1.conv2.bias");
  p.l2_weight = store.get("encoder.level2.conv.weight");
  p.l2_bias = store.get("encoder.level2.conv.bias");
  p.cls_weight = store.get("classifier.weight");
  p.cls_bias = store.get("classifier.bias");
  return p;
}

void init_encoder_params(ParamStore& store, const EncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t c = config.channels;
  const std::size_t f = config.level1_filter;
  auto conv = [&](const std::string& name, std::size_t taps, std::size_t cin, std::size_t cout) {
    Tensor w = Tensor::zeros({taps, cin, cout});
    fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(taps * cin)), rng);
    store.add(name + ".weight", w);
    store.add(name + ".bias", Tensor::zeros({cout}));
  };
  conv("encoder.level1.conv1", f, c, c);
  conv("encoder.level1.conv2", f, c, c);
  conv("encoder.level2.conv", 3, c, config.out_channels);
  Tensor w = Tensor::zeros({config.out_channels, config.vocab_size});
  fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(config.out_channels)), rng);
  store.add("classifier.weight", w);
  store.add("classifier.bias", Tensor::zeros({config.vocab_size}));
}

Tensor level1_forward(const Tensor& s, const EncoderParams& params) {
  if (s.rank() != 2) throw GeometryError("level1_forward: input must be T x C'");
  if (s.dim(0) < 4) {
    throw GeometryError("level1_forward: T=" + std::to_string(s.dim(0)) + " is below the minimum of 4 frames");
  }
  const std::size_t f = params.l1_conv1_weight.dim(0);
  Tensor x = ops::conv1d(s, params.l1_conv1_weight, params.l1_conv1_bias, 1, (f - 1) / 2);
  x = ops::max_pool_time(ops::relu(x), 2, 2);
  x = ops::conv1d(x, params.l1_conv2_weight, params.l1_conv2_bias, 1, (f - 1) / 2);
  return ops::max_pool_time(ops::relu(x), 2, 2);
}

Tensor level2_forward(const Tensor& g1, const EncoderParams& params) {
  return ops::relu(ops::conv1d(g1, params.l2_weight, params.l2_bias, 1, 1));
}

Tensor classify(const Tensor& g2, const EncoderParams& params) {
  return ops::linear(g2, params.cls_weight, params.cls_bias);
}

}  // namespace mltsf
