#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mltsf/param_store.hpp"
#include "mltsf/tensor.hpp"

// Two-level 1D-convolutional gloss feature encoder and the gloss classifier.
//   level 1: (conv F-S1-P(F-1)/2 -> ReLU -> maxpool M2-S2) x 2, C' -> C'
//   level 2: conv F3-S1-P1 -> ReLU, C' -> C^o
//   classifier: affine C^o -> V
namespace mltsf {

struct EncoderConfig {
  std::size_t channels = 16;      // C'
  std::size_t out_channels = 32;  // C^o
  std::size_t vocab_size = 13;    // V, including blank
  std::size_t level1_filter = 5;  // odd

  void validate() const;
};

/// Receptive field, in input frames, of one level-1 output position.
/// 3F + 1 for two conv(F, stride 1) + maxpool(2, stride 2) blocks; 16 for F = 5.
std::size_t level1_receptive_field(std::size_t filter);

// T' after level 1: floor(floor(T/2)/2).
std::size_t encoded_length(std::size_t frames);

struct EncoderParams {
  Tensor l1_conv1_weight, l1_conv1_bias;
  Tensor l1_conv2_weight, l1_conv2_bias;
  Tensor l2_weight, l2_bias;
  Tensor cls_weight, cls_bias;

  static EncoderParams bind(const ParamStore& store);
};

void init_encoder_params(ParamStore& store, const EncoderConfig& config, std::mt19937_64& rng);

// T x C' -> T' x C'. Throws GeometryError for T < 4.
Tensor level1_forward(const Tensor& s, const EncoderParams& params);
// T' x C' -> T' x C^o
Tensor level2_forward(const Tensor& g1, const EncoderParams& params);
// T' x C^o -> T' x V logits (unnormalized)
Tensor classify(const Tensor& g2, const EncoderParams& params);

}  // namespace mltsf
