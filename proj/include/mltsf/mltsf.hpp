#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mltsf/ops.hpp"
#include "mltsf/param_store.hpp"
#include "mltsf/synth.hpp"
#include "mltsf/tensor.hpp"

// Multi-scale local-temporal similarity fusion: per-frame top-k neighbour
// selection inside local windows, position-aware convolution of each selected
// neighbourhood, and content-dependent fusion of the scales.
namespace mltsf {

enum class SelectorMode { kLocalTopK, kCenter, kGlobal };
enum class AggregatorMode { kDynamic, kAverage };
enum class SimilarityDivisor { kChannels, kSqrtChannels };
enum class SimilarityKind { kDot, kCosine };
// kSparseAttention replaces the convolver by a similarity-weighted average of the selected frames.
enum class FusionMode { kConvolver, kSparseAttention };

/// Window radii, one per scale, e.g. {16, 12, 8}.
struct ScaleSet {
  std::vector<std::size_t> radii;

  void validate() const;
  std::size_t largest() const;
  std::size_t count() const { return radii.size(); }
};

struct MltsfVariant {
  SelectorMode selector = SelectorMode::kLocalTopK;
  bool use_rpe = true;
  bool use_tcn = true;
  ops::PoolMode pool = ops::PoolMode::kMax;
  AggregatorMode aggregator = AggregatorMode::kDynamic;
  SimilarityDivisor divisor = SimilarityDivisor::kChannels;
  SimilarityKind similarity = SimilarityKind::kDot;
  FusionMode fusion = FusionMode::kConvolver;
};

struct SimilarityOptions {
  SimilarityDivisor divisor = SimilarityDivisor::kChannels;
  SimilarityKind kind = SimilarityKind::kDot;
};

/// Row-stochastic T x T matrix.
struct SimilarityMatrix {
  std::size_t size = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values).subspan(t * size, size);
  }
};

// Scaled pairwise scores before the row softmax: s_t . s_p / C' (or the cosine).
std::vector<double> similarity_scores(const FeatureSequence& s, const SimilarityOptions& options = {});
SimilarityMatrix similarity_matrix(const FeatureSequence& s, const SimilarityOptions& options = {});

struct Neighborhood {
  std::size_t center = 0;
  std::vector<std::size_t> indices;  // ascending

  std::vector<long long> offsets() const;
};

/// Picks k frames for centre t from one row of scores.
///
///   kLocalTopK: top-k inside [max(0, t-k), min(t+k, T-1)]
///   kGlobal:    top-k over the whole row
///   kCenter:    the k frames closest to t, scores ignored
///
/// Score ties go to the smaller |p - t|, then to the smaller p, which also
/// makes the centre itself win every tie. Throws InfeasibleError when fewer
/// than k candidates exist.
Neighborhood select_neighbors(std::span<const double> scores, std::size_t t, std::size_t k, SelectorMode mode);
Neighborhood select_neighbors(const SimilarityMatrix& d, std::size_t t, std::size_t k, SelectorMode mode);
std::vector<Neighborhood> select_all(const SimilarityMatrix& d, std::size_t k, SelectorMode mode);

/// Parameters of one scale of the convolver. Tensors share storage with the
/// ParamStore they were bound from.
struct ConvolverParams {
  Tensor rpe;  // (2k+1) x C', row k + (p - t)
  Tensor conv1_weight, conv1_bias, ln1_gamma, ln1_beta;
  Tensor conv2_weight, conv2_bias, ln2_gamma, ln2_beta;
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;

  static ConvolverParams bind(const ParamStore& store, const std::string& prefix);
};

struct AggregatorParams {
  Tensor weight;  // C' x n_scales
  Tensor bias;    // n_scales

  static AggregatorParams bind(const ParamStore& store, const std::string& prefix);
};

// Parameter names: "mltsf.scale<j>.*" per scale and "mltsf.cma.{weight,bias}".
std::string scale_prefix(std::size_t scale_index);

/// Registers all module parameters. Conv and linear weights are drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and LN beta start at 0, LN gamma
/// at 1, RPE tables at 0.
void init_mltsf_params(ParamStore& store, std::size_t channels, const ScaleSet& scales, std::mt19937_64& rng);

/// Position-aware temporal convolution for one scale. s is T x C', one
/// neighbourhood per frame, all of size k. Returns T x C'.
Tensor ptc_forward(const Tensor& s, std::span<const Neighborhood> neighborhoods, const ConvolverParams& params,
                   const MltsfVariant& variant);

/// Similarity-weighted average of each neighbourhood, weights d[t, p]
/// renormalized over the selected p. Returns T x C'.
Tensor sparse_attention_forward(const Tensor& s, std::span<const Neighborhood> neighborhoods,
                                const SimilarityMatrix& d);

/// Fuses per-scale outputs (T x n_scales x C'). Dynamic mode weights scale j at
/// frame t by softmax(s_t W + b)_j; average mode uses 1/n_scales.
Tensor cma_forward(const Tensor& s, const Tensor& per_scale, const AggregatorParams& params, AggregatorMode mode);
// The T x n_scales weight matrix used by cma_forward.
Tensor cma_weights(const Tensor& s, const AggregatorParams& params, AggregatorMode mode);

struct MltsfTrace {
  SimilarityMatrix similarity;
  std::vector<std::vector<Neighborhood>> neighborhoods;  // per scale
};

/// Full module: similarity once, selection and fusion per scale, then the
/// aggregator. Requires T >= largest radius + 1. Output is T x C'.
Tensor mltsf_forward(const FeatureSequence& s, const ParamStore& params, const ScaleSet& scales,
                     const MltsfVariant& variant, MltsfTrace* trace = nullptr);
// Same, with the features supplied as a tensor (e.g. to differentiate w.r.t. the input).
Tensor mltsf_forward(const Tensor& s, const ParamStore& params, const ScaleSet& scales, const MltsfVariant& variant,
                     MltsfTrace* trace = nullptr);

}  // namespace mltsf
