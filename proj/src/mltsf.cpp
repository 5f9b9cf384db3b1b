#include "mltsf/mltsf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mltsf/error.hpp"

namespace mltsf {

void ScaleSet::validate() const {
  if (radii.empty()) throw ConfigError("scale set is empty");
  std::set<std::size_t> seen;
  for (std::size_t k : radii) {
    if (k < 1) throw ConfigError("scale radius must be >= 1");
    if (!seen.insert(k).second) throw ConfigError("scale radii must be distinct, " + std::to_string(k) + " repeats");
  }
}

std::size_t ScaleSet::largest() const {
  validate();
  return *std::max_element(radii.begin(), radii.end());
}

std::vector<double> similarity_scores(const FeatureSequence& s, const SimilarityOptions& options) {
  const std::size_t t_len = s.frames;
  const std::size_t c = s.channels;
  if (t_len < 1 || c < 1) throw GeometryError("similarity: empty feature sequence");
  for (double v : s.values) {
    if (!std::isfinite(v)) throw NumericError("similarity: non-finite feature value");
  }
  std::vector<double> scores(t_len * t_len);
  if (options.kind == SimilarityKind::kCosine) {
    std::vector<double> norms(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      double n = 0.0;
      for (double v : s.frame(t)) n += v * v;
      norms[t] = std::sqrt(n);
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t p = 0; p < t_len; ++p) {
        const auto a = s.frame(t);
        const auto b = s.frame(p);
        const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
        const double denom = norms[t] * norms[p];
        scores[t * t_len + p] = denom > 1e-12 ? dot / denom : 0.0;
      }
    }
    return scores;
  }
  const double divisor =
      options.divisor == SimilarityDivisor::kChannels ? static_cast<double>(c) : std::sqrt(static_cast<double>(c));
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t p = 0; p < t_len; ++p) {
      const auto a = s.frame(t);
      const auto b = s.frame(p);
      scores[t * t_len + p] = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / divisor;
    }
  }
  return scores;
}

SimilarityMatrix similarity_matrix(const FeatureSequence& s, const SimilarityOptions& options) {
  Tensor scores = Tensor::from({s.frames, s.frames}, similarity_scores(s, options));
  Tensor d = ops::softmax_lastdim(scores);
  return SimilarityMatrix{s.frames, std::vector<double>(d.values().begin(), d.values().end())};
}

std::vector<long long> Neighborhood::offsets() const {
  std::vector<long long> out;
  out.reserve(indices.size());
  for (std::size_t p : indices) out.push_back(static_cast<long long>(p) - static_cast<long long>(center));
  return out;
}

Neighborhood select_neighbors(std::span<const double> scores, std::size_t t, std::size_t k, SelectorMode mode) {
  const std::size_t t_len = scores.size();
  if (t >= t_len) throw GeometryError("select_neighbors: centre " + std::to_string(t) + " outside sequence");
  if (k < 1) throw ConfigError("select_neighbors: k must be >= 1");

  std::size_t lo = 0;
  std::size_t hi = t_len - 1;
  if (mode != SelectorMode::kGlobal) {
    lo = t >= k ? t - k : 0;
    hi = std::min(t + k, t_len - 1);
  }
  const std::size_t available = hi - lo + 1;
  if (available < k) {
    throw InfeasibleError("select_neighbors: window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] holds " + std::to_string(available) + " candidates, fewer than k=" + std::to_string(k));
  }

  std::vector<std::size_t> candidates(available);
  std::iota(candidates.begin(), candidates.end(), lo);
  auto distance = [t](std::size_t p) { return p > t ? p - t : t - p; };
  auto closer = [&](std::size_t a, std::size_t b) {
    if (distance(a) != distance(b)) return distance(a) < distance(b);
    return a < b;
  };
  if (mode == SelectorMode::kCenter) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k), candidates.end(), closer);
  } else {
    // The centre is always kept: a dot product can rank a larger-norm neighbour above self.
    std::iter_swap(candidates.begin(), candidates.begin() + static_cast<long>(t - lo));
    std::partial_sort(candidates.begin() + 1, candidates.begin() + static_cast<long>(k), candidates.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return closer(a, b);
                      });
  }
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return Neighborhood{t, std::move(candidates)};
}

Neighborhood select_neighbors(const SimilarityMatrix& d, std::size_t t, std::size_t k, SelectorMode mode) {
  if (t >= d.size) throw GeometryError("select_neighbors: centre outside similarity matrix");
  return select_neighbors(d.row(t), t, k, mode);
}

std::vector<Neighborhood> select_all(const SimilarityMatrix& d, std::size_t k, SelectorMode mode) {
  std::vector<Neighborhood> out;
  out.reserve(d.size);
  for (std::size_t t = 0; t < d.size; ++t) out.push_back(select_neighbors(d, t, k, mode));
  return out;
}

std::string scale_prefix(std::size_t scale_index) { return "mltsf.scale" + std::to_string(scale_index) + "."; }

ConvolverParams ConvolverParams::bind(const ParamStore& store, const std::string& prefix) {
  ConvolverParams p;
  p.rpe = store.get(prefix + "rpe");
  p.conv1_weight = store.get(prefix + "conv1.weight");
  p.conv1_bias = store.get(prefix + "conv1.bias");
  p.ln1_gamma = store.get(prefix + "ln1.gamma");
  p.ln1_beta = store.get(prefix + "ln1.beta");
  p.conv2_weight = store.get(prefix + "conv2.weight");
  p.conv2_bias = store.get(prefix + "conv2.bias");
  p.ln2_gamma = store.get(prefix + "ln2.gamma");
  p.ln2_beta = store.get(prefix + "ln2.beta");
  p.fc1_weight = store.get(prefix + "fc1.weight");
  p.fc1_bias = store.get(prefix + "fc1.bias");
  p.fc2_weight = store.get(prefix + "fc2.weight");
  p.fc2_bias = store.get(prefix + "fc2.bias");
  return p;
}

AggregatorParams AggregatorParams::bind(const ParamStore& store, const std::string& prefix) {
  return AggregatorParams{store.get(prefix + "weight"), store.get(prefix + "bias")};
}

void init_mltsf_params(ParamStore& store, std::size_t channels, const ScaleSet& scales, std::mt19937_64& rng) {
  scales.validate();
  const std::size_t c = channels;
  const double conv_bound = 1.0 / std::sqrt(3.0 * static_cast<double>(c));
  const double fc_bound = 1.0 / std::sqrt(static_cast<double>(c));
  for (std::size_t j = 0; j < scales.count(); ++j) {
    const std::string pre = scale_prefix(j);
    const std::size_t k = scales.radii[j];
    store.add(pre + "rpe", Tensor::zeros({2 * k + 1, c}));
    for (const char* conv : {"conv1", "conv2"}) {
      Tensor w = Tensor::zeros({3, c, c});
      fill_uniform(w, conv_bound, rng);
      store.add(pre + conv + ".weight", w);
      store.add(pre + conv + ".bias", Tensor::zeros({c}));
    }
    for (const char* ln : {"ln1", "ln2"}) {
      store.add(pre + ln + ".gamma", Tensor::full({c}, 1.0));
      store.add(pre + ln + ".beta", Tensor::zeros({c}));
    }
    for (const char* fc : {"fc1", "fc2"}) {
      Tensor w = Tensor::zeros({c, c});
      fill_uniform(w, fc_bound, rng);
      store.add(pre + fc + ".weight", w);
      store.add(pre + fc + ".bias", Tensor::zeros({c}));
    }
  }
  Tensor w = Tensor::zeros({c, scales.count()});
  fill_uniform(w, fc_bound, rng);
  store.add("mltsf.cma.weight", w);
  store.add("mltsf.cma.bias", Tensor::zeros({scales.count()}));
}

namespace {

std::size_t common_k(std::span<const Neighborhood> neighborhoods, std::size_t frames) {
  if (neighborhoods.size() != frames) {
    throw ConfigError("expected one neighbourhood per frame: " + std::to_string(neighborhoods.size()) + " vs " +
                      std::to_string(frames));
  }
  const std::size_t k = neighborhoods.front().indices.size();
  for (const Neighborhood& n : neighborhoods) {
    if (n.indices.size() != k) throw ConfigError("neighbourhood sizes differ within one scale");
  }
  if (k < 1) throw ConfigError("empty neighbourhood");
  return k;
}

}  // namespace

Tensor ptc_forward(const Tensor& s, std::span<const Neighborhood> neighborhoods, const ConvolverParams& params,
                   const MltsfVariant& variant) {
  if (s.rank() != 2) throw GeometryError("ptc_forward: features must be T x C'");
  const std::size_t t_len = s.dim(0);
  const std::size_t k = common_k(neighborhoods, t_len);

  std::vector<std::size_t> gather;
  gather.reserve(t_len * k);
  for (const Neighborhood& n : neighborhoods) {
    for (std::size_t p : n.indices) {
      if (p >= t_len) throw GeometryError("ptc_forward: selected index outside sequence");
      gather.push_back(p);
    }
  }
  Tensor x = ops::gather_rows(s, gather, {t_len, k});

  if (variant.use_rpe) {
    const std::size_t rows = params.rpe.dim(0);
    const auto radius = static_cast<long long>((rows - 1) / 2);
    std::vector<std::size_t> rpe_rows;
    rpe_rows.reserve(t_len * k);
    for (const Neighborhood& n : neighborhoods) {
      for (long long off : n.offsets()) {
        // Offsets beyond the table (global selection) share the outermost embedding.
        rpe_rows.push_back(static_cast<std::size_t>(std::clamp(off, -radius, radius) + radius));
      }
    }
    x = ops::add(x, ops::gather_rows(params.rpe, rpe_rows, {t_len, k}));
  }

  if (variant.use_tcn) {
    x = ops::relu(ops::layer_norm(ops::conv1d(x, params.conv1_weight, params.conv1_bias, 1, 1), params.ln1_gamma,
                                  params.ln1_beta));
    x = ops::relu(ops::layer_norm(ops::conv1d(x, params.conv2_weight, params.conv2_bias, 1, 1), params.ln2_gamma,
                                  params.ln2_beta));
  }

  Tensor pooled = ops::pool_axis1(x, variant.pool);
  Tensor hidden = ops::gelu(ops::linear(pooled, params.fc1_weight, params.fc1_bias));
  return ops::linear(hidden, params.fc2_weight, params.fc2_bias);
}

Tensor sparse_attention_forward(const Tensor& s, std::span<const Neighborhood> neighborhoods,
                                const SimilarityMatrix& d) {
  if (s.rank() != 2) throw GeometryError("sparse_attention_forward: features must be T x C'");
  const std::size_t t_len = s.dim(0);
  if (d.size != t_len) throw GeometryError("sparse_attention_forward: similarity size mismatch");
  const std::size_t k = common_k(neighborhoods, t_len);
  std::vector<std::size_t> gather;
  std::vector<double> weights;
  gather.reserve(t_len * k);
  weights.reserve(t_len * k);
  for (const Neighborhood& n : neighborhoods) {
    const auto row = d.row(n.center);
    double total = 0.0;
    for (std::size_t p : n.indices) total += row[p];
    for (std::size_t p : n.indices) {
      gather.push_back(p);
      weights.push_back(total > 0.0 ? row[p] / total : 1.0 / static_cast<double>(k));
    }
  }
  Tensor x = ops::gather_rows(s, gather, {t_len, k});
  return ops::weighted_sum_axis1(Tensor::from({t_len, k}, std::move(weights)), x);
}

Tensor cma_weights(const Tensor& s, const AggregatorParams& params, AggregatorMode mode) {
  const std::size_t scales = params.bias.size();
  if (scales < 1) throw ConfigError("cma: needs at least one scale");
  if (mode == AggregatorMode::kAverage) {
    return Tensor::full({s.dim(0), scales}, 1.0 / static_cast<double>(scales));
  }
  return ops::softmax_lastdim(ops::linear(s, params.weight, params.bias));
}

Tensor cma_forward(const Tensor& s, const Tensor& per_scale, const AggregatorParams& params, AggregatorMode mode) {
  if (per_scale.rank() != 3 || per_scale.dim(0) != s.dim(0) || per_scale.dim(1) != params.bias.size()) {
    throw GeometryError("cma_forward: per-scale tensor " + shape_string(per_scale.shape()) +
                        " does not match features/aggregator");
  }
  return ops::weighted_sum_axis1(cma_weights(s, params, mode), per_scale);
}

Tensor mltsf_forward(const FeatureSequence& s, const ParamStore& params, const ScaleSet& scales,
                     const MltsfVariant& variant, MltsfTrace* trace) {
  return mltsf_forward(s.to_tensor(), params, scales, variant, trace);
}

Tensor mltsf_forward(const Tensor& s, const ParamStore& params, const ScaleSet& scales, const MltsfVariant& variant,
                     MltsfTrace* trace) {
  scales.validate();
  if (s.rank() != 2) throw GeometryError("mltsf_forward: features must be T x C'");
  const std::size_t t_len = s.dim(0);
  if (t_len < scales.largest() + 1) {
    throw InfeasibleError("mltsf_forward: T=" + std::to_string(t_len) + " is shorter than largest radius + 1 = " +
                          std::to_string(scales.largest() + 1) + "; pad the sequence first");
  }
  const FeatureSequence features(t_len, s.dim(1), std::vector<double>(s.values().begin(), s.values().end()));
  SimilarityMatrix d = similarity_matrix(features, SimilarityOptions{variant.divisor, variant.similarity});

  std::vector<Tensor> outputs;
  outputs.reserve(scales.count());
  std::vector<std::vector<Neighborhood>> selected;
  for (std::size_t j = 0; j < scales.count(); ++j) {
    std::vector<Neighborhood> hoods = select_all(d, scales.radii[j], variant.selector);
    if (variant.fusion == FusionMode::kSparseAttention) {
      outputs.push_back(sparse_attention_forward(s, hoods, d));
    } else {
      outputs.push_back(ptc_forward(s, hoods, ConvolverParams::bind(params, scale_prefix(j)), variant));
    }
    if (trace) selected.push_back(std::move(hoods));
  }
  Tensor fused = cma_forward(s, ops::stack_axis1(outputs), AggregatorParams::bind(params, "mltsf.cma."),
                             variant.aggregator);
  if (trace) {
    trace->similarity = std::move(d);
    trace->neighborhoods = std::move(selected);
  }
  return fused;
}

}  // namespace mltsf
