#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mltsf/tensor.hpp"

namespace mltsf {

using GlossId = std::uint32_t;
using GlossSequence = std::vector<GlossId>;
inline constexpr GlossId kBlank = 0;

/// Gloss names indexed by id. Id 0 is always "<blank>".
class GlossVocabulary {
 public:
  explicit GlossVocabulary(std::vector<std::string> names);

  // "<blank>", "G01", "G02", ... with `size` entries in total.
  static GlossVocabulary synthetic(std::size_t size);
  // One name per line; line 0 must be "<blank>".
  static GlossVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return names_.size(); }
  const std::string& name(GlossId id) const;
  GlossId id(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

/// T x C' frame features, row-major.
struct FeatureSequence {
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t frames, std::size_t channels, std::vector<double> values);

  std::span<const double> frame(std::size_t t) const;
  Tensor to_tensor() const;
  bool operator==(const FeatureSequence&) const = default;
};

struct LabeledSample {
  FeatureSequence features;
  GlossSequence labels;
  std::uint64_t seed = 0;
  bool operator==(const LabeledSample&) const = default;
};

struct SynthConfig {
  std::size_t vocab_size = 13;  // including blank
  std::size_t channels = 16;
  std::size_t duration_min = 4;
  std::size_t duration_max = 14;
  double sigma = 0.3;
  std::size_t transition_min = 1;
  std::size_t transition_max = 3;
  double transition_scale = 0.1;  // std-dev of transition frames
  std::uint64_t seed = 1;         // determines the per-gloss templates

  void validate() const;
};

// Per-gloss template vectors, row g holds gloss g (row 0, blank, is zero).
std::vector<double> gloss_templates(const SynthConfig& config);

/// Draws `num_glosses` glosses uniformly from the non-blank vocabulary and
/// renders them. Pure function of (config, num_glosses, seed).
LabeledSample synth_sample(const SynthConfig& config, std::size_t num_glosses, std::uint64_t seed);

/// Renders a fixed gloss sequence: per gloss a duration in [d_min, d_max] of
/// noisy template copies, with low-norm transition frames between glosses.
/// Values are rounded to float so the sample survives the f32 file format.
LabeledSample synth_sample_for(const SynthConfig& config, const GlossSequence& labels, std::uint64_t seed);

/// Linear resampling along time to max(1, round(T * factor)) frames, with the
/// first and last frames anchored. factor must lie in [0.5, 2].
FeatureSequence temporal_rescale(const FeatureSequence& features, double factor);

// Repeats the last frame until T >= min_len.
FeatureSequence pad_short_sequence(const FeatureSequence& features, std::size_t min_len);

// Deterministic 64-bit mixing used to derive per-sample seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mltsf
