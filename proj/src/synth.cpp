#include "mltsf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "mltsf/error.hpp"

namespace mltsf {

GlossVocabulary::GlossVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw ConfigError("vocabulary needs blank plus at least one gloss");
  if (names_[0] != "<blank>") throw ConfigError("vocabulary entry 0 must be \"<blank>\", got \"" + names_[0] + "\"");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("empty gloss name in vocabulary");
    if (!seen.insert(n).second) throw ConfigError("duplicate gloss name: " + n);
  }
}

GlossVocabulary GlossVocabulary::synthetic(std::size_t size) {
  std::vector<std::string> names{"<blank>"};
  for (std::size_t i = 1; i < size; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "G%02zu", i);
    names.emplace_back(buf);
  }
  return GlossVocabulary(std::move(names));
}

GlossVocabulary GlossVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    names.push_back(line);
  }
  return GlossVocabulary(std::move(names));
}

void GlossVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write vocabulary " + path.string());
  for (const auto& n : names_) out << n << '\n';
}

const std::string& GlossVocabulary::name(GlossId id) const {
  if (id >= names_.size()) throw ConfigError("gloss id " + std::to_string(id) + " outside vocabulary");
  return names_[id];
}

GlossId GlossVocabulary::id(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ConfigError("unknown gloss: " + name);
  return static_cast<GlossId>(it - names_.begin());
}

FeatureSequence::FeatureSequence(std::size_t frames_, std::size_t channels_, std::vector<double> values_)
    : frames(frames_), channels(channels_), values(std::move(values_)) {
  if (frames < 1 || channels < 1) throw GeometryError("feature sequence needs T >= 1 and C' >= 1");
  if (values.size() != frames * channels) throw GeometryError("feature sequence value count mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("feature sequence contains a non-finite value");
  }
}

std::span<const double> FeatureSequence::frame(std::size_t t) const {
  return std::span<const double>(values).subspan(t * channels, channels);
}

Tensor FeatureSequence::to_tensor() const { return Tensor::from({frames, channels}, values); }

void SynthConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("synth: vocab_size must be >= 2");
  if (channels < 1) throw ConfigError("synth: channels must be >= 1");
  if (duration_min < 1 || duration_min > duration_max) throw ConfigError("synth: need 1 <= d_min <= d_max");
  if (transition_min > transition_max) throw ConfigError("synth: need transition_min <= transition_max");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("synth: sigma must be >= 0");
  if (!(transition_scale >= 0.0) || !std::isfinite(transition_scale)) {
    throw ConfigError("synth: transition_scale must be >= 0");
  }
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined state
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> gloss_templates(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(mix_seed(config.seed, 0x7E3D));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(config.vocab_size * config.channels, 0.0);
  for (std::size_t g = 1; g < config.vocab_size; ++g) {
    for (std::size_t c = 0; c < config.channels; ++c) out[g * config.channels + c] = normal(rng);
  }
  return out;
}

LabeledSample synth_sample(const SynthConfig& config, std::size_t num_glosses, std::uint64_t seed) {
  config.validate();
  if (num_glosses < 1) throw ConfigError("synth: num_glosses must be >= 1");
  std::mt19937_64 rng(mix_seed(seed, 0x1AB3));
  std::uniform_int_distribution<GlossId> pick(1, static_cast<GlossId>(config.vocab_size - 1));
  GlossSequence labels(num_glosses);
  for (auto& g : labels) g = pick(rng);
  return synth_sample_for(config, labels, seed);
}

LabeledSample synth_sample_for(const SynthConfig& config, const GlossSequence& labels, std::uint64_t seed) {
  config.validate();
  if (labels.empty()) throw ConfigError("synth: empty label sequence");
  for (GlossId g : labels) {
    if (g == kBlank || g >= config.vocab_size) throw ConfigError("synth: label id " + std::to_string(g) + " invalid");
  }
  const std::vector<double> templates = gloss_templates(config);
  const std::size_t c = config.channels;
  std::mt19937_64 rng(mix_seed(seed, 0x5EED));
  std::uniform_int_distribution<std::size_t> duration(config.duration_min, config.duration_max);
  std::uniform_int_distribution<std::size_t> transition(config.transition_min, config.transition_max);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto round_f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  std::vector<double> values;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) {
      const std::size_t n = transition(rng);
      for (std::size_t f = 0; f < n; ++f) {
        for (std::size_t ch = 0; ch < c; ++ch) values.push_back(round_f32(config.transition_scale * normal(rng)));
      }
    }
    const std::size_t d = duration(rng);
    const double* tmpl = templates.data() + labels[i] * c;
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t ch = 0; ch < c; ++ch) values.push_back(round_f32(tmpl[ch] + config.sigma * normal(rng)));
    }
  }
  LabeledSample sample;
  const std::size_t frames = values.size() / c;
  sample.features = FeatureSequence(frames, c, std::move(values));
  sample.labels = labels;
  sample.seed = seed;
  return sample;
}

FeatureSequence temporal_rescale(const FeatureSequence& features, double factor) {
  if (!std::isfinite(factor)) throw NumericError("temporal_rescale: non-finite factor");
  if (factor < 0.5 || factor > 2.0) throw ConfigError("temporal_rescale: factor must lie in [0.5, 2]");
  if (factor == 1.0) return features;
  const std::size_t t_in = features.frames;
  const std::size_t c = features.channels;
  const auto t_out = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(t_in) * factor)));
  std::vector<double> out(t_out * c);
  for (std::size_t i = 0; i < t_out; ++i) {
    const double pos = t_out == 1 ? 0.0
                                  : static_cast<double>(i) * static_cast<double>(t_in - 1) /
                                        static_cast<double>(t_out - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= t_in) {
      std::copy_n(features.values.data() + (t_in - 1) * c, c, out.data() + i * c);
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double a = features.values[lo * c + ch];
      const double b = features.values[(lo + 1) * c + ch];
      out[i * c + ch] = frac == 0.0 ? a : a + frac * (b - a);
    }
  }
  return FeatureSequence(t_out, c, std::move(out));
}

FeatureSequence pad_short_sequence(const FeatureSequence& features, std::size_t min_len) {
  if (min_len < 1) throw ConfigError("pad_short_sequence: min_len must be >= 1");
  if (features.frames >= min_len) return features;
  std::vector<double> out = features.values;
  const auto last = features.frame(features.frames - 1);
  for (std::size_t t = features.frames; t < min_len; ++t) out.insert(out.end(), last.begin(), last.end());
  return FeatureSequence(min_len, features.channels, std::move(out));
}

}  // namespace mltsf
