#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "mltsf/error.hpp"
#include "mltsf/feature_io.hpp"
#include "mltsf/synth.hpp"

using namespace mltsf;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

std::uint64_t checksum(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (auto b : bytes) h = (h ^ b) * 0x100000001B3ull;
  return h;
}

}  // namespace

TEST(Vocabulary, BlankFirstUniqueNames) {
  EXPECT_THROW(GlossVocabulary({"A", "B"}), ConfigError);
  EXPECT_THROW(GlossVocabulary({"<blank>"}), ConfigError);
  EXPECT_THROW(GlossVocabulary({"<blank>", "A", "A"}), ConfigError);
  const GlossVocabulary v = GlossVocabulary::synthetic(13);
  EXPECT_EQ(v.size(), 13u);
  EXPECT_EQ(v.name(0), "<blank>");
  EXPECT_EQ(v.id("G12"), 12u);
}

TEST(Vocabulary, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "mltsf_vocab_test.txt";
  const GlossVocabulary v({"<blank>", "MONTAG", "REGEN"});
  v.save(path);
  EXPECT_EQ(GlossVocabulary::load(path).names(), v.names());
  std::filesystem::remove(path);
}

TEST(Synth, ZeroNoiseFixedDurations) {
  SynthConfig c;
  c.sigma = 0.0;
  c.duration_min = c.duration_max = 3;
  c.transition_min = c.transition_max = 2;
  const LabeledSample s = synth_sample_for(c, {1, 2}, 9);
  EXPECT_EQ(s.features.frames, 2u * 3u + 2u);
  for (std::size_t t = 1; t < 3; ++t) {
    for (std::size_t ch = 0; ch < c.channels; ++ch) EXPECT_EQ(s.features.frame(t)[ch], s.features.frame(0)[ch]);
  }
  for (std::size_t ch = 0; ch < c.channels; ++ch) EXPECT_EQ(s.features.frame(5)[ch], s.features.frame(7)[ch]);
}

TEST(Synth, DeterministicInSeed) {
  const SynthConfig c;
  EXPECT_EQ(synth_sample(c, 3, 42), synth_sample(c, 3, 42));
  EXPECT_NE(synth_sample(c, 3, 42).features, synth_sample(c, 3, 43).features);
}

TEST(Synth, LabelsAreNonBlankAndInRange) {
  SynthConfig c;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const LabeledSample s = synth_sample(c, 1 + seed % 5, seed);
    ASSERT_EQ(s.labels.size(), 1 + seed % 5);
    for (GlossId g : s.labels) {
      ASSERT_NE(g, kBlank);
      ASSERT_LT(g, c.vocab_size);
    }
  }
}

// Frames of the same gloss are more alike than frames of different glosses.
TEST(Synth, WithinGlossCosineExceedsCrossGloss) {
  SynthConfig c;
  c.sigma = 0.1;
  c.transition_min = c.transition_max = 1;
  double within = 0.0, across = 0.0;
  std::size_t nw = 0, na = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    // Frames 0 and 1 belong to gloss a (durations are >= 4); the last frame to b != a.
    const GlossId a = 1 + seed % 12;
    const GlossId b = 1 + (seed + 5) % 12;
    const LabeledSample s = synth_sample_for(c, {a, b}, seed);
    within += cosine(s.features.frame(0), s.features.frame(1));
    across += cosine(s.features.frame(0), s.features.frame(s.features.frames - 1));
    ++nw;
    ++na;
  }
  EXPECT_GT(within / nw, across / na);
  EXPECT_GT(within / nw, 0.9);
}

TEST(Rescale, LengthAndIdentity) {
  const LabeledSample s = synth_sample_for(SynthConfig{}, {1}, 3);
  FeatureSequence ten(10, 2, std::vector<double>(20, 1.0));
  EXPECT_EQ(temporal_rescale(ten, 1.2).frames, 12u);
  EXPECT_EQ(temporal_rescale(ten, 0.8).frames, 8u);
  EXPECT_EQ(temporal_rescale(s.features, 1.0), s.features);
  EXPECT_THROW(temporal_rescale(ten, std::nan("")), NumericError);
  EXPECT_THROW(temporal_rescale(ten, 3.0), ConfigError);
}

TEST(Rescale, RampMatchesHandInterpolation) {
  const FeatureSequence ramp(4, 1, {0, 1, 2, 3});
  const FeatureSequence out = temporal_rescale(ramp, 0.8);
  ASSERT_EQ(out.frames, 3u);  // round(3.2)
  // Endpoint-anchored positions i * (T-1)/(T'-1) = 0, 1.5, 3.
  const double want[] = {0.0, 1.5, 3.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.values[i], want[i], 1e-12);
}

TEST(Rescale, EndpointsPreservedWhenStretching) {
  const LabeledSample s = synth_sample(SynthConfig{}, 3, 17);
  for (double f : {1.0, 1.2, 1.7, 2.0}) {
    const FeatureSequence out = temporal_rescale(s.features, f);
    for (std::size_t ch = 0; ch < s.features.channels; ++ch) {
      EXPECT_EQ(out.frame(0)[ch], s.features.frame(0)[ch]);
      EXPECT_EQ(out.frame(out.frames - 1)[ch], s.features.frame(s.features.frames - 1)[ch]);
    }
  }
}

TEST(Pad, RepeatsLastFrame) {
  const FeatureSequence f(3, 1, {1, 2, 3});
  EXPECT_EQ(pad_short_sequence(f, 3), f);
  EXPECT_EQ(pad_short_sequence(f, 5).values, (std::vector<double>{1, 2, 3, 3, 3}));
  EXPECT_EQ(pad_short_sequence(FeatureSequence(5, 1, {1, 2, 3, 4, 5}), 5).frames, 5u);
}

TEST(FeatureFile, RoundTrip) {
  const LabeledSample s = synth_sample(SynthConfig{}, 4, 5);
  const auto path = std::filesystem::temp_directory_path() / "mltsf_roundtrip.mlts";
  write_features(path, s);
  const LabeledSample back = read_features(path, 13);
  EXPECT_EQ(back.features, s.features);
  EXPECT_EQ(back.labels, s.labels);
  std::filesystem::remove(path);
}

TEST(FeatureFile, LayoutIsLittleEndian) {
  const LabeledSample s{FeatureSequence(1, 1, {1.0}), {2}, 0};
  const auto bytes = encode_features(s);
  ASSERT_EQ(bytes.size(), 4u + 4 * 4 + 4 + 4);
  EXPECT_EQ(std::memcmp(bytes.data(), "MLTS", 4), 0);
  EXPECT_EQ(bytes[4], 1);   // version
  EXPECT_EQ(bytes[8], 1);   // T
  EXPECT_EQ(bytes[12], 1);  // C'
  EXPECT_EQ(bytes[16], 1);  // L
  EXPECT_EQ(bytes[20], 2);  // label
  EXPECT_EQ(bytes[27], 0x3F);  // 1.0f = 0x3F800000
  EXPECT_EQ(bytes[26], 0x80);
}

TEST(FeatureFile, StructuredParseErrors) {
  const LabeledSample s = synth_sample(SynthConfig{}, 2, 1);
  auto bytes = encode_features(s);
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_features(bad, 13);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
  EXPECT_THROW(decode_features(std::span(bytes).first(bytes.size() - 1), 13), ParseError);
  EXPECT_THROW(decode_features(std::span(bytes).first(10), 13), ParseError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_features(extra, 13), ParseError);
  // A label id >= V.
  EXPECT_THROW(decode_features(bytes, 2), ParseError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(decode_features(version, 13), ParseError);
}

TEST(FeatureFile, FuzzRoundTripChecksums) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    SynthConfig c;
    c.channels = 1 + rng() % 8;
    c.vocab_size = 2 + rng() % 12;
    c.duration_min = 1 + rng() % 3;
    c.duration_max = c.duration_min + rng() % 4;
    c.seed = rng();
    const LabeledSample s = synth_sample(c, 1 + rng() % 4, rng());
    const auto bytes = encode_features(s);
    const LabeledSample back = decode_features(bytes, c.vocab_size);
    ASSERT_EQ(checksum(encode_features(back)), checksum(bytes));
    ASSERT_EQ(back.features, s.features);
    ASSERT_EQ(back.labels, s.labels);
  }
}

TEST(FeatureFile, RandomCorruptionNeverCrashes) {
  std::mt19937_64 rng(7);
  const auto bytes = encode_features(synth_sample(SynthConfig{}, 3, 2));
  for (int i = 0; i < 2000; ++i) {
    auto b = bytes;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t j = 0; j < n; ++j) b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
    b.resize(rng() % (b.size() + 1));
    try {
      const LabeledSample s = decode_features(b, 13);
      ASSERT_EQ(s.features.values.size(), s.features.frames * s.features.channels);
    } catch (const ParseError&) {
    }
  }
}
