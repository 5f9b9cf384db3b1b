#include "mltsf/feature_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "mltsf/error.hpp"

namespace mltsf {

namespace {

constexpr char kMagic[4] = {'M', 'L', 'T', 'S'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw ConfigError(std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }

  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("truncated feature file while reading ") + field, pos_);
    }
  }

  std::size_t pos() const { return pos_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_features(const LabeledSample& sample) {
  const FeatureSequence& f = sample.features;
  std::vector<std::uint8_t> out;
  out.reserve(20 + 4 * sample.labels.size() + 4 * f.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFeatureFileVersion);
  put_u32(out, to_u32(f.frames, "T"));
  put_u32(out, to_u32(f.channels, "C'"));
  put_u32(out, to_u32(sample.labels.size(), "label length"));
  for (GlossId g : sample.labels) put_u32(out, g);
  for (double v : f.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

LabeledSample decode_features(std::span<const std::uint8_t> bytes, std::size_t vocab_size) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("bad magic, expected \"MLTS\"", 0);
  r.skip(4);
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw ParseError("unsupported feature file version " + std::to_string(version), version_at);
  }
  const std::size_t t_at = r.pos();
  const std::uint32_t frames = r.u32("T");
  const std::uint32_t channels = r.u32("C'");
  const std::uint32_t length = r.u32("label length");
  if (frames == 0 || channels == 0) throw ParseError("T and C' must be positive", t_at);
  if (length == 0) throw ParseError("empty label sequence", t_at + 8);

  r.need(4ULL * length, "labels");
  GlossSequence labels(length);
  for (auto& g : labels) {
    const std::size_t at = r.pos();
    g = r.u32("label");
    if (g == kBlank || g >= vocab_size) {
      throw ParseError("label id " + std::to_string(g) + " invalid for vocabulary of size " +
                           std::to_string(vocab_size),
                       at);
    }
  }

  const std::size_t count = static_cast<std::size_t>(frames) * channels;
  r.need(4 * count, "feature values");
  std::vector<double> values(count);
  for (auto& v : values) {
    const std::size_t at = r.pos();
    v = static_cast<double>(r.f32("feature value"));
    if (!std::isfinite(v)) throw ParseError("non-finite feature value", at);
  }
  if (r.pos() != bytes.size()) throw ParseError("trailing bytes after feature values", r.pos());

  LabeledSample sample;
  sample.features = FeatureSequence(frames, channels, std::move(values));
  sample.labels = std::move(labels);
  return sample;
}

void write_features(const std::filesystem::path& path, const LabeledSample& sample) {
  const auto bytes = encode_features(sample);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write feature file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing feature file " + path.string());
}

LabeledSample read_features(const std::filesystem::path& path, std::size_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(bytes, vocab_size);
}

}  // namespace mltsf
