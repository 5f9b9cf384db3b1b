#include "mltsf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "mltsf/error.hpp"

namespace mltsf {

TrainConfig TrainConfig::long_schedule() {
  TrainConfig c;
  c.lr = 1e-4;
  c.l2 = 1e-4;
  c.epochs = 60;
  c.decay_start = 40;
  c.decay_interval = 5;
  c.decay_factor = 0.5;
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (decay_interval < 1) throw ConfigError("decay_interval must be >= 1");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (glosses_min < 1 || glosses_min > glosses_max) throw ConfigError("need 1 <= synth_glosses_min <= synth_glosses_max");
  synth_config().validate();
}

SynthConfig TrainConfig::synth_config() const {
  SynthConfig s = synth;
  s.channels = model.encoder.channels;
  s.vocab_size = model.encoder.vocab_size;
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: invalid value for " + key + ": \"" + value + "\"");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  // from_chars for double is unavailable in older libstdc++; strtod is locale-sensitive but
  // fine for the C locale the tools run in.
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
    throw ConfigError("config: invalid value for " + key + ": \"" + value + "\"");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config: " + key + " must be 0/1/true/false, got \"" + value + "\"");
}

template <typename E>
E parse_enum(const std::string& key, const std::string& value, const std::map<std::string, E>& names) {
  auto it = names.find(value);
  if (it == names.end()) {
    std::string options;
    for (const auto& [n, e] : names) options += (options.empty() ? "" : "|") + n;
    throw ConfigError("config: " + key + " must be one of " + options + ", got \"" + value + "\"");
  }
  return it->second;
}

template <typename E>
std::string enum_name(E v, const std::map<std::string, E>& names) {
  for (const auto& [n, e] : names) {
    if (e == v) return n;
  }
  return "?";
}

const std::map<std::string, SelectorMode> kSelectors{
    {"local", SelectorMode::kLocalTopK}, {"center", SelectorMode::kCenter}, {"global", SelectorMode::kGlobal}};
const std::map<std::string, ops::PoolMode> kPools{{"max", ops::PoolMode::kMax}, {"mean", ops::PoolMode::kMean}};
const std::map<std::string, AggregatorMode> kAggregators{{"dynamic", AggregatorMode::kDynamic},
                                                         {"average", AggregatorMode::kAverage}};
const std::map<std::string, FusionMode> kFusions{{"convolver", FusionMode::kConvolver},
                                                 {"sparse_attention", FusionMode::kSparseAttention}};
const std::map<std::string, SimilarityKind> kSimilarities{{"dot", SimilarityKind::kDot},
                                                          {"cosine", SimilarityKind::kCosine}};
const std::map<std::string, SimilarityDivisor> kDivisors{{"channels", SimilarityDivisor::kChannels},
                                                         {"sqrt_channels", SimilarityDivisor::kSqrtChannels}};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

#define SIZE_FIELD(name, member)                                                                              \
  Field {                                                                                                     \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_number<std::size_t>(k, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.member); }                                       \
  }
#define DOUBLE_FIELD(name, member)                                                                       \
  Field {                                                                                                \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }, \
        [](const TrainConfig& c) { return fmt_double(c.member); }                                      \
  }
#define BOOL_FIELD(name, member)                                                                       \
  Field {                                                                                              \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }, \
        [](const TrainConfig& c) { return std::string(c.member ? "1" : "0"); }                       \
  }
#define ENUM_FIELD(name, member, table)                                                                           \
  Field {                                                                                                         \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_enum(k, v, table); }, \
        [](const TrainConfig& c) { return enum_name(c.member, table); }                                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BOOL_FIELD("use_mltsf", model.use_mltsf),
      Field{"scales",
            [](TrainConfig& c, const std::string& k, const std::string& v) {
              std::vector<std::size_t> radii;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) radii.push_back(parse_number<std::size_t>(k, trim(item)));
              c.model.scales.radii = std::move(radii);
            },
            [](const TrainConfig& c) {
              std::string out;
              for (std::size_t r : c.model.scales.radii) out += (out.empty() ? "" : ",") + std::to_string(r);
              return out;
            }},
      ENUM_FIELD("selector", model.variant.selector, kSelectors),
      BOOL_FIELD("use_rpe", model.variant.use_rpe),
      BOOL_FIELD("use_tcn", model.variant.use_tcn),
      ENUM_FIELD("pool", model.variant.pool, kPools),
      ENUM_FIELD("aggregator", model.variant.aggregator, kAggregators),
      ENUM_FIELD("fusion", model.variant.fusion, kFusions),
      ENUM_FIELD("similarity", model.variant.similarity, kSimilarities),
      ENUM_FIELD("similarity_divisor", model.variant.divisor, kDivisors),
      SIZE_FIELD("channels", model.encoder.channels),
      SIZE_FIELD("out_channels", model.encoder.out_channels),
      SIZE_FIELD("vocab_size", model.encoder.vocab_size),
      SIZE_FIELD("level1_filter", model.encoder.level1_filter),
      BOOL_FIELD("strict_receptive_field", model.strict_receptive_field),
      DOUBLE_FIELD("lr", lr),
      DOUBLE_FIELD("l2", l2),
      SIZE_FIELD("epochs", epochs),
      SIZE_FIELD("decay_start", decay_start),
      SIZE_FIELD("decay_interval", decay_interval),
      DOUBLE_FIELD("decay_factor", decay_factor),
      SIZE_FIELD("batch_size", batch_size),
      Field{"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); },
            [](const TrainConfig& c) { return std::to_string(c.seed); }},
      BOOL_FIELD("augment", augment),
      Field{"synth_seed",
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.synth.seed = parse_number<std::uint64_t>(k, v); },
            [](const TrainConfig& c) { return std::to_string(c.synth.seed); }},
      DOUBLE_FIELD("synth_sigma", synth.sigma),
      SIZE_FIELD("synth_duration_min", synth.duration_min),
      SIZE_FIELD("synth_duration_max", synth.duration_max),
      SIZE_FIELD("synth_transition_min", synth.transition_min),
      SIZE_FIELD("synth_transition_max", synth.transition_max),
      DOUBLE_FIELD("synth_transition_scale", synth.transition_scale),
      SIZE_FIELD("synth_glosses_min", glosses_min),
      SIZE_FIELD("synth_glosses_max", glosses_max),
      SIZE_FIELD("synth_train", train_samples),
      SIZE_FIELD("synth_dev", dev_samples),
      SIZE_FIELD("gradcheck_frames", gradcheck_frames),
  };
  return table;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
    }
    it->set(config, key, value);
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace mltsf
