#include "mltsf/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "mltsf/ctc.hpp"
#include "mltsf/feature_io.hpp"
#include "mltsf/ops.hpp"

namespace mltsf {

SyntheticSplits make_synthetic_splits(const TrainConfig& config) {
  config.validate();
  const SynthConfig synth = config.synth_config();
  const std::size_t span = config.glosses_max - config.glosses_min + 1;
  auto generate = [&](std::size_t count, std::uint64_t split_tag) {
    Dataset d;
    d.vocab = GlossVocabulary::synthetic(synth.vocab_size);
    d.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t seed = mix_seed(mix_seed(synth.seed, split_tag), i);
      const std::size_t glosses = config.glosses_min + mix_seed(seed, 0x61) % span;
      d.samples.push_back(synth_sample(synth, glosses, seed));
    }
    return d;
  };
  return SyntheticSplits{generate(config.train_samples, 1), generate(config.dev_samples, 2)};
}

Tensor total_loss(const Tensor& ctc, const ParamStore& params, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("total_loss: lambda must be >= 0");
  if (lambda == 0.0) return ctc;
  std::vector<Tensor> terms;
  for (const auto& [name, t] : params) {
    if (name.ends_with(".weight")) terms.push_back(ops::sum_squares(t));
  }
  if (terms.empty()) return ctc;
  Tensor penalty = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) penalty = ops::add(penalty, terms[i]);
  return ops::add(ctc, ops::scale(penalty, lambda));
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + name);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(t.size(), 0.0);
      v.assign(t.size(), 0.0);
    }
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  const std::size_t past = epoch > config.decay_start ? epoch - config.decay_start : 0;
  return config.lr * std::pow(config.decay_factor, static_cast<double>(past / config.decay_interval));
}

Tensor sample_loss(const Model& model, const ParamStore& params, const LabeledSample& sample) {
  const FeatureSequence padded = pad_short_sequence(sample.features, model.config().min_frames(sample.labels));
  return ctc_nll(model.logits(padded, params), sample.labels);
}

WerReport evaluate(const Model& model, const Dataset& data) {
  if (data.samples.empty()) throw MetricError("evaluate: empty dataset");
  if (data.vocab.size() != model.config().encoder.vocab_size) {
    throw ConfigError("vocabulary mismatch: model has " + std::to_string(model.config().encoder.vocab_size) +
                      " entries, dataset has " + std::to_string(data.vocab.size()));
  }
  const ParamStore frozen = model.params().detached();
  EditStats total;
  for (const LabeledSample& s : data.samples) {
    const FeatureSequence padded = pad_short_sequence(s.features, model.config().min_frames());
    const GlossSequence hyp = greedy_decode(model.logits(padded, frozen));
    total += edit_stats(s.labels, hyp);
  }
  return make_report(total, data.samples.size());
}

WerReport evaluate(const Checkpoint& ckpt, const Dataset& data) {
  return evaluate(Model(ckpt.config.model, ckpt.params.clone()), data);
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& dev_set,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.samples.empty()) throw ConfigError("train: empty training set");
  if (train_set.vocab.size() != config.model.encoder.vocab_size) {
    throw ConfigError("vocabulary mismatch: config has " + std::to_string(config.model.encoder.vocab_size) +
                      " entries, training data has " + std::to_string(train_set.vocab.size()));
  }

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  if (options.resume) {
    ck = *options.resume;
    if (format_config(ck.config) != format_config(config)) throw ConfigError("train: resume checkpoint config differs");
    ck.params = ck.params.clone();
    ck.best_params = ck.best_params.clone();
  } else {
    ck.config = config;
    ck.params = init_model_params(config.model, config.seed);
    ck.rng.seed(mix_seed(config.seed, 0x7A1));
  }
  const Model model(config.model, ck.params);  // validates layout; shares tensors with ck.params
  const std::size_t last_epoch = options.stop_after ? std::min(options.stop_after, config.epochs) : config.epochs;
  static constexpr double kFactors[] = {0.8, 1.0, 1.2};

  std::vector<std::size_t> order(train_set.samples.size());
  while (ck.epoch < last_epoch) {
    EpochRecord rec;
    rec.epoch = ck.epoch;
    rec.lr = lr_schedule(ck.epoch, config);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), ck.rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      try {
        std::vector<Tensor> losses;
        for (std::size_t i = start; i < stop; ++i) {
          LabeledSample sample = train_set.samples[order[i]];
          if (config.augment) {
            const double factor = kFactors[std::uniform_int_distribution<int>(0, 2)(ck.rng)];
            sample.features = temporal_rescale(sample.features, factor);
          }
          losses.push_back(sample_loss(model, ck.params, sample));
        }
        Tensor loss = total_loss(ops::mean(losses), ck.params, config.l2);
        ck.params.zero_grad();
        loss.backward();
        adam_step(ck.params, ck.adam, rec.lr);
        rec.step_losses.push_back(loss.item());
      } catch (const NumericError& e) {
        throw DivergenceError(std::string("training diverged in epoch ") + std::to_string(ck.epoch) + ": " + e.what(),
                              std::make_shared<const Checkpoint>(ck));
      }
    }
    rec.mean_loss = std::accumulate(rec.step_losses.begin(), rec.step_losses.end(), 0.0) /
                    static_cast<double>(rec.step_losses.size());
    ++ck.epoch;

    if (!dev_set.samples.empty() && (options.eval_every_epoch || ck.epoch == last_epoch)) {
      rec.dev_wer = evaluate(model, dev_set).wer;
      if (ck.best_dev_wer < 0.0 || rec.dev_wer < ck.best_dev_wer) {
        ck.best_dev_wer = rec.dev_wer;
        ck.best_epoch = ck.epoch;
        ck.best_params = ck.params.clone();
      }
    }
    if (options.on_epoch) options.on_epoch(rec);
    result.trace.push_back(std::move(rec));
  }
  return result;
}

GradReport model_gradcheck(const TrainConfig& config, double eps, double threshold) {
  config.validate();
  const std::size_t frames = config.gradcheck_frames;
  const std::size_t c = config.model.encoder.channels;
  std::mt19937_64 rng(mix_seed(config.seed, 0x6C));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(frames * c);
  for (auto& v : values) v = normal(rng);
  const GlossSequence labels{1, static_cast<GlossId>(std::min<std::size_t>(2, config.model.encoder.vocab_size - 1))};
  const Tensor features = Tensor::from({frames, c}, std::move(values));
  const Model model(config.model, config.seed);
  ParamStore params = model.params().clone();
  auto fn = [&](ParamStore& p) { return total_loss(ctc_nll(model.logits(features, p), labels), p, config.l2); };
  return finite_diff_check(fn, params, eps, threshold);
}

// Checkpoint layout (little-endian), see docs/checkpoint_format.md.
namespace {

constexpr char kCkptMagic[4] = {'M', 'L', 'C', 'K'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_tensor_header(Writer& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.values()) w.f64(v);
}

std::pair<std::string, Tensor> read_tensor(Reader& r) {
  std::string name = r.str("parameter name");
  const std::size_t at = r.pos();
  const std::uint32_t rank = r.u32("rank");
  if (rank == 0 || rank > 8) throw ParseError("implausible tensor rank for " + name, at);
  Shape shape(rank);
  for (auto& d : shape) {
    d = r.u32("dimension");
    if (d == 0) throw ParseError("zero dimension for " + name, r.pos() - 4);
  }
  const std::size_t n = numel(shape);
  r.need(8 * n, "tensor values");
  std::vector<double> values(n);
  for (auto& v : values) v = r.f64("tensor value");
  return {std::move(name), Tensor::from(std::move(shape), std::move(values))};
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kCkptMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(format_config(ck.config));
  w.u64(ck.epoch);
  w.u64(ck.best_epoch);
  w.f64(ck.best_dev_wer);
  std::ostringstream rng;
  rng << ck.rng;
  w.str(rng.str());
  w.f64(ck.adam.beta1);
  w.f64(ck.adam.beta2);
  w.f64(ck.adam.eps);
  w.u64(ck.adam.step);
  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& [name, t] : ck.params) {
    write_tensor_header(w, name, t);
    auto m = ck.adam.m.find(name);
    auto v = ck.adam.v.find(name);
    const bool has = m != ck.adam.m.end() && v != ck.adam.v.end() && !m->second.empty();
    w.u8(has ? 1 : 0);
    if (has) {
      for (double x : m->second) w.f64(x);
      for (double x : v->second) w.f64(x);
    }
  }
  w.u32(static_cast<std::uint32_t>(ck.best_params.size()));
  for (const auto& [name, t] : ck.best_params) write_tensor_header(w, name, t);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kCkptMagic, 4) != 0) throw ParseError("bad magic, expected \"MLCK\"", 0);
  r.u32("magic");
  const std::size_t ver_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), ver_at);
  Checkpoint ck;
  const std::size_t cfg_at = r.pos();
  try {
    ck.config = parse_config(r.str("config"));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("embedded config rejected: ") + e.what(), cfg_at);
  }
  ck.epoch = r.u64("epoch");
  ck.best_epoch = r.u64("best epoch");
  ck.best_dev_wer = r.f64("best dev WER");
  std::istringstream rng(r.str("rng state"));
  rng >> ck.rng;
  if (!rng) throw ParseError("corrupt rng state", r.pos());
  ck.adam.beta1 = r.f64("beta1");
  ck.adam.beta2 = r.f64("beta2");
  ck.adam.eps = r.f64("eps");
  ck.adam.step = r.u64("adam step");
  const std::uint32_t count = r.u32("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_tensor(r);
    const std::size_t n = t.size();
    if (r.u8("moment flag")) {
      r.need(16 * n, "moments");
      std::vector<double> m(n), v(n);
      for (auto& x : m) x = r.f64("m");
      for (auto& x : v) x = r.f64("v");
      ck.adam.m[name] = std::move(m);
      ck.adam.v[name] = std::move(v);
    }
    ck.params.add(name, t);
  }
  const std::uint32_t best = r.u32("best parameter count");
  for (std::uint32_t i = 0; i < best; ++i) {
    auto [name, t] = read_tensor(r);
    ck.best_params.add(name, t);
  }
  if (r.pos() != r.size()) throw ParseError("trailing bytes in checkpoint", r.pos());
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Dataset load_dataset(const std::filesystem::path& dir, const std::string& split) {
  namespace fs = std::filesystem;
  Dataset d;
  d.vocab = GlossVocabulary::load(dir / "vocab.txt");
  fs::path files = dir;
  if (!split.empty() && fs::is_directory(dir / split)) files = dir / split;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(files)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mlts") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) d.samples.push_back(read_features(p, d.vocab.size()));
  return d;
}

void write_dataset(const std::filesystem::path& dir, const std::string& split, const Dataset& data) {
  namespace fs = std::filesystem;
  const fs::path target = split.empty() ? dir : dir / split;
  fs::create_directories(target);
  data.vocab.save(dir / "vocab.txt");
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.mlts", i);
    write_features(target / name, data.samples[i]);
  }
}

}  // namespace mltsf
