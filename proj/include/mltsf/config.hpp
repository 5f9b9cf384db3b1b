#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mltsf/model.hpp"
#include "mltsf/synth.hpp"

namespace mltsf {

struct TrainConfig {
  ModelConfig model;

  double lr = 3e-3;
  double l2 = 1e-4;
  std::size_t epochs = 30;
  std::size_t decay_start = 20;
  std::size_t decay_interval = 5;
  double decay_factor = 0.5;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  bool augment = true;

  // Synthetic benchmark; channels and vocab_size follow the model.
  SynthConfig synth;
  std::size_t glosses_min = 2;
  std::size_t glosses_max = 4;
  std::size_t train_samples = 300;
  std::size_t dev_samples = 60;
  std::size_t gradcheck_frames = 20;

  // Long-run optimisation schedule: lr 1e-4, lambda 1e-4, 60 epochs,
  // halving every 5 epochs from epoch 40.
  static TrainConfig long_schedule();

  void validate() const;
  SynthConfig synth_config() const;
};

/// Flat UTF-8 "key=value" lines. Blank lines and lines starting with '#' are
/// ignored; unknown keys, duplicate keys and malformed values throw ConfigError.
/// Keys not present keep their defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
// Every key, in a stable order; parse_config(format_config(c)) reproduces c.
std::string format_config(const TrainConfig& config);

}  // namespace mltsf
