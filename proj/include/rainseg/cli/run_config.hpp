#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "rainseg/model/params.hpp"
#include "rainseg/train/trainer.hpp"

namespace rainseg {

/// Settings of a training run, read from a flat `key = value` file. Blank
/// lines and lines starting with '#' are ignored. Keys and defaults:
///
///   manifest        (required)  dataset manifest, relative to the config file
///   splits          ""          split CSV; empty derives a stratified split from `seed`
///   seed            42          model init, shuffling, dropout and split
///   threads         0           OpenMP threads, 0 keeps the runtime default
///   patch_size      32
///   features        64,128,256,512
///   dropout         0.3
///   learning_rate   1e-4
///   weight_decay    1e-5
///   batch_size      16
///   max_epochs      50
///   patience        10
///   min_delta       1e-5
///   focal_alpha     1
///   focal_gamma     2
///   dice_epsilon    1
///   lambda_focal    1
///   lambda_dice     1
///   train_fraction  0.7
///   val_fraction    0.15
///   test_fraction   0.15
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path splits;
  std::uint64_t seed = 42;
  int threads = 0;
  ModelConfig model;  // in_channels and num_classes come from the dataset
  TrainConfig train;
  std::array<double, 3> fractions{0.7, 0.15, 0.15};

  void validate() const;
};

// Throws ConfigError naming the line of an unknown key or malformed value.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig read_run_config(const std::filesystem::path& path);

// Every key with its resolved value, in the documented order.
std::string run_config_text(const RunConfig& config);

}  // namespace rainseg
