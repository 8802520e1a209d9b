// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "vtcas/dataset.hpp"
#include "vtcas/evalnet.hpp"
#include "vtcas/search.hpp"

namespace vtcas {

inline constexpr int kConfigVersion = 1;

/// Where a run's images come from. File sources name TIMG/TLBL pairs.
struct DataSource {
  enum class Kind { kSynthetic, kFiles } kind = Kind::kSynthetic;
  DatasetSpec synthetic;
  std::filesystem::path train_images, train_labels;
  std::filesystem::path val_images, val_labels;
};

struct RunConfig {
  std::string mode = "search";  // search | train | synth
  std::uint64_t seed = 1;
  std::filesystem::path out = "vtcas-out";
  DataSource data;
  SearchSchedule search = toy_schedule();
  EvalConfig eval = toy_eval_config();
  TrainOptions train;
  /// Genotype file for `train`; the reference genotype when empty.
  std::filesystem::path genotype;
};

/// Built-in defaults: toy search schedule and toy evaluation network on the
/// 750-image synthetic set.
RunConfig default_run_config();

/// Applies a JSON document on top of `base`. Keys absent from the document
/// keep their value; unknown keys, wrong types and a missing or unsupported
/// `version` throw ConfigError. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, RunConfig base = default_run_config(),
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = default_run_config());

/// Fully resolved document; parse_run_config(dump_run_config(c)) == c.
std::string dump_run_config(const RunConfig& cfg);

/// 16 hex digits of FNV-1a over the resolved document, excluding `out`.
std::string config_hash(const RunConfig& cfg);

/// Loads or synthesizes the train/val splits. Synthetic data uses `seed`.
DatasetSplits load_data(const DataSource& src, std::uint64_t seed);

}  // namespace vtcas
