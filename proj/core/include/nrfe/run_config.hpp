// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and its key-value text format:
//
//   # comment
//   key = value
//
// Blank lines and '#' comments are ignored; unknown keys are errors. Booleans
// are `true`/`false`. A manifest is a config file with a comment header, so a
// run can be replayed with `--config <run>/manifest.cfg`.
#pragma once

#include "nrfe/dataio.hpp"
#include "nrfe/encoder.hpp"
#include "nrfe/sr3.hpp"
#include "nrfe/student.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nrfe {

struct RunConfig {
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 1;
  double train_fraction = 0.8;

  double learning_rate = 3e-5;
  double clip_norm = 0.0;
  double dropout = 0.3;
  int stage1_epochs = 30;
  int stage2_epochs = 30;
  int student_epochs = 30;
  int batch_size = 8;

  double margin = 0.2;
  bool raw_cosine = false;
  int cross_heads = 1;
  int classifier_hidden = 64;
  bool joint_stage2 = false;
  double joint_lambda = 1.0;

  double temperature = 1.0;
  double w_dis = 1.0;
  double w_cls = 1.0;
  bool batch_averaged_target = false;
  bool freeze_inherited = false;

  /// Shared by the news and reasoning encoders.
  EncoderSpec encoder;
  int min_count = 1;

  sr3::Sr3Config sr3;
  std::string llm_endpoint;
  std::string llm_model;

  Dataset dataset = Dataset::Synthetic;
  std::string corpus;
  std::string store;
  /// Unset: the dataset's default scheme.
  std::optional<LabelScheme> label_scheme;
  Ablation ablation = Ablation::Full;

  bool synthetic = false;
  int synthetic_n = 200;
  std::uint64_t synthetic_seed = 1;

  bool operator==(const RunConfig&) const = default;
};

/// Sets one key. Throws InvalidArgument for an unknown key or a bad value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();
std::string get_setting(const RunConfig& cfg, const std::string& key);

/// Parses config text on top of `base`. Errors are FormatError with the line.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
/// Every key, one per line, in a fixed order.
std::string config_text(const RunConfig& cfg);

TeacherConfig teacher_config(const RunConfig& cfg);
TeacherTrainConfig teacher_train_config(const RunConfig& cfg);
StudentTrainConfig student_train_config(const RunConfig& cfg);

struct ManifestInfo {
  std::string corpus_hash;
  std::string store_hash;
};

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg,
                    const ManifestInfo& info);

}  // namespace nrfe
