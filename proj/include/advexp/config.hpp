#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "advexp/cvae.hpp"
#include "advexp/dataset.hpp"
#include "advexp/orchestrator.hpp"

namespace advexp {

/// Everything an INI config file can set. Sections and keys:
///   [attack]  K S Z alpha gamma mode seed query_budget learning_rate
///             baseline_decay dedup workers timing
///   [model]   embed_dim hidden latent type_dim max_decode_len min_freq
///             init_scale steps batch_size learning_rate kl_anneal_steps
///             free_bits seed
///   [data]    matched_labels (comma separated) rules (JSON path)
///   [scorer]  kind (ngram|external) path endpoint
/// Relative paths are resolved against the config file's directory.
struct AppConfig {
  AttackConfig attack;
  int workers = 0;
  bool timing = false;

  CvaeConfig model;
  PretrainOptions pretrain;

  PairLabelMapping mapping;
  std::optional<std::filesystem::path> rules_path;

  std::string scorer_kind = "ngram";
  std::optional<std::filesystem::path> scorer_path;
  std::optional<std::string> scorer_endpoint;
};

/// Unknown sections or keys and malformed values raise FormatError.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config(const std::string& ini_text, const std::filesystem::path& base_dir = ".");

}  // namespace advexp
