#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coalign/cotrain.hpp"
#include "coalign/dem.hpp"
#include "coalign/kb.hpp"
#include "coalign/kgem.hpp"

namespace coalign {

/// Flat key=value run configuration. Command-line overrides win over file
/// values; defaults follow the best published configuration.
struct RunConfig {
  LanguageId lang_i = "en";
  LanguageId lang_j = "fr";
  std::string triples_i, triples_j;
  std::string ills;  // single file split by `ratios`, or pre-split below
  std::string ills_train, ills_valid, ills_test, zero_shot;
  std::string descriptions_i, descriptions_j;
  std::string word_vectors, stopwords;
  SplitRatios ratios{0.2, 0.1, 0.7};
  int desc_len = 36;
  int word_dim = 0;  // 0 accepts whatever the vector file header declares

  KgemConfig kgem;  // lr 0.005, k1 50, gamma 1, alpha 2.5, batch 1024
  DemConfig dem;    // lr 0.001, k2 75, batch 1024
  ProposalPolicy policy;  // tau 0.9, min_new_fraction 0.01
  int max_iterations = 10;

  std::uint64_t seed = 42;
  int threads = 1;
};

RunConfig load_config(const std::string& path);
void apply_override(RunConfig& config, const std::string& key_value);

/// Canonical serialization (sorted keys); basis of the config hash.
std::string serialize_config(const RunConfig& config);
std::uint64_t config_hash(const RunConfig& config);

/// Runs every ingestion step and returns a validated KB.
MultilingualKB prepare_kb(const RunConfig& config);

extern const char* const kVersion;

}  // namespace coalign
