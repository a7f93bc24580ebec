#pragma once

#include <cstdint>
#include <string>

#include "coalign/kb.hpp"

namespace coalign {

/// Desk-scale stand-in for a weakly aligned bilingual KB: one latent graph
/// emitted as two language copies with independent triple dropout, renamed
/// vocabularies, noisy cross-lingual word vectors, and a partially labeled
/// alignment.
struct SyntheticSpec {
  int entities = 300;
  int relations = 5;
  int triples = 1500;
  double dropout_i = 0.2;
  double dropout_j = 0.2;
  int desc_len = 10;     // maximum tokens per description
  int desc_vocab = 150;  // latent word vocabulary
  int word_dim = 12;
  double sigma_w = 0.1;  // cross-lingual word-vector noise
  double seed_fraction = 0.2;
  double val_fraction = 0.1;
  double test_fraction = 0.2;  // remainder of pairs stays unlabeled
  double zs_fraction = 0.1;    // entities excluded from both graphs
  LanguageId lang_i = "en";
  LanguageId lang_j = "fr";
  std::uint64_t seed = 1;

  void validate() const;
};

/// Writes triples, descriptions, word vectors, ILL splits, a zero-shot set,
/// hidden alignment files (entities and relations) for oracle checks,
/// held-out dropped triples per language, and a ready-to-use config.
void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace coalign
