#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "coalign/numeric.hpp"

namespace coalign {

using LanguageId = std::string;

/// Dense-id vocabulary; ids are assigned in first-occurrence order.
class Vocab {
 public:
  int add(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
  }
  std::optional<int> id(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& name(int id) const { return names_.at(id); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

struct Triple {
  int h = 0, r = 0, t = 0;
  bool operator==(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t x = static_cast<std::uint64_t>(t.h);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t.r);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t.t);
    x ^= x >> 29;
    return static_cast<std::size_t>(x * 0xbf58476d1ce4e5b9ULL);
  }
};

/// Per-relation mean tails-per-head and heads-per-tail, used by the
/// Bernoulli corruption sampler.
struct CorruptionStats {
  double tph = 1.0;
  double hpt = 1.0;
};

struct KnowledgeGraph {
  LanguageId language;
  Vocab entities;   // structural entities first, description-only after
  Vocab relations;
  std::vector<Triple> triples;
  std::unordered_set<Triple, TripleHash> triple_set;
  std::vector<CorruptionStats> corruption_stats;  // indexed by relation id
  int structural_entities = 0;  // entities referenced by at least one triple
  std::size_t duplicates_dropped = 0;

  bool contains(const Triple& t) const { return triple_set.count(t) > 0; }
  void recompute_corruption_stats();
  void validate() const;
};

using IllPair = std::pair<int, int>;

struct IllStore {
  std::pair<LanguageId, LanguageId> pair;
  std::vector<IllPair> train, valid, test, zero_shot;

  void validate() const;  // 1-to-1 across the union, partitions disjoint
};

struct DescriptionEntry {
  std::vector<int> tokens;  // exactly `len` slots, pad-suffixed
  int raw_length = 0;       // surviving tokens before pad/truncate
  int true_length() const;
};

struct DescriptionCorpus {
  LanguageId language;
  int len = 0;  // fixed sequence length
  std::unordered_map<int, DescriptionEntry> entries;  // entity id -> tokens
  std::size_t skipped_unknown = 0;
  std::size_t skipped_empty = 0;

  bool has(int entity) const { return entries.count(entity) > 0; }
  void validate() const;
};

class WordEmbeddingTable {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  WordEmbeddingTable() = default;
  WordEmbeddingTable(Vocab vocab, Mat vectors)
      : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {}

  int dim() const { return static_cast<int>(vectors_.cols()); }
  int size() const { return static_cast<int>(vectors_.rows()); }
  /// Token id for a language-prefixed token, kUnk if absent.
  int token_id(const LanguageId& lang, const std::string& token) const {
    auto id = vocab_.id(lang + ":" + token);
    return id ? *id + 2 : kUnk;
  }
  Vec vector(int token_id) const { return vectors_.row(token_id); }
  const Mat& vectors() const { return vectors_; }
  const Vocab& vocab() const { return vocab_; }

 private:
  Vocab vocab_;   // loaded tokens only; row k of vectors_ is vocab id k-2
  Mat vectors_;   // row 0 = pad (zero), row 1 = unk (mean of loaded rows)
};

struct MultilingualKB {
  std::vector<LanguageId> languages;  // exactly two, order (L_i, L_j)
  std::unordered_map<LanguageId, KnowledgeGraph> graphs;
  std::unordered_map<LanguageId, DescriptionCorpus> descriptions;
  IllStore ills;
  WordEmbeddingTable words;
  int desc_len = 0;
  std::uint64_t seed = 0;

  KnowledgeGraph& graph(const LanguageId& l) { return graphs.at(l); }
  const KnowledgeGraph& graph(const LanguageId& l) const {
    return graphs.at(l);
  }
  void validate() const;
};

// --- ingestion ---------------------------------------------------------

/// Tab-separated `head relation tail` lines. Vocabularies are built in
/// first-occurrence order; duplicate triples are dropped and counted.
KnowledgeGraph ingest_triples(const std::string& path,
                              const LanguageId& language);

struct SplitRatios {
  double train = 0.0, valid = 0.0, test = 0.0;
};

/// Tab-separated `entity_i entity_j` lines, split deterministically under
/// the seed. Pairs must reference known entities and be 1-to-1.
IllStore ingest_ills(const std::string& path, const SplitRatios& ratios,
                     std::uint64_t seed, KnowledgeGraph& graph_i,
                     KnowledgeGraph& graph_j);

/// Pre-split variant used with generated datasets; any path may be empty.
/// The zero-shot file appends its entities to the vocabularies without
/// touching graph structure.
IllStore ingest_ill_splits(const std::string& train_path,
                           const std::string& valid_path,
                           const std::string& test_path,
                           const std::string& zero_shot_path,
                           KnowledgeGraph& graph_i, KnowledgeGraph& graph_j);

/// Lowercase, keep the first two sentences, tokenize on
/// whitespace/punctuation, drop stop words. Exposed for tests.
std::vector<std::string> preprocess_description(
    const std::string& text, const std::unordered_set<std::string>& stopwords);

std::unordered_set<std::string> load_stopwords(const std::string& path);

/// `entity <TAB> text` lines; unknown entities and empty-after-preprocessing
/// descriptions are skipped with a count. Tokens are mapped through the word
/// table (language-prefixed); OOV tokens map to the unknown id.
DescriptionCorpus ingest_descriptions(
    const std::string& path, const LanguageId& language,
    const std::unordered_set<std::string>& stopwords, int len,
    const KnowledgeGraph& graph, const WordEmbeddingTable& words);

/// `vocab_size dim` header then `token v1 .. v_dim` rows; tokens are
/// language-prefixed. Row 0 is the pad token (zero vector), row 1 the
/// unknown token (mean of all loaded vectors).
WordEmbeddingTable load_word_vectors(const std::string& path,
                                     int expected_dim);

// --- snapshot persistence ----------------------------------------------

void save_kb(const MultilingualKB& kb, const std::string& dir);
MultilingualKB load_kb(const std::string& dir);

}  // namespace coalign
