#include "coalign/kb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "coalign/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace coalign {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open file: " + path);
  return is;
}

void check_one_to_one(const IllStore& store) {
  std::unordered_map<int, int> left, right;
  auto scan = [&](const std::vector<IllPair>& part) {
    for (const auto& [a, b] : part) {
      if (++left[a] > 1)
        throw InputError("ILL 1-to-1 violation: left entity id " +
                         std::to_string(a) + " appears twice");
      if (++right[b] > 1)
        throw InputError("ILL 1-to-1 violation: right entity id " +
                         std::to_string(b) + " appears twice");
    }
  };
  scan(store.train);
  scan(store.valid);
  scan(store.test);
  scan(store.zero_shot);
}

std::vector<IllPair> read_pair_file(const std::string& path,
                                    KnowledgeGraph& graph_i,
                                    KnowledgeGraph& graph_j,
                                    bool allow_new_entities) {
  std::ifstream is = open_or_throw(path);
  std::vector<IllPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected 2 tab-separated fields, got " +
                       std::to_string(fields.size()));
    int a, b;
    if (allow_new_entities) {
      a = graph_i.entities.add(fields[0]);
      b = graph_j.entities.add(fields[1]);
      if (a < graph_i.structural_entities || b < graph_j.structural_entities)
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": zero-shot entity '" +
                         (a < graph_i.structural_entities ? fields[0]
                                                          : fields[1]) +
                         "' appears in the graph structure");
    } else {
      auto ia = graph_i.entities.id(fields[0]);
      auto ib = graph_j.entities.id(fields[1]);
      if (!ia)
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": unknown entity '" + fields[0] + "' in language " +
                         graph_i.language);
      if (!ib)
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": unknown entity '" + fields[1] + "' in language " +
                         graph_j.language);
      a = *ia;
      b = *ib;
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace

// --- KnowledgeGraph -----------------------------------------------------

void KnowledgeGraph::recompute_corruption_stats() {
  corruption_stats.assign(relations.size(), CorruptionStats{});
  std::vector<std::unordered_map<int, int>> heads(relations.size()),
      tails(relations.size());
  std::vector<int> count(relations.size(), 0);
  for (const Triple& t : triples) {
    ++heads[t.r][t.h];
    ++tails[t.r][t.t];
    ++count[t.r];
  }
  for (int r = 0; r < relations.size(); ++r) {
    if (count[r] == 0) continue;
    corruption_stats[r].tph =
        static_cast<double>(count[r]) / static_cast<double>(heads[r].size());
    corruption_stats[r].hpt =
        static_cast<double>(count[r]) / static_cast<double>(tails[r].size());
  }
}

void KnowledgeGraph::validate() const {
  std::vector<int> seen(relations.size(), 0);
  for (const Triple& t : triples) {
    if (t.h < 0 || t.h >= structural_entities || t.t < 0 ||
        t.t >= structural_entities || t.r < 0 || t.r >= relations.size())
      throw InputError("graph " + language + ": triple references invalid id");
    ++seen[t.r];
  }
  if (triple_set.size() != triples.size())
    throw InputError("graph " + language + ": duplicate triples present");
  if (corruption_stats.size() != static_cast<std::size_t>(relations.size()))
    throw InputError("graph " + language + ": stale corruption stats");
  for (int r = 0; r < relations.size(); ++r) {
    if (seen[r] > 0 &&
        (corruption_stats[r].tph < 1.0 || corruption_stats[r].hpt < 1.0))
      throw InputError("graph " + language + ": corruption stats below 1 for " +
                       relations.name(r));
  }
}

KnowledgeGraph ingest_triples(const std::string& path,
                              const LanguageId& language) {
  std::ifstream is = open_or_throw(path);
  KnowledgeGraph g;
  g.language = language;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    Triple t;
    t.h = g.entities.add(fields[0]);
    t.r = g.relations.add(fields[1]);
    t.t = g.entities.add(fields[2]);
    if (g.triple_set.insert(t).second)
      g.triples.push_back(t);
    else
      ++g.duplicates_dropped;
  }
  if (g.triples.empty())
    throw InputError(path + ": no triples found");

  g.structural_entities = g.entities.size();
  g.recompute_corruption_stats();
  return g;
}

// --- IllStore -----------------------------------------------------------

void IllStore::validate() const { check_one_to_one(*this); }

IllStore ingest_ills(const std::string& path, const SplitRatios& ratios,
                     std::uint64_t seed, KnowledgeGraph& graph_i,
                     KnowledgeGraph& graph_j) {
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw InputError("ILL split ratios must sum to 1");

  std::vector<IllPair> pairs = read_pair_file(path, graph_i, graph_j, false);

  IllStore store;
  store.pair = {graph_i.language, graph_j.language};
  store.train = pairs;  // temporary, for the 1-to-1 scan
  check_one_to_one(store);
  store.train.clear();

  Rng rng(seed);
  rng.shuffle(pairs);

  const auto n = static_cast<long long>(pairs.size());
  long long n_train = std::llround(static_cast<double>(n) * ratios.train);
  long long n_valid = std::llround(static_cast<double>(n) * ratios.valid);
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);

  store.train.assign(pairs.begin(), pairs.begin() + n_train);
  store.valid.assign(pairs.begin() + n_train,
                     pairs.begin() + n_train + n_valid);
  store.test.assign(pairs.begin() + n_train + n_valid, pairs.end());
  store.validate();
  return store;
}

IllStore ingest_ill_splits(const std::string& train_path,
                           const std::string& valid_path,
                           const std::string& test_path,
                           const std::string& zero_shot_path,
                           KnowledgeGraph& graph_i, KnowledgeGraph& graph_j) {
  IllStore store;
  store.pair = {graph_i.language, graph_j.language};
  if (!train_path.empty())
    store.train = read_pair_file(train_path, graph_i, graph_j, false);
  if (!valid_path.empty())
    store.valid = read_pair_file(valid_path, graph_i, graph_j, false);
  if (!test_path.empty())
    store.test = read_pair_file(test_path, graph_i, graph_j, false);
  if (!zero_shot_path.empty())
    store.zero_shot = read_pair_file(zero_shot_path, graph_i, graph_j, true);
  store.validate();
  return store;
}

// --- descriptions -------------------------------------------------------

int DescriptionEntry::true_length() const {
  return std::min<int>(raw_length, static_cast<int>(tokens.size()));
}

void DescriptionCorpus::validate() const {
  if (len <= 0) throw InputError("description length must be positive");
  for (const auto& [id, entry] : entries) {
    if (static_cast<int>(entry.tokens.size()) != len)
      throw InputError("description for entity id " + std::to_string(id) +
                       " has wrong slot count");
    bool in_pad = false;
    for (int tok : entry.tokens) {
      if (tok == WordEmbeddingTable::kPad)
        in_pad = true;
      else if (in_pad)
        throw InputError("pad token not a suffix for entity id " +
                         std::to_string(id));
    }
    if (entry.raw_length <= 0)
      throw InputError("empty description stored for entity id " +
                       std::to_string(id));
  }
}

std::vector<std::string> preprocess_description(
    const std::string& text,
    const std::unordered_set<std::string>& stopwords) {
  std::string lower = text;
  for (char& c : lower)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');

  // First two non-empty sentences, split on . ! ?
  std::string kept;
  int sentences = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= lower.size() && sentences < 2; ++i) {
    if (i == lower.size() || lower[i] == '.' || lower[i] == '!' ||
        lower[i] == '?') {
      std::string seg = lower.substr(start, i - start);
      if (seg.find_first_not_of(" \t\r\n") != std::string::npos) {
        kept += seg;
        kept += ' ';
        ++sentences;
      }
      start = i + 1;
    }
  }

  // Tokens are maximal runs of ASCII alphanumerics or non-ASCII bytes.
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : kept) {
    bool word_char = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                     c >= 0x80;
    if (word_char) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      if (!stopwords.count(cur)) tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty() && !stopwords.count(cur)) tokens.push_back(cur);
  return tokens;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::unordered_set<std::string> words;
  if (path.empty()) return words;
  std::ifstream is = open_or_throw(path);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (char& c : line)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (!line.empty()) words.insert(line);
  }
  return words;
}

DescriptionCorpus ingest_descriptions(
    const std::string& path, const LanguageId& language,
    const std::unordered_set<std::string>& stopwords, int len,
    const KnowledgeGraph& graph, const WordEmbeddingTable& words) {
  if (len < 1) throw InputError("description length must be >= 1");
  std::ifstream is = open_or_throw(path);

  DescriptionCorpus corpus;
  corpus.language = language;
  corpus.len = len;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected 2 tab-separated fields, got " +
                       std::to_string(fields.size()));
    auto id = graph.entities.id(fields[0]);
    if (!id) {
      ++corpus.skipped_unknown;
      continue;
    }
    if (corpus.entries.count(*id)) continue;  // keep first occurrence

    std::vector<std::string> toks = preprocess_description(fields[1], stopwords);
    if (toks.empty()) {
      ++corpus.skipped_empty;
      continue;
    }

    DescriptionEntry entry;
    entry.raw_length = static_cast<int>(toks.size());
    entry.tokens.assign(len, WordEmbeddingTable::kPad);
    for (int i = 0; i < len && i < entry.raw_length; ++i)
      entry.tokens[i] = words.token_id(language, toks[i]);
    corpus.entries.emplace(*id, std::move(entry));
  }
  corpus.validate();
  return corpus;
}

// --- word vectors -------------------------------------------------------

WordEmbeddingTable load_word_vectors(const std::string& path,
                                     int expected_dim) {
  std::ifstream is = open_or_throw(path);
  std::string line;
  if (!std::getline(is, line)) throw InputError(path + ": empty file");
  std::istringstream header(line);
  long long vocab_size = 0, dim = 0;
  if (!(header >> vocab_size >> dim) || vocab_size <= 0 || dim <= 0)
    throw InputError(path + ":1: malformed header, expected 'vocab_size dim'");
  if (expected_dim > 0 && dim != expected_dim)
    throw InputError(path + ": dimension " + std::to_string(dim) +
                     " does not match expected " +
                     std::to_string(expected_dim));

  Vocab vocab;
  Mat vectors(vocab_size + 2, dim);
  vectors.row(0).setZero();  // pad
  long long row = 0;
  std::size_t lineno = 1;
  while (row < vocab_size && std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    if (vocab.id(token))
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": duplicate token '" + token + "'");
    vocab.add(token);
    for (long long j = 0; j < dim; ++j) {
      double v;
      if (!(ls >> v))
        throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(dim) + " values for token '" + token +
                         "'");
      vectors(row + 2, j) = v;
    }
    double extra;
    if (ls >> extra)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": too many values for token '" + token + "'");
    ++row;
  }
  if (row != vocab_size)
    throw InputError(path + ": header promises " + std::to_string(vocab_size) +
                     " rows, found " + std::to_string(row));

  vectors.row(1) = vectors.bottomRows(vocab_size).colwise().mean();  // unk
  return WordEmbeddingTable(std::move(vocab), std::move(vectors));
}

// --- MultilingualKB -----------------------------------------------------

void MultilingualKB::validate() const {
  if (languages.size() < 2) throw InputError("KB needs at least two languages");
  for (const auto& lang : languages) graphs.at(lang).validate();
  ills.validate();

  const auto& gi = graphs.at(languages[0]);
  const auto& gj = graphs.at(languages[1]);
  auto check_side = [](const KnowledgeGraph& g, int id) {
    if (id < 0 || id >= g.entities.size())
      throw InputError("ILL references unknown entity id in " + g.language);
  };
  for (const auto* part : {&ills.train, &ills.valid, &ills.test}) {
    for (const auto& [a, b] : *part) {
      check_side(gi, a);
      check_side(gj, b);
    }
  }
  for (const auto& [a, b] : ills.zero_shot) {
    check_side(gi, a);
    check_side(gj, b);
    if (a < gi.structural_entities || b < gj.structural_entities)
      throw InputError("zero-shot entity appears in graph structure");
    if (!descriptions.at(languages[0]).has(a) ||
        !descriptions.at(languages[1]).has(b))
      throw InputError("zero-shot entity lacks a description");
  }
  for (const auto& lang : languages)
    if (descriptions.count(lang)) descriptions.at(lang).validate();
}

namespace {

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  for (const auto& l : lines) os << l << "\n";
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_graph(const KnowledgeGraph& g, const fs::path& dir) {
  write_lines((dir / (g.language + ".entities.txt")).string(),
              g.entities.names());
  write_lines((dir / (g.language + ".relations.txt")).string(),
              g.relations.names());
  std::ofstream os(dir / (g.language + ".triples.tsv"));
  for (const Triple& t : g.triples)
    os << g.entities.name(t.h) << "\t" << g.relations.name(t.r) << "\t"
       << g.entities.name(t.t) << "\n";
}

void save_descriptions(const DescriptionCorpus& c, const KnowledgeGraph& g,
                       const fs::path& dir) {
  // Deterministic order: by entity id.
  std::map<int, const DescriptionEntry*> ordered;
  for (const auto& [id, e] : c.entries) ordered.emplace(id, &e);
  std::ofstream os(dir / (c.language + ".descriptions.tsv"));
  for (const auto& [id, e] : ordered) {
    os << g.entities.name(id) << "\t" << e->raw_length << "\t";
    for (std::size_t i = 0; i < e->tokens.size(); ++i) {
      if (i) os << " ";
      os << e->tokens[i];
    }
    os << "\n";
  }
}

}  // namespace

void save_kb(const MultilingualKB& kb, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);

  json manifest;
  manifest["languages"] = kb.languages;
  manifest["desc_len"] = kb.desc_len;
  manifest["seed"] = kb.seed;
  manifest["word_dim"] = kb.words.dim();
  manifest["word_count"] = kb.words.vocab().size();
  for (const auto& lang : kb.languages) {
    const auto& g = kb.graph(lang);
    json jg;
    jg["entities"] = g.entities.size();
    jg["structural_entities"] = g.structural_entities;
    jg["relations"] = g.relations.size();
    jg["triples"] = g.triples.size();
    jg["descriptions"] =
        kb.descriptions.count(lang) ? kb.descriptions.at(lang).entries.size()
                                    : 0;
    manifest["graphs"][lang] = jg;
  }
  manifest["ills"] = {{"train", kb.ills.train.size()},
                      {"valid", kb.ills.valid.size()},
                      {"test", kb.ills.test.size()},
                      {"zero_shot", kb.ills.zero_shot.size()}};

  std::ofstream ms(root / "manifest.json");
  ms << manifest.dump(2) << "\n";

  for (const auto& lang : kb.languages) {
    save_graph(kb.graph(lang), root);
    if (kb.descriptions.count(lang))
      save_descriptions(kb.descriptions.at(lang), kb.graph(lang), root);
  }

  const auto& gi = kb.graph(kb.languages[0]);
  const auto& gj = kb.graph(kb.languages[1]);
  std::ofstream ills(root / "ills.tsv");
  auto dump_part = [&](const char* tag, const std::vector<IllPair>& part) {
    for (const auto& [a, b] : part)
      ills << tag << "\t" << gi.entities.name(a) << "\t" << gj.entities.name(b)
           << "\n";
  };
  dump_part("train", kb.ills.train);
  dump_part("valid", kb.ills.valid);
  dump_part("test", kb.ills.test);
  dump_part("zero_shot", kb.ills.zero_shot);

  std::ofstream ws(root / "words.txt");
  ws << kb.words.vocab().size() << " " << kb.words.dim() << "\n";
  for (int k = 0; k < kb.words.vocab().size(); ++k) {
    ws << kb.words.vocab().name(k);
    for (int j = 0; j < kb.words.dim(); ++j)
      ws << " " << fmt_double(kb.words.vectors()(k + 2, j));
    ws << "\n";
  }
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is = open_or_throw(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

MultilingualKB load_kb(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream ms(root / "manifest.json");
  if (!ms) throw InputError("cannot open snapshot manifest in " + dir);
  json manifest = json::parse(ms);

  MultilingualKB kb;
  kb.languages = manifest["languages"].get<std::vector<LanguageId>>();
  kb.desc_len = manifest["desc_len"].get<int>();
  kb.seed = manifest["seed"].get<std::uint64_t>();

  kb.words = load_word_vectors((root / "words.txt").string(),
                               manifest["word_dim"].get<int>());

  for (const auto& lang : kb.languages) {
    KnowledgeGraph g;
    g.language = lang;
    for (const auto& name :
         read_lines((root / (lang + ".entities.txt")).string()))
      g.entities.add(name);
    for (const auto& name :
         read_lines((root / (lang + ".relations.txt")).string()))
      g.relations.add(name);
    g.structural_entities =
        manifest["graphs"][lang]["structural_entities"].get<int>();
    for (const auto& line :
         read_lines((root / (lang + ".triples.tsv")).string())) {
      if (line.empty()) continue;
      auto f = split_tabs(line);
      Triple t{*g.entities.id(f[0]), *g.relations.id(f[1]),
               *g.entities.id(f[2])};
      g.triple_set.insert(t);
      g.triples.push_back(t);
    }
    g.recompute_corruption_stats();

    DescriptionCorpus corpus;
    corpus.language = lang;
    corpus.len = kb.desc_len;
    const fs::path dpath = root / (lang + ".descriptions.tsv");
    if (fs::exists(dpath)) {
      for (const auto& line : read_lines(dpath.string())) {
        if (line.empty()) continue;
        auto f = split_tabs(line);
        DescriptionEntry e;
        e.raw_length = std::stoi(f[1]);
        std::istringstream ts(f[2]);
        int tok;
        while (ts >> tok) e.tokens.push_back(tok);
        corpus.entries.emplace(*g.entities.id(f[0]), std::move(e));
      }
    }
    kb.graphs.emplace(lang, std::move(g));
    kb.descriptions.emplace(lang, std::move(corpus));
  }

  auto& gi = kb.graphs.at(kb.languages[0]);
  auto& gj = kb.graphs.at(kb.languages[1]);
  kb.ills.pair = {kb.languages[0], kb.languages[1]};
  for (const auto& line : read_lines((root / "ills.tsv").string())) {
    if (line.empty()) continue;
    auto f = split_tabs(line);
    IllPair p{*gi.entities.id(f[1]), *gj.entities.id(f[2])};
    if (f[0] == "train")
      kb.ills.train.push_back(p);
    else if (f[0] == "valid")
      kb.ills.valid.push_back(p);
    else if (f[0] == "test")
      kb.ills.test.push_back(p);
    else if (f[0] == "zero_shot")
      kb.ills.zero_shot.push_back(p);
    else
      throw InputError("unknown ILL partition tag: " + f[0]);
  }

  kb.validate();
  return kb;
}

}  // namespace coalign
