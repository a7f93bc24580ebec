#include "coalign/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "coalign/rng.hpp"

namespace fs = std::filesystem;

namespace coalign {

void SyntheticSpec::validate() const {
  if (entities < 4 || relations < 1 || triples < 1)
    throw InputError("synthetic spec: sizes too small");
  if (dropout_i < 0 || dropout_i >= 1 || dropout_j < 0 || dropout_j >= 1)
    throw InputError("synthetic spec: dropout must be in [0,1)");
  if (desc_len < 2 || desc_vocab < 2 || word_dim < 1)
    throw InputError("synthetic spec: invalid description settings");
  if (sigma_w < 0) throw InputError("synthetic spec: sigma_w must be >= 0");
  if (seed_fraction <= 0 || seed_fraction >= 1 || val_fraction <= 0 ||
      test_fraction <= 0 ||
      seed_fraction + val_fraction + test_fraction > 1.0 + 1e-12)
    throw InputError("synthetic spec: ILL fractions invalid");
  if (zs_fraction < 0 || zs_fraction >= 0.5)
    throw InputError("synthetic spec: zs_fraction out of range");
  const int remaining =
      entities - static_cast<int>(std::llround(entities * zs_fraction));
  if (remaining < 2)
    throw InputError("synthetic spec: fewer than 2 structural entities");
}

namespace {

std::string ent_name(const char* prefix, int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, id);
  return buf;
}

std::string rel_name(const char* prefix, int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%sr%02d", prefix, id);
  return buf;
}

std::string word_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "w%03d", id);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw InputError("cannot write " + p.string());
  return os;
}

}  // namespace

void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  Rng rng(spec.seed);

  // Zero-shot entities never enter any triple.
  const int n_zs = static_cast<int>(std::llround(spec.entities * spec.zs_fraction));
  std::vector<int> order(spec.entities);
  for (int e = 0; e < spec.entities; ++e) order[e] = e;
  rng.shuffle(order);
  std::unordered_set<int> zs_set(order.begin(), order.begin() + n_zs);

  // Latent triples over the structural entities.
  std::vector<int> structural(order.begin() + n_zs, order.end());
  std::vector<Triple> latent;
  std::unordered_set<Triple, TripleHash> latent_set;
  const int max_attempts = spec.triples * 50;
  for (int attempt = 0; attempt < max_attempts &&
                        static_cast<int>(latent.size()) < spec.triples;
       ++attempt) {
    const int h = structural[rng.bounded(structural.size())];
    const int t = structural[rng.bounded(structural.size())];
    if (h == t) continue;
    const int r = static_cast<int>(rng.bounded(spec.relations));
    Triple tri{h, r, t};
    if (latent_set.insert(tri).second) latent.push_back(tri);
  }

  // Hidden permutation for the second language's numbering.
  std::vector<int> perm(spec.entities);
  for (int e = 0; e < spec.entities; ++e) perm[e] = e;
  rng.shuffle(perm);
  std::vector<int> rel_perm(spec.relations);
  for (int r = 0; r < spec.relations; ++r) rel_perm[r] = r;
  rng.shuffle(rel_perm);

  auto name_i = [&](int e) { return ent_name("a", e); };
  auto name_j = [&](int e) { return ent_name("b", perm[e]); };
  auto rname_i = [&](int r) { return rel_name("a", r); };
  auto rname_j = [&](int r) { return rel_name("b", rel_perm[r]); };

  // Language copies with independent dropout.
  struct Copy {
    std::vector<Triple> kept, dropped;
    std::unordered_set<int> present;
  };
  auto make_copy = [&](double dropout) {
    Copy c;
    for (const Triple& t : latent) {
      if (rng.uniform() < dropout) {
        c.dropped.push_back(t);
      } else {
        c.kept.push_back(t);
        c.present.insert(t.h);
        c.present.insert(t.t);
      }
    }
    rng.shuffle(c.kept);
    return c;
  };
  Copy copy_i = make_copy(spec.dropout_i);
  Copy copy_j = make_copy(spec.dropout_j);
  if (copy_i.kept.empty() || copy_j.kept.empty())
    throw InputError("synthetic spec: dropout removed all triples");

  {
    auto os = open_out(root / ("triples_" + spec.lang_i + ".tsv"));
    for (const Triple& t : copy_i.kept)
      os << name_i(t.h) << "\t" << rname_i(t.r) << "\t" << name_i(t.t) << "\n";
  }
  {
    auto os = open_out(root / ("triples_" + spec.lang_j + ".tsv"));
    for (const Triple& t : copy_j.kept)
      os << name_j(t.h) << "\t" << rname_j(t.r) << "\t" << name_j(t.t) << "\n";
  }

  // Held-out dropped triples whose endpoints survive in the same copy.
  auto write_heldout = [&](const Copy& c, const LanguageId& lang, auto name,
                           auto rname) {
    auto os = open_out(root / ("heldout_" + lang + ".tsv"));
    for (const Triple& t : c.dropped)
      if (c.present.count(t.h) && c.present.count(t.t))
        os << name(t.h) << "\t" << rname(t.r) << "\t" << name(t.t) << "\n";
  };
  write_heldout(copy_i, spec.lang_i, name_i, rname_i);
  write_heldout(copy_j, spec.lang_j, name_j, rname_j);

  // Descriptions: the same latent token sequence on both sides.
  std::vector<std::vector<int>> desc_tokens(spec.entities);
  for (int e = 0; e < spec.entities; ++e) {
    Rng drng(derive_seed(spec.seed, 7, static_cast<std::uint64_t>(e)));
    const int len =
        spec.desc_len / 2 + static_cast<int>(drng.bounded(
                                static_cast<std::uint64_t>(spec.desc_len / 2) + 1));
    desc_tokens[e].resize(std::max(1, len));
    for (int& tok : desc_tokens[e])
      tok = static_cast<int>(drng.bounded(spec.desc_vocab));
  }
  auto write_descriptions = [&](const Copy& c, const LanguageId& lang,
                                auto name) {
    auto os = open_out(root / ("descriptions_" + lang + ".tsv"));
    for (int e = 0; e < spec.entities; ++e) {
      if (!c.present.count(e) && !zs_set.count(e)) continue;
      os << name(e) << "\t";
      for (std::size_t k = 0; k < desc_tokens[e].size(); ++k) {
        if (k) os << " ";
        os << word_name(desc_tokens[e][k]);
      }
      os << ".\n";
    }
  };
  write_descriptions(copy_i, spec.lang_i, name_i);
  write_descriptions(copy_j, spec.lang_j, name_j);

  // Word vectors: language j is a noisy copy of language i.
  {
    auto os = open_out(root / "word_vectors.txt");
    os << 2 * spec.desc_vocab << " " << spec.word_dim << "\n";
    std::vector<Vec> base(spec.desc_vocab);
    for (int w = 0; w < spec.desc_vocab; ++w) {
      base[w] = Vec(spec.word_dim);
      for (int d = 0; d < spec.word_dim; ++d) base[w](d) = rng.normal();
      os << spec.lang_i << ":" << word_name(w);
      for (int d = 0; d < spec.word_dim; ++d)
        os << " " << fmt_double(base[w](d));
      os << "\n";
    }
    for (int w = 0; w < spec.desc_vocab; ++w) {
      os << spec.lang_j << ":" << word_name(w);
      for (int d = 0; d < spec.word_dim; ++d)
        os << " " << fmt_double(base[w](d) + spec.sigma_w * rng.normal());
      os << "\n";
    }
  }

  open_out(root / "stopwords.txt");  // none

  // Alignment universe: entities present in both copies; zero-shot pairs
  // are written separately.
  std::vector<int> universe;
  for (int e = 0; e < spec.entities; ++e)
    if (copy_i.present.count(e) && copy_j.present.count(e)) universe.push_back(e);
  rng.shuffle(universe);

  const auto n_univ = static_cast<long long>(universe.size());
  long long n_seed = std::llround(n_univ * spec.seed_fraction);
  long long n_val = std::llround(n_univ * spec.val_fraction);
  long long n_test = std::llround(n_univ * spec.test_fraction);
  n_seed = std::min(n_seed, n_univ);
  n_val = std::min(n_val, n_univ - n_seed);
  n_test = std::min(n_test, n_univ - n_seed - n_val);

  auto write_pairs = [&](const fs::path& p, long long lo, long long hi) {
    auto os = open_out(p);
    for (long long k = lo; k < hi; ++k)
      os << name_i(universe[k]) << "\t" << name_j(universe[k]) << "\n";
  };
  write_pairs(root / "ills_train.tsv", 0, n_seed);
  write_pairs(root / "ills_valid.tsv", n_seed, n_seed + n_val);
  write_pairs(root / "ills_test.tsv", n_seed + n_val, n_seed + n_val + n_test);

  {
    auto os = open_out(root / "zero_shot.tsv");
    std::set<int> ordered_zs(zs_set.begin(), zs_set.end());
    for (int e : ordered_zs) os << name_i(e) << "\t" << name_j(e) << "\n";
  }

  // Hidden oracle files: full entity alignment (including unlabeled pairs)
  // and the relation correspondence.
  {
    auto os = open_out(root / "alignment_full.tsv");
    std::vector<int> all = universe;
    std::sort(all.begin(), all.end());
    for (int e : all) os << name_i(e) << "\t" << name_j(e) << "\n";
    std::set<int> ordered_zs(zs_set.begin(), zs_set.end());
    for (int e : ordered_zs) os << name_i(e) << "\t" << name_j(e) << "\n";
  }
  {
    auto os = open_out(root / "alignment_relations.tsv");
    for (int r = 0; r < spec.relations; ++r)
      os << rname_i(r) << "\t" << rname_j(r) << "\n";
  }

  {
    auto os = open_out(root / "config.txt");
    os << "lang_i = " << spec.lang_i << "\n";
    os << "lang_j = " << spec.lang_j << "\n";
    os << "triples_i = " << (root / ("triples_" + spec.lang_i + ".tsv")).string()
       << "\n";
    os << "triples_j = " << (root / ("triples_" + spec.lang_j + ".tsv")).string()
       << "\n";
    os << "ills_train = " << (root / "ills_train.tsv").string() << "\n";
    os << "ills_valid = " << (root / "ills_valid.tsv").string() << "\n";
    os << "ills_test = " << (root / "ills_test.tsv").string() << "\n";
    os << "zero_shot = " << (root / "zero_shot.tsv").string() << "\n";
    os << "descriptions_i = "
       << (root / ("descriptions_" + spec.lang_i + ".tsv")).string() << "\n";
    os << "descriptions_j = "
       << (root / ("descriptions_" + spec.lang_j + ".tsv")).string() << "\n";
    os << "word_vectors = " << (root / "word_vectors.txt").string() << "\n";
    os << "stopwords = " << (root / "stopwords.txt").string() << "\n";
    os << "word_dim = " << spec.word_dim << "\n";
    os << "desc_len = " << spec.desc_len << "\n";
    os << "seed = " << spec.seed << "\n";
  }
}

}  // namespace coalign
