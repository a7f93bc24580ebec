#include "coalign/gradbattery.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "coalign/dem.hpp"
#include "coalign/kb.hpp"
#include "coalign/kgem.hpp"
#include "coalign/numeric.hpp"
#include "coalign/rng.hpp"

namespace coalign {

namespace {

constexpr double kEps = 1e-5;
constexpr double kTol = 1e-4;

// Small two-language KB with random triples; fits the whole battery.
MultilingualKB tiny_kb(std::uint64_t seed) {
  MultilingualKB kb;
  kb.languages = {"xa", "xb"};
  Rng rng(seed);
  for (const auto& lang : kb.languages) {
    KnowledgeGraph g;
    g.language = lang;
    for (int e = 0; e < 8; ++e) g.entities.add(lang + "_e" + std::to_string(e));
    for (int r = 0; r < 2; ++r) g.relations.add(lang + "_r" + std::to_string(r));
    while (g.triples.size() < 12) {
      Triple t{static_cast<int>(rng.bounded(8)),
               static_cast<int>(rng.bounded(2)),
               static_cast<int>(rng.bounded(8))};
      if (t.h == t.t) continue;
      if (g.triple_set.insert(t).second) g.triples.push_back(t);
    }
    g.structural_entities = g.entities.size();
    g.recompute_corruption_stats();
    kb.graphs.emplace(lang, std::move(g));
  }
  return kb;
}

std::vector<TrainingTriple> frozen_triple_batch(const MultilingualKB& kb,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingTriple> batch;
  for (int lang = 0; lang < 2; ++lang) {
    const auto& g = kb.graph(kb.languages[lang]);
    for (int k = 0; k < 6; ++k) {
      const Triple& pos = g.triples[rng.bounded(g.triples.size())];
      batch.push_back({lang, pos, corrupt_triple(pos, g, rng)});
    }
  }
  return batch;
}

std::vector<IllPair> frozen_ill_batch(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<IllPair> batch;
  for (int k = 0; k < 6; ++k)
    batch.emplace_back(static_cast<int>(rng.bounded(8)),
                       static_cast<int>(rng.bounded(8)));
  return batch;
}

// Hinge terms sitting on the margin make finite differences disagree with
// the subgradient; nudge the fixture seed until the batch is clear of it.
bool batch_clear_of_kink(const std::vector<TrainingTriple>& batch,
                         KgemParams& params, double gamma) {
  for (const TrainingTriple& item : batch) {
    const Mat& ev = params.ent[item.lang].value;
    const Mat& rv = params.rel[item.lang].value;
    const double f_pos = (ev.row(item.pos.h) + rv.row(item.pos.r) -
                          ev.row(item.pos.t))
                             .norm();
    const double f_neg = (ev.row(item.neg.h) + rv.row(item.neg.r) -
                         ev.row(item.neg.t))
                             .norm();
    if (std::abs(f_pos - f_neg + gamma) < 1e-3) return false;
  }
  return true;
}

BatteryEntry check_kgem_loss(const std::string& name, double alpha_k,
                             double alpha_a, int points, std::uint64_t seed) {
  BatteryEntry entry;
  entry.loss = name;
  entry.pass = true;
  const double gamma = 1.0;

  MultilingualKB kb = tiny_kb(derive_seed(seed, 51, 0));
  for (int point = 0; point < points; ++point) {
    KgemParams params =
        KgemParams::init(kb, 5, derive_seed(seed, 52, point));

    std::vector<TrainingTriple> batch;
    if (alpha_k != 0.0) {
      std::uint64_t bs = derive_seed(seed, 53, point);
      batch = frozen_triple_batch(kb, bs);
      int guard = 0;
      while (!batch_clear_of_kink(batch, params, gamma) && guard++ < 100)
        batch = frozen_triple_batch(kb, ++bs);
    }
    std::vector<IllPair> ills;
    if (alpha_a != 0.0) ills = frozen_ill_batch(derive_seed(seed, 54, point));

    // alpha_k is 0 or 1. loss_alignment returns the raw sum and scales its
    // gradients by the weight, so the closure scales the value to match.
    auto loss = [&]() {
      double total = 0.0;
      if (alpha_k != 0.0) total += loss_knowledge(batch, params, gamma);
      if (alpha_a != 0.0)
        total += alpha_a * loss_alignment(ills, params, alpha_a);
      return total;
    };
    const GradCheckReport r = grad_check(loss, params.all(), kEps, kTol, 60,
                                         derive_seed(seed, 55, point));
    entry.max_rel_err = std::max(entry.max_rel_err, r.max_rel_err);
    entry.pass = entry.pass && r.pass;
    ++entry.points;
  }
  return entry;
}

BatteryEntry check_dem_loss(int points, std::uint64_t seed) {
  BatteryEntry entry;
  entry.loss = "S_D";
  entry.pass = true;

  // Three-word vocabulary per language, word dim 3.
  Vocab vocab;
  Mat vectors(6 + 2, 3);
  vectors.setZero();
  {
    Rng vr(derive_seed(seed, 61, 0));
    for (int k = 0; k < 6; ++k)
      for (int j = 0; j < 3; ++j) vectors(k + 2, j) = vr.normal();
    for (const auto* lang : {"xa", "xb"})
      for (int w = 0; w < 3; ++w)
        vocab.add(std::string(lang) + ":w" + std::to_string(w));
    vectors.row(1) = vectors.bottomRows(6).colwise().mean();
  }
  WordEmbeddingTable words(std::move(vocab), std::move(vectors));

  DescriptionCorpus ca, cb;
  ca.language = "xa";
  cb.language = "xb";
  ca.len = cb.len = 4;
  Rng dr(derive_seed(seed, 62, 0));
  for (int e = 0; e < 3; ++e) {
    auto make_entry = [&](const LanguageId& lang) {
      DescriptionEntry d;
      const int n = 2 + static_cast<int>(dr.bounded(3));  // 2..4 tokens
      d.raw_length = n;
      d.tokens.assign(4, WordEmbeddingTable::kPad);
      for (int t = 0; t < n; ++t)
        d.tokens[t] =
            words.token_id(lang, "w" + std::to_string(dr.bounded(3)));
      return d;
    };
    ca.entries.emplace(e, make_entry("xa"));
    cb.entries.emplace(e, make_entry("xb"));
  }
  const std::vector<IllPair> batch = {{0, 1}, {1, 2}, {2, 0}};

  for (int point = 0; point < points; ++point) {
    DemParams params = DemParams::init(3, 4, derive_seed(seed, 63, point));
    auto loss = [&]() { return loss_dem(batch, ca, cb, words, params); };
    const GradCheckReport r = grad_check(loss, params.all(), kEps, kTol, 40,
                                         derive_seed(seed, 64, point));
    entry.max_rel_err = std::max(entry.max_rel_err, r.max_rel_err);
    entry.pass = entry.pass && r.pass;
    ++entry.points;
  }
  return entry;
}

}  // namespace

BatteryReport run_gradient_battery(int points, std::uint64_t seed) {
  BatteryReport report;
  report.entries.push_back(check_kgem_loss("S_K", 1.0, 0.0, points, seed));
  report.entries.push_back(check_kgem_loss("S_A", 0.0, 1.0, points, seed + 1));
  report.entries.push_back(check_kgem_loss("S_KG", 1.0, 2.5, points, seed + 2));
  report.entries.push_back(check_dem_loss(points, seed + 3));
  report.pass = true;
  for (const auto& e : report.entries) report.pass = report.pass && e.pass;
  return report;
}

void print_battery(const BatteryReport& report, std::ostream& os) {
  for (const auto& e : report.entries) {
    os << (e.pass ? "pass" : "FAIL") << "  " << e.loss << "  points=" << e.points
       << "  max_rel_err=" << e.max_rel_err << "\n";
  }
  os << (report.pass ? "gradient battery passed" : "gradient battery FAILED")
     << "\n";
}

}  // namespace coalign
