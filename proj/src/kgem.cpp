#include "coalign/kgem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coalign {

void KgemConfig::validate() const {
  if (k1 < 1 || gamma <= 0 || alpha < 0 || lr <= 0 || batch < 1 ||
      epochs_max < 1 || patience < 1)
    throw InputError("invalid KGEM configuration");
}

KgemParams KgemParams::init(const MultilingualKB& kb, int k1,
                            std::uint64_t seed) {
  KgemParams p;
  p.k1 = k1;
  for (int l = 0; l < 2; ++l) {
    const auto& g = kb.graph(kb.languages[l]);
    p.ent[l] = Parameter("ent_" + g.language,
                         orthogonal_init(g.structural_entities, k1,
                                         derive_seed(seed, 11, l)));
    p.rel[l] = Parameter("rel_" + g.language,
                         orthogonal_init(g.relations.size(), k1,
                                         derive_seed(seed, 13, l)));
  }
  p.transform =
      Parameter("transform", orthogonal_init(k1, k1, derive_seed(seed, 17, 0)));
  p.project_entity_rows();
  return p;
}

std::vector<Parameter*> KgemParams::all() {
  return {&ent[0], &ent[1], &rel[0], &rel[1], &transform};
}

std::vector<const Parameter*> KgemParams::all() const {
  return {&ent[0], &ent[1], &rel[0], &rel[1], &transform};
}

void KgemParams::project_entity_rows() {
  for (int l = 0; l < 2; ++l) {
    Mat& e = ent[l].value;
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      const double n = e.row(i).norm();
      if (n > 0) e.row(i) /= n;
    }
  }
}

double score_triple(const Eigen::Ref<const Vec>& h,
                    const Eigen::Ref<const Vec>& r,
                    const Eigen::Ref<const Vec>& t) {
  if (h.size() != r.size() || h.size() != t.size())
    throw std::invalid_argument("score_triple: dimension mismatch");
  return (h + r - t).norm();
}

Vec transform_entity(const Eigen::Ref<const Vec>& e, const Mat& m) {
  return m * e;
}

Triple corrupt_triple(const Triple& t, const KnowledgeGraph& graph, Rng& rng) {
  const int n = graph.structural_entities;
  if (n < 2)
    throw std::runtime_error("corrupt_triple: graph " + graph.language +
                             " has fewer than two entities");
  const CorruptionStats& cs = graph.corruption_stats.at(t.r);
  const double p_head = cs.tph / (cs.tph + cs.hpt);
  const bool replace_head = rng.uniform() < p_head;

  const int original = replace_head ? t.h : t.t;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int c = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n)));
    if (c == original) continue;
    Triple cand = replace_head ? Triple{c, t.r, t.t} : Triple{t.h, t.r, c};
    if (!graph.contains(cand)) return cand;
  }
  // Rejection ran dry; scan from a random offset instead.
  const int start = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n)));
  for (int k = 0; k < n; ++k) {
    const int c = (start + k) % n;
    if (c == original) continue;
    Triple cand = replace_head ? Triple{c, t.r, t.t} : Triple{t.h, t.r, c};
    if (!graph.contains(cand)) return cand;
  }
  throw std::runtime_error("corrupt_triple: no valid corruption exists for " +
                           graph.language);
}

double loss_knowledge(const std::vector<TrainingTriple>& batch,
                      KgemParams& params, double gamma) {
  if (batch.empty()) throw std::invalid_argument("loss_knowledge: empty batch");
  double loss = 0.0;
  for (const TrainingTriple& item : batch) {
    Mat& ev = params.ent[item.lang].value;
    Mat& eg = params.ent[item.lang].grad;
    Mat& rv = params.rel[item.lang].value;
    Mat& rg = params.rel[item.lang].grad;

    const Vec dpos = (ev.row(item.pos.h) + rv.row(item.pos.r) -
                      ev.row(item.pos.t))
                         .transpose();
    const Vec dneg = (ev.row(item.neg.h) + rv.row(item.neg.r) -
                      ev.row(item.neg.t))
                         .transpose();
    const double f_pos = dpos.norm();
    const double f_neg = dneg.norm();
    const double term = f_pos - f_neg + gamma;
    if (term <= 0) continue;
    loss += term;

    if (f_pos > 0) {
      const Vec u = dpos / f_pos;
      eg.row(item.pos.h) += u.transpose();
      rg.row(item.pos.r) += u.transpose();
      eg.row(item.pos.t) -= u.transpose();
    }
    if (f_neg > 0) {
      const Vec u = dneg / f_neg;
      eg.row(item.neg.h) -= u.transpose();
      rg.row(item.neg.r) -= u.transpose();
      eg.row(item.neg.t) += u.transpose();
    }
  }
  return loss;
}

double loss_alignment(const std::vector<IllPair>& batch, KgemParams& params,
                      double weight) {
  double loss = 0.0;
  const Mat& m = params.transform.value;
  for (const auto& [a, b] : batch) {
    const Vec e = params.ent[0].value.row(a).transpose();
    const Vec ep = params.ent[1].value.row(b).transpose();
    const Vec d = m * e - ep;
    const double n = d.norm();
    loss += n;
    if (n > 0) {
      const Vec u = d / n;
      params.transform.grad.noalias() += weight * u * e.transpose();
      params.ent[0].grad.row(a) += weight * (m.transpose() * u).transpose();
      params.ent[1].grad.row(b) -= weight * u.transpose();
    }
  }
  return loss;
}

double alignment_hit1(const KgemParams& params,
                      const std::vector<IllPair>& pairs) {
  if (pairs.empty()) return 0.0;
  const Mat& targets = params.ent[1].value;
  std::size_t hits = 0;
  for (const auto& [a, b] : pairs) {
    const Vec x =
        params.transform.value * params.ent[0].value.row(a).transpose();
    int best = 0;
    double best_d = (targets.row(0).transpose() - x).norm();
    for (Eigen::Index c = 1; c < targets.rows(); ++c) {
      const double d = (targets.row(c).transpose() - x).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best == b) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

KgemParams train_kgem(const MultilingualKB& kb,
                      const std::vector<IllPair>& train_ills,
                      const std::vector<IllPair>& valid_ills,
                      const KgemConfig& config, std::uint64_t seed,
                      const EpochObserver& observer) {
  config.validate();
  if (train_ills.empty())
    throw InputError("train_kgem: empty ILL training set");

  const KnowledgeGraph* graphs[2] = {&kb.graph(kb.languages[0]),
                                     &kb.graph(kb.languages[1])};

  KgemParams params = KgemParams::init(kb, config.k1, derive_seed(seed, 1, 0));
  auto trainable = params.all();

  Rng rng(derive_seed(seed, 2, 0));
  const std::size_t total_triples =
      graphs[0]->triples.size() + graphs[1]->triples.size();
  const int steps_per_epoch = std::max<int>(
      1, static_cast<int>(total_triples / static_cast<std::size_t>(config.batch)));

  KgemParams best = params;
  double best_hit = valid_ills.empty() ? -1.0 : alignment_hit1(params, valid_ills);
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
    double epoch_k = 0.0, epoch_a = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<TrainingTriple> batch;
      batch.reserve(config.batch);
      for (int b = 0; b < config.batch; ++b) {
        const std::size_t pick = rng.bounded(total_triples);
        const int lang = pick < graphs[0]->triples.size() ? 0 : 1;
        const Triple& pos =
            lang == 0 ? graphs[0]->triples[pick]
                      : graphs[1]->triples[pick - graphs[0]->triples.size()];
        batch.push_back({lang, pos, corrupt_triple(pos, *graphs[lang], rng)});
      }
      std::vector<IllPair> ill_batch;
      ill_batch.reserve(config.batch);
      for (int b = 0; b < config.batch; ++b)
        ill_batch.push_back(train_ills[rng.bounded(train_ills.size())]);

      const double lk = loss_knowledge(batch, params, config.gamma);
      const double la = loss_alignment(ill_batch, params, config.alpha);
      if (!std::isfinite(lk) || !std::isfinite(la))
        throw std::runtime_error("train_kgem: loss diverged at epoch " +
                                 std::to_string(epoch));
      epoch_k += lk;
      epoch_a += config.alpha * la;
      sgd_step(trainable, config.lr);
    }
    params.project_entity_rows();

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss_knowledge = epoch_k / steps_per_epoch;
    stats.loss_alignment = epoch_a / steps_per_epoch;

    bool stop = false;
    if (valid_ills.empty()) {
      best = params;
    } else {
      const double hit = alignment_hit1(params, valid_ills);
      stats.val_hit1 = hit;
      if (hit > best_hit) {
        best_hit = hit;
        best = params;
        stale_epochs = 0;
      } else if (++stale_epochs >= config.patience) {
        stop = true;
      }
    }
    if (observer) observer(params, stats);
    if (stop) break;
  }

  best.trained = true;
  return best;
}

}  // namespace coalign
