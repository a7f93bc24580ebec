#include "coalign/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace coalign {

namespace {

// Rank of `truth` among candidate ids ordered by (distance, id).
int rank_among(const std::vector<int>& candidate_ids,
               const std::vector<double>& distances, int truth) {
  int truth_pos = -1;
  for (std::size_t c = 0; c < candidate_ids.size(); ++c)
    if (candidate_ids[c] == truth) {
      truth_pos = static_cast<int>(c);
      break;
    }
  if (truth_pos < 0)
    throw std::invalid_argument("rank_among: truth not in candidate set");
  const double d = distances[truth_pos];
  int rank = 1;
  for (std::size_t c = 0; c < candidate_ids.size(); ++c) {
    if (static_cast<int>(c) == truth_pos) continue;
    if (distances[c] < d ||
        (distances[c] == d && candidate_ids[c] < truth))
      ++rank;
  }
  return rank;
}

std::vector<int> sorted_by_distance(const std::vector<int>& ids,
                                    const std::vector<double>& distances) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return ids[a] < ids[b];
  });
  std::vector<int> out(ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) out[k] = ids[order[k]];
  return out;
}

}  // namespace

Metrics eval_alignment(const KgemParams& params,
                       const std::vector<IllPair>& test_pairs, bool forward,
                       std::vector<RankCase>* cases) {
  const Mat& m = params.transform.value;
  std::vector<int> ranks;
  ranks.reserve(test_pairs.size());

  if (forward) {
    const Mat& targets = params.ent[1].value;
    for (const auto& [a, b] : test_pairs) {
      const Vec x = m * params.ent[0].value.row(a).transpose();
      std::vector<double> dist(targets.rows());
      for (Eigen::Index c = 0; c < targets.rows(); ++c)
        dist[c] = (targets.row(c).transpose() - x).norm();
      const int rank = rank_of(dist, b);
      ranks.push_back(rank);
      if (cases) cases->push_back({a, b, rank});
    }
  } else {
    // Rank source entities by the distance of their transform to e'.
    const Mat transformed = params.ent[0].value * m.transpose();
    for (const auto& [a, b] : test_pairs) {
      const Vec y = params.ent[1].value.row(b).transpose();
      std::vector<double> dist(transformed.rows());
      for (Eigen::Index c = 0; c < transformed.rows(); ++c)
        dist[c] = (transformed.row(c).transpose() - y).norm();
      const int rank = rank_of(dist, a);
      ranks.push_back(rank);
      if (cases) cases->push_back({b, a, rank});
    }
  }
  return aggregate(ranks);
}

Metrics eval_zero_shot(const DemParams& params,
                       const std::vector<IllPair>& zero_shot_pairs,
                       const MultilingualKB& kb,
                       std::vector<RankCase>* cases) {
  const auto& corpus_i = kb.descriptions.at(kb.languages[0]);
  const auto& corpus_j = kb.descriptions.at(kb.languages[1]);

  std::vector<int> candidates;
  for (const auto& [a, b] : zero_shot_pairs)
    if (corpus_j.has(b)) candidates.push_back(b);
  std::sort(candidates.begin(), candidates.end());

  Mat cand_emb(candidates.size(), params.k2);
  for (std::size_t c = 0; c < candidates.size(); ++c)
    cand_emb.row(c) =
        encode_entity(candidates[c], corpus_j, kb.words, params).transpose();

  std::vector<int> ranks;
  std::size_t skipped = 0;
  for (const auto& [a, b] : zero_shot_pairs) {
    if (!corpus_i.has(a) || !corpus_j.has(b)) {
      ++skipped;
      continue;
    }
    const Vec d = encode_entity(a, corpus_i, kb.words, params);
    std::vector<double> dist(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
      dist[c] = (cand_emb.row(c).transpose() - d).norm();
    const int rank = rank_among(candidates, dist, b);
    ranks.push_back(rank);
    if (cases) cases->push_back({a, b, rank});
  }
  Metrics m = aggregate(ranks);
  m.skipped = skipped;
  return m;
}

std::vector<int> complete_mono(const KgemParams& params, int lang,
                               const CompletionQuery& query) {
  const Mat& ents = params.ent[lang].value;
  const Mat& rels = params.rel[lang].value;
  if (query.anchor < 0 || query.anchor >= ents.rows() || query.relation < 0 ||
      query.relation >= rels.rows())
    throw InputError("complete_mono: unknown entity or relation id");

  const Vec r = rels.row(query.relation).transpose();
  const Vec anchor = ents.row(query.anchor).transpose();
  // tail query ranks c by ||h + r - c||; head query by ||c + r - t||
  const Vec point = query.tail_query ? Vec(anchor + r) : Vec(anchor - r);

  std::vector<int> ids(ents.rows());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> dist(ents.rows());
  for (Eigen::Index c = 0; c < ents.rows(); ++c)
    dist[c] = (ents.row(c).transpose() - point).norm();
  return sorted_by_distance(ids, dist);
}

std::vector<int> complete_cross(const KgemParams& params,
                                const CompletionQuery& query) {
  if (!params.trained)
    throw std::runtime_error("complete_cross: transform has not been trained");
  const Mat& m = params.transform.value;
  const Mat& ents_src = params.ent[0].value;
  const Mat& ents_mid = params.ent[1].value;
  if (query.anchor < 0 || query.anchor >= ents_src.rows() ||
      query.relation < 0 || query.relation >= params.rel[0].value.rows())
    throw InputError("complete_cross: unknown entity or relation id");

  // 1. move the monolingual prediction point into the intermediary space
  const Vec h = m * ents_src.row(query.anchor).transpose();
  const Vec r = m * params.rel[0].value.row(query.relation).transpose();
  const Vec point = query.tail_query ? Vec(h + r) : Vec(h - r);

  // 2. snap to the nearest intermediary entity (ties by id)
  int snap = 0;
  double snap_d = (ents_mid.row(0).transpose() - point).norm();
  for (Eigen::Index c = 1; c < ents_mid.rows(); ++c) {
    const double d = (ents_mid.row(c).transpose() - point).norm();
    if (d < snap_d) {
      snap_d = d;
      snap = static_cast<int>(c);
    }
  }
  const Vec target = ents_mid.row(snap).transpose();

  // 3. convert back: rank source candidates by transformed distance
  std::vector<int> ids(ents_src.rows());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<double> dist(ents_src.rows());
  for (Eigen::Index c = 0; c < ents_src.rows(); ++c)
    dist[c] = (m * ents_src.row(c).transpose() - target).norm();
  return sorted_by_distance(ids, dist);
}

CompletionResult eval_completion(const KgemParams& params, int lang,
                                 const std::vector<Triple>& heldout,
                                 bool cross, std::vector<RankCase>* cases) {
  if (cross && lang != 0)
    throw InputError(
        "eval_completion: cross-lingual prediction is defined for the first "
        "language of the pair");
  if (heldout.empty()) throw InputError("eval_completion: no held-out triples");

  std::vector<int> ranks;
  ranks.reserve(heldout.size() * 2);
  auto run = [&](const CompletionQuery& q, int truth) {
    const std::vector<int> ranked = cross ? complete_cross(params, q)
                                          : complete_mono(params, lang, q);
    const auto it = std::find(ranked.begin(), ranked.end(), truth);
    const int rank = static_cast<int>(it - ranked.begin()) + 1;
    ranks.push_back(rank);
    if (cases) cases->push_back({q.anchor, truth, rank});
  };
  for (const Triple& t : heldout) {
    run({true, t.h, t.r}, t.t);
    run({false, t.t, t.r}, t.h);
  }

  CompletionResult result;
  result.metrics = aggregate(ranks);
  double sum = 0.0;
  for (int r : ranks) sum += r;
  result.mean_rank = sum / static_cast<double>(ranks.size());
  return result;
}

}  // namespace coalign
