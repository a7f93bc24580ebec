#include "coalign/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace coalign {

void ProposalPolicy::validate() const {
  if (tau <= 0 || tau >= 1)
    throw InputError("precision threshold tau must be in (0,1)");
  if (min_new_fraction <= 0)
    throw InputError("min_new_fraction must be positive");
}

CoTrainState CoTrainState::make(const MultilingualKB& kb,
                                const std::vector<IllPair>& initial_i_tr) {
  CoTrainState state;
  state.i_tr = initial_i_tr;

  std::set<int> linked_i, linked_j;
  auto mark = [&](const std::vector<IllPair>& part) {
    for (const auto& [a, b] : part) {
      linked_i.insert(a);
      linked_j.insert(b);
    }
  };
  mark(kb.ills.train);
  mark(kb.ills.valid);
  mark(kb.ills.test);
  mark(kb.ills.zero_shot);
  mark(initial_i_tr);

  const auto& gi = kb.graph(kb.languages[0]);
  const auto& gj = kb.graph(kb.languages[1]);
  for (int e = 0; e < gi.structural_entities; ++e)
    if (!linked_i.count(e)) state.candidates_i.insert(e);
  for (int e = 0; e < gj.structural_entities; ++e)
    if (!linked_j.count(e)) state.candidates_j.insert(e);
  return state;
}

std::optional<double> calibrate_threshold(
    const std::vector<std::pair<double, bool>>& predictions, double tau) {
  if (predictions.empty()) return std::nullopt;

  std::vector<double> candidates;
  candidates.reserve(predictions.size() + 1);
  double max_d = -std::numeric_limits<double>::infinity();
  for (const auto& [d, ok] : predictions) {
    candidates.push_back(d);
    max_d = std::max(max_d, d);
  }
  candidates.push_back(max_d + 1.0);  // admits the full set
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::optional<double> best;
  for (double delta : candidates) {
    std::size_t kept = 0, correct = 0;
    for (const auto& [d, ok] : predictions) {
      if (d < delta) {
        ++kept;
        if (ok) ++correct;
      }
    }
    if (kept == 0) continue;
    const double precision =
        static_cast<double>(correct) / static_cast<double>(kept);
    if (precision >= tau && (!best || delta > *best)) best = delta;
  }
  return best;
}

namespace {

double precision_below(const std::vector<std::pair<double, bool>>& predictions,
                       double delta) {
  std::size_t kept = 0, correct = 0;
  for (const auto& [d, ok] : predictions) {
    if (d < delta) {
      ++kept;
      if (ok) ++correct;
    }
  }
  return kept ? static_cast<double>(correct) / static_cast<double>(kept) : 0.0;
}

// Claim proposals in ascending NN-distance order; the closer source wins a
// contested target, later sources are skipped for this turn.
std::vector<Proposal> claim_pass(std::vector<Proposal> scored, double delta,
                                 CoTrainState& state) {
  std::sort(scored.begin(), scored.end(), [](const Proposal& x,
                                             const Proposal& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.source < y.source;
  });
  std::vector<Proposal> accepted;
  for (const Proposal& p : scored) {
    if (p.distance >= delta) break;
    if (!state.candidates_i.count(p.source) ||
        !state.candidates_j.count(p.target))
      continue;
    state.candidates_i.erase(p.source);
    state.candidates_j.erase(p.target);
    state.i_tr.emplace_back(p.source, p.target);
    accepted.push_back(p);
  }
  return accepted;
}

}  // namespace

std::vector<Proposal> propose_kgem(const KgemParams& params,
                                   CoTrainState& state,
                                   const std::vector<IllPair>& valid_ills,
                                   const ProposalPolicy& policy) {
  policy.validate();
  const Mat& m = params.transform.value;
  const Mat& targets = params.ent[1].value;

  std::vector<std::pair<double, bool>> val_predictions;
  val_predictions.reserve(valid_ills.size());
  for (const auto& [a, b] : valid_ills) {
    const Vec x = m * params.ent[0].value.row(a).transpose();
    int best = 0;
    double best_d = (targets.row(0).transpose() - x).norm();
    for (Eigen::Index c = 1; c < targets.rows(); ++c) {
      const double d = (targets.row(c).transpose() - x).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    val_predictions.emplace_back(best_d, best == b);
  }

  const std::optional<double> delta =
      calibrate_threshold(val_predictions, policy.tau);

  TurnRecord record;
  record.iteration = state.iteration;
  record.model = "kgem";
  record.delta = delta;

  std::vector<Proposal> accepted;
  if (delta) {
    record.val_precision = precision_below(val_predictions, *delta);
    std::vector<Proposal> scored;
    scored.reserve(state.candidates_i.size());
    for (int e : state.candidates_i) {
      const Vec x = m * params.ent[0].value.row(e).transpose();
      int best = -1;
      double best_d = 0.0;
      for (int c : state.candidates_j) {
        const double d = (targets.row(c).transpose() - x).norm();
        if (best < 0 || d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best >= 0) scored.push_back({e, best, best_d});
    }
    accepted = claim_pass(std::move(scored), *delta, state);
  }

  record.proposed = accepted.size();
  record.i_tr_size = state.i_tr.size();
  state.history.push_back(record);
  return accepted;
}

std::vector<Proposal> propose_dem(const DemParams& params,
                                  const MultilingualKB& kb,
                                  CoTrainState& state,
                                  const std::vector<IllPair>& valid_ills,
                                  const ProposalPolicy& policy) {
  policy.validate();
  const auto& corpus_i = kb.descriptions.at(kb.languages[0]);
  const auto& corpus_j = kb.descriptions.at(kb.languages[1]);
  const auto& graph_j = kb.graph(kb.languages[1]);

  // Encodings of every described structural target, for validation NN.
  std::vector<int> val_space;
  for (const auto& [id, entry] : corpus_j.entries)
    if (id < graph_j.structural_entities) val_space.push_back(id);
  std::sort(val_space.begin(), val_space.end());

  std::vector<Vec> val_emb(val_space.size());
  for (std::size_t c = 0; c < val_space.size(); ++c)
    val_emb[c] = encode_entity(val_space[c], corpus_j, kb.words, params);

  std::vector<std::pair<double, bool>> val_predictions;
  for (const auto& [a, b] : valid_ills) {
    if (!corpus_i.has(a) || !corpus_j.has(b)) continue;
    const Vec d = encode_entity(a, corpus_i, kb.words, params);
    int best = -1;
    double best_d = 0.0;
    for (std::size_t c = 0; c < val_space.size(); ++c) {
      const double dist = (val_emb[c] - d).norm();
      if (best < 0 || dist < best_d) {
        best_d = dist;
        best = val_space[c];
      }
    }
    if (best >= 0) val_predictions.emplace_back(best_d, best == b);
  }

  const std::optional<double> delta =
      calibrate_threshold(val_predictions, policy.tau);

  TurnRecord record;
  record.iteration = state.iteration;
  record.model = "dem";
  record.delta = delta;

  std::vector<Proposal> accepted;
  if (delta) {
    record.val_precision = precision_below(val_predictions, *delta);

    std::vector<int> cand_j;
    std::vector<Vec> cand_emb;
    for (int c : state.candidates_j) {
      if (!corpus_j.has(c)) continue;
      cand_j.push_back(c);
      cand_emb.push_back(encode_entity(c, corpus_j, kb.words, params));
    }

    std::vector<Proposal> scored;
    if (!cand_j.empty()) {
      for (int e : state.candidates_i) {
        if (!corpus_i.has(e)) continue;  // no description, never proposed
        const Vec d = encode_entity(e, corpus_i, kb.words, params);
        int best = -1;
        double best_d = 0.0;
        for (std::size_t c = 0; c < cand_j.size(); ++c) {
          const double dist = (cand_emb[c] - d).norm();
          if (best < 0 || dist < best_d) {
            best_d = dist;
            best = cand_j[c];
          }
        }
        scored.push_back({e, best, best_d});
      }
    }
    accepted = claim_pass(std::move(scored), *delta, state);
  }

  record.proposed = accepted.size();
  record.i_tr_size = state.i_tr.size();
  state.history.push_back(record);
  return accepted;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_history(const std::string& path,
                   const std::vector<TurnRecord>& history) {
  std::ofstream os(path);
  for (const TurnRecord& r : history) {
    json j;
    j["iteration"] = r.iteration;
    j["model"] = r.model;
    if (r.delta)
      j["delta"] = *r.delta;
    else
      j["delta"] = nullptr;
    j["proposed"] = r.proposed;
    if (r.val_precision)
      j["val_precision"] = *r.val_precision;
    else
      j["val_precision"] = nullptr;
    j["i_tr_size"] = r.i_tr_size;
    os << j.dump() << "\n";
  }
}

void write_proposals(const std::string& path, const MultilingualKB& kb,
                     const std::vector<Proposal>& kgem_props,
                     const std::vector<Proposal>& dem_props) {
  const auto& gi = kb.graph(kb.languages[0]);
  const auto& gj = kb.graph(kb.languages[1]);
  std::ofstream os(path);
  auto dump = [&](const std::vector<Proposal>& props, const char* tag) {
    for (const Proposal& p : props)
      os << gi.entities.name(p.source) << "\t" << gj.entities.name(p.target)
         << "\t" << fmt_double(p.distance) << "\t" << tag << "\n";
  };
  dump(kgem_props, "kgem");
  dump(dem_props, "dem");
}

}  // namespace

CoTrainResult cotrain(const MultilingualKB& kb,
                      const std::vector<IllPair>& initial_i_tr,
                      const std::vector<IllPair>& valid_ills,
                      const CoTrainConfig& config, std::uint64_t seed) {
  config.policy.validate();
  if (config.max_iterations < 1)
    throw InputError("cotrain: max_iterations must be >= 1");

  CoTrainState state = CoTrainState::make(kb, initial_i_tr);

  const int vocab_floor =
      std::min(kb.graph(kb.languages[0]).structural_entities,
               kb.graph(kb.languages[1]).structural_entities);
  const double min_new = config.policy.min_new_fraction * vocab_floor;

  const bool persist = !config.out_dir.empty();
  if (persist) fs::create_directories(config.out_dir);

  CoTrainResult result;
  bool have_models = false;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    state.iteration = iter;

    KgemParams kgem =
        train_kgem(kb, state.i_tr, valid_ills, config.kgem,
                   derive_seed(seed, 100 + iter, 0));
    const auto kgem_props = propose_kgem(kgem, state, valid_ills, config.policy);

    DemParams dem = train_dem(kb, state.i_tr, valid_ills, config.dem,
                              derive_seed(seed, 200 + iter, 1));
    const auto dem_props =
        propose_dem(dem, kb, state, valid_ills, config.policy);

    if (persist) {
      const fs::path iter_dir =
          fs::path(config.out_dir) / ("iter_" + std::to_string(iter));
      fs::create_directories(iter_dir);
      save_checkpoint((iter_dir / "kgem.ckpt").string(),
                      std::as_const(kgem).all(), seed);
      save_checkpoint((iter_dir / "dem.ckpt").string(),
                      std::as_const(dem).all(), seed);
      write_proposals((iter_dir / "proposals.tsv").string(), kb, kgem_props,
                      dem_props);
    }

    result.kgem = std::move(kgem);
    result.dem = std::move(dem);
    have_models = true;

    if (static_cast<double>(kgem_props.size()) < min_new ||
        static_cast<double>(dem_props.size()) < min_new)
      break;
  }

  result.state = std::move(state);
  if (persist)
    write_history((fs::path(config.out_dir) / "history.jsonl").string(),
                  result.state.history);
  if (!have_models)
    throw std::runtime_error("cotrain: no iteration completed");
  return result;
}

}  // namespace coalign
