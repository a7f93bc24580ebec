#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coalign/dem.hpp"
#include "coalign/kb.hpp"
#include "coalign/kgem.hpp"

namespace coalign {

struct ProposalPolicy {
  double tau = 0.9;              // validation precision threshold
  double min_new_fraction = 0.01;  // termination fraction of the vocabulary

  void validate() const;
};

struct TurnRecord {
  int iteration = 0;
  std::string model;               // "kgem" or "dem"
  std::optional<double> delta;     // calibrated distance threshold
  std::size_t proposed = 0;
  std::optional<double> val_precision;  // precision actually achieved at delta
  std::size_t i_tr_size = 0;       // after this turn
};

struct CoTrainState {
  std::vector<IllPair> i_tr;
  std::set<int> candidates_i, candidates_j;  // entities in no known ILL
  int iteration = 0;
  std::vector<TurnRecord> history;

  static CoTrainState make(const MultilingualKB& kb,
                           const std::vector<IllPair>& initial_i_tr);
};

/// Largest threshold (drawn from the observed distances, plus a sentinel one
/// past the maximum) whose strictly-below prediction subset is non-empty and
/// at least tau-precise. none when no threshold qualifies.
std::optional<double> calibrate_threshold(
    const std::vector<std::pair<double, bool>>& predictions, double tau);

struct Proposal {
  int source = 0;
  int target = 0;
  double distance = 0.0;
};

/// One KGEM propose turn: calibrate on validation NN predictions, then claim
/// candidate pairs in ascending NN-distance order. Mutates the state and
/// appends a history record.
std::vector<Proposal> propose_kgem(const KgemParams& params, CoTrainState& state,
                                   const std::vector<IllPair>& valid_ills,
                                   const ProposalPolicy& policy);

/// Same contract with description embeddings; candidates lacking a
/// description never participate.
std::vector<Proposal> propose_dem(const DemParams& params,
                                  const MultilingualKB& kb, CoTrainState& state,
                                  const std::vector<IllPair>& valid_ills,
                                  const ProposalPolicy& policy);

struct CoTrainConfig {
  KgemConfig kgem;
  DemConfig dem;
  ProposalPolicy policy;
  int max_iterations = 10;
  std::string out_dir;  // per-iteration artifacts; empty disables writing
};

struct CoTrainResult {
  KgemParams kgem;
  DemParams dem;
  CoTrainState state;
};

/// Alternating train-and-propose rounds. Each iteration reinitializes both
/// models from seeds derived from the master seed, trains KGEM, proposes,
/// trains DEM on the grown set, proposes again. Terminates when either
/// component proposes fewer pairs than min_new_fraction of the smaller
/// entity vocabulary, or after max_iterations.
CoTrainResult cotrain(const MultilingualKB& kb,
                      const std::vector<IllPair>& initial_i_tr,
                      const std::vector<IllPair>& valid_ills,
                      const CoTrainConfig& config, std::uint64_t seed);

}  // namespace coalign
