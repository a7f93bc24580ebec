#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "coalign/kb.hpp"
#include "coalign/numeric.hpp"
#include "coalign/rng.hpp"

namespace coalign {

struct KgemConfig {
  int k1 = 50;
  double gamma = 1.0;
  double alpha = 2.5;
  double lr = 0.005;
  int batch = 1024;
  int epochs_max = 400;
  int patience = 5;

  void validate() const;
};

/// Per-language translational embeddings bridged by one linear transform
/// from the first language's entity space into the second's.
struct KgemParams {
  std::array<Parameter, 2> ent;  // |E_L| x k1, unit-norm rows
  std::array<Parameter, 2> rel;  // |R_L| x k1
  Parameter transform;           // k1 x k1, language 0 -> language 1
  int k1 = 0;
  bool trained = false;

  static KgemParams init(const MultilingualKB& kb, int k1, std::uint64_t seed);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void project_entity_rows();  // renormalize every entity row to unit l2
};

/// ||h + r - t||_2
double score_triple(const Eigen::Ref<const Vec>& h,
                    const Eigen::Ref<const Vec>& r,
                    const Eigen::Ref<const Vec>& t);

/// M * e; cross-lingual conversion point of an entity vector.
Vec transform_entity(const Eigen::Ref<const Vec>& e, const Mat& m);

/// Bernoulli corruption: replaces head with probability tph/(tph+hpt),
/// otherwise tail, resampling until the result is a non-trivial negative
/// (not in the graph, replacement differs from the original).
Triple corrupt_triple(const Triple& t, const KnowledgeGraph& graph, Rng& rng);

struct TrainingTriple {
  int lang = 0;  // 0 = L_i, 1 = L_j
  Triple pos;
  Triple neg;
};

/// Hinge loss sum over the batch; accumulates analytic gradients into the
/// touched entity/relation rows. Margin-satisfied terms contribute nothing.
double loss_knowledge(const std::vector<TrainingTriple>& batch,
                      KgemParams& params, double gamma);

/// Sum of ||M e - e'||_2 over ILL pairs; gradients (scaled by `weight`)
/// flow into both entity rows and the transform.
double loss_alignment(const std::vector<IllPair>& batch, KgemParams& params,
                      double weight);

/// Alignment Hit@1 of `pairs`, ranking every structural entity of the
/// target side from the transformed source vector (ties by entity id).
double alignment_hit1(const KgemParams& params, const std::vector<IllPair>& pairs);

struct EpochStats {
  int epoch = 0;
  double loss_knowledge = 0.0;  // step-averaged hinge loss
  double loss_alignment = 0.0;  // step-averaged, alpha-weighted
  double total() const { return loss_knowledge + loss_alignment; }
  double val_hit1 = 0.0;
};

using EpochObserver = std::function<void(const KgemParams&, const EpochStats&)>;

/// Joint mini-batch SGD on the hinge and alignment objectives with per-epoch
/// entity renormalization and early stopping on validation Hit@1. Returns the
/// best-on-validation snapshot (initialization included as a candidate).
KgemParams train_kgem(const MultilingualKB& kb,
                      const std::vector<IllPair>& train_ills,
                      const std::vector<IllPair>& valid_ills,
                      const KgemConfig& config, std::uint64_t seed,
                      const EpochObserver& observer = nullptr);

}  // namespace coalign
