#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "coalign/kb.hpp"
#include "coalign/numeric.hpp"

namespace coalign {

struct DemConfig {
  int k2 = 75;
  int d_hidden = 0;  // 0 = word dimension; any other value must equal it
  double lr = 0.001;
  int batch = 1024;
  int epochs_max = 200;
  int patience = 5;

  void validate() const;
};

/// One GRU layer: update gate z, reset gate g, candidate state.
struct GruLayerParams {
  Parameter in_z, rec_z, bias_z;
  Parameter in_s, rec_s, bias_s;
  Parameter in_g, rec_g, bias_g;

  int d_in() const { return static_cast<int>(in_z.value.cols()); }
  int d_hidden() const { return static_cast<int>(in_z.value.rows()); }
};

struct AttentionParams {
  Parameter map;   // d_hidden x d_hidden
  Parameter bias;  // d_hidden x 1
};

/// Two stacked attentive GRU layers over frozen word vectors plus an affine
/// projection to the shared unit-norm description space. The attention dot
/// product forces d_hidden to equal the word dimension.
struct DemParams {
  GruLayerParams layer1, layer2;
  AttentionParams attn1, attn2;
  Parameter out_map;   // k2 x d_hidden
  Parameter out_bias;  // k2 x 1
  int d_hidden = 0;
  int k2 = 0;

  static DemParams init(int word_dim, int k2, std::uint64_t seed);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

/// s_t = z ⊙ s~ + (1-z) ⊙ s_prev with sigmoid gates and a tanh candidate.
Vec gru_step(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& s_prev,
             const GruLayerParams& layer);

/// Self-attention outputs v_t = |X| a_t u_t where u_t = tanh(map s_t + bias)
/// and a_t softmax-normalizes u_t.x_t over the true (un-padded) length.
std::vector<Vec> attend(const std::vector<Vec>& states,
                        const std::vector<Vec>& inputs,
                        const AttentionParams& attn, int true_len);

/// Everything the backward pass needs from one encoding.
struct EncoderTrace {
  struct Layer {
    std::vector<Vec> x, z, g, rec_cand, cand, s;  // per position
    std::vector<Vec> u, v;
    std::vector<double> a;
  };
  Layer l1, l2;
  Vec mean, affine_out, embedding;  // affine_out = tanh(...), pre-normalization
  double norm = 0.0;
  int true_len = 0;
};

/// Encode a padded token sequence to a unit-norm k2 vector. Pads must be a
/// suffix; an all-pad sequence is an error.
Vec encode_description(std::span<const int> tokens,
                       const WordEmbeddingTable& words,
                       const DemParams& params);

Vec encode_with_trace(std::span<const int> tokens,
                      const WordEmbeddingTable& words, const DemParams& params,
                      EncoderTrace& trace);

/// Accumulates d(loss)/d(params) given d(loss)/d(embedding) for one encoding.
void backprop_description(const EncoderTrace& trace,
                          const Eigen::Ref<const Vec>& d_embedding,
                          DemParams& params);

/// Bidirectional log-likelihood with stratified in-batch negatives: for each
/// pair, the positive dot appears twice and the other-language batch entities
/// serve as negatives. Returns the loss and the gradient w.r.t. every
/// embedding. Batch size must be at least 2.
double sd_loss(const std::vector<Vec>& emb_i, const std::vector<Vec>& emb_j,
               std::vector<Vec>& grad_i, std::vector<Vec>& grad_j);

/// Full loss over a batch of ILL pairs: encodes both sides, applies sd_loss,
/// and backpropagates through the encoder into the parameter gradients.
double loss_dem(const std::vector<IllPair>& batch,
                const DescriptionCorpus& corpus_i,
                const DescriptionCorpus& corpus_j,
                const WordEmbeddingTable& words, DemParams& params);

Vec encode_entity(int entity, const DescriptionCorpus& corpus,
                  const WordEmbeddingTable& words, const DemParams& params);

struct DemEpochStats {
  int epoch = 0;
  double loss = 0.0;
  double val_hit1 = 0.0;
};

using DemEpochObserver =
    std::function<void(const DemParams&, const DemEpochStats&)>;

/// Mini-batch SGD over the ILL pairs that have descriptions on both sides
/// (others are skipped and counted); early stopping on validation Hit@1 of
/// description-based alignment. Returns the best-on-validation snapshot.
DemParams train_dem(const MultilingualKB& kb,
                    const std::vector<IllPair>& train_ills,
                    const std::vector<IllPair>& valid_ills,
                    const DemConfig& config, std::uint64_t seed,
                    std::size_t* skipped_pairs = nullptr,
                    const DemEpochObserver& observer = nullptr);

/// Hit@1 of `pairs` ranking all described structural entities of the target
/// language by description-embedding distance.
double dem_alignment_hit1(const DemParams& params, const MultilingualKB& kb,
                          const std::vector<IllPair>& pairs);

}  // namespace coalign
