#include "coalign/dem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coalign/rng.hpp"

namespace coalign {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_sigmoid(double x) {
  return x > 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

Vec sigmoid_vec(const Vec& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

GruLayerParams init_gru(const std::string& prefix, int d_in, int d_hidden,
                        std::uint64_t seed) {
  GruLayerParams p;
  int k = 0;
  auto mk = [&](const char* name, int rows, int cols) {
    return Parameter(prefix + name,
                     orthogonal_init(rows, cols, derive_seed(seed, 23, k++)));
  };
  p.in_z = mk(".in_z", d_hidden, d_in);
  p.rec_z = mk(".rec_z", d_hidden, d_hidden);
  p.bias_z = Parameter(prefix + ".bias_z", Mat::Zero(d_hidden, 1));
  p.in_s = mk(".in_s", d_hidden, d_in);
  p.rec_s = mk(".rec_s", d_hidden, d_hidden);
  p.bias_s = Parameter(prefix + ".bias_s", Mat::Zero(d_hidden, 1));
  p.in_g = mk(".in_g", d_hidden, d_in);
  p.rec_g = mk(".rec_g", d_hidden, d_hidden);
  p.bias_g = Parameter(prefix + ".bias_g", Mat::Zero(d_hidden, 1));
  return p;
}

void collect(GruLayerParams& p, std::vector<Parameter*>& out) {
  out.insert(out.end(), {&p.in_z, &p.rec_z, &p.bias_z, &p.in_s, &p.rec_s,
                         &p.bias_s, &p.in_g, &p.rec_g, &p.bias_g});
}

}  // namespace

void DemConfig::validate() const {
  if (k2 < 1 || d_hidden < 0 || lr <= 0 || batch < 2 || epochs_max < 1 ||
      patience < 1)
    throw InputError("invalid DEM configuration");
}

DemParams DemParams::init(int word_dim, int k2, std::uint64_t seed) {
  if (word_dim < 1 || k2 < 1)
    throw InputError("DemParams: dimensions must be positive");
  DemParams p;
  p.d_hidden = word_dim;  // attention dot u.x ties hidden size to word dim
  p.k2 = k2;
  p.layer1 = init_gru("gru1", word_dim, word_dim, derive_seed(seed, 31, 0));
  p.layer2 = init_gru("gru2", word_dim, word_dim, derive_seed(seed, 31, 1));
  p.attn1 = {Parameter("attn1.map", orthogonal_init(word_dim, word_dim,
                                                    derive_seed(seed, 37, 0))),
             Parameter("attn1.bias", Mat::Zero(word_dim, 1))};
  p.attn2 = {Parameter("attn2.map", orthogonal_init(word_dim, word_dim,
                                                    derive_seed(seed, 37, 1))),
             Parameter("attn2.bias", Mat::Zero(word_dim, 1))};
  p.out_map = Parameter(
      "out_map", orthogonal_init(k2, word_dim, derive_seed(seed, 41, 0)));
  p.out_bias = Parameter("out_bias", Mat::Zero(k2, 1));
  return p;
}

std::vector<Parameter*> DemParams::all() {
  std::vector<Parameter*> out;
  collect(layer1, out);
  out.push_back(&attn1.map);
  out.push_back(&attn1.bias);
  collect(layer2, out);
  out.push_back(&attn2.map);
  out.push_back(&attn2.bias);
  out.push_back(&out_map);
  out.push_back(&out_bias);
  return out;
}

std::vector<const Parameter*> DemParams::all() const {
  auto mut = const_cast<DemParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

Vec gru_step(const Eigen::Ref<const Vec>& x,
             const Eigen::Ref<const Vec>& s_prev,
             const GruLayerParams& layer) {
  if (x.size() != layer.d_in() || s_prev.size() != layer.d_hidden())
    throw std::invalid_argument("gru_step: shape mismatch");
  const Vec z =
      sigmoid_vec(layer.in_z.value * x + layer.rec_z.value * s_prev +
                  layer.bias_z.value.col(0));
  const Vec g =
      sigmoid_vec(layer.in_g.value * x + layer.rec_g.value * s_prev +
                  layer.bias_g.value.col(0));
  const Vec cand = (layer.in_s.value * x +
                    g.cwiseProduct(layer.rec_s.value * s_prev) +
                    layer.bias_s.value.col(0))
                       .array()
                       .tanh();
  return z.cwiseProduct(cand) + (Vec::Ones(z.size()) - z).cwiseProduct(s_prev);
}

std::vector<Vec> attend(const std::vector<Vec>& states,
                        const std::vector<Vec>& inputs,
                        const AttentionParams& attn, int true_len) {
  if (true_len <= 0) throw std::invalid_argument("attend: empty sequence");
  if (states.size() < static_cast<std::size_t>(true_len) ||
      inputs.size() < static_cast<std::size_t>(true_len))
    throw std::invalid_argument("attend: sequence shorter than true length");

  std::vector<Vec> u(true_len);
  std::vector<double> score(true_len);
  for (int t = 0; t < true_len; ++t) {
    u[t] = (attn.map.value * states[t] + attn.bias.value.col(0)).array().tanh();
    score[t] = u[t].dot(inputs[t]);
  }
  const double m = *std::max_element(score.begin(), score.end());
  double denom = 0.0;
  std::vector<double> a(true_len);
  for (int t = 0; t < true_len; ++t) {
    a[t] = std::exp(score[t] - m);
    denom += a[t];
  }
  std::vector<Vec> v(true_len);
  for (int t = 0; t < true_len; ++t) {
    a[t] /= denom;
    v[t] = static_cast<double>(true_len) * a[t] * u[t];
  }
  return v;
}

namespace {

// Forward pass of one attentive GRU layer, recording intermediates.
void run_layer(const std::vector<Vec>& inputs, const GruLayerParams& layer,
               const AttentionParams& attn, EncoderTrace::Layer& tr) {
  const int n = static_cast<int>(inputs.size());
  const int d = layer.d_hidden();
  tr.x = inputs;
  tr.z.resize(n);
  tr.g.resize(n);
  tr.rec_cand.resize(n);
  tr.cand.resize(n);
  tr.s.resize(n);

  Vec s_prev = Vec::Zero(d);
  for (int t = 0; t < n; ++t) {
    tr.z[t] = sigmoid_vec(layer.in_z.value * inputs[t] +
                          layer.rec_z.value * s_prev +
                          layer.bias_z.value.col(0));
    tr.g[t] = sigmoid_vec(layer.in_g.value * inputs[t] +
                          layer.rec_g.value * s_prev +
                          layer.bias_g.value.col(0));
    tr.rec_cand[t] = layer.rec_s.value * s_prev;
    tr.cand[t] = (layer.in_s.value * inputs[t] +
                  tr.g[t].cwiseProduct(tr.rec_cand[t]) +
                  layer.bias_s.value.col(0))
                     .array()
                     .tanh();
    tr.s[t] = tr.z[t].cwiseProduct(tr.cand[t]) +
              (Vec::Ones(d) - tr.z[t]).cwiseProduct(s_prev);
    s_prev = tr.s[t];
  }

  tr.u.resize(n);
  std::vector<double> score(n);
  for (int t = 0; t < n; ++t) {
    tr.u[t] =
        (attn.map.value * tr.s[t] + attn.bias.value.col(0)).array().tanh();
    score[t] = tr.u[t].dot(inputs[t]);
  }
  const double m = *std::max_element(score.begin(), score.end());
  double denom = 0.0;
  tr.a.resize(n);
  for (int t = 0; t < n; ++t) {
    tr.a[t] = std::exp(score[t] - m);
    denom += tr.a[t];
  }
  tr.v.resize(n);
  for (int t = 0; t < n; ++t) {
    tr.a[t] /= denom;
    tr.v[t] = static_cast<double>(n) * tr.a[t] * tr.u[t];
  }
}

// Backward pass of one layer; returns d(loss)/d(inputs).
std::vector<Vec> backprop_layer(const EncoderTrace::Layer& tr,
                                const std::vector<Vec>& d_v,
                                GruLayerParams& layer, AttentionParams& attn) {
  const int n = static_cast<int>(tr.x.size());
  const int d = layer.d_hidden();
  std::vector<Vec> d_x(n, Vec::Zero(layer.d_in()));
  std::vector<Vec> d_s(n, Vec::Zero(d));

  // attention: v_t = n a_t u_t, a = softmax(u_t.x_t)
  std::vector<double> d_a(n);
  std::vector<Vec> d_u(n);
  for (int t = 0; t < n; ++t) {
    d_a[t] = static_cast<double>(n) * d_v[t].dot(tr.u[t]);
    d_u[t] = static_cast<double>(n) * tr.a[t] * d_v[t];
  }
  double mix = 0.0;
  for (int t = 0; t < n; ++t) mix += tr.a[t] * d_a[t];
  for (int t = 0; t < n; ++t) {
    const double d_score = tr.a[t] * (d_a[t] - mix);
    d_u[t] += d_score * tr.x[t];
    d_x[t] += d_score * tr.u[t];
    const Vec d_pre =
        d_u[t].cwiseProduct(Vec::Ones(d) - tr.u[t].cwiseProduct(tr.u[t]));
    attn.map.grad.noalias() += d_pre * tr.s[t].transpose();
    attn.bias.grad.col(0) += d_pre;
    d_s[t] += attn.map.value.transpose() * d_pre;
  }

  // GRU backward through time
  Vec carry = Vec::Zero(d);
  for (int t = n - 1; t >= 0; --t) {
    const Vec s_prev = t > 0 ? tr.s[t - 1] : Vec(Vec::Zero(d));
    const Vec ds = d_s[t] + carry;

    const Vec d_z = ds.cwiseProduct(tr.cand[t] - s_prev);
    const Vec d_cand = ds.cwiseProduct(tr.z[t]);
    Vec d_prev = ds.cwiseProduct(Vec::Ones(d) - tr.z[t]);

    const Vec d_cand_pre = d_cand.cwiseProduct(
        Vec::Ones(d) - tr.cand[t].cwiseProduct(tr.cand[t]));
    layer.in_s.grad.noalias() += d_cand_pre * tr.x[t].transpose();
    layer.bias_s.grad.col(0) += d_cand_pre;
    d_x[t] += layer.in_s.value.transpose() * d_cand_pre;
    const Vec d_g = d_cand_pre.cwiseProduct(tr.rec_cand[t]);
    const Vec d_rec_cand = d_cand_pre.cwiseProduct(tr.g[t]);
    layer.rec_s.grad.noalias() += d_rec_cand * s_prev.transpose();
    d_prev += layer.rec_s.value.transpose() * d_rec_cand;

    const Vec d_g_pre = d_g.cwiseProduct(tr.g[t]).cwiseProduct(
        Vec::Ones(d) - tr.g[t]);
    layer.in_g.grad.noalias() += d_g_pre * tr.x[t].transpose();
    layer.rec_g.grad.noalias() += d_g_pre * s_prev.transpose();
    layer.bias_g.grad.col(0) += d_g_pre;
    d_x[t] += layer.in_g.value.transpose() * d_g_pre;
    d_prev += layer.rec_g.value.transpose() * d_g_pre;

    const Vec d_z_pre = d_z.cwiseProduct(tr.z[t]).cwiseProduct(
        Vec::Ones(d) - tr.z[t]);
    layer.in_z.grad.noalias() += d_z_pre * tr.x[t].transpose();
    layer.rec_z.grad.noalias() += d_z_pre * s_prev.transpose();
    layer.bias_z.grad.col(0) += d_z_pre;
    d_x[t] += layer.in_z.value.transpose() * d_z_pre;
    d_prev += layer.rec_z.value.transpose() * d_z_pre;

    carry = d_prev;
  }
  return d_x;
}

int validated_true_len(std::span<const int> tokens) {
  int true_len = 0;
  bool in_pad = false;
  for (int tok : tokens) {
    if (tok == WordEmbeddingTable::kPad) {
      in_pad = true;
    } else {
      if (in_pad)
        throw std::invalid_argument("encode: pad tokens must be a suffix");
      ++true_len;
    }
  }
  if (true_len == 0)
    throw std::invalid_argument("encode: all-pad sequence");
  return true_len;
}

}  // namespace

Vec encode_with_trace(std::span<const int> tokens,
                      const WordEmbeddingTable& words, const DemParams& params,
                      EncoderTrace& trace) {
  const int n = validated_true_len(tokens);
  trace.true_len = n;

  std::vector<Vec> x(n);
  for (int t = 0; t < n; ++t) x[t] = words.vector(tokens[t]);

  run_layer(x, params.layer1, params.attn1, trace.l1);
  run_layer(trace.l1.v, params.layer2, params.attn2, trace.l2);

  trace.mean = Vec::Zero(params.d_hidden);
  for (int t = 0; t < n; ++t) trace.mean += trace.l2.v[t];
  trace.mean /= static_cast<double>(n);

  trace.affine_out = (params.out_map.value * trace.mean +
                      params.out_bias.value.col(0))
                         .array()
                         .tanh();
  trace.norm = trace.affine_out.norm();
  if (trace.norm < 1e-300)
    throw std::runtime_error("encode: degenerate (zero) description embedding");
  trace.embedding = trace.affine_out / trace.norm;
  return trace.embedding;
}

Vec encode_description(std::span<const int> tokens,
                       const WordEmbeddingTable& words,
                       const DemParams& params) {
  EncoderTrace trace;
  return encode_with_trace(tokens, words, params, trace);
}

void backprop_description(const EncoderTrace& trace,
                          const Eigen::Ref<const Vec>& d_embedding,
                          DemParams& params) {
  // normalization: d_e = y / ||y||
  const Vec d_y = (d_embedding -
                   trace.embedding * trace.embedding.dot(d_embedding)) /
                  trace.norm;
  const Vec d_pre = d_y.cwiseProduct(
      Vec::Ones(d_y.size()) - trace.affine_out.cwiseProduct(trace.affine_out));
  params.out_map.grad.noalias() += d_pre * trace.mean.transpose();
  params.out_bias.grad.col(0) += d_pre;
  const Vec d_mean = params.out_map.value.transpose() * d_pre;

  const int n = trace.true_len;
  std::vector<Vec> d_v2(n, d_mean / static_cast<double>(n));
  std::vector<Vec> d_v1 =
      backprop_layer(trace.l2, d_v2, params.layer2, params.attn2);
  backprop_layer(trace.l1, d_v1, params.layer1, params.attn1);
  // gradients w.r.t. word vectors are discarded: the table is frozen
}

double sd_loss(const std::vector<Vec>& emb_i, const std::vector<Vec>& emb_j,
               std::vector<Vec>& grad_i, std::vector<Vec>& grad_j) {
  const std::size_t n = emb_i.size();
  if (n != emb_j.size())
    throw std::invalid_argument("sd_loss: side sizes differ");
  if (n < 2)
    throw std::invalid_argument("sd_loss: batch needs at least 2 pairs");

  grad_i.assign(n, Vec::Zero(emb_i[0].size()));
  grad_j.assign(n, Vec::Zero(emb_j[0].size()));

  double loss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = emb_i[k].dot(emb_j[k]);
    loss += -2.0 * log_sigmoid(pos);
    const double d_pos = -2.0 * sigmoid(-pos);
    grad_i[k] += d_pos * emb_j[k];
    grad_j[k] += d_pos * emb_i[k];

    for (std::size_t m = 0; m < n; ++m) {
      if (m == k) continue;
      // LL1 negatives: other language-i entities against d_{e'_k}
      const double q1 = emb_i[m].dot(emb_j[k]);
      loss += -log_sigmoid(-q1);
      grad_i[m] += sigmoid(q1) * emb_j[k];
      grad_j[k] += sigmoid(q1) * emb_i[m];
      // LL2 negatives: other language-j entities against d_{e_k}
      const double q2 = emb_i[k].dot(emb_j[m]);
      loss += -log_sigmoid(-q2);
      grad_i[k] += sigmoid(q2) * emb_j[m];
      grad_j[m] += sigmoid(q2) * emb_i[k];
    }
  }
  return loss;
}

double loss_dem(const std::vector<IllPair>& batch,
                const DescriptionCorpus& corpus_i,
                const DescriptionCorpus& corpus_j,
                const WordEmbeddingTable& words, DemParams& params) {
  if (batch.size() < 2)
    throw std::invalid_argument("loss_dem: batch needs at least 2 pairs");

  const std::size_t n = batch.size();
  std::vector<EncoderTrace> tr_i(n), tr_j(n);
  std::vector<Vec> emb_i(n), emb_j(n);
  for (std::size_t k = 0; k < n; ++k) {
    emb_i[k] = encode_with_trace(corpus_i.entries.at(batch[k].first).tokens,
                                 words, params, tr_i[k]);
    emb_j[k] = encode_with_trace(corpus_j.entries.at(batch[k].second).tokens,
                                 words, params, tr_j[k]);
  }

  std::vector<Vec> grad_i, grad_j;
  const double loss = sd_loss(emb_i, emb_j, grad_i, grad_j);
  for (std::size_t k = 0; k < n; ++k) {
    backprop_description(tr_i[k], grad_i[k], params);
    backprop_description(tr_j[k], grad_j[k], params);
  }
  return loss;
}

Vec encode_entity(int entity, const DescriptionCorpus& corpus,
                  const WordEmbeddingTable& words, const DemParams& params) {
  auto it = corpus.entries.find(entity);
  if (it == corpus.entries.end())
    throw std::invalid_argument("encode_entity: no description for entity " +
                                std::to_string(entity));
  return encode_description(it->second.tokens, words, params);
}

double dem_alignment_hit1(const DemParams& params, const MultilingualKB& kb,
                          const std::vector<IllPair>& pairs) {
  const auto& corpus_i = kb.descriptions.at(kb.languages[0]);
  const auto& corpus_j = kb.descriptions.at(kb.languages[1]);
  const auto& graph_j = kb.graph(kb.languages[1]);

  std::vector<int> targets;
  for (const auto& [id, entry] : corpus_j.entries)
    if (id < graph_j.structural_entities) targets.push_back(id);
  std::sort(targets.begin(), targets.end());
  if (targets.empty()) return 0.0;

  Mat target_emb(targets.size(), params.k2);
  for (std::size_t c = 0; c < targets.size(); ++c)
    target_emb.row(c) =
        encode_entity(targets[c], corpus_j, kb.words, params).transpose();

  std::size_t hits = 0, usable = 0;
  for (const auto& [a, b] : pairs) {
    if (!corpus_i.has(a) || !corpus_j.has(b)) continue;
    ++usable;
    const Vec d = encode_entity(a, corpus_i, kb.words, params);
    int best = -1;
    double best_d = 0.0;
    for (std::size_t c = 0; c < targets.size(); ++c) {
      const double dist = (target_emb.row(c).transpose() - d).norm();
      if (best < 0 || dist < best_d) {
        best_d = dist;
        best = targets[c];
      }
    }
    if (best == b) ++hits;
  }
  return usable ? static_cast<double>(hits) / static_cast<double>(usable) : 0.0;
}

DemParams train_dem(const MultilingualKB& kb,
                    const std::vector<IllPair>& train_ills,
                    const std::vector<IllPair>& valid_ills,
                    const DemConfig& config, std::uint64_t seed,
                    std::size_t* skipped_pairs,
                    const DemEpochObserver& observer) {
  config.validate();
  const auto& corpus_i = kb.descriptions.at(kb.languages[0]);
  const auto& corpus_j = kb.descriptions.at(kb.languages[1]);
  if (config.d_hidden != 0 && config.d_hidden != kb.words.dim())
    throw InputError("train_dem: d_hidden must equal the word dimension");

  std::vector<IllPair> usable;
  for (const auto& p : train_ills)
    if (corpus_i.has(p.first) && corpus_j.has(p.second)) usable.push_back(p);
  if (skipped_pairs) *skipped_pairs = train_ills.size() - usable.size();
  if (usable.empty())
    throw std::runtime_error("train_dem: no training pair has descriptions on "
                             "both sides");

  DemParams params =
      DemParams::init(kb.words.dim(), config.k2, derive_seed(seed, 3, 0));
  auto trainable = params.all();
  Rng rng(derive_seed(seed, 4, 0));

  DemParams best = params;
  double best_hit =
      valid_ills.empty() ? -1.0 : dem_alignment_hit1(params, kb, valid_ills);
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
    rng.shuffle(usable);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < usable.size();
         start += static_cast<std::size_t>(config.batch)) {
      const std::size_t stop =
          std::min(usable.size(), start + static_cast<std::size_t>(config.batch));
      if (stop - start < 2) break;  // negatives need at least one other pair
      std::vector<IllPair> batch(usable.begin() + start, usable.begin() + stop);
      const double l = loss_dem(batch, corpus_i, corpus_j, kb.words, params);
      if (!std::isfinite(l))
        throw std::runtime_error("train_dem: loss diverged at epoch " +
                                 std::to_string(epoch));
      epoch_loss += l;
      ++batches;
      sgd_step(trainable, config.lr);
    }
    if (batches == 0)
      throw std::runtime_error("train_dem: batch size leaves no usable batch");

    DemEpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / static_cast<double>(batches);

    bool stop = false;
    if (valid_ills.empty()) {
      best = params;
    } else {
      const double hit = dem_alignment_hit1(params, kb, valid_ills);
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
  return best;
}

}  // namespace coalign
