#pragma once

#include <vector>

#include "coalign/dem.hpp"
#include "coalign/kb.hpp"
#include "coalign/kgem.hpp"
#include "coalign/metrics.hpp"

namespace coalign {

/// Alignment over the full structural entity vocabulary of the target side.
/// Forward ranks language-1 entities from the transformed language-0 vector;
/// reverse ranks language-0 entities by their transformed distance to the
/// language-1 vector. Ties break by entity id.
Metrics eval_alignment(const KgemParams& params,
                       const std::vector<IllPair>& test_pairs, bool forward,
                       std::vector<RankCase>* cases = nullptr);

/// Description-based ranking restricted to the zero-shot set of the target
/// side. Pairs lacking a description on either side are skipped and counted.
Metrics eval_zero_shot(const DemParams& params,
                       const std::vector<IllPair>& zero_shot_pairs,
                       const MultilingualKB& kb,
                       std::vector<RankCase>* cases = nullptr);

struct CompletionQuery {
  bool tail_query = true;  // (h, r, ?) if true, (?, r, t) otherwise
  int anchor = 0;          // h for tail queries, t for head queries
  int relation = 0;
};

/// All structural entities of the language ranked by the translational score,
/// ascending, ties by entity id.
std::vector<int> complete_mono(const KgemParams& params, int lang,
                               const CompletionQuery& query);

/// Routes a language-0 query through the language-1 space: transform the
/// anchor and relation, snap to the nearest language-1 entity, then rank
/// language-0 candidates by transformed distance to the snapped entity.
std::vector<int> complete_cross(const KgemParams& params,
                                const CompletionQuery& query);

struct CompletionResult {
  Metrics metrics;
  double mean_rank = 0.0;
};

/// Ranks the true head and tail of every held-out triple (two queries per
/// triple). `cross` may only be used for language 0.
CompletionResult eval_completion(const KgemParams& params, int lang,
                                 const std::vector<Triple>& heldout,
                                 bool cross,
                                 std::vector<RankCase>* cases = nullptr);

}  // namespace coalign
