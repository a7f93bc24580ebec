#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace coalign {

struct Metrics {
  double hit1 = 0.0;   // percent
  double hit10 = 0.0;  // percent
  double mrr = 0.0;
  std::size_t n = 0;
  std::size_t skipped = 0;
};

/// hit1 = 100*|{r=1}|/n, hit10 = 100*|{r<=10}|/n, mrr = mean(1/r).
Metrics aggregate(const std::vector<int>& ranks);

struct RankCase {
  int query = 0;
  int truth = 0;
  int rank = 0;
};

/// Rank of `target` among candidates ordered by ascending distance, ties
/// broken by ascending candidate id. `target` indexes into `distances`.
int rank_of(const std::vector<double>& distances, int target);

std::string format_metrics_table(const std::string& task,
                                 const std::string& direction,
                                 const Metrics& m);

}  // namespace coalign
