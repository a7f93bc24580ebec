#include "coalign/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace coalign {

Metrics aggregate(const std::vector<int>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("aggregate: no ranks");
  Metrics m;
  m.n = ranks.size();
  std::size_t h1 = 0, h10 = 0;
  double rr = 0.0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("aggregate: rank below 1");
    if (r == 1) ++h1;
    if (r <= 10) ++h10;
    rr += 1.0 / static_cast<double>(r);
  }
  m.hit1 = 100.0 * static_cast<double>(h1) / static_cast<double>(m.n);
  m.hit10 = 100.0 * static_cast<double>(h10) / static_cast<double>(m.n);
  m.mrr = rr / static_cast<double>(m.n);
  return m;
}

int rank_of(const std::vector<double>& distances, int target) {
  const double d = distances[target];
  int rank = 1;
  for (int c = 0; c < static_cast<int>(distances.size()); ++c) {
    if (c == target) continue;
    if (distances[c] < d || (distances[c] == d && c < target)) ++rank;
  }
  return rank;
}

std::string format_metrics_table(const std::string& task,
                                 const std::string& direction,
                                 const Metrics& m) {
  std::string skipped;
  if (m.skipped) skipped = "  (skipped " + std::to_string(m.skipped) + ")";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-14s %-8s n=%-6zu Hit@1=%6.2f  Hit@10=%6.2f  MRR=%.4f%s",
                task.c_str(), direction.c_str(), m.n, m.hit1, m.hit10, m.mrr,
                skipped.c_str());
  return buf;
}

}  // namespace coalign
