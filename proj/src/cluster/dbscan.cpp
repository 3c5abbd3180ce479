#include <deque>

#include "kitclust/cluster.hpp"
#include "kitclust/error.hpp"

namespace kitclust {

ClusteringResult dbscan(const CondensedDistances& d, double eps, std::size_t min_pts) {
  if (d.n == 0) throw InputError("dbscan: empty input");
  if (!(eps > 0.0 && eps <= 1.0)) throw InputError("dbscan: eps must lie in (0, 1]");
  if (min_pts < 1) throw InputError("dbscan: min_pts must be >= 1");

  const auto neighbors = kernels::eps_neighbors(d, eps);
  std::vector<char> core(d.n);
  for (std::size_t i = 0; i < d.n; ++i) core[i] = neighbors[i].size() + 1 >= min_pts;

  constexpr int kUnvisited = -2;
  std::vector<int> labels(d.n, kUnvisited);
  int cluster = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < d.n; ++i) {
    if (labels[i] != kUnvisited) continue;
    if (!core[i]) {
      labels[i] = kNoise;  // may still be claimed as a border point
      continue;
    }
    labels[i] = cluster;
    frontier.assign(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (labels[q] == kNoise) labels[q] = cluster;
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      if (core[q]) frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
    }
    ++cluster;
  }
  return canonicalize(std::move(labels));
}

}  // namespace kitclust
