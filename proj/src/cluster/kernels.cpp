#include <algorithm>
#include <cstdint>
#include <limits>

#include "kitclust/cluster.hpp"
#include "kitclust/error.hpp"

namespace kitclust::kernels {
namespace {

void gather_row(const CondensedDistances& d, std::size_t i, std::vector<double>& row) {
  row.clear();
  for (std::size_t j = 0; j < i; ++j) row.push_back(d.values[d.index(j, i)]);
  if (i + 1 < d.n) {
    const double* begin = d.values.data() + d.index(i, i + 1);
    row.insert(row.end(), begin, begin + (d.n - i - 1));
  }
}

double kth_other(std::vector<double>& row, std::size_t min_samples) {
  if (min_samples <= 1 || row.empty()) return 0.0;
  const std::size_t k = std::min(min_samples - 2, row.size() - 1);
  std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
  return row[k];
}

}  // namespace

std::vector<double> core_distances(const CondensedDistances& d, std::size_t min_samples) {
  std::vector<double> core(d.n, 0.0);
  const auto n = static_cast<std::int64_t>(d.n);
#pragma omp parallel
  {
    std::vector<double> row;
    row.reserve(d.n);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      gather_row(d, static_cast<std::size_t>(i), row);
      core[i] = kth_other(row, min_samples);
    }
  }
  return core;
}

std::vector<double> core_distances_serial(const CondensedDistances& d, std::size_t min_samples) {
  std::vector<double> core(d.n, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < d.n; ++i) {
    gather_row(d, i, row);
    core[i] = kth_other(row, min_samples);
  }
  return core;
}

namespace {

struct Candidate {
  double weight = std::numeric_limits<double>::infinity();
  std::size_t vertex = std::numeric_limits<std::size_t>::max();

  bool better_than(const Candidate& o) const {
    return weight < o.weight || (weight == o.weight && vertex < o.vertex);
  }
};

inline double mutual_reachability(const CondensedDistances& d, std::span<const double> core, std::size_t a,
                                  std::size_t b) {
  return std::max({core[a], core[b], d.at(a, b)});
}

}  // namespace

std::vector<Edge> mutual_reachability_mst(const CondensedDistances& d, std::span<const double> core) {
  const std::size_t n = d.n;
  std::vector<Edge> tree;
  if (n < 2) return tree;
  tree.reserve(n - 1);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<char> in_tree(n, 0);
  std::size_t current = 0;
  in_tree[0] = 1;
  const auto sn = static_cast<std::int64_t>(n);

  for (std::size_t step = 1; step < n; ++step) {
    Candidate global;
#pragma omp parallel
    {
      Candidate local;
#pragma omp for schedule(static) nowait
      for (std::int64_t sj = 0; sj < sn; ++sj) {
        const auto j = static_cast<std::size_t>(sj);
        if (in_tree[j]) continue;
        const double w = mutual_reachability(d, core, current, j);
        if (w < best[j]) {
          best[j] = w;
          from[j] = current;
        }
        const Candidate c{best[j], j};
        if (c.better_than(local)) local = c;
      }
#pragma omp critical(kitclust_prim_reduce)
      {
        if (local.better_than(global)) global = local;
      }
    }
    in_tree[global.vertex] = 1;
    tree.push_back({from[global.vertex], global.vertex, global.weight});
    current = global.vertex;
  }
  return tree;
}

std::vector<Edge> mutual_reachability_mst_serial(const CondensedDistances& d, std::span<const double> core) {
  const std::size_t n = d.n;
  std::vector<Edge> tree;
  if (n < 2) return tree;
  tree.reserve(n - 1);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<char> in_tree(n, 0);
  std::size_t current = 0;
  in_tree[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    Candidate pick;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double w = mutual_reachability(d, core, current, j);
      if (w < best[j]) {
        best[j] = w;
        from[j] = current;
      }
      const Candidate c{best[j], j};
      if (c.better_than(pick)) pick = c;
    }
    in_tree[pick.vertex] = 1;
    tree.push_back({from[pick.vertex], pick.vertex, pick.weight});
    current = pick.vertex;
  }
  return tree;
}

std::vector<std::vector<std::size_t>> eps_neighbors(const CondensedDistances& d, double eps) {
  // 1 - |A∩B|/|A∪B| rounds above exact ratios (1 - 19/20 > 0.05), so the
  // closed ball gets a little slack.
  const double limit = eps + kEpsSlack;
  std::vector<std::vector<std::size_t>> out(d.n);
  const auto n = static_cast<std::int64_t>(d.n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t si = 0; si < n; ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = 0; j < d.n; ++j) {
      if (j != i && d.at(i, j) <= limit) out[i].push_back(j);
    }
  }
  return out;
}

}  // namespace kitclust::kernels
