#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "kitclust/cluster.hpp"
#include "kitclust/error.hpp"
#include "kitclust/union_find.hpp"

namespace kitclust {

void HdbscanParams::validate() const {
  if (min_cluster_size < 2) throw InputError("min_cluster_size must be >= 2");
  if (min_samples && *min_samples < 1) throw InputError("min_samples must be >= 1");
}

std::map<std::string, int> ClusteringResult::assignments(std::span<const std::string> ids) const {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < ids.size() && i < labels.size(); ++i) out.emplace(ids[i], labels[i]);
  return out;
}

ClusteringResult canonicalize(std::vector<int> labels) {
  std::map<int, int> rename;
  for (int l : labels) {
    if (l != kNoise && !rename.contains(l)) rename.emplace(l, static_cast<int>(rename.size()));
  }
  for (int& l : labels) {
    if (l != kNoise) l = rename.at(l);
  }
  return {std::move(labels), static_cast<int>(rename.size())};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_of(double distance) { return distance > 0.0 ? 1.0 / distance : kInf; }

// a - b where inf - inf counts as no persistence.
double persistence(double a, double b) { return a == b ? 0.0 : a - b; }

// Excess-of-mass comparison with a relative tolerance so that two
// arithmetic routes to the same stabilities agree on ties.
bool children_win(double children, double own) {
  if (std::isinf(own)) return false;
  if (std::isinf(children)) return true;
  return children > own + 1e-9 * std::max(1.0, std::abs(own));
}

// Single-linkage hierarchy in which all merges at one distance form a
// single n-ary node. Leaves are 0..n-1, internal nodes n.. in creation
// (ascending distance) order. Nodes absorbed by a same-level merge are
// left empty and unreachable from the root.
struct LevelTree {
  std::size_t n = 0;
  std::vector<double> level;                   // per internal node
  std::vector<std::vector<std::size_t>> kids;  // per internal node
  std::vector<std::size_t> size;               // per node (leaves included)
  std::size_t root = 0;

  bool is_leaf(std::size_t node) const { return node < n; }
};

LevelTree build_level_tree(std::size_t n, std::vector<kernels::Edge> edges) {
  std::sort(edges.begin(), edges.end(), [](const kernels::Edge& x, const kernels::Edge& y) {
    return std::make_tuple(x.weight, std::min(x.a, x.b), std::max(x.a, x.b)) <
           std::make_tuple(y.weight, std::min(y.a, y.b), std::max(y.a, y.b));
  });
  LevelTree t;
  t.n = n;
  t.size.assign(n, 1);
  UnionFind uf(n);
  std::vector<std::size_t> node_of(n);
  for (std::size_t i = 0; i < n; ++i) node_of[i] = i;
  std::vector<std::size_t> created_in_group;  // group index per internal node
  std::size_t group = 0;

  for (std::size_t e = 0; e < edges.size();) {
    const double w = edges[e].weight;
    for (; e < edges.size() && edges[e].weight == w; ++e) {
      const std::size_t ra = uf.find(edges[e].a);
      const std::size_t rb = uf.find(edges[e].b);
      if (ra == rb) continue;
      std::size_t na = node_of[ra];
      std::size_t nb = node_of[rb];
      const bool a_open = na >= n && created_in_group[na - n] == group;
      const bool b_open = nb >= n && created_in_group[nb - n] == group;
      std::size_t target;
      if (a_open && b_open) {
        auto& dst = t.kids[na - n];
        auto& src = t.kids[nb - n];
        dst.insert(dst.end(), src.begin(), src.end());
        src.clear();
        t.size[na] += t.size[nb];
        target = na;
      } else if (a_open || b_open) {
        if (!a_open) std::swap(na, nb);
        t.kids[na - n].push_back(nb);
        t.size[na] += t.size[nb];
        target = na;
      } else {
        target = n + t.level.size();
        t.level.push_back(w);
        t.kids.push_back({na, nb});
        t.size.push_back(t.size[na] + t.size[nb]);
        created_in_group.push_back(group);
      }
      node_of[uf.unite(ra, rb)] = target;
    }
    ++group;
  }
  t.root = node_of[uf.find(0)];
  return t;
}

struct Condensed {
  std::vector<std::size_t> parent;  // cluster parent; root's parent is itself
  std::vector<double> birth;        // lambda at which the cluster appears
  std::vector<double> stability;
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::size_t> exit_cluster;  // per point: cluster it leaves as a point
  std::vector<double> exit_lambda;        // per point
};

std::size_t new_cluster(Condensed& c, std::size_t parent, double birth) {
  const std::size_t id = c.birth.size();
  c.parent.push_back(parent);
  c.birth.push_back(birth);
  c.stability.push_back(0.0);
  c.children.emplace_back();
  if (parent != id) c.children[parent].push_back(id);
  return id;
}

Condensed condense(const LevelTree& t, std::size_t min_cluster_size) {
  Condensed c;
  c.exit_cluster.assign(t.n, 0);
  c.exit_lambda.assign(t.n, 0.0);
  const std::size_t root = t.root;
  const double root_birth = lambda_of(std::max(1.0, t.level[root - t.n]));
  new_cluster(c, 0, root_birth);

  auto drop_points = [&](std::size_t node, std::size_t cluster, double lambda) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (t.is_leaf(x)) {
        c.exit_cluster[x] = cluster;
        c.exit_lambda[x] = lambda;
        c.stability[cluster] += persistence(lambda, c.birth[cluster]);
      } else {
        for (std::size_t k : t.kids[x - t.n]) stack.push_back(k);
      }
    }
  };

  std::vector<std::pair<std::size_t, std::size_t>> work{{root, 0}};  // (tree node, cluster)
  while (!work.empty()) {
    const auto [node, cluster] = work.back();
    work.pop_back();
    const double lambda = lambda_of(t.level[node - t.n]);
    std::vector<std::size_t> big;
    for (std::size_t k : t.kids[node - t.n]) {
      if (t.size[k] >= min_cluster_size) {
        big.push_back(k);
      } else {
        drop_points(k, cluster, lambda);
      }
    }
    if (big.size() == 1) {
      work.emplace_back(big.front(), cluster);
    } else if (big.size() >= 2) {
      for (std::size_t k : big) {
        const std::size_t child = new_cluster(c, cluster, lambda);
        c.stability[cluster] += static_cast<double>(t.size[k]) * persistence(lambda, c.birth[cluster]);
        work.emplace_back(k, child);
      }
    }
  }
  return c;
}

std::vector<char> select_clusters(const Condensed& c) {
  const std::size_t m = c.birth.size();
  std::vector<char> selected(m, 0);
  std::vector<double> best(m, 0.0);
  // Children always have larger ids than their parent.
  for (std::size_t id = m; id-- > 0;) {
    double children = 0.0;
    for (std::size_t k : c.children[id]) children += best[k];
    if (!c.children[id].empty() && children_win(children, c.stability[id])) {
      best[id] = children;
    } else {
      best[id] = c.stability[id];
      selected[id] = 1;
    }
  }
  // A selected ancestor shadows everything beneath it; parents precede
  // children in id order.
  std::vector<char> shadowed(m, 0);
  for (std::size_t id = 1; id < m; ++id) {
    const std::size_t p = c.parent[id];
    if (selected[p] || shadowed[p]) {
      shadowed[id] = 1;
      selected[id] = 0;
    }
  }
  return selected;
}

}  // namespace

namespace kernels {

ClusteringResult hdbscan_from_mst(std::size_t n, std::vector<Edge> mst, std::size_t min_cluster_size) {
  if (n == 0) throw InputError("hdbscan: empty input");
  std::vector<int> labels(n, kNoise);
  if (n < min_cluster_size || n < 2) return {std::move(labels), 0};

  const LevelTree tree = build_level_tree(n, std::move(mst));
  const Condensed c = condense(tree, min_cluster_size);
  const std::vector<char> selected = select_clusters(c);

  for (std::size_t p = 0; p < n; ++p) {
    // Walk up to the selected ancestor, remembering the lambda at which the
    // point left it (either as a point or by moving into a child cluster).
    std::size_t cluster = c.exit_cluster[p];
    double left_at = c.exit_lambda[p];
    while (!selected[cluster] && cluster != 0) {
      left_at = c.birth[cluster];
      cluster = c.parent[cluster];
    }
    if (!selected[cluster]) continue;
    if (left_at > c.birth[cluster]) labels[p] = static_cast<int>(cluster);
  }
  return canonicalize(std::move(labels));
}

}  // namespace kernels

ClusteringResult hdbscan(const CondensedDistances& d, const HdbscanParams& params) {
  params.validate();
  if (d.n == 0) throw InputError("hdbscan: empty input");
  if (d.n < params.min_cluster_size) return {std::vector<int>(d.n, kNoise), 0};
  const auto core = kernels::core_distances(d, params.effective_min_samples());
  auto mst = kernels::mutual_reachability_mst(d, core);
  return kernels::hdbscan_from_mst(d.n, std::move(mst), params.min_cluster_size);
}

}  // namespace kitclust
