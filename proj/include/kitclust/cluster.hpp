#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kitclust/set_metrics.hpp"

namespace kitclust {

inline constexpr int kNoise = -1;

struct ClusteringResult {
  std::vector<int> labels;  // aligned with CondensedDistances::ids; kNoise or 0..n_clusters-1
  int n_clusters = 0;

  std::map<std::string, int> assignments(std::span<const std::string> ids) const;
};

// Relabels clusters 0..k-1 in order of their smallest member index.
ClusteringResult canonicalize(std::vector<int> labels);

struct HdbscanParams {
  std::size_t min_cluster_size = 2;
  std::optional<std::size_t> min_samples;  // defaults to min_cluster_size

  std::size_t effective_min_samples() const { return min_samples.value_or(min_cluster_size); }
  void validate() const;
};

// Core distances at k = min_samples (self included), mutual reachability,
// minimum spanning tree, a single-linkage hierarchy whose equal-distance
// merges are collapsed into one n-ary level, condensed tree at
// min_cluster_size and excess-of-mass selection.
//
// Distances are bounded by 1, so the root cluster is born at lambda = 1.
// The root is selectable like any other cluster; points that only join it
// at distance 1 (nothing shared) are noise.
ClusteringResult hdbscan(const CondensedDistances& d, const HdbscanParams& params = {});

// Neighbourhoods are closed (distance <= eps) and include the point itself.
// Border points go to the first cluster expanded in input order.
ClusteringResult dbscan(const CondensedDistances& d, double eps, std::size_t min_pts);

namespace kernels {

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

// Distance to the (min_samples - 1)-th nearest other item.
std::vector<double> core_distances(const CondensedDistances& d, std::size_t min_samples);
std::vector<double> core_distances_serial(const CondensedDistances& d, std::size_t min_samples);

// Prim's algorithm on the dense mutual-reachability graph. Ties resolve to
// the lowest vertex index.
std::vector<Edge> mutual_reachability_mst(const CondensedDistances& d, std::span<const double> core);
std::vector<Edge> mutual_reachability_mst_serial(const CondensedDistances& d, std::span<const double> core);

// Labels from an MST (any spanning tree of minimum weight).
ClusteringResult hdbscan_from_mst(std::size_t n, std::vector<Edge> mst, std::size_t min_cluster_size);

inline constexpr double kEpsSlack = 1e-12;

// Closed eps-neighbourhood lists (distance <= eps + kEpsSlack), self excluded.
std::vector<std::vector<std::size_t>> eps_neighbors(const CondensedDistances& d, double eps);

}  // namespace kernels

}  // namespace kitclust
