#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/cluster.hpp"
#include "kitclust/kits.hpp"
#include "kitclust/pipeline.hpp"
#include "kitclust/set_metrics.hpp"

namespace kitclust {

using Label = std::int64_t;

struct ClusterEvaluation {
  double fmi = 0.0;
  double v_measure = 0.0;
  double homogeneity = 0.0;
  double completeness = 0.0;
  std::size_t n_items = 0;
  std::size_t n_clusters = 0;
  std::size_t n_classes = 0;
};

struct VMeasure {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v = 0.0;
};

// Each noise item gets a fresh label past the largest cluster label.
ClusteringResult noise_to_singletons(const ClusteringResult& result);

// Throws InputError on length mismatch or fewer than two items.
double fowlkes_mallows(std::span<const Label> labels_true, std::span<const Label> labels_pred);

// Throws InputError on length mismatch or empty input.
VMeasure v_measure(std::span<const Label> labels_true, std::span<const Label> labels_pred);

// Throws InputError ("silhouette undefined") with fewer than two clusters,
// on noise labels, or when sizes disagree.
double silhouette(const CondensedDistances& d, const ClusteringResult& result);

ClusterEvaluation evaluate(std::span<const Label> labels_true, std::span<const Label> labels_pred);

// Dense labels 0..k-1 in first-seen order.
std::vector<Label> encode_labels(std::span<const std::string> names);

// Downsamples the largest class to the size of the second largest; other
// classes untouched. Returned ids keep input order. Throws InputError with
// fewer than two classes.
std::vector<std::string> rebalance(std::span<const std::string> labels_true, std::span<const std::string> page_ids,
                                   std::uint64_t seed);

// Uniform draw in [0, bound) from a 64-bit engine; stable across standard
// libraries.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

struct LabeledItems {
  std::vector<std::string> page_ids;
  std::vector<std::string> family;   // ground-truth family per page
  std::vector<std::string> cluster;  // global cluster id, empty for noise
};

// Pages whose URL is deployed by exactly one family. Pages absent from every
// global cluster are noise; pages in several clusters take the largest
// (ties to the smallest cluster_id).
LabeledItems label_items(std::span<const ApiProfile> profiles, std::span<const GlobalCluster> clusters,
                         std::span<const KitFamily> truth);

// Noise becomes singletons before scoring.
ClusterEvaluation evaluate_items(const LabeledItems& items);

struct EvaluationRun {
  std::size_t min_features = 0;
  std::int64_t window_days = 0;
  std::int64_t step_days = 0;
  double eps = 0.0;
  std::size_t min_cluster_size = 0;
  std::size_t min_shared_apis = 0;
  bool rebalanced = false;
  std::uint64_t seed = 0;
};

std::string serialize_evaluation(const ClusterEvaluation& e, const EvaluationRun& run);

}  // namespace kitclust
