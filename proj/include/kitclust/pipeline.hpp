#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kitclust/cluster.hpp"
#include "kitclust/profile.hpp"
#include "kitclust/set_metrics.hpp"
#include "kitclust/time.hpp"

namespace kitclust {

struct WindowSpec {
  std::chrono::seconds width = 28 * kDay;
  std::chrono::seconds step = 14 * kDay;
  std::optional<Timestamp> origin;  // default: midnight of the earliest observation

  void validate() const;
};

Timestamp window_origin(std::span<const ApiProfile> profiles, const WindowSpec& spec);

// Ids of every window [origin + w*step, origin + w*step + width) holding t.
std::vector<std::int64_t> windows_containing(Timestamp t, Timestamp origin, const WindowSpec& spec);

// window id -> indices into profiles (ascending). Only windows holding at
// least one profile appear.
std::map<std::int64_t, std::vector<std::size_t>> assign_windows(std::span<const ApiProfile> profiles,
                                                                const WindowSpec& spec);

struct LocalCluster {
  std::int64_t window_id = 0;
  std::size_t index = 0;                    // position within its window
  std::vector<std::string> members;         // sorted page ids, at least two
  std::vector<std::string> representative;  // intersection of member feature sets

  // "w<window>-c<index>"
  std::string id() const;
  bool operator==(const LocalCluster&) const = default;
};

// Pairwise Jaccard distances and HDBSCAN over one window; noise yields no
// cluster.
std::vector<LocalCluster> cluster_window(std::span<const ApiProfile> profiles, std::int64_t window_id,
                                         const HdbscanParams& params, const DistanceOptions& distances = {});

// Every window of the corpus, windows processed in ascending id order.
std::vector<LocalCluster> cluster_windows(std::span<const ApiProfile> profiles, const WindowSpec& spec,
                                          const HdbscanParams& params, const DistanceOptions& distances = {});

struct FilterResult {
  std::vector<LocalCluster> kept;
  std::vector<LocalCluster> dropped;
};

// Drops clusters whose representative has fewer than min_shared tokens.
FilterResult filter_malformed(std::vector<LocalCluster> clusters, std::size_t min_shared = 4);

struct MergeOptions {
  double eps = 0.05;
  std::size_t min_pts = 2;
  bool shared_page_union = true;  // stage 1; off = DBSCAN over raw local clusters
};

struct GlobalCluster {
  std::string cluster_id;  // 8 hex chars (16 on collision)
  std::vector<std::string> members;
  std::vector<std::string> representative;
  Timestamp first_seen{};
  Timestamp last_seen{};
  std::vector<std::string> e2lds;
  std::vector<std::string> brand_labels;
  std::vector<std::string> source_local_cluster_ids;

  bool operator==(const GlobalCluster&) const = default;
};

// Stage 1 unions local clusters that share a page; stage 2 runs DBSCAN on
// the unions' representatives. Profiles supply page metadata; every member
// must be present. Output sorted by cluster_id.
std::vector<GlobalCluster> merge_clusters(std::span<const LocalCluster> locals, std::span<const ApiProfile> profiles,
                                          const MergeOptions& options = {});

std::string representative_digest(std::span<const std::string> representative);

std::string serialize_local_cluster(const LocalCluster& c);
LocalCluster parse_local_cluster(std::string_view line);
std::string serialize_global_cluster(const GlobalCluster& c);
GlobalCluster parse_global_cluster(std::string_view line);

struct PipelineOptions {
  WindowSpec window;
  HdbscanParams hdbscan;
  std::size_t min_shared_apis = 4;
  MergeOptions merge;
  DistanceOptions distances;
};

struct PipelineResult {
  std::vector<LocalCluster> local_clusters;  // after the malformed filter
  std::vector<LocalCluster> dropped;
  std::vector<GlobalCluster> global_clusters;
};

PipelineResult run_pipeline(std::span<const ApiProfile> profiles, const PipelineOptions& options = {});

}  // namespace kitclust
