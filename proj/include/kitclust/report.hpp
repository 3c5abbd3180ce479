#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/annotate.hpp"
#include "kitclust/pipeline.hpp"
#include "kitclust/profile.hpp"

namespace kitclust {

struct BrandBaseline {
  std::string brand;
  std::vector<std::string> features;  // sorted, unique, non-empty
};

struct BrandSimilarity {
  double jaccard = 0.0;
  double coverage = 0.0;  // |P ∩ B| / |B|
  bool perfect_subset = false;
};

// Throws InputError on an empty baseline.
BrandSimilarity brand_similarity(std::span<const std::string> profile_features, const BrandBaseline& baseline);

BrandBaseline parse_brand_baseline(std::string_view line);

struct BrandRow {
  std::string brand;
  std::size_t pages = 0;
  double avg_jaccard = 0.0;
  double avg_coverage = 0.0;
  std::size_t half_match = 0;  // coverage >= 0.5
  std::size_t perfect_subset = 0;
};

// Profiles are matched to baselines through their brand labels.
std::vector<BrandRow> brand_report(std::span<const ApiProfile> profiles, std::span<const BrandBaseline> baselines);
std::string brand_report_csv(std::span<const BrandRow> rows);

struct ClusterStats {
  std::int64_t lifetime_days = 0;  // floor
  std::size_t n_pages = 0;
  std::size_t n_e2lds = 0;
  std::size_t n_brands = 0;
};

ClusterStats cluster_stats(const GlobalCluster& cluster);

// One row per cluster, optional technique column.
std::string cluster_stats_csv(std::span<const GlobalCluster> clusters, const TechniqueReport* techniques = nullptr);

enum class CrosstabAxis { size, lifetime };

struct Crosstab {
  CrosstabAxis axis = CrosstabAxis::size;
  std::vector<std::string> bucket_labels;
  std::vector<std::string> techniques;
  std::vector<std::vector<double>> fractions;  // row-normalized
  std::vector<bool> absent;                    // technique carried by no cluster
};

// Bucket b holds values in [bounds[b], bounds[b+1]); the last is open.
// Throws InputError on an empty cluster set, unsorted bounds, or a value
// below the first bound.
Crosstab technique_crosstab(std::span<const GlobalCluster> clusters, const TechniqueReport& report,
                            std::span<const std::int64_t> bounds, CrosstabAxis axis = CrosstabAxis::size);

std::string crosstab_csv(const Crosstab& table);

inline const std::vector<std::int64_t> kDefaultSizeBuckets{2, 3, 5, 10, 25, 100};
inline const std::vector<std::int64_t> kDefaultLifetimeBuckets{0, 1, 7, 30, 90, 365};

struct MonthRow {
  std::string month;  // YYYY-MM
  std::size_t pages = 0;
  std::size_t e2lds = 0;
  std::size_t clusters = 0;
};

// Calendar months (UTC) of observation. Domains come from every profile;
// a cluster counts in each month one of its members was observed.
std::vector<MonthRow> monthly_report(std::span<const ApiProfile> profiles, std::span<const GlobalCluster> clusters);
std::string monthly_report_csv(std::span<const MonthRow> rows);

}  // namespace kitclust
