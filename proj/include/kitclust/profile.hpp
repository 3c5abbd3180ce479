#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/time.hpp"
#include "kitclust/trace.hpp"

namespace kitclust {

enum class FeatureMode {
  api_set,
  script_hash_all,
  script_hash_first_party,
  script_hash_no_eval,
  script_hash_first_party_no_eval,
};

std::string_view to_string(FeatureMode mode);
// Accepts "api-set", "script-hash-all", ... (dashes or underscores).
std::optional<FeatureMode> parse_feature_mode(std::string_view text);

struct FeatureConfig {
  FeatureMode mode = FeatureMode::api_set;
  std::size_t min_features = 8;
  bool drop_dom_apis = false;
  bool drop_property_reads = false;  // drops get and set tokens
  bool exclude_cdn_cgi = true;
  bool exact_host = false;  // first-party by exact hostname instead of eTLD+1

  // Throws InputError on min_features == 0 or ablations outside api_set.
  void validate() const;
};

struct ApiProfile {
  std::string page_id;
  std::string page_url;
  std::vector<std::string> features;  // sorted, unique
  Timestamp observed_at{};
  std::string e2ld;
  std::vector<std::string> brand_labels;  // sorted, unique
  std::uint32_t max_eval_depth = 0;

  bool operator==(const ApiProfile&) const = default;
};

// Inline scripts are first-party; unparseable script URLs are third-party.
bool is_first_party(const ScriptTrace& script, const PageTrace& page, bool exact_host = false);

// True iff some path segment of the URL equals "cdn-cgi".
bool is_cdn_cgi(std::string_view script_url);

bool is_dom_token(std::string_view token);
bool is_property_token(std::string_view token);

// Page e2LD, falling back to the host for suffix-only hosts.
std::string page_e2ld(const PageTrace& page);

// nullopt when fewer than config.min_features features survive.
std::optional<ApiProfile> build_profile(const PageTrace& page, const FeatureConfig& config);

// Parallel over pages. Output sorted by page_id.
std::vector<ApiProfile> build_profiles(std::span<const PageTrace> pages, const FeatureConfig& config);
std::vector<ApiProfile> build_profiles_serial(std::span<const PageTrace> pages, const FeatureConfig& config);

// Re-applies token ablations and the min_features threshold to already
// exported api_set profiles.
std::vector<ApiProfile> refilter_profiles(std::vector<ApiProfile> profiles, const FeatureConfig& config);

std::string serialize_profile(const ApiProfile& profile);
ApiProfile parse_profile_record(std::string_view line);

}  // namespace kitclust
