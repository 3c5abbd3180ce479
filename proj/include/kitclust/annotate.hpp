#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/pipeline.hpp"
#include "kitclust/trace.hpp"

namespace kitclust {

enum class TechniqueCategory { credential_harvesting, evasion, obfuscation };

std::string_view to_string(TechniqueCategory c);
std::optional<TechniqueCategory> parse_category(std::string_view text);

enum class MatcherKind {
  any_of,          // some token present
  all_of,          // every token present somewhere on the page
  co_occur,        // every token present within one script
  arg_prefix,      // a token fired with arg0 whose host is listed
  count_at_least,  // at least k of the tokens present
};

std::string_view to_string(MatcherKind k);
std::optional<MatcherKind> parse_matcher_kind(std::string_view text);

struct Matcher {
  MatcherKind kind = MatcherKind::any_of;
  std::vector<std::string> tokens;
  std::vector<std::string> hosts;  // arg_prefix only, lowercase
  std::size_t k = 1;               // count_at_least only
  bool case_insensitive_member = false;

  bool operator==(const Matcher&) const = default;
};

struct TechniqueRule {
  std::string technique;
  TechniqueCategory category = TechniqueCategory::evasion;
  std::vector<Matcher> clauses;  // all must hold
  bool include_cloudflare_scripts = false;

  bool operator==(const TechniqueRule&) const = default;
};

// Hosts of the client-side IP reputation endpoints.
const std::vector<std::string>& ip_reputation_hosts();
// Fingerprinting API tokens used by the count_at_least rules.
const std::vector<std::string>& fingerprinting_tokens();
const std::vector<std::string>& exfiltration_tokens();
const std::vector<std::string>& popup_tokens();

std::vector<TechniqueRule> builtin_rules();

struct AnnotateOptions {
  bool exclude_cdn_cgi = true;
  bool exact_host = false;
};

struct PageAnnotation {
  std::set<std::string> techniques;
  // technique -> any_of / arg_prefix markers that fired
  std::map<std::string, std::set<std::string>> markers;
};

std::set<std::string> annotate_page(const PageTrace& page, std::span<const TechniqueRule> rules,
                                    const AnnotateOptions& options = {});
PageAnnotation annotate_page_detailed(const PageTrace& page, std::span<const TechniqueRule> rules,
                                      const AnnotateOptions& options = {});

// Parallel over pages; keyed by page id.
std::map<std::string, PageAnnotation> annotate_pages(std::span<const PageTrace> pages,
                                                     std::span<const TechniqueRule> rules,
                                                     const AnnotateOptions& options = {});

struct TechniqueCount {
  std::size_t pages = 0;     // distinct member pages of clusters carrying the technique
  std::size_t clusters = 0;  // clusters carrying the technique
};

struct TechniqueReport {
  std::map<std::string, std::set<std::string>> page_techniques;
  std::map<std::string, std::set<std::string>> cluster_techniques;
  std::map<std::string, TechniqueCount> counts;  // every rule technique, zero rows included
  std::map<std::string, std::map<std::string, TechniqueCount>> marker_counts;  // technique -> marker
  std::map<std::string, TechniqueCategory> categories;
};

// A cluster carries the union of its member pages' techniques. Throws
// InputError naming the first member without an annotation.
TechniqueReport annotate_clusters(std::span<const GlobalCluster> clusters,
                                  const std::map<std::string, PageAnnotation>& pages,
                                  std::span<const TechniqueRule> rules);

// 0 for pages whose scripts are all top level.
std::uint32_t max_eval_depth(const PageTrace& page);

std::string technique_report_csv(const TechniqueReport& report);
std::string marker_breakdown_csv(const TechniqueReport& report);

TechniqueRule parse_rule_record(std::string_view line);
std::string serialize_rule(const TechniqueRule& rule);

// Rules with a technique name already present replace it; others append.
std::vector<TechniqueRule> merge_rules(std::vector<TechniqueRule> base, std::span<const TechniqueRule> overrides);

}  // namespace kitclust
