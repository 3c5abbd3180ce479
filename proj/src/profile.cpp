#include "kitclust/profile.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <json.hpp>

#include "kitclust/domain.hpp"
#include "kitclust/error.hpp"

namespace kitclust {

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::api_set:
      return "api-set";
    case FeatureMode::script_hash_all:
      return "script-hash-all";
    case FeatureMode::script_hash_first_party:
      return "script-hash-first-party";
    case FeatureMode::script_hash_no_eval:
      return "script-hash-no-eval";
    case FeatureMode::script_hash_first_party_no_eval:
      return "script-hash-first-party-no-eval";
  }
  return "api-set";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view text) {
  std::string norm(text);
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (auto mode : {FeatureMode::api_set, FeatureMode::script_hash_all, FeatureMode::script_hash_first_party,
                    FeatureMode::script_hash_no_eval, FeatureMode::script_hash_first_party_no_eval}) {
    if (norm == to_string(mode)) return mode;
  }
  return std::nullopt;
}

void FeatureConfig::validate() const {
  if (min_features < 1) throw InputError("min_features must be >= 1");
  if (mode != FeatureMode::api_set && (drop_dom_apis || drop_property_reads)) {
    throw InputError("DOM / property-read ablations require api-set mode");
  }
}

bool is_cdn_cgi(std::string_view script_url) {
  std::string_view path;
  if (parse_url(script_url)) {
    const auto sep = script_url.find("://");
    const auto slash = script_url.find('/', sep + 3);
    if (slash == std::string_view::npos) return false;
    path = script_url.substr(slash);
  } else {
    path = script_url;
  }
  path = path.substr(0, path.find_first_of("?#"));
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto segment = path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    if (segment == "cdn-cgi") return true;
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return false;
}

namespace {

std::string registrable_or_host(const std::string& host) {
  try {
    return e2ld_of(host);
  } catch (const InputError&) {
    return host;
  }
}

}  // namespace

std::string page_e2ld(const PageTrace& page) {
  return registrable_or_host(page.root_domain);
}

bool is_first_party(const ScriptTrace& script, const PageTrace& page, bool exact_host) {
  if (script.script_url == kInlineScript) return true;
  const auto url = parse_url(script.script_url);
  if (!url) {
    spdlog::debug("unparseable script_url '{}' on {} treated as third-party", script.script_url, page.page_url);
    return false;
  }
  if (exact_host) return url->host == page.root_domain;
  return registrable_or_host(url->host) == registrable_or_host(page.root_domain);
}

bool is_dom_token(std::string_view token) {
  static constexpr std::array<std::string_view, 8> kExact{
      "Document", "HTMLDocument", "Node", "Element", "Text", "DocumentFragment", "Range", "MutationObserver"};
  const auto iface = token_interface(token);
  if (iface.starts_with("HTML") || iface.starts_with("SVG") || iface.starts_with("CSS")) return true;
  return std::find(kExact.begin(), kExact.end(), iface) != kExact.end();
}

bool is_property_token(std::string_view token) {
  const auto kind = token_kind(token);
  return kind == AccessKind::get || kind == AccessKind::set;
}

namespace {

bool ablated(std::string_view token, const FeatureConfig& config) {
  return (config.drop_dom_apis && is_dom_token(token)) || (config.drop_property_reads && is_property_token(token));
}

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::optional<ApiProfile> build_profile(const PageTrace& page, const FeatureConfig& config) {
  std::vector<std::string> features;
  std::uint32_t max_depth = 0;
  const bool hash_mode = config.mode != FeatureMode::api_set;
  const bool need_first_party = config.mode == FeatureMode::api_set ||
                                config.mode == FeatureMode::script_hash_first_party ||
                                config.mode == FeatureMode::script_hash_first_party_no_eval;
  const bool top_level_only =
      config.mode == FeatureMode::script_hash_no_eval || config.mode == FeatureMode::script_hash_first_party_no_eval;

  for (const auto& script : page.scripts) {
    max_depth = std::max(max_depth, script.eval_depth);
    if (config.exclude_cdn_cgi && is_cdn_cgi(script.script_url)) continue;
    if (need_first_party && !is_first_party(script, page, config.exact_host)) continue;
    if (hash_mode) {
      if (top_level_only && script.eval_depth != 0) continue;
      features.push_back(script.sha256);
      continue;
    }
    for (const auto& ev : script.events) {
      auto token = canonical_token(ev);
      if (!ablated(token, config)) features.push_back(std::move(token));
    }
  }
  sort_unique(features);
  if (features.size() < config.min_features) return std::nullopt;

  ApiProfile profile;
  profile.page_id = page.page_id();
  profile.page_url = page.page_url;
  profile.features = std::move(features);
  profile.observed_at = page.observed_at;
  profile.e2ld = page_e2ld(page);
  profile.brand_labels.assign(page.brand_labels.begin(), page.brand_labels.end());
  profile.max_eval_depth = max_depth;
  return profile;
}

namespace {

void sort_by_page_id(std::vector<ApiProfile>& profiles) {
  std::sort(profiles.begin(), profiles.end(), [](const ApiProfile& a, const ApiProfile& b) {
    return std::tie(a.page_id, a.features) < std::tie(b.page_id, b.features);
  });
}

}  // namespace

std::vector<ApiProfile> build_profiles(std::span<const PageTrace> pages, const FeatureConfig& config) {
  config.validate();
  std::vector<std::optional<ApiProfile>> slots(pages.size());
  const auto n = static_cast<std::int64_t>(pages.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t i = 0; i < n; ++i) slots[i] = build_profile(pages[i], config);
  std::vector<ApiProfile> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  sort_by_page_id(out);
  return out;
}

std::vector<ApiProfile> build_profiles_serial(std::span<const PageTrace> pages, const FeatureConfig& config) {
  config.validate();
  std::vector<ApiProfile> out;
  for (const auto& page : pages) {
    if (auto p = build_profile(page, config)) out.push_back(std::move(*p));
  }
  sort_by_page_id(out);
  return out;
}

std::vector<ApiProfile> refilter_profiles(std::vector<ApiProfile> profiles, const FeatureConfig& config) {
  config.validate();
  std::vector<ApiProfile> out;
  out.reserve(profiles.size());
  for (auto& p : profiles) {
    std::erase_if(p.features, [&](const std::string& t) { return ablated(t, config); });
    if (p.features.size() >= config.min_features) out.push_back(std::move(p));
  }
  sort_by_page_id(out);
  return out;
}

std::string serialize_profile(const ApiProfile& profile) {
  nlohmann::ordered_json j;
  j["page_id"] = profile.page_id;
  j["observed_at"] = format_utc(profile.observed_at);
  j["e2ld"] = profile.e2ld;
  j["brand_labels"] = profile.brand_labels;
  j["max_eval_depth"] = profile.max_eval_depth;
  j["features"] = profile.features;
  return j.dump();
}

ApiProfile parse_profile_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("invalid profile JSON: ") + e.what());
  }
  try {
    ApiProfile p;
    p.page_id = j.at("page_id").get<std::string>();
    p.page_url = split_page_id(p.page_id).first;
    p.observed_at = parse_utc(j.at("observed_at").get<std::string>());
    p.e2ld = j.at("e2ld").get<std::string>();
    p.brand_labels = j.value("brand_labels", std::vector<std::string>{});
    p.max_eval_depth = j.value("max_eval_depth", 0u);
    p.features = j.at("features").get<std::vector<std::string>>();
    sort_unique(p.features);
    sort_unique(p.brand_labels);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid profile record: ") + e.what());
  }
}

}  // namespace kitclust
