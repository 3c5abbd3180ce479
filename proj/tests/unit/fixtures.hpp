// Helpers for building traces and profiles in tests.
#pragma once

#include <algorithm>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "kitclust/domain.hpp"
#include "kitclust/hash.hpp"
#include "kitclust/profile.hpp"
#include "kitclust/time.hpp"
#include "kitclust/trace.hpp"

namespace fx {

// "call:Window.atob" -> {Window.atob, call}
inline kitclust::ApiEvent ev(const std::string& token, std::optional<std::string> arg0 = std::nullopt) {
  const auto colon = token.find(':');
  return {token.substr(colon + 1), *kitclust::parse_access_kind(token.substr(0, colon)), std::move(arg0)};
}

inline kitclust::ScriptTrace script(const std::string& url, std::vector<kitclust::ApiEvent> events,
                                    std::uint32_t depth = 0) {
  std::string body = url;
  for (const auto& e : events) body += "|" + kitclust::canonical_token(e);
  return {url, kitclust::sha256_hex(body + std::to_string(depth)), depth, std::move(events)};
}

inline kitclust::ScriptTrace script(const std::string& url, std::initializer_list<const char*> tokens,
                                    std::uint32_t depth = 0) {
  std::vector<kitclust::ApiEvent> events;
  for (const char* t : tokens) events.push_back(ev(t));
  return script(url, std::move(events), depth);
}

inline kitclust::PageTrace page(const std::string& url, std::vector<kitclust::ScriptTrace> scripts,
                                const std::string& at = "2024-01-01T00:00:00Z") {
  kitclust::PageTrace p;
  p.page_url = url;
  p.root_domain = kitclust::parse_url(url)->host;
  p.observed_at = kitclust::parse_utc(at);
  p.scripts = std::move(scripts);
  return p;
}

inline kitclust::ApiProfile profile(const std::string& id, std::vector<std::string> features,
                                    const std::string& at = "2024-01-01T00:00:00Z", const std::string& e2ld = "x.example") {
  kitclust::ApiProfile p;
  p.page_url = "https://" + id + ".example/";
  p.observed_at = kitclust::parse_utc(at);
  p.page_id = p.page_url + "@" + at;
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  p.features = std::move(features);
  p.e2ld = e2ld;
  return p;
}

}  // namespace fx
