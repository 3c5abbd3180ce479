#include "kitclust/annotate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "kitclust/domain.hpp"
#include "kitclust/error.hpp"
#include "kitclust/profile.hpp"

namespace kitclust {

std::string_view to_string(TechniqueCategory c) {
  switch (c) {
    case TechniqueCategory::credential_harvesting: return "credential_harvesting";
    case TechniqueCategory::evasion: return "evasion";
    case TechniqueCategory::obfuscation: return "obfuscation";
  }
  return "evasion";
}

std::optional<TechniqueCategory> parse_category(std::string_view text) {
  if (text == "credential_harvesting") return TechniqueCategory::credential_harvesting;
  if (text == "evasion") return TechniqueCategory::evasion;
  if (text == "obfuscation") return TechniqueCategory::obfuscation;
  return std::nullopt;
}

std::string_view to_string(MatcherKind k) {
  switch (k) {
    case MatcherKind::any_of: return "any_of";
    case MatcherKind::all_of: return "all_of";
    case MatcherKind::co_occur: return "co_occur";
    case MatcherKind::arg_prefix: return "arg_prefix";
    case MatcherKind::count_at_least: return "count_at_least";
  }
  return "any_of";
}

std::optional<MatcherKind> parse_matcher_kind(std::string_view text) {
  for (auto k : {MatcherKind::any_of, MatcherKind::all_of, MatcherKind::co_occur, MatcherKind::arg_prefix,
                 MatcherKind::count_at_least}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

const std::vector<std::string>& ip_reputation_hosts() {
  static const std::vector<std::string> hosts{
      "api.db-ip.com",    "api.geoapify.com",   "api.ipapi.com",            "api.ipgeolocation.io",
      "api.ipify.org",    "api.ipregistry.co",  "freeipapi.com",            "geolocation-db.com",
      "geolocation.onetrust.com", "get.geojs.io", "ipapi.co",               "ipinfo.io",
      "ipwho.is",         "pro.ip-api.com",
  };
  return hosts;
}

const std::vector<std::string>& fingerprinting_tokens() {
  static const std::vector<std::string> tokens{
      "get:Navigator.userAgent",
      "get:Navigator.platform",
      "get:Navigator.language",
      "get:Navigator.languages",
      "get:Navigator.hardwareConcurrency",
      "get:Navigator.deviceMemory",
      "get:Navigator.plugins",
      "get:Navigator.mimeTypes",
      "get:Navigator.doNotTrack",
      "get:Navigator.cookieEnabled",
      "get:Navigator.maxTouchPoints",
      "get:Navigator.vendor",
      "get:Navigator.appVersion",
      "get:Navigator.webdriver",
      "get:Navigator.connection",
      "get:Navigator.oscpu",
      "get:Navigator.productSub",
      "call:Navigator.getBattery",
      "call:Navigator.javaEnabled",
      "get:Screen.width",
      "get:Screen.height",
      "get:Screen.availWidth",
      "get:Screen.availHeight",
      "get:Screen.colorDepth",
      "get:Screen.pixelDepth",
      "get:Window.devicePixelRatio",
      "get:Window.innerWidth",
      "get:Window.innerHeight",
      "get:Window.outerWidth",
      "get:Window.outerHeight",
      "get:Window.screenX",
      "get:Window.screenY",
      "call:HTMLCanvasElement.toDataURL",
      "call:HTMLCanvasElement.getContext",
      "call:CanvasRenderingContext2D.getImageData",
      "call:CanvasRenderingContext2D.fillText",
      "call:CanvasRenderingContext2D.measureText",
      "call:CanvasRenderingContext2D.isPointInPath",
      "call:WebGLRenderingContext.getParameter",
      "call:WebGLRenderingContext.getSupportedExtensions",
      "call:WebGLRenderingContext.getExtension",
      "call:WebGLRenderingContext.getShaderPrecisionFormat",
      "call:WebGL2RenderingContext.getParameter",
      "construct:OfflineAudioContext.constructor",
      "call:AudioContext.createOscillator",
      "call:BaseAudioContext.createDynamicsCompressor",
      "call:AnalyserNode.getFloatFrequencyData",
      "call:Date.getTimezoneOffset",
      "call:DateTimeFormat.resolvedOptions",
      "call:MediaDevices.enumerateDevices",
      "call:Permissions.query",
      "call:NavigatorUAData.getHighEntropyValues",
      "call:FontFaceSet.check",
      "call:RTCPeerConnection.createOffer",
  };
  return tokens;
}

const std::vector<std::string>& exfiltration_tokens() {
  static const std::vector<std::string> tokens{
      "call:Window.fetch",      "call:XMLHttpRequest.send",  "call:Navigator.sendBeacon",
      "call:WebSocket.send",    "set:HTMLImageElement.src",  "call:HTMLFormElement.submit",
  };
  return tokens;
}

const std::vector<std::string>& popup_tokens() {
  static const std::vector<std::string> tokens{
      "call:Navigator.requestMIDIAccess",
      "call:Clipboard.readText",
      "call:Geolocation.getCurrentPosition",
      "call:MediaDevices.getDisplayMedia",
      "call:HID.requestDevice",
      "call:Window.confirm",
      "call:Window.alert",
      "call:Window.prompt",
      "construct:Accelerometer.constructor",
      "construct:Gyroscope.constructor",
      "call:Window.showModalDialog",
      "call:MediaDevices.getUserMedia",
      "call:SyncManager.register",
      "call:Clipboard.read",
      "call:Serial.requestPort",
      "call:USB.requestDevice",
      "call:Window.queryLocalFonts",
      "call:Notification.requestPermission",
  };
  return tokens;
}

namespace {

Matcher any_of(std::vector<std::string> tokens, bool ci = false) {
  return {MatcherKind::any_of, std::move(tokens), {}, 1, ci};
}

TechniqueRule rule(std::string name, TechniqueCategory cat, std::vector<Matcher> clauses, bool cloudflare = false) {
  return {std::move(name), cat, std::move(clauses), cloudflare};
}

}  // namespace

std::vector<TechniqueRule> builtin_rules() {
  using C = TechniqueCategory;
  std::vector<TechniqueRule> rules;
  rules.push_back(rule("Fingerprinting extraction", C::credential_harvesting,
                       {{MatcherKind::count_at_least, fingerprinting_tokens(), {}, 10, false},
                        any_of(exfiltration_tokens())}));
  rules.push_back(rule("Client-side IP check", C::evasion,
                       {{MatcherKind::arg_prefix, {"call:Window.fetch", "call:XMLHttpRequest.open"},
                         ip_reputation_hosts(), 1, false}}));
  rules.push_back(rule("Timing bot detection", C::evasion,
                       {{MatcherKind::co_occur, {"call:Performance.now", "call:Window.setTimeout"}, {}, 1, false}}));
  rules.push_back(rule("Encryption", C::obfuscation, {any_of({"call:SubtleCrypto.decrypt"})}));
  rules.push_back(rule("Encoding", C::obfuscation, {any_of({"call:TextDecoder.decode", "call:Window.atob"})}));
  rules.push_back(rule("Dynamic script Evaluation", C::obfuscation, {any_of({"call:Window.eval"})}));
  rules.push_back(rule("Basic fingerprinting", C::evasion,
                       {any_of({"get:HTMLDocument.cookie", "get:HTMLDocument.referrer", "get:Navigator.userAgent"})}));
  rules.push_back(rule("Dynamic script creation", C::evasion,
                       {any_of({"set:HTMLScriptElement.text", "set:HTMLScriptElement.innerHTML"})}));
  rules.push_back(rule("Cloudflare Turnstiles", C::evasion,
                       {any_of({"get:Window.turnstile", "get:Window.turnstiles"}, true)}, true));
  rules.push_back(rule("Pop-ups", C::evasion, {any_of(popup_tokens())}));
  rules.push_back(rule("Advanced fingerprinting", C::evasion,
                       {{MatcherKind::count_at_least, fingerprinting_tokens(), {}, 5, false}}));
  rules.push_back(rule("Experimental APIs", C::evasion,
                       {any_of({"call:NavigatorUAData.getHighEntropyValues", "call:Scheduling.isInputPending",
                                "call:Keyboard.lock", "call:Keyboard.getLayoutMap", "call:Navigator.getBattery",
                                "get:Navigator.connection", "get:Navigator.deviceMemory"})}));
  rules.push_back(rule("Deprecated APIs", C::evasion,
                       {any_of({"call:HTMLDocument.execCommand", "call:Window.escape", "call:Window.unescape",
                                "call:Window.captureEvents", "call:Window.releaseEvents", "get:Window.event",
                                "get:Window.orientation", "call:Window.showModalDialog",
                                "call:HTMLDocument.createTouch"})}));
  return rules;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// "kind:Iface.member" with the member lowercased.
std::string fold_member(std::string_view token) {
  const auto dot = token.find('.');
  if (dot == std::string_view::npos) return std::string(token);
  return std::string(token.substr(0, dot + 1)) + lower(token.substr(dot + 1));
}

std::optional<std::string> arg_host(std::string_view arg) {
  std::string text(arg);
  if (text.starts_with("//")) text = "https:" + text;
  auto parts = parse_url(text);
  if (!parts && text.find("://") == std::string::npos) parts = parse_url("https://" + text);
  if (!parts) return std::nullopt;
  return lower(parts->host);
}

struct Evidence {
  std::set<std::string> tokens;
  std::vector<std::set<std::string>> scripts;
  std::vector<std::pair<std::string, std::string>> args;  // token, host
};

void absorb(Evidence& ev, const ScriptTrace& script) {
  auto& per_script = ev.scripts.emplace_back();
  for (const auto& e : script.events) {
    auto token = canonical_token(e);
    if (e.arg0) {
      if (auto host = arg_host(*e.arg0)) ev.args.emplace_back(token, std::move(*host));
    }
    per_script.insert(token);
    ev.tokens.insert(std::move(token));
  }
}

bool hosted_on_cloudflare(const ScriptTrace& script) {
  const auto url = parse_url(script.script_url);
  if (!url) return false;
  return url->host == "cloudflare.com" || url->host.ends_with(".cloudflare.com");
}

struct ClauseHit {
  bool matched = false;
  std::set<std::string> markers;
};

ClauseHit evaluate(const Matcher& m, const Evidence& ev) {
  ClauseHit hit;
  const auto present = [&](const std::string& t, const std::set<std::string>& pool) {
    if (!m.case_insensitive_member) return pool.contains(t);
    const auto folded = fold_member(t);
    return std::any_of(pool.begin(), pool.end(), [&](const std::string& p) { return fold_member(p) == folded; });
  };
  switch (m.kind) {
    case MatcherKind::any_of:
      for (const auto& t : m.tokens) {
        if (present(t, ev.tokens)) hit.markers.insert(t);
      }
      hit.matched = !hit.markers.empty();
      break;
    case MatcherKind::all_of:
      hit.matched = std::all_of(m.tokens.begin(), m.tokens.end(), [&](const auto& t) { return present(t, ev.tokens); });
      break;
    case MatcherKind::co_occur:
      hit.matched = std::any_of(ev.scripts.begin(), ev.scripts.end(), [&](const auto& pool) {
        return std::all_of(m.tokens.begin(), m.tokens.end(), [&](const auto& t) { return present(t, pool); });
      });
      break;
    case MatcherKind::arg_prefix:
      for (const auto& [token, host] : ev.args) {
        const bool token_ok = std::any_of(m.tokens.begin(), m.tokens.end(), [&](const std::string& t) {
          return m.case_insensitive_member ? fold_member(t) == fold_member(token) : t == token;
        });
        if (token_ok && std::find(m.hosts.begin(), m.hosts.end(), host) != m.hosts.end()) hit.markers.insert(host);
      }
      hit.matched = !hit.markers.empty();
      break;
    case MatcherKind::count_at_least: {
      std::size_t count = 0;
      for (const auto& t : m.tokens) count += present(t, ev.tokens) ? 1 : 0;
      hit.matched = count >= m.k;
      break;
    }
  }
  return hit;
}

}  // namespace

PageAnnotation annotate_page_detailed(const PageTrace& page, std::span<const TechniqueRule> rules,
                                      const AnnotateOptions& options) {
  Evidence first_party;
  Evidence with_cloudflare;
  for (const auto& script : page.scripts) {
    if (options.exclude_cdn_cgi && is_cdn_cgi(script.script_url)) continue;
    if (is_first_party(script, page, options.exact_host)) {
      absorb(first_party, script);
      absorb(with_cloudflare, script);
    } else if (hosted_on_cloudflare(script)) {
      absorb(with_cloudflare, script);
    }
  }

  PageAnnotation out;
  if (first_party.tokens.empty()) return out;
  for (const auto& r : rules) {
    const Evidence& ev = r.include_cloudflare_scripts ? with_cloudflare : first_party;
    std::set<std::string> markers;
    bool all = !r.clauses.empty();
    for (const auto& clause : r.clauses) {
      auto hit = evaluate(clause, ev);
      if (!hit.matched) {
        all = false;
        break;
      }
      markers.merge(hit.markers);
    }
    if (!all) continue;
    out.techniques.insert(r.technique);
    if (!markers.empty()) out.markers[r.technique] = std::move(markers);
  }
  return out;
}

std::set<std::string> annotate_page(const PageTrace& page, std::span<const TechniqueRule> rules,
                                    const AnnotateOptions& options) {
  return annotate_page_detailed(page, rules, options).techniques;
}

std::map<std::string, PageAnnotation> annotate_pages(std::span<const PageTrace> pages,
                                                     std::span<const TechniqueRule> rules,
                                                     const AnnotateOptions& options) {
  std::vector<PageAnnotation> results(pages.size());
  const auto n = static_cast<std::int64_t>(pages.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t i = 0; i < n; ++i) {
    results[static_cast<std::size_t>(i)] = annotate_page_detailed(pages[static_cast<std::size_t>(i)], rules, options);
  }
  std::map<std::string, PageAnnotation> out;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    auto& slot = out[pages[i].page_id()];
    // duplicate page ids union their evidence
    slot.techniques.insert(results[i].techniques.begin(), results[i].techniques.end());
    for (auto& [t, m] : results[i].markers) slot.markers[t].insert(m.begin(), m.end());
  }
  return out;
}

TechniqueReport annotate_clusters(std::span<const GlobalCluster> clusters,
                                  const std::map<std::string, PageAnnotation>& pages,
                                  std::span<const TechniqueRule> rules) {
  TechniqueReport report;
  for (const auto& r : rules) {
    report.counts[r.technique];
    report.categories[r.technique] = r.category;
  }
  for (const auto& [id, a] : pages) {
    if (!a.techniques.empty()) report.page_techniques[id] = a.techniques;
  }

  std::map<std::string, std::set<std::string>> pages_by_technique;
  std::map<std::string, std::map<std::string, std::set<std::string>>> pages_by_marker;
  std::map<std::string, std::map<std::string, std::size_t>> clusters_by_marker;
  for (const auto& c : clusters) {
    std::set<std::string> techniques;
    std::map<std::string, std::set<std::string>> markers;
    for (const auto& member : c.members) {
      const auto it = pages.find(member);
      if (it == pages.end()) throw InputError("cluster " + c.cluster_id + " member has no annotation: " + member);
      techniques.insert(it->second.techniques.begin(), it->second.techniques.end());
      for (const auto& [t, m] : it->second.markers) markers[t].insert(m.begin(), m.end());
    }
    for (const auto& t : techniques) {
      ++report.counts[t].clusters;
      pages_by_technique[t].insert(c.members.begin(), c.members.end());
    }
    for (const auto& [t, ms] : markers) {
      for (const auto& m : ms) {
        ++clusters_by_marker[t][m];
        pages_by_marker[t][m].insert(c.members.begin(), c.members.end());
      }
    }
    report.cluster_techniques[c.cluster_id] = std::move(techniques);
  }
  for (const auto& [t, ps] : pages_by_technique) report.counts[t].pages = ps.size();
  for (const auto& [t, per] : clusters_by_marker) {
    for (const auto& [m, n] : per) report.marker_counts[t][m] = {pages_by_marker[t][m].size(), n};
  }
  return report;
}

std::uint32_t max_eval_depth(const PageTrace& page) {
  std::uint32_t depth = 0;
  for (const auto& s : page.scripts) depth = std::max(depth, s.eval_depth);
  return depth;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

TechniqueCategory category_of(const TechniqueReport& report, const std::string& technique) {
  const auto it = report.categories.find(technique);
  return it == report.categories.end() ? TechniqueCategory::evasion : it->second;
}

}  // namespace

std::string technique_report_csv(const TechniqueReport& report) {
  std::ostringstream out;
  out << "technique,category,pages,clusters\n";
  for (const auto& [t, c] : report.counts) {
    out << csv_field(t) << ',' << to_string(category_of(report, t)) << ',' << c.pages << ',' << c.clusters << '\n';
  }
  return out.str();
}

std::string marker_breakdown_csv(const TechniqueReport& report) {
  std::ostringstream out;
  out << "technique,marker,pages,clusters\n";
  for (const auto& [t, per] : report.marker_counts) {
    for (const auto& [m, c] : per) {
      out << csv_field(t) << ',' << csv_field(m) << ',' << c.pages << ',' << c.clusters << '\n';
    }
  }
  return out.str();
}

TechniqueRule parse_rule_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TechniqueRule r;
    r.technique = j.at("technique").get<std::string>();
    if (r.technique.empty()) throw InputError("rule has an empty technique name");
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw InputError("rule " + r.technique + ": unknown category");
    r.category = *cat;
    r.include_cloudflare_scripts = j.value("include_cloudflare_scripts", false);
    for (const auto& c : j.at("clauses")) {
      Matcher m;
      const auto kind = parse_matcher_kind(c.at("kind").get<std::string>());
      if (!kind) throw InputError("rule " + r.technique + ": unknown matcher kind");
      m.kind = *kind;
      m.tokens = c.at("tokens").get<std::vector<std::string>>();
      if (m.tokens.empty()) throw InputError("rule " + r.technique + ": matcher token list is empty");
      m.hosts = c.value("hosts", std::vector<std::string>{});
      for (auto& h : m.hosts) h = lower(h);
      if (m.kind == MatcherKind::arg_prefix && m.hosts.empty()) {
        throw InputError("rule " + r.technique + ": arg_prefix needs hosts");
      }
      m.k = c.value("k", std::size_t{1});
      if (m.k == 0) throw InputError("rule " + r.technique + ": k must be positive");
      m.case_insensitive_member = c.value("case_insensitive_member", false);
      r.clauses.push_back(std::move(m));
    }
    if (r.clauses.empty()) throw InputError("rule " + r.technique + " has no clauses");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid rule record: ") + e.what());
  }
}

std::string serialize_rule(const TechniqueRule& rule) {
  nlohmann::ordered_json j;
  j["technique"] = rule.technique;
  j["category"] = to_string(rule.category);
  auto clauses = nlohmann::ordered_json::array();
  for (const auto& m : rule.clauses) {
    nlohmann::ordered_json c;
    c["kind"] = to_string(m.kind);
    c["tokens"] = m.tokens;
    if (m.kind == MatcherKind::arg_prefix) c["hosts"] = m.hosts;
    if (m.kind == MatcherKind::count_at_least) c["k"] = m.k;
    if (m.case_insensitive_member) c["case_insensitive_member"] = true;
    clauses.push_back(std::move(c));
  }
  j["clauses"] = std::move(clauses);
  if (rule.include_cloudflare_scripts) j["include_cloudflare_scripts"] = true;
  return j.dump();
}

std::vector<TechniqueRule> merge_rules(std::vector<TechniqueRule> base, std::span<const TechniqueRule> overrides) {
  for (const auto& o : overrides) {
    auto it = std::find_if(base.begin(), base.end(), [&](const auto& r) { return r.technique == o.technique; });
    if (it != base.end()) {
      spdlog::info("rule '{}' replaced by override", o.technique);
      *it = o;
    } else {
      base.push_back(o);
    }
  }
  return base;
}

}  // namespace kitclust
