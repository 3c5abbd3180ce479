#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "kitclust/error.hpp"
#include "kitclust/profile.hpp"

using namespace kitclust;

namespace {

const std::vector<const char*> kEight{"call:Window.fetch", "call:Window.atob",      "call:Document.createElement",
                                      "construct:URL.constructor", "call:JSON.parse", "get:Navigator.userAgent",
                                      "get:HTMLDocument.cookie", "set:HTMLInputElement.value"};

ScriptTrace eight(const std::string& url) {
  std::vector<ApiEvent> events;
  for (const char* t : kEight) events.push_back(fx::ev(t));
  return fx::script(url, std::move(events));
}

}  // namespace

TEST_CASE("first-party examples") {
  const auto evil = fx::page("https://login-evil.example/", {});
  CHECK(is_first_party(fx::script("https://login-evil.example/a.js", {}), evil));
  CHECK_FALSE(is_first_party(fx::script("https://www.google-analytics.com/ga.js", {}),
                             fx::page("https://evil.example/", {})));
  CHECK_FALSE(is_first_party(fx::script("https://b.pages.dev/x.js", {}), fx::page("https://a.pages.dev/", {})));
  CHECK(is_first_party(fx::script("inline", {}), evil));
  CHECK_FALSE(is_first_party(fx::script("not a url", {}), evil));
  const auto www = fx::page("https://www.shop.example/", {});
  CHECK(is_first_party(fx::script("https://cdn.shop.example/a.js", {}), www));
  CHECK_FALSE(is_first_party(fx::script("https://cdn.shop.example/a.js", {}), www, true));
}

TEST_CASE("cdn-cgi segments") {
  CHECK(is_cdn_cgi("https://evil.example/cdn-cgi/challenge-platform/h.js"));
  CHECK_FALSE(is_cdn_cgi("https://evil.example/app.js"));
  CHECK_FALSE(is_cdn_cgi("https://evil.example/assets/cdn-cgi.js"));
  CHECK(is_cdn_cgi("https://evil.example/x/cdn-cgi"));
  CHECK_FALSE(is_cdn_cgi("https://cdn-cgi.example/app.js"));
}

TEST_CASE("build_profile examples") {
  FeatureConfig cfg;
  CHECK_FALSE(build_profile(fx::page("https://e.example/", {eight("https://tracker.other/t.js")}), cfg));

  const auto page = fx::page("https://e.example/", {eight("https://e.example/a.js")});
  const auto p = build_profile(page, cfg);
  REQUIRE(p);
  CHECK(p->features.size() == 8);
  CHECK(std::is_sorted(p->features.begin(), p->features.end()));
  CHECK(p->e2ld == "e.example");
  CHECK(p->page_id == page.page_id());

  cfg.drop_property_reads = true;  // 3 get/set tokens leave 5 < 8
  CHECK_FALSE(build_profile(page, cfg));
  cfg.min_features = 5;
  REQUIRE(build_profile(page, cfg));
  CHECK(build_profile(page, cfg)->features.size() == 5);
}

TEST_CASE("cdn-cgi scripts excluded unless asked") {
  const auto page = fx::page("https://e.example/", {eight("https://e.example/cdn-cgi/x.js")});
  FeatureConfig cfg;
  CHECK_FALSE(build_profile(page, cfg));
  cfg.exclude_cdn_cgi = false;
  CHECK(build_profile(page, cfg));
}

TEST_CASE("dom and property token classes") {
  CHECK(is_dom_token("call:HTMLDivElement.focus"));
  CHECK(is_dom_token("get:SVGElement.x"));
  CHECK(is_dom_token("call:CSSStyleDeclaration.setProperty"));
  CHECK(is_dom_token("call:Document.createElement"));
  CHECK(is_dom_token("call:MutationObserver.observe"));
  CHECK_FALSE(is_dom_token("call:Window.fetch"));
  CHECK_FALSE(is_dom_token("call:DocumentTimeline.play"));
  CHECK(is_property_token("get:X.y"));
  CHECK(is_property_token("set:X.y"));
  CHECK_FALSE(is_property_token("construct:X.y"));
}

TEST_CASE("script hash modes") {
  auto top = eight("https://e.example/a.js");
  auto nested = fx::script("inline", {"call:Window.eval"}, 2);
  auto third = fx::script("https://cdn.other/lib.js", {"call:Window.atob"});
  const auto page = fx::page("https://e.example/", {top, nested, third});
  FeatureConfig cfg;
  cfg.min_features = 1;
  auto hashes = [&](FeatureMode m) {
    cfg.mode = m;
    return build_profile(page, cfg)->features;
  };
  CHECK(hashes(FeatureMode::script_hash_all).size() == 3);
  CHECK(hashes(FeatureMode::script_hash_first_party).size() == 2);
  CHECK(hashes(FeatureMode::script_hash_no_eval).size() == 2);
  CHECK(hashes(FeatureMode::script_hash_first_party_no_eval) == std::vector<std::string>{top.sha256});
  cfg.mode = FeatureMode::api_set;
  CHECK(build_profile(page, cfg)->max_eval_depth == 2);
}

TEST_CASE("feature config validation") {
  FeatureConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.min_features = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.min_features = 1;
  cfg.mode = FeatureMode::script_hash_all;
  cfg.drop_dom_apis = true;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK(parse_feature_mode("script-hash-first-party-no-eval") == FeatureMode::script_hash_first_party_no_eval);
  CHECK(parse_feature_mode("api_set") == FeatureMode::api_set);
  CHECK_FALSE(parse_feature_mode("apis"));
}

TEST_CASE("profile records round trip") {
  auto page = fx::page("https://e.example/x", {eight("inline")});
  page.brand_labels = {"zeta", "alpha"};
  const auto p = *build_profile(page, FeatureConfig{});
  CHECK(p.brand_labels == std::vector<std::string>{"alpha", "zeta"});
  CHECK(parse_profile_record(serialize_profile(p)).features == p.features);
  CHECK(serialize_profile(parse_profile_record(serialize_profile(p))) == serialize_profile(p));
}

TEST_CASE("profile properties over random pages") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> hosts{"https://e.example/", "https://cdn.e.example/", "https://other.example/",
                                       "https://e.example/cdn-cgi/", "inline"};
  std::vector<PageTrace> pages;
  for (int i = 0; i < 300; ++i) {
    std::vector<ScriptTrace> scripts;
    for (int s = 0; s < 1 + static_cast<int>(rng() % 4); ++s) {
      std::vector<ApiEvent> events;
      for (int e = 0; e < static_cast<int>(rng() % 12); ++e) {
        static const char* kinds[] = {"call", "construct", "get", "set"};
        static const char* ifaces[] = {"Window", "HTMLDocument", "Navigator", "SVGElement", "Node", "Crypto"};
        events.push_back(fx::ev(std::string(kinds[rng() % 4]) + ":" + ifaces[rng() % 6] + ".m" + std::to_string(rng() % 6)));
      }
      const auto& h = hosts[rng() % hosts.size()];
      scripts.push_back(fx::script(h == "inline" ? h : h + "s.js", std::move(events), static_cast<std::uint32_t>(rng() % 3)));
    }
    pages.push_back(fx::page("https://e.example/p" + std::to_string(i), std::move(scripts)));
  }
  for (std::size_t min : {1u, 4u, 8u}) {
    FeatureConfig cfg;
    cfg.min_features = min;
    FeatureConfig keep = cfg;
    keep.exclude_cdn_cgi = false;
    FeatureConfig all = cfg, no_eval = cfg;
    all.mode = FeatureMode::script_hash_all;
    no_eval.mode = FeatureMode::script_hash_no_eval;
    all.min_features = no_eval.min_features = 1;
    for (const auto& page : pages) {
      std::set<std::string> universe;
      for (const auto& s : page.scripts) {
        for (const auto& e : s.events) universe.insert(canonical_token(e));
      }
      const auto p = build_profile(page, cfg);
      if (p) {
        CHECK(p->features.size() >= min);
        for (const auto& f : p->features) CHECK(universe.count(f) == 1);
        const auto q = build_profile(page, keep);
        REQUIRE(q);
        CHECK(std::includes(q->features.begin(), q->features.end(), p->features.begin(), p->features.end()));
      }
      const auto a = build_profile(page, all);
      const auto n = build_profile(page, no_eval);
      if (n) {
        REQUIRE(a);
        CHECK(std::includes(a->features.begin(), a->features.end(), n->features.begin(), n->features.end()));
      }
    }
    const auto par = build_profiles(pages, cfg);
    CHECK(par == build_profiles_serial(pages, cfg));
    CHECK(std::is_sorted(par.begin(), par.end(), [](const auto& x, const auto& y) { return x.page_id < y.page_id; }));
  }
}

TEST_CASE("refilter applies ablations to exported profiles") {
  const auto p = *build_profile(fx::page("https://e.example/", {eight("inline")}), FeatureConfig{});
  FeatureConfig cfg;
  cfg.min_features = 5;
  cfg.drop_property_reads = true;
  const auto out = refilter_profiles({p}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].features.size() == 5);
  cfg.drop_dom_apis = true;  // also drops Document.createElement and HTML* tokens
  CHECK(refilter_profiles({p}, cfg).empty());
}
