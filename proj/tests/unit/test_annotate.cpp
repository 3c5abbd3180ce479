#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "kitclust/annotate.hpp"
#include "kitclust/error.hpp"
#include "oracles/technique_fixtures.hpp"

using namespace kitclust;
using S = std::set<std::string>;

namespace {

const TechniqueRule* find_rule(const std::vector<TechniqueRule>& rules, const std::string& name) {
  for (const auto& r : rules) if (r.technique == name) return &r;
  return nullptr;
}

GlobalCluster cluster(const std::string& id, std::vector<std::string> members) {
  GlobalCluster c;
  c.cluster_id = id;
  std::sort(members.begin(), members.end());
  c.members = std::move(members);
  return c;
}

std::map<std::string, PageAnnotation> annotations(const std::map<std::string, S>& by_page) {
  std::map<std::string, PageAnnotation> out;
  for (const auto& [p, t] : by_page) out[p].techniques = t;
  return out;
}

}  // namespace

TEST_CASE("builtin rulebook contents") {
  const auto rules = builtin_rules();
  const auto* enc = find_rule(rules, "Encoding");
  REQUIRE(enc);
  CHECK(enc->category == TechniqueCategory::obfuscation);
  CHECK(std::count(enc->clauses[0].tokens.begin(), enc->clauses[0].tokens.end(), "call:Window.atob") == 1);

  const auto* ip = find_rule(rules, "Client-side IP check");
  REQUIRE(ip);
  CHECK(ip->category == TechniqueCategory::evasion);
  CHECK(ip->clauses[0].kind == MatcherKind::arg_prefix);
  CHECK(ip->clauses[0].hosts.size() == 14);
  CHECK(std::count(ip->clauses[0].tokens.begin(), ip->clauses[0].tokens.end(), "call:Window.fetch") == 1);

  const auto* ts = find_rule(rules, "Cloudflare Turnstiles");
  REQUIRE(ts);
  CHECK(std::count(ts->clauses[0].tokens.begin(), ts->clauses[0].tokens.end(), "get:Window.turnstile") == 1);
  CHECK(ts->clauses[0].case_insensitive_member);

  const auto* fpx = find_rule(rules, "Fingerprinting extraction");
  REQUIRE(fpx);
  CHECK(fpx->clauses.size() == 2);
  CHECK(fpx->clauses[0].k == 10);
  CHECK(find_rule(rules, "Advanced fingerprinting")->clauses[0].k == 5);
  CHECK(find_rule(rules, "Basic fingerprinting")->clauses[0].tokens.size() == 3);
  CHECK(find_rule(rules, "Timing bot detection")->clauses[0].kind == MatcherKind::co_occur);
  CHECK(fingerprinting_tokens().size() >= 45);
  for (const auto& r : rules) {
    for (const auto& c : r.clauses) CHECK_FALSE(c.tokens.empty());
  }
}

TEST_CASE("annotate_page examples") {
  const auto rules = builtin_rules();
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {"call:Window.atob"})}), rules) == S{"Encoding"});
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {fx::ev("call:Window.fetch", "https://api.ipregistry.co/?key=k")})}),
                      rules) == S{"Client-side IP check"});
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {"call:Performance.now"})}), rules).empty());
  // co-occurrence must be within one script
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {"call:Performance.now"}),
                                                      fx::script("https://e.example/b.js", {"call:Window.setTimeout"})}),
                      rules).empty());
}

TEST_CASE("fixture suite annotates exactly") {
  const auto rules = builtin_rules();
  for (const auto& f : oracle::technique_fixtures()) {
    CHECK_MESSAGE(annotate_page(f.page, rules) == f.expected, f.name);
  }
}

TEST_CASE("endpoint hosts match exactly") {
  const auto rules = builtin_rules();
  auto with_arg = [&](const std::string& arg) {
    return annotate_page(fx::page("https://e.example/", {fx::script("inline", {fx::ev("call:Window.fetch", arg)})}), rules);
  };
  CHECK(with_arg("https://API.IPIFY.ORG/?format=json") == S{"Client-side IP check"});
  CHECK(with_arg("//ipinfo.io/json") == S{"Client-side IP check"});
  CHECK(with_arg("ipwho.is/") == S{"Client-side IP check"});
  CHECK(with_arg("https://api.ipify.org.evil.example/").empty());
  CHECK(with_arg("https://xipinfo.io/").empty());
  CHECK(with_arg("/relative").empty());
}

TEST_CASE("third-party and cdn-cgi scripts are ignored") {
  const auto rules = builtin_rules();
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {"call:JSON.parse"}),
                                                      fx::script("https://cdn.other/x.js", {"call:Window.atob"})}),
                      rules).empty());
  const auto cdn = fx::page("https://e.example/", {fx::script("inline", {"call:JSON.parse"}),
                                                  fx::script("https://e.example/cdn-cgi/x.js", {"call:Window.eval"})});
  CHECK(annotate_page(cdn, rules).empty());
  AnnotateOptions keep;
  keep.exclude_cdn_cgi = false;
  CHECK(annotate_page(cdn, rules, keep) == S{"Dynamic script Evaluation"});
}

TEST_CASE("cloudflare scripts count only for the turnstile rule") {
  const auto rules = builtin_rules();
  const auto p = fx::page("https://e.example/", {fx::script("inline", {"call:JSON.parse"}),
                                                fx::script("https://challenges.cloudflare.com/t.js",
                                                           {"get:Window.turnstile", "call:Window.atob"})});
  CHECK(annotate_page(p, rules) == S{"Cloudflare Turnstiles"});
  // an empty first-party set yields nothing even with cloudflare evidence
  const auto only_cf = fx::page("https://e.example/", {fx::script("https://challenges.cloudflare.com/t.js", {"get:Window.turnstile"})});
  CHECK(annotate_page(only_cf, rules).empty());
  CHECK(annotate_page(fx::page("https://e.example/", {}), rules).empty());
}

TEST_CASE("markers report what fired") {
  const auto rules = builtin_rules();
  const auto a = annotate_page_detailed(
      fx::page("https://e.example/", {fx::script("inline", {fx::ev("call:Window.atob"), fx::ev("call:TextDecoder.decode"),
                                                          fx::ev("call:Window.fetch", "https://ipapi.co/json")})}),
      rules);
  CHECK(a.markers.at("Encoding") == S{"call:TextDecoder.decode", "call:Window.atob"});
  CHECK(a.markers.at("Client-side IP check") == S{"ipapi.co"});
}

TEST_CASE("annotation is pure and page-parallel equals per-page") {
  const auto rules = builtin_rules();
  std::vector<PageTrace> pages;
  for (const auto& f : oracle::technique_fixtures()) pages.push_back(f.page);
  const auto all = annotate_pages(pages, rules);
  for (const auto& p : pages) {
    CHECK(all.at(p.page_id()).techniques == annotate_page(p, rules));
    CHECK(annotate_page(p, rules) == annotate_page(p, rules));
  }
}

TEST_CASE("annotate_clusters examples") {
  const auto rules = builtin_rules();
  const auto pages = annotations({{"a", {"Dynamic script Evaluation"}}, {"b", {}}, {"c", {}}, {"d", {"Encoding"}},
                                  {"e", {"Encoding"}}, {"f", {}}, {"g", {}}});
  const auto r = annotate_clusters(std::vector<GlobalCluster>{cluster("c1", {"a", "b", "c"})}, pages, rules);
  CHECK(r.cluster_techniques.at("c1") == S{"Dynamic script Evaluation"});
  CHECK(r.counts.at("Dynamic script Evaluation").clusters == 1);
  CHECK(r.counts.at("Dynamic script Evaluation").pages == 3);
  CHECK(r.counts.at("Pop-ups").clusters == 0);
  CHECK(r.counts.size() == rules.size());

  const auto quiet = annotate_clusters(std::vector<GlobalCluster>{cluster("q", {"b", "c"})}, pages, rules);
  CHECK(quiet.cluster_techniques.at("q").empty());

  // two clusters sharing a technique, 5 distinct pages (one page in both)
  const auto two = annotate_clusters(std::vector<GlobalCluster>{cluster("x", {"d", "f", "g"}), cluster("y", {"e", "g", "b"})},
                                     pages, rules);
  CHECK(two.counts.at("Encoding").clusters == 2);
  CHECK(two.counts.at("Encoding").pages == 5);

  CHECK_THROWS_WITH_AS(annotate_clusters(std::vector<GlobalCluster>{cluster("z", {"a", "ghost"})}, pages, rules),
                       doctest::Contains("ghost"), InputError);
}

TEST_CASE("adding a page never removes a cluster technique") {
  std::mt19937_64 rng(5);
  const auto rules = builtin_rules();
  const std::vector<std::string> names{"Encoding", "Pop-ups", "Encryption", "Basic fingerprinting"};
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, S> by_page;
    std::vector<std::string> members;
    for (int i = 0; i < 8; ++i) {
      const auto id = "p" + std::to_string(i);
      S t;
      for (const auto& n : names) if (rng() % 4 == 0) t.insert(n);
      by_page[id] = t;
      members.push_back(id);
    }
    const auto pages = annotations(by_page);
    const std::size_t k = 1 + rng() % 7;
    const auto small = annotate_clusters(std::vector<GlobalCluster>{cluster("c", {members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k)})}, pages, rules);
    const auto big = annotate_clusters(std::vector<GlobalCluster>{cluster("c", {members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k) + 1})}, pages, rules);
    const auto& s = small.cluster_techniques.at("c");
    const auto& b = big.cluster_techniques.at("c");
    CHECK(std::includes(b.begin(), b.end(), s.begin(), s.end()));
  }
}

TEST_CASE("eval depth") {
  auto depths = [](std::vector<std::uint32_t> ds) {
    std::vector<ScriptTrace> s;
    for (auto d : ds) s.push_back(fx::script("inline", {"call:A.b"}, d));
    return max_eval_depth(fx::page("https://e.example/", s));
  };
  CHECK(depths({0, 0, 1}) == 1);
  CHECK(depths({0, 1, 2, 3}) == 3);
  CHECK(depths({}) == 0);
}

TEST_CASE("rule records") {
  for (const auto& r : builtin_rules()) CHECK(parse_rule_record(serialize_rule(r)) == r);
  CHECK_THROWS_AS(parse_rule_record(R"({"technique": "x", "category": "evasion", "clauses": [{"kind": "any_of", "tokens": []}]})"), InputError);
  CHECK_THROWS_AS(parse_rule_record(R"({"technique": "x", "category": "evasion", "clauses": [{"kind": "arg_prefix", "tokens": ["call:Window.fetch"]}]})"), InputError);
  CHECK_THROWS_AS(parse_rule_record(R"({"technique": "x", "category": "sneaky", "clauses": [{"kind": "any_of", "tokens": ["a:B.c"]}]})"), InputError);
  CHECK_THROWS_AS(parse_rule_record(R"({"technique": "x", "category": "evasion", "clauses": [{"kind": "count_at_least", "tokens": ["a:B.c"], "k": 0}]})"), InputError);

  const auto extra = parse_rule_record(
      R"({"technique": "Client-side IP check", "category": "evasion", "clauses": [{"kind": "arg_prefix", "tokens": ["call:Window.fetch"], "hosts": ["IP.Example"]}]})");
  const auto merged = merge_rules(builtin_rules(), std::vector<TechniqueRule>{extra});
  CHECK(merged.size() == builtin_rules().size());
  CHECK(annotate_page(fx::page("https://e.example/", {fx::script("inline", {fx::ev("call:Window.fetch", "https://ip.example/")})}), merged) ==
        S{"Client-side IP check"});
  TechniqueRule added{"Custom", TechniqueCategory::obfuscation, {{MatcherKind::all_of, {"call:A.b", "call:C.d"}, {}, 1, false}}, false};
  CHECK(merge_rules(builtin_rules(), std::vector<TechniqueRule>{added}).size() == builtin_rules().size() + 1);
}

TEST_CASE("report csv") {
  const auto rules = builtin_rules();
  const auto pages = annotations({{"a", {"Encoding"}}, {"b", {}}});
  const auto r = annotate_clusters(std::vector<GlobalCluster>{cluster("c1", {"a", "b"})}, pages, rules);
  const auto csv = technique_report_csv(r);
  CHECK(csv.starts_with("technique,category,pages,clusters\n"));
  CHECK(csv.find("Encoding,obfuscation,2,1\n") != std::string::npos);
  CHECK(csv.find("Pop-ups,evasion,0,0\n") != std::string::npos);
}
