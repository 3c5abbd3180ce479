#include <doctest.h>

#include <algorithm>
#include <random>

#include "kitclust/error.hpp"
#include "kitclust/hash.hpp"
#include "kitclust/kits.hpp"
#include "oracles/oracles.hpp"

using namespace kitclust;
using V = std::vector<std::string>;

namespace {

std::string h(const std::string& s) { return sha256_hex(s); }

KitArchive archive(const std::string& id, const V& code_names, const V& assets = {}) {
  KitArchive a;
  a.archive_id = id;
  a.zip_sha256 = h("zip:" + id);
  for (const auto& c : code_names) a.files.push_back({"src/" + c + ".php", h(c), true});
  for (const auto& x : assets) a.files.push_back({"img/" + x + ".png", h(x), false});
  return a;
}

V names(const std::string& prefix, int from, int to) {
  V out;
  for (int i = from; i < to; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

V concat(V a, const V& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("code file detection") {
  for (const char* p : {"a.php", "x/y.JS", "index.html", "b.htm", "c.phtml", "d.asp", "e.aspx", "f.pl", "g.cgi",
                        "h.sh", "i.py"}) {
    CHECK(is_code_path(p));
  }
  CHECK_FALSE(is_code_path("logo.png"));
  CHECK_FALSE(is_code_path("style.css"));
  CHECK_FALSE(is_code_path("README"));
  CHECK(is_code_path("bin/run", "#!/bin/sh"));
  CHECK_FALSE(is_code_path("bin/run", "echo"));
}

TEST_CASE("code_file_set examples") {
  const auto a = archive("a", {"one", "two", "three"}, {"i1", "i2"});
  const auto set = code_file_set(a);
  CHECK(set.size() == 3);
  CHECK(std::is_sorted(set.begin(), set.end()));
  CHECK(code_file_set(archive("b", {}, {"i1"})).empty());
  CHECK(code_file_set(archive("c", {"one", "two", "three"})) == set);
  auto enc = a;
  enc.encrypted = true;
  CHECK_THROWS_WITH_AS(code_file_set(enc), doctest::Contains("encrypted archive has no code set"), InputError);
}

TEST_CASE("group_families examples") {
  CHECK(group_families(std::vector<KitArchive>{archive("a", {"x", "y"}), archive("b", {"x", "y"})}).size() == 1);

  // |∩| = 18, sizes 19 and 19, |∪| = 20: JI = 0.90 exactly
  const V core = names("c", 0, 18);
  const auto fs = group_families(std::vector<KitArchive>{archive("a", concat(core, {"p"})), archive("b", concat(core, {"q"}))});
  REQUIRE(fs.size() == 1);
  CHECK(fs[0].member_archive_ids == V{"a", "b"});
  CHECK(fs[0].family_id.size() == 12);

  // size 10 sharing 8: JI = 8/12
  const V eight = names("c", 0, 8);
  CHECK(group_families(std::vector<KitArchive>{archive("a", concat(eight, {"p1", "p2"})),
                                               archive("b", concat(eight, {"q1", "q2"}))}).size() == 2);
}

TEST_CASE("family ids and special archives") {
  const auto fs = group_families(std::vector<KitArchive>{archive("b", {"x"}), archive("a", {"x"})});
  REQUIRE(fs.size() == 1);
  CHECK(fs[0].family_id == sha256_hex(h("x")).substr(0, 12));

  auto e1 = archive("e1", {}), e2 = archive("e2", {}), e3 = archive("e3", {});
  e1.encrypted = e2.encrypted = e3.encrypted = true;
  e2.zip_sha256 = e1.zip_sha256;
  const auto enc = group_families(std::vector<KitArchive>{e1, e2, e3, archive("empty", {}, {"img"})});
  REQUIRE(enc.size() == 2);
  std::set<V> members;
  for (const auto& f : enc) members.insert(f.member_archive_ids);
  CHECK(members == std::set<V>{{"e1", "e2"}, {"e3"}});
  CHECK_THROWS_AS(group_families(std::vector<KitArchive>{}, FamilyOptions{0.0}), InputError);
}

TEST_CASE("grouping is transitive") {
  // a~b and b~c at 0.9, a vs c lower: one chained family
  const V core = names("c", 0, 18);
  const auto a = archive("a", concat(core, {"p", "q"}));
  const auto b = archive("b", concat(core, {"p", "r"}));
  const auto c = archive("c", concat(core, {"r", "s"}));
  CHECK(group_families(std::vector<KitArchive>{a, b, c}, FamilyOptions{0.85}).size() == 1);
}

TEST_CASE("map_urls examples") {
  const std::vector<KitArchive> archives{archive("a", {"x"}), archive("b", {"y"})};
  const auto families = group_families(archives);
  REQUIRE(families.size() == 2);

  UrlMappingStats stats;
  const std::vector<UrlRecord> three{{"https://d.example/1", "a", ""}, {"https://d.example/2", "a", ""},
                                     {"https://d.example/3", "a", ""}};
  const auto mapped = map_urls(families, archives, three, &stats);
  std::size_t total = 0;
  for (const auto& f : mapped) total += f.deployed_urls.size();
  CHECK(total == 3);
  CHECK(stats.attached == 3);

  const std::vector<UrlRecord> two_archives{{"https://d.example/1", "a", ""}, {"https://d.example/2", "b", ""},
                                            {"https://ok.example/", "b", ""}};
  const auto discarded = map_urls(families, archives, two_archives, &stats);
  total = 0;
  for (const auto& f : discarded) total += f.deployed_urls.size();
  CHECK(total == 1);
  CHECK(stats.discarded_multi_archive_domain == 2);

  CHECK(map_urls(families, archives, std::vector<UrlRecord>{}) == families);
  CHECK_THROWS_WITH_AS(map_urls(families, archives, std::vector<UrlRecord>{{"https://x.example/", "zz", ""}}),
                       doctest::Contains("zz"), InputError);
}

TEST_CASE("each retained url belongs to exactly one family") {
  std::mt19937_64 rng(12);
  std::vector<KitArchive> archives;
  for (int i = 0; i < 12; ++i) archives.push_back(archive("k" + std::to_string(i), names("f" + std::to_string(i % 4) + "-", 0, 10 + i % 3)));
  std::vector<UrlRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back({"https://d" + std::to_string(rng() % 40) + ".example/p" + std::to_string(i),
                       "k" + std::to_string(rng() % 12), ""});
  }
  const auto fs = map_urls(group_families(archives), archives, records);
  std::map<std::string, int> owners;
  for (const auto& f : fs) for (const auto& u : f.deployed_urls) ++owners[u];
  for (const auto& [u, n] : owners) CHECK(n == 1);
}

TEST_CASE("permutation and threshold monotonicity") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<KitArchive> archives;
    V ids;
    for (int i = 0; i < 10; ++i) {
      V code;
      const int base = static_cast<int>(rng() % 3);
      for (int k = 0; k < 20; ++k) if (rng() % 8) code.push_back("b" + std::to_string(base) + "-" + std::to_string(k));
      if (code.empty()) code.push_back("solo");
      ids.push_back("a" + std::to_string(i));
      archives.push_back(archive(ids.back(), code));
    }
    auto shuffled = archives;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(group_families(archives) == group_families(shuffled));
    std::size_t prev = 0;
    for (double t : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 1.0}) {
      const auto fs = group_families(archives, FamilyOptions{t});
      CHECK(fs.size() >= prev);
      prev = fs.size();
    }
  }
}

TEST_CASE("kit record formats") {
  const auto a = parse_archive_record(
      R"({"archive_id": "k1", "zip_sha256": ")" + h("z") + R"(", "encrypted": false, "files": [{"path": "a.php", "sha256": ")" +
      h("a") + R"("}, {"path": "logo.gif", "sha256": ")" + h("b") + R"("}]})");
  REQUIRE(a.files.size() == 2);
  CHECK(a.files[0].is_code);
  CHECK_FALSE(a.files[1].is_code);
  CHECK_THROWS_AS(parse_archive_record(R"({"archive_id": "k1", "zip_sha256": "nothex", "encrypted": false, "files": []})"), InputError);
  CHECK_THROWS_AS(parse_archive_record(R"({"archive_id": "k1", "zip_sha256": ")" + h("z") +
                                       R"(", "encrypted": false, "files": [{"path": "a.php", "sha256": ")" + h("a") +
                                       R"("}, {"path": "a.php", "sha256": ")" + h("a") + R"("}]})"),
                  InputError);
  const auto u = parse_url_record(R"({"url": "https://x.example/a", "archive_id": "k1"})");
  CHECK(u.archive_id == "k1");
  KitFamily f{"0123456789ab", {"k1"}, {"https://x.example/a"}};
  CHECK(parse_family_record(serialize_family(f)) == f);
}
