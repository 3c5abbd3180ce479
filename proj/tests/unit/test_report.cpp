#include <doctest.h>

#include "fixtures.hpp"
#include "kitclust/error.hpp"
#include "kitclust/report.hpp"

using namespace kitclust;
using V = std::vector<std::string>;

namespace {

GlobalCluster cluster(const std::string& id, std::size_t pages, const std::string& first, const std::string& last) {
  GlobalCluster c;
  c.cluster_id = id;
  for (std::size_t i = 0; i < pages; ++i) c.members.push_back(id + "-p" + std::to_string(i));
  c.first_seen = parse_utc(first);
  c.last_seen = parse_utc(last);
  return c;
}

TechniqueReport report_with(const std::map<std::string, std::set<std::string>>& tagged, const V& all_techniques) {
  TechniqueReport r;
  for (const auto& t : all_techniques) r.counts[t];
  r.cluster_techniques = tagged;
  return r;
}

}  // namespace

TEST_CASE("brand similarity examples") {
  const BrandBaseline b{"bank", {"a", "b", "c", "d"}};
  auto s = brand_similarity(V{"a", "b", "x"}, b);
  CHECK(s.coverage == 0.5);
  CHECK(s.jaccard == doctest::Approx(2.0 / 5.0));
  CHECK_FALSE(s.perfect_subset);
  s = brand_similarity(V{"a", "b", "c", "d", "e"}, b);
  CHECK(s.perfect_subset);
  CHECK(s.coverage == 1.0);
  s = brand_similarity(V{"y", "z"}, b);
  CHECK(s.jaccard == 0.0);
  CHECK(s.coverage == 0.0);
  CHECK_FALSE(s.perfect_subset);
  CHECK_THROWS_AS(brand_similarity(V{"a"}, BrandBaseline{"empty", {}}), InputError);
  CHECK_THROWS_AS(parse_brand_baseline(R"({"brand": "x", "features": []})"), InputError);
  CHECK(parse_brand_baseline(R"({"brand": "x", "features": ["b", "a", "b"]})").features == V{"a", "b"});
}

TEST_CASE("brand report") {
  auto p1 = fx::profile("p1", {"a", "b", "x"});
  auto p2 = fx::profile("p2", {"a", "b", "c", "d"});
  auto p3 = fx::profile("p3", {"a"});
  p1.brand_labels = {"bank"};
  p2.brand_labels = {"bank"};
  p3.brand_labels = {"other"};
  const std::vector<BrandBaseline> bases{{"bank", {"a", "b", "c", "d"}}};
  const auto rows = brand_report(std::vector<ApiProfile>{p1, p2, p3}, bases);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pages == 2);
  CHECK(rows[0].avg_coverage == doctest::Approx(0.75));
  CHECK(rows[0].half_match == 2);
  CHECK(rows[0].perfect_subset == 1);
  const auto csv = brand_report_csv(rows);
  CHECK(csv.starts_with("# "));
  CHECK(csv.find("brand,pages,avg_jaccard,avg_coverage,match_50,perfect_subset\n") != std::string::npos);
}

TEST_CASE("cluster stats examples") {
  auto c = cluster("c", 3, "2024-01-01T10:00:00Z", "2024-01-01T10:00:00Z");
  CHECK(cluster_stats(c).lifetime_days == 0);
  c.last_seen = parse_utc("2024-01-03T09:59:59Z");
  CHECK(cluster_stats(c).lifetime_days == 1);
  CHECK(cluster_stats(c).n_pages == 3);

  // x.pages.dev and y.pages.dev are distinct deployments; a.shop.example and
  // b.shop.example share one registrable domain
  std::set<std::string> e2lds;
  for (const char* host : {"x.pages.dev", "y.pages.dev"}) e2lds.insert(e2ld_of(host));
  CHECK(e2lds.size() == 2);
  e2lds.clear();
  for (const char* host : {"a.shop.example", "b.shop.example", "c.other.example"}) e2lds.insert(e2ld_of(host));
  c.e2lds.assign(e2lds.begin(), e2lds.end());
  CHECK(cluster_stats(c).n_e2lds == 2);
}

TEST_CASE("cluster stats csv") {
  std::vector<GlobalCluster> cs{cluster("c1", 2, "2024-01-01T00:00:00Z", "2024-01-08T00:00:00Z")};
  const auto plain = cluster_stats_csv(cs);
  CHECK(plain == "cluster_id,pages,e2lds,brands,lifetime_days,first_seen,last_seen\n"
                 "c1,2,0,0,7,2024-01-01T00:00:00Z,2024-01-08T00:00:00Z\n");
  const auto r = report_with({{"c1", {"Encoding", "Pop-ups"}}}, {"Encoding", "Pop-ups"});
  CHECK(cluster_stats_csv(cs, &r).find(",Encoding;Pop-ups\n") != std::string::npos);
}

TEST_CASE("crosstab examples") {
  const std::vector<std::int64_t> one_bucket{2};
  std::vector<GlobalCluster> single{cluster("c1", 4, "2024-01-01T00:00:00Z", "2024-01-01T00:00:00Z")};
  auto t = technique_crosstab(single, report_with({{"c1", {"Encoding"}}}, {"Encoding", "Pop-ups"}), one_bucket);
  REQUIRE(t.techniques == V{"Encoding", "Pop-ups"});
  CHECK(t.fractions[0] == std::vector<double>{1.0});
  CHECK(t.fractions[1] == std::vector<double>{0.0});
  CHECK_FALSE(t.absent[0]);
  CHECK(t.absent[1]);

  // 2 techniques x 2 buckets: sizes 2, 3, 10 with buckets [2,5) and [5,inf)
  std::vector<GlobalCluster> cs{cluster("a", 2, "2024-01-01T00:00:00Z", "2024-01-01T00:00:00Z"),
                                cluster("b", 3, "2024-01-01T00:00:00Z", "2024-03-01T00:00:00Z"),
                                cluster("c", 10, "2024-01-01T00:00:00Z", "2024-01-02T00:00:00Z")};
  const auto r = report_with({{"a", {"T1", "T2"}}, {"b", {"T1"}}, {"c", {"T1", "T2"}}}, {"T1", "T2"});
  const std::vector<std::int64_t> two{2, 5};
  t = technique_crosstab(cs, r, two);
  CHECK(t.bucket_labels == V{"2-4", "5+"});
  CHECK(t.fractions[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(t.fractions[0][1] == doctest::Approx(1.0 / 3.0));
  CHECK(t.fractions[1] == std::vector<double>{0.5, 0.5});

  const std::vector<std::int64_t> life{0, 30};
  t = technique_crosstab(cs, r, life, CrosstabAxis::lifetime);
  CHECK(t.fractions[0][0] == doctest::Approx(2.0 / 3.0));
  CHECK(t.fractions[1] == std::vector<double>{1.0, 0.0});
  CHECK(crosstab_csv(t).starts_with("technique,lifetime_days:0-29,lifetime_days:30+,absent\n"));

  CHECK_THROWS_AS(technique_crosstab(std::vector<GlobalCluster>{}, r, two), InputError);
  const std::vector<std::int64_t> bad{5, 2};
  CHECK_THROWS_AS(technique_crosstab(cs, r, bad), InputError);
  const std::vector<std::int64_t> high{3};
  CHECK_THROWS_AS(technique_crosstab(cs, r, high), InputError);
  CHECK_NOTHROW(technique_crosstab(cs, r, kDefaultSizeBuckets));
}

TEST_CASE("monthly report") {
  std::vector<ApiProfile> ps{fx::profile("a", {"x"}, "2024-01-05T00:00:00Z", "one.example"),
                             fx::profile("b", {"x"}, "2024-01-20T00:00:00Z", "two.example"),
                             fx::profile("c", {"x"}, "2024-02-02T00:00:00Z", "one.example")};
  GlobalCluster g;
  g.cluster_id = "g1";
  g.members = {ps[0].page_id, ps[2].page_id};
  const auto rows = monthly_report(ps, std::vector<GlobalCluster>{g});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].month == "2024-01");
  CHECK(rows[0].pages == 2);
  CHECK(rows[0].e2lds == 2);
  CHECK(rows[0].clusters == 1);
  CHECK(rows[1].clusters == 1);
  CHECK(monthly_report_csv(rows) == "month,pages,e2lds,clusters\n2024-01,2,2,1\n2024-02,1,1,1\n");
}
