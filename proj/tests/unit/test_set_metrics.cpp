#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "kitclust/error.hpp"
#include "kitclust/set_metrics.hpp"
#include "oracles/instances.hpp"

using namespace kitclust;
using V = std::vector<std::string>;

TEST_CASE("jaccard examples") {
  CHECK(jaccard_index(V{"x", "y", "z"}, V{"x", "y", "z"}) == 1.0);
  CHECK(jaccard_index(V{"x"}, V{"y"}) == 0.0);
  CHECK(jaccard_index(V{"a", "b", "c"}, V{"b", "c", "d"}) == 0.5);
  CHECK(jaccard_distance(V{"a", "b"}, V{"a", "b"}) == 0.0);
  CHECK(jaccard_distance(V{"a"}, V{"b"}) == 1.0);
  CHECK(jaccard_distance(V{"a", "b", "c"}, V{"b", "c", "d"}) == 0.5);
  CHECK(jaccard_index(V{}, V{}) == 1.0);
  CHECK(jaccard_index(V{}, V{"a"}) == 0.0);
  CHECK(set_intersection(V{"a", "b", "c"}, V{"b", "c", "d"}) == V{"b", "c"});
}

TEST_CASE("interner ids") {
  TokenInterner t;
  const auto a = t.to_ids(V{"z", "a", "m", "a"});
  CHECK(a.size() == 3);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(t.intern("m") == t.intern("m"));
  CHECK(t.token(t.intern("q")) == "q");
  CHECK(intersection_size(a, t.to_ids(V{"a", "q"})) == 1);
}

TEST_CASE("pairwise examples") {
  const auto disjoint = oracle::condensed(std::vector<oracle::StringSet>{{"a"}, {"b"}, {"c"}});
  CHECK(disjoint.values == std::vector<double>{1, 1, 1});
  const auto same = oracle::condensed(std::vector<oracle::StringSet>{{"a", "b"}, {"a", "b"}});
  CHECK(same.values == std::vector<double>{0});
  CHECK(same.at(1, 0) == 0.0);

  std::mt19937_64 rng(5);
  const auto sets = oracle::random_sets(rng, 4, 6, 4);
  const auto d = oracle::condensed(sets);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i != j) CHECK(d.at(i, j) == doctest::Approx(oracle::jaccard_distance(sets[i], sets[j])).epsilon(1e-15));
    }
  }
}

TEST_CASE("condensed index layout") {
  CondensedDistances d;
  d.n = 5;
  std::size_t expect = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j) CHECK(d.index(i, j) == expect++);
  }
  CHECK(CondensedDistances::pair_count(5) == 10);
  CHECK(CondensedDistances::pair_count(1) == 0);
}

TEST_CASE("budget and empty input") {
  std::vector<IdSet> sets(100, IdSet{1, 2});
  std::vector<std::string> ids(100, "x");
  DistanceOptions opts;
  opts.max_bytes = 1000;
  opts.label = "window 7";
  CHECK_THROWS_WITH_AS(pairwise_distances(sets, ids, opts), doctest::Contains("window too large"), InfeasibleError);
  CHECK_THROWS_WITH_AS(pairwise_distances(sets, ids, opts), doctest::Contains("window 7"), InfeasibleError);
  CHECK_THROWS_AS(pairwise_distances(std::span<const IdSet>{}, {}), InputError);
}

TEST_CASE("serial and parallel pairwise agree") {
  std::mt19937_64 rng(9);
  const auto sets = oracle::random_sets(rng, 300, 40, 15);
  TokenInterner t;
  std::vector<IdSet> ids;
  std::vector<std::string> names;
  for (const auto& v : oracle::as_vectors(sets)) {
    ids.push_back(t.to_ids(v));
    names.push_back(std::to_string(names.size()));
  }
  const auto p = pairwise_distances(ids, names);
  const auto s = pairwise_distances_serial(ids, names);
  CHECK(p.values == s.values);
  CHECK(p.ids == names);
}

TEST_CASE("profiles overload uses page ids") {
  std::vector<ApiProfile> ps{fx::profile("a", {"x", "y"}), fx::profile("b", {"y", "z"})};
  const auto d = pairwise_distances(ps);
  CHECK(d.ids == V{ps[0].page_id, ps[1].page_id});
  CHECK(d.values[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("kfd round trip and layout") {
  std::mt19937_64 rng(1);
  const auto d = oracle::condensed(oracle::random_sets(rng, 7, 9, 5));
  std::stringstream buf;
  write_kfd(buf, d);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "KFD1");
  CHECK(bytes.size() == 4 + 8 + 8 * d.values.size());
  CHECK(static_cast<unsigned char>(bytes[4]) == 7);  // little-endian n
  for (int k = 5; k < 12; ++k) CHECK(bytes[k] == 0);
  const auto back = read_kfd(buf);
  CHECK(back.n == d.n);
  CHECK(back.values == d.values);

  std::stringstream bad("KFD2\x01\0\0\0\0\0\0\0");
  CHECK_THROWS_AS(read_kfd(bad), InputError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_kfd(truncated), InputError);
}

TEST_CASE("metric axioms on random sets") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto s = oracle::as_vectors(oracle::random_sets(rng, 3, 8, 6, true));
    const double ab = jaccard_distance(s[0], s[1]), ba = jaccard_distance(s[1], s[0]);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (!s[0].empty()) CHECK(jaccard_distance(s[0], s[0]) == 0.0);
    CHECK(jaccard_distance(s[0], s[2]) <= ab + jaccard_distance(s[1], s[2]) + 1e-12);
  }
}
