#include <doctest.h>

#include <cmath>
#include <map>

#include "kitclust/error.hpp"
#include "kitclust/set_metrics.hpp"
#include "kitclust/synth.hpp"

using namespace kitclust;

namespace {

struct Means {
  double intra = 0, inter = 0;
};

Means measure(const std::vector<ApiProfile>& ps, const std::vector<std::size_t>& fam) {
  double si = 0, se = 0;
  std::size_t ni = 0, ne = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      const double s = jaccard_index(std::span<const std::string>(ps[i].features), std::span<const std::string>(ps[j].features));
      if (fam[i] == fam[j]) { si += s; ++ni; }
      else { se += s; ++ne; }
    }
  }
  return {ni ? si / static_cast<double>(ni) : 0, ne ? se / static_cast<double>(ne) : 0};
}

}  // namespace

TEST_CASE("profiles built directly equal profiles built from traces") {
  for (auto schedule : {SynthSchedule::uniform, SynthSchedule::split_fortnights}) {
    SynthParams p;
    p.n_families = 7;
    p.pages_per_family = 6;
    p.schedule = schedule;
    p.span_days = 70;
    const auto corpus = synth_corpus(p);
    FeatureConfig cfg;
    cfg.min_features = 1;
    CHECK(build_profiles(corpus.pages, cfg) == synth_profiles(p));
    CHECK(corpus.pages.size() == 42);
    CHECK(corpus.truth.size() == 7);
    for (const auto& f : corpus.truth) {
      CHECK(f.family_id.size() == 12);
      CHECK(f.deployed_urls.size() == 6);
    }
  }
}

TEST_CASE("generator is deterministic per seed") {
  SynthParams p;
  p.n_families = 4;
  p.pages_per_family = 5;
  CHECK(synth_corpus(p).pages == synth_corpus(p).pages);
  auto q = p;
  q.seed = 2;
  CHECK(synth_profiles(p) != synth_profiles(q));
}

TEST_CASE("default targets are met within 0.03") {
  SynthParams p;  // 50 x 20, intra 0.986, inter 0.159
  std::vector<std::size_t> fam;
  const auto ps = synth_profiles(p, &fam);
  const auto m = measure(ps, fam);
  CHECK(std::abs(m.intra - 0.986) <= 0.03);
  CHECK(std::abs(m.inter - 0.159) <= 0.03);
}

TEST_CASE("intra 1 gives identical family members") {
  SynthParams p;
  p.n_families = 5;
  p.pages_per_family = 4;
  p.intra_sim = 1.0;
  std::vector<std::size_t> fam;
  const auto ps = synth_profiles(p, &fam);
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = 0; j < ps.size(); ++j)
      if (fam[i] == fam[j]) CHECK(ps[i].features == ps[j].features);
}

TEST_CASE("inter 0 gives disjoint family vocabularies") {
  SynthParams p;
  p.n_families = 6;
  p.pages_per_family = 4;
  p.inter_sim = 0.0;
  p.technique_markers = false;
  std::vector<std::size_t> fam;
  const auto ps = synth_profiles(p, &fam);
  std::map<std::string, std::set<std::size_t>> owners;
  for (std::size_t i = 0; i < ps.size(); ++i) for (const auto& f : ps[i].features) owners[f].insert(fam[i]);
  for (const auto& [token, fs] : owners) CHECK(fs.size() == 1);
}

TEST_CASE("plan feasibility") {
  SynthParams p;
  const auto plan = plan_synth(p);
  CHECK(plan.keep_prob <= 1.0);
  CHECK(plan.core + plan.unique == p.template_size);
  CHECK(plan.max_inter > 0.159);

  p.template_size = 60;
  CHECK_THROWS_WITH_AS(plan_synth(p), doctest::Contains("template of at least"), InfeasibleError);
  p.template_size = 150;
  p.inter_sim = 0.99;
  CHECK_THROWS_AS(plan_synth(p), InfeasibleError);
  p.inter_sim = 0.85;  // below intra but above the 0.818 ceiling for 20 tokens
  p.intra_sim = 0.9;
  p.template_size = 20;
  p.page_noise = 0;
  CHECK_THROWS_WITH_AS(plan_synth(p), doctest::Contains("feasible inter range"), InfeasibleError);
  p.intra_sim = 1.5;
  CHECK_THROWS_AS(plan_synth(p), InputError);
  p.intra_sim = 0.9;
  p.n_families = 0;
  CHECK_THROWS_AS(plan_synth(p), InputError);
}

TEST_CASE("split fortnights schedule") {
  SynthParams p;
  p.n_families = 3;
  p.pages_per_family = 9;
  p.schedule = SynthSchedule::split_fortnights;
  p.span_days = 70;
  std::vector<std::size_t> fam;
  const auto ps = synth_profiles(p, &fam);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto days = (ps[i].observed_at - p.start) / kDay;
    const auto a = static_cast<std::int64_t>(fam[i] % 3);
    const auto slot = days / 14;
    CHECK(slot >= a);
    CHECK(slot <= a + 2);
  }
  CHECK(parse_schedule("split-fortnights") == SynthSchedule::split_fortnights);
  CHECK(to_string(SynthSchedule::uniform) == "uniform");
  CHECK_FALSE(parse_schedule("weekly"));
}
