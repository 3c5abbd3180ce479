#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/kits.hpp"
#include "kitclust/profile.hpp"
#include "kitclust/time.hpp"
#include "kitclust/trace.hpp"

namespace kitclust {

enum class SynthSchedule {
  uniform,           // observation times uniform over span_days
  split_fortnights,  // fortnights a and a+2 (a = family % 3) plus one bridge page in a+1
};

std::optional<SynthSchedule> parse_schedule(std::string_view text);
std::string_view to_string(SynthSchedule s);

struct SynthParams {
  std::size_t n_families = 50;
  std::size_t pages_per_family = 20;
  double intra_sim = 0.986;
  double inter_sim = 0.159;
  std::uint64_t seed = 1;
  std::size_t template_size = 150;
  std::size_t page_noise = 1;  // page-specific tokens per page; none when intra_sim == 1
  SynthSchedule schedule = SynthSchedule::uniform;
  std::int64_t span_days = 28;
  Timestamp start = Timestamp{std::chrono::seconds{1704067200}};  // 2024-01-01T00:00:00Z
  bool technique_markers = true;  // a few technique-marker APIs per family
  bool third_party_noise = true;  // analytics and cdn-cgi scripts outside the first-party set
};

// Each family template holds `core` tokens shared by every family and
// `unique` tokens of its own. A page keeps each template token with
// probability q and adds e tokens nobody else has, so
//   intra = q^2 m / (2qm + 2e - q^2 m)
//   inter = q^2 c / (2qm + 2e - q^2 c)
// The page-specific tokens keep family members distinct.
struct SynthPlan {
  double keep_prob = 1.0;
  std::size_t page_noise = 0;
  std::size_t core = 0;
  std::size_t unique = 0;
  double max_inter = 0.0;  // feasible inter range is [0, max_inter]
};

// Throws InputError when similarities fall outside [0, 1] or counts are
// zero; InfeasibleError (naming the feasible range) when the template size
// cannot realise the pair.
SynthPlan plan_synth(const SynthParams& params);

struct SynthCorpus {
  std::vector<PageTrace> pages;
  std::vector<KitFamily> truth;       // one family per template, urls = its pages
  std::vector<std::size_t> family_of;  // per page
};

SynthCorpus synth_corpus(const SynthParams& params);

// The api_set profiles synth_corpus's pages produce, without building
// traces. No min_features filter is applied.
std::vector<ApiProfile> synth_profiles(const SynthParams& params, std::vector<std::size_t>* family_of = nullptr);

}  // namespace kitclust
