#include "kitclust/synth.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <random>

#include "kitclust/domain.hpp"
#include "kitclust/error.hpp"
#include "kitclust/hash.hpp"

namespace kitclust {

std::optional<SynthSchedule> parse_schedule(std::string_view text) {
  if (text == "uniform") return SynthSchedule::uniform;
  if (text == "split-fortnights" || text == "split_fortnights") return SynthSchedule::split_fortnights;
  return std::nullopt;
}

std::string_view to_string(SynthSchedule s) {
  return s == SynthSchedule::uniform ? "uniform" : "split-fortnights";
}

SynthPlan plan_synth(const SynthParams& params) {
  const double intra = params.intra_sim, inter = params.inter_sim;
  if (!(intra >= 0.0 && intra <= 1.0 && inter >= 0.0 && inter <= 1.0)) {
    throw InputError("similarities must lie in [0, 1]");
  }
  if (params.n_families == 0 || params.pages_per_family == 0) throw InputError("family and page counts must be positive");
  if (params.template_size < 2) throw InputError("template size must be at least 2");
  if (params.span_days <= 0) throw InputError("span must be positive");
  if (params.schedule == SynthSchedule::split_fortnights && params.pages_per_family < 3) {
    throw InputError("split-fortnights needs at least 3 pages per family");
  }

  SynthPlan plan;
  const double m = static_cast<double>(params.template_size);
  plan.page_noise = intra >= 1.0 ? 0 : params.page_noise;
  const double e = static_cast<double>(plan.page_noise);
  if (intra <= 0.0 || inter >= intra) {
    throw InfeasibleError(fmt::format("infeasible similarity pair intra={} inter={}: inter must stay below intra",
                                      intra, inter));
  }
  // q solves m(1+s) q^2 - 2smq - 2se = 0
  const double q = (2.0 * intra * m + std::sqrt(4.0 * intra * intra * m * m + 8.0 * intra * e * m * (1.0 + intra))) /
                   (2.0 * m * (1.0 + intra));
  if (q > 1.0 + 1e-12) {
    const double min_m = 2.0 * e * intra / (1.0 - intra);
    throw InfeasibleError(fmt::format(
        "infeasible intra={} with template size {} and {} page-specific tokens: needs a template of at least {} tokens",
        intra, params.template_size, plan.page_noise, static_cast<std::size_t>(std::ceil(min_m))));
  }
  plan.keep_prob = std::min(q, 1.0);
  const double qq = plan.keep_prob;
  const double c_max = m - 1.0;
  plan.max_inter = qq * qq * c_max / (2.0 * qq * m + 2.0 * e - qq * qq * c_max);
  if (inter > plan.max_inter + 1e-12) {
    throw InfeasibleError(fmt::format("infeasible inter={} with template size {}: feasible inter range is [0, {:.4f}]",
                                      inter, params.template_size, plan.max_inter));
  }
  const double core = inter * (2.0 * qq * m + 2.0 * e) / (qq * qq * (1.0 + inter));
  plan.core = std::min(params.template_size - 1, static_cast<std::size_t>(std::llround(core)));
  plan.unique = params.template_size - plan.core;
  return plan;
}

namespace {

const std::vector<std::string>& common_tokens() {
  static const std::vector<std::string> tokens = [] {
    std::vector<std::string> t{
        "call:HTMLDocument.getElementById",    "call:HTMLDocument.querySelector",
        "call:HTMLDocument.querySelectorAll",  "call:HTMLDocument.createElement",
        "call:Element.setAttribute",           "call:Element.getAttribute",
        "call:Node.appendChild",               "call:Node.removeChild",
        "get:Node.parentNode",                 "call:EventTarget.addEventListener",
        "get:HTMLInputElement.value",          "set:HTMLInputElement.value",
        "get:HTMLElement.style",               "set:HTMLElement.innerText",
        "call:Element.getBoundingClientRect",  "get:HTMLDocument.readyState",
        "get:Window.location",                 "get:Location.href",
        "set:Location.href",                   "call:Window.setTimeout",
        "call:Window.clearTimeout",            "call:Window.setInterval",
        "call:Window.requestAnimationFrame",   "call:Storage.getItem",
        "call:Storage.setItem",                "get:Window.localStorage",
        "get:Window.sessionStorage",           "call:JSON.parse",
        "call:JSON.stringify",                 "call:FormData.append",
        "construct:FormData.constructor",      "call:HTMLFormElement.reset",
        "get:HTMLFormElement.elements",        "call:Element.closest",
        "get:Element.classList",               "call:DOMTokenList.add",
        "call:DOMTokenList.remove",            "call:DOMTokenList.contains",
        "get:HTMLElement.dataset",             "call:HTMLElement.focus",
        "call:HTMLElement.blur",               "get:Window.history",
        "call:History.replaceState",           "call:URLSearchParams.get",
        "construct:URLSearchParams.constructor", "call:Promise.then",
    };
    for (int k = 0; t.size() < 512; ++k) t.push_back(fmt::format("call:SharedLib.fn{}", k));
    return t;
  }();
  return tokens;
}

std::string family_token(std::size_t f, std::size_t k) { return fmt::format("call:Kit{}Module.fn{}", f, k); }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const auto x = rng();
    if (x < limit) return x % bound;
  }
}

struct GeneratedPage {
  std::size_t family = 0;
  std::size_t index = 0;
  std::string url;
  Timestamp observed_at{};
  std::string brand;
  std::vector<std::string> core;
  std::vector<std::string> unique;
  std::vector<std::pair<std::string, std::string>> markers;  // token, arg0
};

// A few technique markers per family so annotation has something to find.
std::vector<std::pair<std::string, std::string>> family_markers(std::size_t f) {
  std::vector<std::pair<std::string, std::string>> m;
  if (f % 3 == 0) m.emplace_back("call:Window.atob", "");
  if (f % 4 == 1) m.emplace_back("call:Window.eval", "");
  if (f % 5 == 2) m.emplace_back("get:Navigator.userAgent", "");
  if (f % 6 == 3) {
    m.emplace_back("call:Performance.now", "");
    m.emplace_back("call:Window.setTimeout", "");
  }
  if (f % 7 == 4) m.emplace_back("call:Window.fetch", "https://api.ipify.org/?format=json");
  if (f % 11 == 5) m.emplace_back("call:Geolocation.getCurrentPosition", "");
  return m;
}

std::string page_url(std::size_t f, std::size_t p) {
  if (p % 4 == 0) return fmt::format("https://f{}-p{}.pages.dev/login", f, p);
  return fmt::format("https://secure-f{}-p{}.deploy{}.com/signin", f, p, f % 7);
}

void generate(const SynthParams& params, const SynthPlan& plan, const std::function<void(GeneratedPage&&)>& emit) {
  if (plan.core > common_tokens().size()) throw InfeasibleError("template core exceeds the common vocabulary");
  std::mt19937_64 rng(params.seed);
  const std::int64_t fortnight = 14 * kDay.count();
  for (std::size_t f = 0; f < params.n_families; ++f) {
    const std::size_t a = f % 3;
    const std::size_t first_half = (params.pages_per_family - 1) / 2;
    for (std::size_t p = 0; p < params.pages_per_family; ++p) {
      GeneratedPage g;
      g.family = f;
      g.index = p;
      g.url = page_url(f, p);
      g.brand = fmt::format("brand{}", f % 12);
      std::int64_t offset = 0;
      if (params.schedule == SynthSchedule::uniform) {
        offset = static_cast<std::int64_t>(draw(rng, static_cast<std::uint64_t>(params.span_days * kDay.count())));
      } else {
        // bridge page sits mid-fortnight so it lands in both overlapping windows
        std::size_t slot = a;
        if (p == first_half) slot = a + 1;
        else if (p > first_half) slot = a + 2;
        const auto within = p == first_half
                                ? 3 * kDay.count() + static_cast<std::int64_t>(draw(rng, 7 * kDay.count()))
                                : static_cast<std::int64_t>(draw(rng, static_cast<std::uint64_t>(fortnight)));
        offset = static_cast<std::int64_t>(slot) * fortnight + within;
      }
      if (f == 0 && p == 0) offset = 3600;  // pins the window origin to `start`
      g.observed_at = params.start + std::chrono::seconds{offset};

      for (std::size_t k = 0; k < plan.core; ++k) {
        if (unit(rng) < plan.keep_prob) g.core.push_back(common_tokens()[k]);
      }
      for (std::size_t k = 0; k < plan.unique; ++k) {
        if (unit(rng) < plan.keep_prob) g.unique.push_back(family_token(f, k));
      }
      if (params.technique_markers) g.markers = family_markers(f);
      for (std::size_t k = 0; k < plan.page_noise; ++k) g.unique.push_back(fmt::format("get:Window.v{}x{}x{}", f, p, k));
      if (g.core.empty() && g.unique.empty()) g.unique.push_back(family_token(f, 0));
      emit(std::move(g));
    }
  }
}

ScriptTrace make_script(std::string url, std::string_view tag, const std::vector<std::string>& tokens,
                        const std::vector<std::string>& args = {}) {
  ScriptTrace s;
  s.script_url = std::move(url);
  std::string content(tag);
  for (const auto& t : tokens) {
    content.push_back('\n');
    content += t;
    const auto colon = t.find(':');
    ApiEvent ev;
    ev.kind = *parse_access_kind(std::string_view(t).substr(0, colon));
    ev.name = t.substr(colon + 1);
    if (const auto i = s.events.size(); i < args.size() && !args[i].empty()) ev.arg0 = args[i];
    s.events.push_back(std::move(ev));
  }
  s.sha256 = sha256_hex(content);
  return s;
}

std::string host_of(const std::string& url) { return parse_url(url)->host; }

}  // namespace

SynthCorpus synth_corpus(const SynthParams& params) {
  const auto plan = plan_synth(params);
  SynthCorpus corpus;
  std::vector<std::vector<std::string>> urls(params.n_families);
  generate(params, plan, [&](GeneratedPage&& g) {
    PageTrace page;
    page.page_url = g.url;
    page.root_domain = host_of(g.url);
    page.observed_at = g.observed_at;
    page.brand_labels.insert(g.brand);
    const auto origin = "https://" + page.root_domain;
    if (!g.core.empty()) page.scripts.push_back(make_script(std::string(kInlineScript), "inline", g.core));
    if (!g.unique.empty()) {
      page.scripts.push_back(make_script(origin + "/assets/app.js", fmt::format("kit{}", g.family), g.unique));
    }
    if (!g.markers.empty()) {
      std::vector<std::string> tokens, args;
      for (const auto& [t, a] : g.markers) {
        tokens.push_back(t);
        args.push_back(a);
      }
      page.scripts.push_back(make_script(origin + "/assets/guard.js", "guard", tokens, args));
    }
    if (params.third_party_noise) {
      page.scripts.push_back(make_script("https://www.google-analytics.com/analytics.js", "ga",
                                         {"get:Navigator.userAgent", "get:HTMLDocument.cookie", "get:Screen.width",
                                          "call:Navigator.sendBeacon", "call:Window.fetch"}));
      page.scripts.push_back(make_script(origin + "/cdn-cgi/challenge-platform/scripts/jsd/main.js", "cf",
                                         {"call:Performance.now", "call:Crypto.getRandomValues"}));
    }
    urls[g.family].push_back(g.url);
    corpus.family_of.push_back(g.family);
    corpus.pages.push_back(std::move(page));
  });
  for (std::size_t f = 0; f < params.n_families; ++f) {
    KitFamily fam;
    fam.family_id = sha256_hex(fmt::format("synthetic family {}", f)).substr(0, 12);
    fam.member_archive_ids = {fmt::format("synth-archive-{}", f)};
    std::sort(urls[f].begin(), urls[f].end());
    fam.deployed_urls = std::move(urls[f]);
    corpus.truth.push_back(std::move(fam));
  }
  std::sort(corpus.truth.begin(), corpus.truth.end(),
            [](const auto& x, const auto& y) { return x.family_id < y.family_id; });
  spdlog::debug("synth: {} pages, core {} unique {} keep {:.4f}", corpus.pages.size(), plan.core, plan.unique,
                plan.keep_prob);
  return corpus;
}

std::vector<ApiProfile> synth_profiles(const SynthParams& params, std::vector<std::size_t>* family_of) {
  const auto plan = plan_synth(params);
  std::vector<std::pair<ApiProfile, std::size_t>> out;
  out.reserve(params.n_families * params.pages_per_family);
  generate(params, plan, [&](GeneratedPage&& g) {
    ApiProfile p;
    p.page_url = g.url;
    p.observed_at = g.observed_at;
    p.page_id = g.url + "@" + format_utc(g.observed_at);
    p.e2ld = e2ld_of(host_of(g.url));
    p.brand_labels = {g.brand};
    p.features = std::move(g.core);
    for (const auto& [t, a] : g.markers) p.features.push_back(t);
    p.features.insert(p.features.end(), std::make_move_iterator(g.unique.begin()),
                      std::make_move_iterator(g.unique.end()));
    std::sort(p.features.begin(), p.features.end());
    p.features.erase(std::unique(p.features.begin(), p.features.end()), p.features.end());
    out.emplace_back(std::move(p), g.family);
  });
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first.page_id < y.first.page_id; });
  std::vector<ApiProfile> profiles;
  profiles.reserve(out.size());
  if (family_of) family_of->clear();
  for (auto& [p, f] : out) {
    profiles.push_back(std::move(p));
    if (family_of) family_of->push_back(f);
  }
  return profiles;
}

}  // namespace kitclust
