#include "kitclust/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <json.hpp>
#include <set>
#include <unordered_map>

#include "kitclust/error.hpp"
#include "kitclust/hash.hpp"
#include "kitclust/union_find.hpp"

namespace kitclust {

void WindowSpec::validate() const {
  if (step.count() <= 0 || step > width) throw InputError("window spec requires 0 < step <= width");
}

Timestamp window_origin(std::span<const ApiProfile> profiles, const WindowSpec& spec) {
  if (spec.origin) return *spec.origin;
  if (profiles.empty()) throw InputError("window origin: no profiles");
  const auto earliest = std::min_element(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) {
                          return a.observed_at < b.observed_at;
                        })->observed_at;
  return midnight(earliest);
}

std::vector<std::int64_t> windows_containing(Timestamp t, Timestamp origin, const WindowSpec& spec) {
  std::vector<std::int64_t> out;
  if (t < origin) return out;
  const std::int64_t s = (t - origin).count();
  const std::int64_t width = spec.width.count();
  const std::int64_t step = spec.step.count();
  const std::int64_t last = s / step;
  const std::int64_t first = s < width ? 0 : (s - width) / step + 1;
  for (std::int64_t w = first; w <= last; ++w) out.push_back(w);
  return out;
}

std::map<std::int64_t, std::vector<std::size_t>> assign_windows(std::span<const ApiProfile> profiles,
                                                                const WindowSpec& spec) {
  spec.validate();
  std::map<std::int64_t, std::vector<std::size_t>> windows;
  if (profiles.empty()) return windows;
  const Timestamp origin = window_origin(profiles, spec);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (const auto w : windows_containing(profiles[i].observed_at, origin, spec)) windows[w].push_back(i);
  }
  return windows;
}

std::string LocalCluster::id() const {
  return "w" + std::to_string(window_id) + "-c" + std::to_string(index);
}

namespace {

IdSet intersect_ids(const IdSet& a, const IdSet& b) {
  IdSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::string> to_tokens(const IdSet& ids, const TokenInterner& interner) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(interner.token(id));
  std::sort(out.begin(), out.end());
  return out;
}

// Shared by cluster_window and cluster_windows; `sets` are aligned with
// `profiles` and interned in `interner`.
std::vector<LocalCluster> cluster_sets(std::span<const ApiProfile* const> profiles, std::span<const IdSet> sets,
                                       const TokenInterner& interner, std::int64_t window_id,
                                       const HdbscanParams& params, DistanceOptions distances) {
  std::vector<std::string> ids;
  ids.reserve(profiles.size());
  for (const auto* p : profiles) ids.push_back(p->page_id);
  distances.label = "window " + std::to_string(window_id);
  const CondensedDistances d = pairwise_distances(sets, std::move(ids), distances);
  if (distances.on_window) distances.on_window(window_id, d);
  const ClusteringResult result = hdbscan(d, params);

  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(result.n_clusters));
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    if (result.labels[i] != kNoise) groups[static_cast<std::size_t>(result.labels[i])].push_back(i);
  }
  std::vector<LocalCluster> out;
  out.reserve(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    LocalCluster lc;
    lc.window_id = window_id;
    lc.index = k;
    IdSet rep = sets[groups[k].front()];
    for (const auto i : groups[k]) {
      lc.members.push_back(profiles[i]->page_id);
      rep = intersect_ids(rep, sets[i]);
    }
    std::sort(lc.members.begin(), lc.members.end());
    lc.representative = to_tokens(rep, interner);
    out.push_back(std::move(lc));
  }
  return out;
}

}  // namespace

std::vector<LocalCluster> cluster_window(std::span<const ApiProfile> profiles, std::int64_t window_id,
                                         const HdbscanParams& params, const DistanceOptions& distances) {
  TokenInterner interner;
  std::vector<IdSet> sets;
  std::vector<const ApiProfile*> ptrs;
  for (const auto& p : profiles) {
    sets.push_back(interner.to_ids(p.features));
    ptrs.push_back(&p);
  }
  return cluster_sets(ptrs, sets, interner, window_id, params, distances);
}

std::vector<LocalCluster> cluster_windows(std::span<const ApiProfile> profiles, const WindowSpec& spec,
                                          const HdbscanParams& params, const DistanceOptions& distances) {
  params.validate();
  std::vector<LocalCluster> out;
  if (profiles.empty()) return out;
  TokenInterner interner;
  std::vector<IdSet> all_sets;
  all_sets.reserve(profiles.size());
  for (const auto& p : profiles) all_sets.push_back(interner.to_ids(p.features));

  for (const auto& [window_id, members] : assign_windows(profiles, spec)) {
    std::vector<IdSet> sets;
    std::vector<const ApiProfile*> ptrs;
    sets.reserve(members.size());
    ptrs.reserve(members.size());
    for (const auto i : members) {
      sets.push_back(all_sets[i]);
      ptrs.push_back(&profiles[i]);
    }
    auto clusters = cluster_sets(ptrs, sets, interner, window_id, params, distances);
    spdlog::debug("window {}: {} profiles, {} local clusters", window_id, members.size(), clusters.size());
    out.insert(out.end(), std::make_move_iterator(clusters.begin()), std::make_move_iterator(clusters.end()));
  }
  return out;
}

FilterResult filter_malformed(std::vector<LocalCluster> clusters, std::size_t min_shared) {
  FilterResult r;
  for (auto& c : clusters) {
    (c.representative.size() < min_shared ? r.dropped : r.kept).push_back(std::move(c));
  }
  return r;
}

std::string representative_digest(std::span<const std::string> representative) {
  std::string joined;
  for (std::size_t i = 0; i < representative.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += representative[i];
  }
  return sha256_hex(joined);
}

namespace {

struct Group {
  std::set<std::string> members;
  std::set<std::string> sources;
  std::vector<std::string> representative;
};

Group combine(std::span<const Group* const> parts) {
  Group g;
  g.representative = parts.front()->representative;
  for (const auto* p : parts) {
    g.members.insert(p->members.begin(), p->members.end());
    g.sources.insert(p->sources.begin(), p->sources.end());
    g.representative = set_intersection(g.representative, p->representative);
  }
  return g;
}

void assign_ids(std::vector<GlobalCluster>& clusters) {
  std::map<std::string, std::vector<std::size_t>> by_short;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto digest = representative_digest(clusters[i].representative);
    clusters[i].cluster_id = digest.substr(0, 8);
    by_short[clusters[i].cluster_id].push_back(i);
  }
  for (const auto& [id, idx] : by_short) {
    if (idx.size() < 2) continue;
    std::set<std::string> reps;
    for (auto i : idx) reps.insert(representative_digest(clusters[i].representative));
    for (auto i : idx) {
      auto digest = representative_digest(clusters[i].representative);
      if (reps.size() < idx.size()) {
        // Identical representatives: the member list disambiguates.
        std::string keyed = digest;
        for (const auto& m : clusters[i].members) keyed += "\n" + m;
        digest = sha256_hex(keyed);
      }
      clusters[i].cluster_id = digest.substr(0, 16);
    }
  }
}

}  // namespace

std::vector<GlobalCluster> merge_clusters(std::span<const LocalCluster> locals, std::span<const ApiProfile> profiles,
                                          const MergeOptions& options) {
  std::unordered_map<std::string, const ApiProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.page_id, &p);

  // Stage 1: local clusters sharing any page collapse into one union.
  UnionFind uf(locals.size());
  if (options.shared_page_union) {
    std::unordered_map<std::string, std::size_t> first_owner;
    for (std::size_t i = 0; i < locals.size(); ++i) {
      for (const auto& m : locals[i].members) {
        const auto [it, inserted] = first_owner.try_emplace(m, i);
        if (!inserted) uf.unite(it->second, i);
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> union_parts;  // keyed by smallest local index
  {
    std::unordered_map<std::size_t, std::size_t> root_to_first;
    for (std::size_t i = 0; i < locals.size(); ++i) {
      const auto [it, inserted] = root_to_first.try_emplace(uf.find(i), i);
      union_parts[it->second].push_back(i);
    }
  }
  std::vector<Group> unions;
  unions.reserve(union_parts.size());
  for (const auto& [first, parts] : union_parts) {
    Group g;
    g.representative = locals[parts.front()].representative;
    for (auto i : parts) {
      g.members.insert(locals[i].members.begin(), locals[i].members.end());
      g.sources.insert(locals[i].id());
      g.representative = set_intersection(g.representative, locals[i].representative);
    }
    unions.push_back(std::move(g));
  }

  // Stage 2: DBSCAN over union representatives; noise stays standalone.
  std::vector<std::vector<const Group*>> merged;
  if (!unions.empty()) {
    TokenInterner interner;
    std::vector<IdSet> sets;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < unions.size(); ++i) {
      sets.push_back(interner.to_ids(unions[i].representative));
      ids.push_back(std::to_string(i));
    }
    DistanceOptions opts;
    opts.label = "representative merge";
    const auto d = pairwise_distances(sets, std::move(ids), opts);
    const auto result = dbscan(d, options.eps, options.min_pts);
    merged.resize(static_cast<std::size_t>(result.n_clusters));
    for (std::size_t i = 0; i < unions.size(); ++i) {
      if (result.labels[i] == kNoise) {
        merged.push_back({&unions[i]});
      } else {
        merged[static_cast<std::size_t>(result.labels[i])].push_back(&unions[i]);
      }
    }
  }

  std::vector<GlobalCluster> out;
  out.reserve(merged.size());
  for (const auto& parts : merged) {
    const Group g = combine(parts);
    GlobalCluster gc;
    gc.members.assign(g.members.begin(), g.members.end());
    gc.representative = g.representative;
    gc.source_local_cluster_ids.assign(g.sources.begin(), g.sources.end());
    std::set<std::string> e2lds, brands;
    bool first = true;
    for (const auto& m : gc.members) {
      const auto it = by_id.find(m);
      if (it == by_id.end()) throw InputError("merge: no profile for member page '" + m + "'");
      const ApiProfile& p = *it->second;
      if (first || p.observed_at < gc.first_seen) gc.first_seen = p.observed_at;
      if (first || p.observed_at > gc.last_seen) gc.last_seen = p.observed_at;
      first = false;
      e2lds.insert(p.e2ld);
      brands.insert(p.brand_labels.begin(), p.brand_labels.end());
    }
    gc.e2lds.assign(e2lds.begin(), e2lds.end());
    gc.brand_labels.assign(brands.begin(), brands.end());
    out.push_back(std::move(gc));
  }
  assign_ids(out);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });
  return out;
}

std::string serialize_local_cluster(const LocalCluster& c) {
  nlohmann::ordered_json j;
  j["local_id"] = c.id();
  j["window_id"] = c.window_id;
  j["index"] = c.index;
  j["pages"] = c.members;
  j["representative"] = c.representative;
  return j.dump();
}

LocalCluster parse_local_cluster(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    LocalCluster c;
    c.window_id = j.at("window_id").get<std::int64_t>();
    c.index = j.at("index").get<std::size_t>();
    c.members = j.at("pages").get<std::vector<std::string>>();
    c.representative = j.at("representative").get<std::vector<std::string>>();
    std::sort(c.members.begin(), c.members.end());
    std::sort(c.representative.begin(), c.representative.end());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid local cluster record: ") + e.what());
  }
}

std::string serialize_global_cluster(const GlobalCluster& c) {
  nlohmann::ordered_json j;
  j["cluster_id"] = c.cluster_id;
  j["pages"] = c.members;
  j["representative"] = c.representative;
  j["first_seen"] = format_utc(c.first_seen);
  j["last_seen"] = format_utc(c.last_seen);
  j["e2lds"] = c.e2lds;
  j["brands"] = c.brand_labels;
  j["sources"] = c.source_local_cluster_ids;
  return j.dump();
}

GlobalCluster parse_global_cluster(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    GlobalCluster c;
    c.cluster_id = j.at("cluster_id").get<std::string>();
    c.members = j.at("pages").get<std::vector<std::string>>();
    c.representative = j.at("representative").get<std::vector<std::string>>();
    c.first_seen = parse_utc(j.at("first_seen").get<std::string>());
    c.last_seen = parse_utc(j.at("last_seen").get<std::string>());
    c.e2lds = j.value("e2lds", std::vector<std::string>{});
    c.brand_labels = j.value("brands", std::vector<std::string>{});
    c.source_local_cluster_ids = j.value("sources", std::vector<std::string>{});
    if (c.first_seen > c.last_seen) throw InputError("cluster " + c.cluster_id + ": first_seen after last_seen");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid global cluster record: ") + e.what());
  }
}

PipelineResult run_pipeline(std::span<const ApiProfile> profiles, const PipelineOptions& options) {
  PipelineResult r;
  auto locals = cluster_windows(profiles, options.window, options.hdbscan, options.distances);
  auto filtered = filter_malformed(std::move(locals), options.min_shared_apis);
  if (!filtered.dropped.empty()) {
    spdlog::info("dropped {} malformed local clusters (< {} shared APIs)", filtered.dropped.size(),
                 options.min_shared_apis);
  }
  r.global_clusters = merge_clusters(filtered.kept, profiles, options.merge);
  r.local_clusters = std::move(filtered.kept);
  r.dropped = std::move(filtered.dropped);
  return r;
}

}  // namespace kitclust
