// kitclust: phishing-kit clustering from browser-API traces.

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "kitclust/annotate.hpp"
#include "kitclust/error.hpp"
#include "kitclust/evaluation.hpp"
#include "kitclust/kits.hpp"
#include "kitclust/pipeline.hpp"
#include "kitclust/profile.hpp"
#include "kitclust/report.hpp"
#include "kitclust/synth.hpp"
#include "kitclust/trace.hpp"

namespace kc = kitclust;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_input(const std::string& path) {
  if (path == "-") return kc::read_lines(std::cin);
  std::ifstream in(path);
  if (!in) throw kc::InputError("cannot open " + path);
  return kc::read_lines(in);
}

template <class F>
auto parse_records(const std::string& path, F parse) {
  std::vector<decltype(parse(std::string_view{}))> out;
  std::size_t line_no = 0;
  for (const auto& line : read_input(path)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(line));
    } catch (const kc::InputError& e) {
      throw kc::InputError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw kc::InputError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_text(const std::string& path, const std::string& text) {
  Output out(path);
  out.stream() << text;
}

std::vector<kc::ApiProfile> sorted_profiles(std::vector<kc::ApiProfile> profiles) {
  std::stable_sort(profiles.begin(), profiles.end(), [](const auto& a, const auto& b) {
    if (a.page_id != b.page_id) return a.page_id < b.page_id;
    return a.features < b.features;
  });
  return profiles;
}

// Duplicate page ids keep the record with the smallest serialization so the
// choice does not depend on input order.
std::vector<kc::ApiProfile> dedup_profiles(const std::vector<kc::ApiProfile>& profiles) {
  std::map<std::string, std::pair<std::string, const kc::ApiProfile*>> best;
  for (const auto& p : profiles) {
    auto text = kc::serialize_profile(p);
    auto [it, fresh] = best.try_emplace(p.page_id, text, &p);
    if (!fresh && text < it->second.first) it->second = {std::move(text), &p};
  }
  std::vector<kc::ApiProfile> out;
  for (const auto& [id, v] : best) out.push_back(*v.second);
  if (out.size() < profiles.size()) spdlog::info("dedup: dropped {} duplicate page ids", profiles.size() - out.size());
  return out;
}

struct FeatureFlags {
  std::string mode = "api-set";
  std::size_t min_apis = 8;
  bool drop_dom = false;
  bool drop_prop_reads = false;
  bool exact_host = false;
  bool keep_cdn_cgi = false;

  void attach(CLI::App* app) {
    app->add_option("--mode", mode, "api-set | script-hash-all | script-hash-first-party | script-hash-no-eval | "
                                    "script-hash-first-party-no-eval")
        ->capture_default_str();
    app->add_option("--min-apis", min_apis, "minimum features per profile")->capture_default_str();
    app->add_flag("--drop-dom", drop_dom, "drop DOM interface tokens");
    app->add_flag("--drop-prop-reads", drop_prop_reads, "drop property get/set tokens");
    app->add_flag("--exact-host", exact_host, "first-party by exact hostname");
    app->add_flag("--keep-cdn-cgi", keep_cdn_cgi, "keep scripts under /cdn-cgi/");
  }

  kc::FeatureConfig config() const {
    kc::FeatureConfig c;
    const auto m = kc::parse_feature_mode(mode);
    if (!m) throw kc::InputError("unknown feature mode '" + mode + "'");
    c.mode = *m;
    c.min_features = min_apis;
    c.drop_dom_apis = drop_dom;
    c.drop_property_reads = drop_prop_reads;
    c.exact_host = exact_host;
    c.exclude_cdn_cgi = !keep_cdn_cgi;
    c.validate();
    return c;
  }
};

std::vector<kc::PageTrace> load_traces(const std::string& path, bool strict) {
  auto result = kc::parse_trace_lines(read_input(path));
  if (strict && !result.rejected.empty()) {
    const auto& r = result.rejected.front();
    throw kc::InputError(path + ":" + std::to_string(r.line_number) + ": " + r.reason);
  }
  if (!result.rejected.empty()) spdlog::warn("{} trace lines rejected", result.rejected.size());
  return std::move(result.pages);
}

std::vector<kc::ApiProfile> load_profiles(const std::string& path) {
  return sorted_profiles(parse_records(path, kc::parse_profile_record));
}

std::set<std::string> json_string_set(const nlohmann::json& j) {
  std::set<std::string> out;
  for (const auto& v : j) out.insert(v.get<std::string>());
  return out;
}

// Cluster technique records written by `annotate --out`.
kc::TechniqueReport load_cluster_techniques(const std::string& path) {
  kc::TechniqueReport r;
  for (const auto& line : read_input(path)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      r.cluster_techniques[j.at("cluster_id").get<std::string>()] = json_string_set(j.at("techniques"));
    } catch (const nlohmann::json::exception& e) {
      throw kc::InputError(path + ": invalid cluster technique record: " + e.what());
    }
  }
  for (const auto& rule : kc::builtin_rules()) r.counts[rule.technique];
  return r;
}

std::vector<std::int64_t> parse_buckets(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw kc::InputError("bad bucket bound '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("kitclust"));
  spdlog::set_level(spdlog::level::info);
  spdlog::cfg::load_env_levels();

  CLI::App app{"Phishing-kit clustering from browser-API execution traces"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "traces -> profiles");
  std::string ingest_in = "-", ingest_out = "-";
  bool ingest_strict = false, ingest_dedup = false;
  FeatureFlags ingest_features;
  ingest->add_option("-i,--in", ingest_in, "trace JSONL ('-' = stdin)");
  ingest->add_option("-o,--out", ingest_out, "profile JSONL ('-' = stdout)");
  ingest->add_flag("--strict", ingest_strict, "fail on the first rejected line");
  ingest->add_flag("--dedup", ingest_dedup, "keep one profile per page id");
  ingest_features.attach(ingest);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "profiles -> local clusters");
  std::string cluster_in, cluster_traces, cluster_out = "-", export_dir, origin_text;
  FeatureFlags cluster_features;
  std::size_t min_cluster_size = 2, max_matrix_mb = 2048;
  std::optional<std::size_t> min_samples;
  std::int64_t window_days = 28, step_days = 14;
  bool cluster_dedup = false;
  auto* cin_opt = cluster->add_option("-i,--in", cluster_in, "profile JSONL");
  auto* ctr_opt = cluster->add_option("--traces", cluster_traces, "trace JSONL (profiles built with --mode)");
  cin_opt->excludes(ctr_opt);
  cluster->add_option("-o,--out", cluster_out, "local cluster JSONL");
  cluster_features.attach(cluster);
  cluster->add_option("--min-cluster-size", min_cluster_size)->capture_default_str();
  cluster->add_option("--min-samples", min_samples, "defaults to --min-cluster-size");
  cluster->add_option("--window-days", window_days)->capture_default_str();
  cluster->add_option("--step-days", step_days)->capture_default_str();
  cluster->add_option("--origin", origin_text, "window origin, YYYY-MM-DDThh:mm:ssZ");
  cluster->add_option("--max-matrix-mb", max_matrix_mb, "per-window distance matrix budget")->capture_default_str();
  cluster->add_option("--export-distances", export_dir, "write each window's matrix as <dir>/window-<id>.kfd");
  cluster->add_flag("--dedup", cluster_dedup, "keep one profile per page id");

  // merge
  auto* merge = app.add_subcommand("merge", "local clusters -> global clusters");
  std::string merge_in = "-", merge_profiles, merge_out = "-", merge_dropped;
  double merge_eps = 0.05;
  std::size_t merge_min_pts = 2, min_shared_apis = 4;
  bool no_page_union = false;
  merge->add_option("-i,--in", merge_in, "local cluster JSONL");
  merge->add_option("--profiles", merge_profiles, "profile JSONL")->required();
  merge->add_option("-o,--out", merge_out, "global cluster JSONL");
  merge->add_option("--eps", merge_eps)->capture_default_str();
  merge->add_option("--min-pts", merge_min_pts)->capture_default_str();
  merge->add_option("--min-shared-apis", min_shared_apis, "malformed-cluster filter")->capture_default_str();
  merge->add_option("--dropped", merge_dropped, "write filtered local clusters here");
  merge->add_flag("--no-page-union", no_page_union, "skip the shared-page union stage");

  // kits dedupe
  auto* kits = app.add_subcommand("kits", "kit archive ground truth");
  kits->require_subcommand(1);
  auto* dedupe = kits->add_subcommand("dedupe", "archives + urls -> kit families");
  std::string archives_path, urls_path, kits_out = "-";
  double kit_threshold = 0.90;
  dedupe->add_option("--archives", archives_path, "archive JSONL")->required();
  dedupe->add_option("--urls", urls_path, "url JSONL");
  dedupe->add_option("--threshold", kit_threshold)->capture_default_str();
  dedupe->add_option("-o,--out", kits_out, "family JSONL");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "technique tagging");
  std::string ann_traces, ann_clusters, ann_rules, ann_out = "-", ann_pages, ann_csv, ann_markers;
  bool replace_rules = false, dump_rules = false, ann_keep_cdn = false, ann_exact = false;
  annotate->add_option("--traces", ann_traces, "trace JSONL");
  annotate->add_option("--clusters", ann_clusters, "global cluster JSONL");
  annotate->add_option("--rules", ann_rules, "rule JSONL; same-named rules override the builtins");
  annotate->add_flag("--replace-rules", replace_rules, "use only the rules file");
  annotate->add_flag("--dump-rules", dump_rules, "print the rulebook and exit");
  annotate->add_option("-o,--out", ann_out, "cluster technique JSONL");
  annotate->add_option("--pages", ann_pages, "page technique JSONL");
  annotate->add_option("--csv", ann_csv, "technique counts CSV");
  annotate->add_option("--markers", ann_markers, "per-marker breakdown CSV");
  annotate->add_flag("--keep-cdn-cgi", ann_keep_cdn);
  annotate->add_flag("--exact-host", ann_exact);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score clusters against kit families");
  std::string ev_profiles, ev_clusters, ev_truth, ev_out = "-";
  bool ev_rebalance = false, ev_silhouette = false;
  std::uint64_t ev_seed = 0;
  kc::EvaluationRun run;
  run.min_features = 8;
  run.window_days = 28;
  run.step_days = 14;
  run.eps = 0.05;
  run.min_cluster_size = 2;
  run.min_shared_apis = 4;
  evaluate->add_option("--profiles", ev_profiles, "profile JSONL")->required();
  evaluate->add_option("--clusters", ev_clusters, "global cluster JSONL")->required();
  evaluate->add_option("--truth", ev_truth, "kit family JSONL")->required();
  evaluate->add_flag("--rebalance", ev_rebalance, "cap the largest family at the second largest");
  evaluate->add_option("--seed", ev_seed)->capture_default_str();
  evaluate->add_flag("--silhouette", ev_silhouette, "also report silhouette over clustered pages");
  evaluate->add_option("-o,--out", ev_out);
  evaluate->add_option("--min-apis", run.min_features, "recorded run parameter")->capture_default_str();
  evaluate->add_option("--window-days", run.window_days, "recorded run parameter")->capture_default_str();
  evaluate->add_option("--step-days", run.step_days, "recorded run parameter")->capture_default_str();
  evaluate->add_option("--eps", run.eps, "recorded run parameter")->capture_default_str();
  evaluate->add_option("--min-cluster-size", run.min_cluster_size, "recorded run parameter")->capture_default_str();
  evaluate->add_option("--min-shared-apis", run.min_shared_apis, "recorded run parameter")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "corpus reports (CSV)");
  std::string rep_clusters, rep_profiles, rep_techniques, rep_brands, rep_out = "-";
  std::string size_buckets = "2,3,5,10,25,100", lifetime_buckets = "0,1,7,30,90,365";
  bool crosstab = false, monthly = false;
  report->add_option("--clusters", rep_clusters, "global cluster JSONL");
  report->add_option("--profiles", rep_profiles, "profile JSONL");
  report->add_option("--techniques", rep_techniques, "cluster technique JSONL from annotate");
  report->add_flag("--crosstab", crosstab, "technique x size/lifetime table (needs --techniques)");
  report->add_option("--brands", rep_brands, "brand baseline JSONL (needs --profiles)");
  report->add_flag("--monthly", monthly, "pages, e2LDs and clusters per calendar month");
  report->add_option("--size-buckets", size_buckets)->capture_default_str();
  report->add_option("--lifetime-buckets", lifetime_buckets)->capture_default_str();
  report->add_option("-o,--out", rep_out);

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic trace corpus with kit labels");
  kc::SynthParams sp;
  std::string synth_out = "-", synth_truth, schedule = "uniform", start_text;
  bool no_noise = false, no_markers = false;
  synth->add_option("--families", sp.n_families)->capture_default_str();
  synth->add_option("--pages", sp.pages_per_family, "pages per family")->capture_default_str();
  synth->add_option("--intra", sp.intra_sim, "target intra-family Jaccard")->capture_default_str();
  synth->add_option("--inter", sp.inter_sim, "target cross-family Jaccard")->capture_default_str();
  synth->add_option("--seed", sp.seed)->capture_default_str();
  synth->add_option("--template-size", sp.template_size)->capture_default_str();
  synth->add_option("--page-noise", sp.page_noise, "page-specific tokens per page")->capture_default_str();
  synth->add_option("--schedule", schedule, "uniform | split-fortnights")->capture_default_str();
  synth->add_option("--span-days", sp.span_days)->capture_default_str();
  synth->add_option("--start", start_text, "first day, YYYY-MM-DDThh:mm:ssZ");
  synth->add_flag("--no-noise", no_noise, "omit third-party and cdn-cgi scripts");
  synth->add_flag("--no-markers", no_markers, "omit per-family technique markers");
  synth->add_option("-o,--out", synth_out, "trace JSONL");
  synth->add_option("--truth-out", synth_truth, "kit family JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*ingest) {
      const auto pages = load_traces(ingest_in, ingest_strict);
      auto profiles = kc::build_profiles(pages, ingest_features.config());
      if (ingest_dedup) profiles = dedup_profiles(profiles);
      profiles = sorted_profiles(std::move(profiles));
      Output out(ingest_out);
      for (const auto& p : profiles) out.stream() << kc::serialize_profile(p) << '\n';
      spdlog::info("ingest: {} pages -> {} profiles", pages.size(), profiles.size());
    } else if (*cluster) {
      const auto config = cluster_features.config();
      std::vector<kc::ApiProfile> profiles;
      if (!cluster_traces.empty()) {
        profiles = kc::build_profiles(load_traces(cluster_traces, false), config);
      } else {
        if (cluster_in.empty()) throw kc::InputError("cluster needs --in or --traces");
        if (config.mode != kc::FeatureMode::api_set) throw kc::InputError("script-hash modes need --traces");
        profiles = kc::refilter_profiles(load_profiles(cluster_in), config);
      }
      if (cluster_dedup) profiles = dedup_profiles(profiles);
      profiles = sorted_profiles(std::move(profiles));

      kc::WindowSpec spec;
      if (window_days <= 0 || step_days <= 0) throw kc::InputError("window and step must be positive");
      spec.width = window_days * kc::kDay;
      spec.step = step_days * kc::kDay;
      if (!origin_text.empty()) spec.origin = kc::parse_utc(origin_text);
      kc::HdbscanParams params;
      params.min_cluster_size = min_cluster_size;
      params.min_samples = min_samples;
      kc::DistanceOptions dopt;
      dopt.max_bytes = max_matrix_mb << 20;
      if (!export_dir.empty()) {
        fs::create_directories(export_dir);
        dopt.on_window = [&](std::int64_t w, const kc::CondensedDistances& d) {
          std::ofstream f(fs::path(export_dir) / ("window-" + std::to_string(w) + ".kfd"), std::ios::binary);
          if (!f) throw kc::InputError("cannot write into " + export_dir);
          kc::write_kfd(f, d);
          std::ofstream ids(fs::path(export_dir) / ("window-" + std::to_string(w) + ".ids"));
          for (const auto& id : d.ids) ids << id << '\n';
        };
      }
      const auto locals = kc::cluster_windows(profiles, spec, params, dopt);
      Output out(cluster_out);
      for (const auto& c : locals) out.stream() << kc::serialize_local_cluster(c) << '\n';
      spdlog::info("cluster: {} profiles -> {} local clusters", profiles.size(), locals.size());
    } else if (*merge) {
      auto locals = parse_records(merge_in, kc::parse_local_cluster);
      std::sort(locals.begin(), locals.end(), [](const auto& a, const auto& b) {
        return std::tie(a.window_id, a.index, a.members) < std::tie(b.window_id, b.index, b.members);
      });
      const auto profiles = load_profiles(merge_profiles);
      if (!(merge_eps > 0.0 && merge_eps <= 1.0)) throw kc::InputError("eps must lie in (0, 1]");
      auto filtered = kc::filter_malformed(std::move(locals), min_shared_apis);
      if (!merge_dropped.empty()) {
        Output d(merge_dropped);
        for (const auto& c : filtered.dropped) d.stream() << kc::serialize_local_cluster(c) << '\n';
      }
      kc::MergeOptions mo;
      mo.eps = merge_eps;
      mo.min_pts = merge_min_pts;
      mo.shared_page_union = !no_page_union;
      const auto globals = kc::merge_clusters(filtered.kept, profiles, mo);
      Output out(merge_out);
      for (const auto& g : globals) out.stream() << kc::serialize_global_cluster(g) << '\n';
      spdlog::info("merge: {} local clusters ({} malformed dropped) -> {} global clusters", filtered.kept.size(),
                   filtered.dropped.size(), globals.size());
      // Pages may sit in several clusters; also report them as unique URLs.
      std::map<std::string, std::size_t> cluster_count;
      std::set<std::string> urls;
      for (const auto& g : globals) {
        for (const auto& m : g.members) {
          ++cluster_count[m];
          urls.insert(kc::split_page_id(m).first);
        }
      }
      const auto multi = std::count_if(cluster_count.begin(), cluster_count.end(), [](const auto& kv) { return kv.second > 1; });
      spdlog::info("merge: {} clustered pages ({} in several clusters), {} unique URLs", cluster_count.size(), multi,
                   urls.size());
    } else if (*dedupe) {
      const auto archives = parse_records(archives_path, kc::parse_archive_record);
      kc::FamilyOptions fo;
      fo.threshold = kit_threshold;
      auto families = kc::group_families(archives, fo);
      if (!urls_path.empty()) {
        const auto records = parse_records(urls_path, kc::parse_url_record);
        kc::UrlMappingStats stats;
        families = kc::map_urls(std::move(families), archives, records, &stats);
        spdlog::info("urls: {} attached, {} dropped (multi-archive domain), {} without family", stats.attached,
                     stats.discarded_multi_archive_domain, stats.discarded_no_family);
      }
      Output out(kits_out);
      for (const auto& f : families) out.stream() << kc::serialize_family(f) << '\n';
      spdlog::info("kits: {} archives -> {} families", archives.size(), families.size());
    } else if (*annotate) {
      std::vector<kc::TechniqueRule> rules = replace_rules ? std::vector<kc::TechniqueRule>{} : kc::builtin_rules();
      if (!ann_rules.empty()) rules = kc::merge_rules(std::move(rules), parse_records(ann_rules, kc::parse_rule_record));
      if (rules.empty()) throw kc::InputError("no rules");
      if (dump_rules) {
        Output out(ann_out);
        for (const auto& r : rules) out.stream() << kc::serialize_rule(r) << '\n';
        return 0;
      }
      if (ann_traces.empty()) throw kc::InputError("annotate needs --traces");
      const auto pages = load_traces(ann_traces, false);
      kc::AnnotateOptions ao;
      ao.exclude_cdn_cgi = !ann_keep_cdn;
      ao.exact_host = ann_exact;
      const auto annotations = kc::annotate_pages(pages, rules, ao);
      if (!ann_pages.empty()) {
        std::map<std::string, std::uint32_t> depth;
        for (const auto& p : pages) {
          auto& d = depth[p.page_id()];
          d = std::max(d, kc::max_eval_depth(p));
        }
        Output out(ann_pages);
        for (const auto& [id, a] : annotations) {
          nlohmann::ordered_json j;
          j["page_id"] = id;
          j["techniques"] = a.techniques;
          j["max_eval_depth"] = depth[id];
          out.stream() << j.dump() << '\n';
        }
      }
      std::vector<kc::GlobalCluster> clusters;
      if (!ann_clusters.empty()) clusters = parse_records(ann_clusters, kc::parse_global_cluster);
      std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });
      const auto report = kc::annotate_clusters(clusters, annotations, rules);
      if (!ann_clusters.empty()) {
        Output out(ann_out);
        for (const auto& [id, ts] : report.cluster_techniques) {
          nlohmann::ordered_json j;
          j["cluster_id"] = id;
          j["techniques"] = ts;
          out.stream() << j.dump() << '\n';
        }
      }
      if (!ann_csv.empty()) write_text(ann_csv, kc::technique_report_csv(report));
      if (!ann_markers.empty()) write_text(ann_markers, kc::marker_breakdown_csv(report));
      spdlog::info("annotate: {} pages, {} clusters, {} rules", annotations.size(), clusters.size(), rules.size());
    } else if (*evaluate) {
      const auto profiles = load_profiles(ev_profiles);
      const auto clusters = parse_records(ev_clusters, kc::parse_global_cluster);
      const auto truth = parse_records(ev_truth, kc::parse_family_record);
      auto items = kc::label_items(profiles, clusters, truth);
      if (items.page_ids.size() < 2) throw kc::InputError("fewer than two labeled pages to evaluate");
      if (ev_rebalance) {
        const auto keep_ids = kc::rebalance(items.family, items.page_ids, ev_seed);
        const std::set<std::string> keep(keep_ids.begin(), keep_ids.end());
        kc::LabeledItems kept;
        for (std::size_t i = 0; i < items.page_ids.size(); ++i) {
          if (!keep.contains(items.page_ids[i])) continue;
          kept.page_ids.push_back(items.page_ids[i]);
          kept.family.push_back(items.family[i]);
          kept.cluster.push_back(items.cluster[i]);
        }
        items = std::move(kept);
      }
      run.rebalanced = ev_rebalance;
      run.seed = ev_seed;
      const auto e = kc::evaluate_items(items);
      auto record = nlohmann::ordered_json::parse(kc::serialize_evaluation(e, run));
      if (ev_silhouette) {
        std::map<std::string, const kc::ApiProfile*> by_id;
        for (const auto& p : profiles) by_id[p.page_id] = &p;
        std::vector<kc::ApiProfile> members;
        std::vector<int> labels;
        std::set<std::string> seen;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
          for (const auto& m : clusters[c].members) {
            const auto it = by_id.find(m);
            if (it == by_id.end() || !seen.insert(m).second) continue;
            members.push_back(*it->second);
            labels.push_back(static_cast<int>(c));
          }
        }
        const auto d = kc::pairwise_distances(members);
        kc::ClusteringResult r;
        r.labels = labels;
        r.n_clusters = static_cast<int>(clusters.size());
        record["silhouette"] = kc::silhouette(d, r);
      }
      Output out(ev_out);
      out.stream() << record.dump() << '\n';
    } else if (*report) {
      std::vector<kc::GlobalCluster> clusters;
      if (!rep_clusters.empty()) clusters = parse_records(rep_clusters, kc::parse_global_cluster);
      std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.cluster_id < b.cluster_id; });
      std::vector<kc::ApiProfile> profiles;
      if (!rep_profiles.empty()) profiles = load_profiles(rep_profiles);
      std::optional<kc::TechniqueReport> techniques;
      if (!rep_techniques.empty()) techniques = load_cluster_techniques(rep_techniques);

      Output out(rep_out);
      bool any = false;
      if (crosstab) {
        if (!techniques) throw kc::InputError("--crosstab needs --techniques");
        if (clusters.empty()) throw kc::InputError("--crosstab needs a non-empty --clusters");
        const auto sizes = parse_buckets(size_buckets);
        const auto lifetimes = parse_buckets(lifetime_buckets);
        out.stream() << kc::crosstab_csv(kc::technique_crosstab(clusters, *techniques, sizes, kc::CrosstabAxis::size));
        out.stream() << '\n';
        out.stream() << kc::crosstab_csv(
            kc::technique_crosstab(clusters, *techniques, lifetimes, kc::CrosstabAxis::lifetime));
        any = true;
      }
      if (!rep_brands.empty()) {
        if (profiles.empty()) throw kc::InputError("--brands needs --profiles");
        const auto baselines = parse_records(rep_brands, kc::parse_brand_baseline);
        if (any) out.stream() << '\n';
        const auto rows = kc::brand_report(profiles, baselines);
        out.stream() << kc::brand_report_csv(rows);
        any = true;
      }
      if (monthly) {
        if (profiles.empty()) throw kc::InputError("--monthly needs --profiles");
        if (any) out.stream() << '\n';
        const auto rows = kc::monthly_report(profiles, clusters);
        out.stream() << kc::monthly_report_csv(rows);
        any = true;
      }
      if (!any) {
        if (clusters.empty() && rep_clusters.empty()) throw kc::InputError("report needs --clusters or a report flag");
        out.stream() << kc::cluster_stats_csv(clusters, techniques ? &*techniques : nullptr);
      }
    } else if (*synth) {
      const auto s = kc::parse_schedule(schedule);
      if (!s) throw kc::InputError("unknown schedule '" + schedule + "'");
      sp.schedule = *s;
      sp.third_party_noise = !no_noise;
      sp.technique_markers = !no_markers;
      if (!start_text.empty()) sp.start = kc::midnight(kc::parse_utc(start_text));
      const auto plan = kc::plan_synth(sp);
      const auto corpus = kc::synth_corpus(sp);
      {
        Output out(synth_out);
        for (const auto& p : corpus.pages) out.stream() << kc::serialize_trace(p) << '\n';
      }
      if (!synth_truth.empty()) {
        Output out(synth_truth);
        for (const auto& f : corpus.truth) out.stream() << kc::serialize_family(f) << '\n';
      }
      spdlog::info("synth: {} pages, {} families, template {} = {} shared + {} own, keep probability {:.4f}",
                   corpus.pages.size(), corpus.truth.size(), sp.template_size, plan.core, plan.unique,
                   plan.keep_prob);
    }
  } catch (const kc::InfeasibleError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const kc::InputError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
