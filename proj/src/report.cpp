#include "kitclust/report.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "kitclust/error.hpp"
#include "kitclust/set_metrics.hpp"

namespace kitclust {

BrandSimilarity brand_similarity(std::span<const std::string> profile_features, const BrandBaseline& baseline) {
  if (baseline.features.empty()) throw InputError("brand baseline '" + baseline.brand + "' has no features");
  std::vector<std::string> p(profile_features.begin(), profile_features.end());
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  const auto common = set_intersection(p, baseline.features).size();
  BrandSimilarity s;
  s.jaccard = jaccard_index(std::span<const std::string>(p), std::span<const std::string>(baseline.features));
  s.coverage = static_cast<double>(common) / static_cast<double>(baseline.features.size());
  s.perfect_subset = common == baseline.features.size();
  return s;
}

BrandBaseline parse_brand_baseline(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    BrandBaseline b;
    b.brand = j.at("brand").get<std::string>();
    b.features = j.at("features").get<std::vector<std::string>>();
    std::sort(b.features.begin(), b.features.end());
    b.features.erase(std::unique(b.features.begin(), b.features.end()), b.features.end());
    if (b.features.empty()) throw InputError("brand baseline '" + b.brand + "' has no features");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid brand baseline: ") + e.what());
  }
}

std::vector<BrandRow> brand_report(std::span<const ApiProfile> profiles, std::span<const BrandBaseline> baselines) {
  std::map<std::string, const BrandBaseline*> by_brand;
  for (const auto& b : baselines) by_brand[b.brand] = &b;
  std::map<std::string, BrandRow> rows;
  for (const auto& p : profiles) {
    for (const auto& brand : p.brand_labels) {
      const auto it = by_brand.find(brand);
      if (it == by_brand.end()) continue;
      const auto s = brand_similarity(p.features, *it->second);
      auto& r = rows[brand];
      r.brand = brand;
      ++r.pages;
      r.avg_jaccard += s.jaccard;
      r.avg_coverage += s.coverage;
      r.half_match += s.coverage >= 0.5 ? 1 : 0;
      r.perfect_subset += s.perfect_subset ? 1 : 0;
    }
  }
  std::vector<BrandRow> out;
  for (auto& [brand, r] : rows) {
    r.avg_jaccard /= static_cast<double>(r.pages);
    r.avg_coverage /= static_cast<double>(r.pages);
    out.push_back(r);
  }
  return out;
}

std::string brand_report_csv(std::span<const BrandRow> rows) {
  std::ostringstream out;
  out << "# similarity to the brand's own login page is ambiguous between jaccard and coverage; both are reported\n";
  out << "brand,pages,avg_jaccard,avg_coverage,match_50,perfect_subset\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& r : rows) {
    out << r.brand << ',' << r.pages << ',' << r.avg_jaccard << ',' << r.avg_coverage << ',' << r.half_match << ','
        << r.perfect_subset << '\n';
  }
  return out.str();
}

ClusterStats cluster_stats(const GlobalCluster& cluster) {
  ClusterStats s;
  const auto span = cluster.last_seen - cluster.first_seen;
  s.lifetime_days = span.count() < 0 ? 0 : span.count() / kDay.count();
  s.n_pages = cluster.members.size();
  s.n_e2lds = cluster.e2lds.size();
  s.n_brands = cluster.brand_labels.size();
  return s;
}

std::string cluster_stats_csv(std::span<const GlobalCluster> clusters, const TechniqueReport* techniques) {
  std::ostringstream out;
  out << "cluster_id,pages,e2lds,brands,lifetime_days,first_seen,last_seen";
  if (techniques) out << ",techniques";
  out << '\n';
  for (const auto& c : clusters) {
    const auto s = cluster_stats(c);
    out << c.cluster_id << ',' << s.n_pages << ',' << s.n_e2lds << ',' << s.n_brands << ',' << s.lifetime_days << ','
        << format_utc(c.first_seen) << ',' << format_utc(c.last_seen);
    if (techniques) {
      out << ',';
      const auto it = techniques->cluster_techniques.find(c.cluster_id);
      if (it != techniques->cluster_techniques.end()) {
        bool first = true;
        for (const auto& t : it->second) {
          out << (first ? "" : ";") << t;
          first = false;
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

Crosstab technique_crosstab(std::span<const GlobalCluster> clusters, const TechniqueReport& report,
                            std::span<const std::int64_t> bounds, CrosstabAxis axis) {
  if (clusters.empty()) throw InputError("technique crosstab over an empty cluster set");
  if (bounds.empty() || !std::is_sorted(bounds.begin(), bounds.end()) ||
      std::adjacent_find(bounds.begin(), bounds.end()) != bounds.end()) {
    throw InputError("crosstab buckets must be strictly increasing");
  }
  Crosstab t;
  t.axis = axis;
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    t.bucket_labels.push_back(b + 1 < bounds.size()
                                  ? std::to_string(bounds[b]) + "-" + std::to_string(bounds[b + 1] - 1)
                                  : std::to_string(bounds[b]) + "+");
  }
  std::set<std::string> names;
  for (const auto& [name, count] : report.counts) names.insert(name);
  for (const auto& [id, ts] : report.cluster_techniques) names.insert(ts.begin(), ts.end());
  t.techniques.assign(names.begin(), names.end());
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < t.techniques.size(); ++i) row_of[t.techniques[i]] = i;
  std::vector<std::vector<std::size_t>> counts(t.techniques.size(), std::vector<std::size_t>(bounds.size(), 0));

  for (const auto& c : clusters) {
    const auto s = cluster_stats(c);
    const std::int64_t value = axis == CrosstabAxis::size ? static_cast<std::int64_t>(s.n_pages) : s.lifetime_days;
    if (value < bounds.front()) {
      throw InputError("cluster " + c.cluster_id + " value " + std::to_string(value) + " below the first bucket");
    }
    const auto b = static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), value) - bounds.begin() - 1);
    const auto it = report.cluster_techniques.find(c.cluster_id);
    if (it == report.cluster_techniques.end()) continue;
    for (const auto& tech : it->second) ++counts[row_of[tech]][b];
  }
  for (const auto& row : counts) {
    std::size_t total = 0;
    for (auto v : row) total += v;
    std::vector<double> f(row.size(), 0.0);
    for (std::size_t b = 0; b < row.size() && total; ++b) f[b] = static_cast<double>(row[b]) / static_cast<double>(total);
    t.fractions.push_back(std::move(f));
    t.absent.push_back(total == 0);
  }
  return t;
}

std::string crosstab_csv(const Crosstab& table) {
  std::ostringstream out;
  const char* axis = table.axis == CrosstabAxis::size ? "size" : "lifetime_days";
  out << "technique";
  for (const auto& l : table.bucket_labels) out << ',' << axis << ':' << l;
  out << ",absent\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (std::size_t i = 0; i < table.techniques.size(); ++i) {
    out << table.techniques[i];
    for (double v : table.fractions[i]) out << ',' << v;
    out << ',' << (table.absent[i] ? "yes" : "no") << '\n';
  }
  return out.str();
}

std::vector<MonthRow> monthly_report(std::span<const ApiProfile> profiles, std::span<const GlobalCluster> clusters) {
  std::unordered_map<std::string, Timestamp> seen_at;
  std::map<std::string, std::set<std::string>> domains;
  std::map<std::string, std::size_t> pages;
  for (const auto& p : profiles) {
    seen_at.emplace(p.page_id, p.observed_at);
    const auto month = calendar_month(p.observed_at);
    domains[month].insert(p.e2ld);
    ++pages[month];
  }
  std::map<std::string, std::set<std::string>> cluster_months;
  for (const auto& c : clusters) {
    for (const auto& m : c.members) {
      Timestamp t{};
      if (const auto it = seen_at.find(m); it != seen_at.end()) {
        t = it->second;
      } else {
        t = parse_utc(split_page_id(m).second);
      }
      cluster_months[calendar_month(t)].insert(c.cluster_id);
    }
  }
  std::set<std::string> months;
  for (const auto& [m, _] : domains) months.insert(m);
  for (const auto& [m, _] : cluster_months) months.insert(m);
  std::vector<MonthRow> out;
  for (const auto& m : months) {
    MonthRow r;
    r.month = m;
    r.pages = pages[m];
    r.e2lds = domains[m].size();
    r.clusters = cluster_months[m].size();
    out.push_back(r);
  }
  return out;
}

std::string monthly_report_csv(std::span<const MonthRow> rows) {
  std::ostringstream out;
  out << "month,pages,e2lds,clusters\n";
  for (const auto& r : rows) out << r.month << ',' << r.pages << ',' << r.e2lds << ',' << r.clusters << '\n';
  return out.str();
}

}  // namespace kitclust
