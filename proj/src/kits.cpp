#include "kitclust/kits.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <json.hpp>
#include <map>
#include <set>
#include <unordered_map>

#include "kitclust/domain.hpp"
#include "kitclust/error.hpp"
#include "kitclust/hash.hpp"
#include "kitclust/set_metrics.hpp"
#include "kitclust/union_find.hpp"

namespace kitclust {

bool is_code_path(std::string_view path, std::string_view first_line) {
  static constexpr std::array<std::string_view, 11> kCodeExtensions{"php", "js",  "py",   "html", "htm", "phtml",
                                                                    "asp", "aspx", "pl", "cgi",  "sh"};
  if (first_line.starts_with("#!")) return true;
  const auto slash = path.find_last_of('/');
  const auto name = slash == std::string_view::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot == std::string_view::npos || dot + 1 == name.size()) return false;
  std::string ext(name.substr(dot + 1));
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(kCodeExtensions.begin(), kCodeExtensions.end(), ext) != kCodeExtensions.end();
}

std::vector<std::string> code_file_set(const KitArchive& archive) {
  if (archive.encrypted) throw InputError("encrypted archive has no code set: " + archive.archive_id);
  std::vector<std::string> out;
  for (const auto& f : archive.files) {
    if (f.is_code) out.push_back(f.sha256);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::string joined(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back('\n');
    out += items[i];
  }
  return out;
}

struct Pending {
  std::vector<std::string> archive_ids;
  std::vector<std::string> id_basis;  // sorted hashes the family id is derived from
};

}  // namespace

std::vector<KitFamily> group_families(std::span<const KitArchive> archives, const FamilyOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold <= 1.0)) throw InputError("threshold must lie in (0, 1]");
  std::vector<Pending> pending;

  std::map<std::string, std::vector<std::string>> encrypted;
  std::vector<const KitArchive*> plain;
  std::vector<IdSet> sets;
  TokenInterner interner;
  for (const auto& a : archives) {
    if (a.encrypted) {
      encrypted[a.zip_sha256].push_back(a.archive_id);
      continue;
    }
    auto code = code_file_set(a);
    if (code.empty()) continue;
    plain.push_back(&a);
    sets.push_back(interner.to_ids(code));
  }
  for (auto& [zip, ids] : encrypted) {
    std::sort(ids.begin(), ids.end());
    pending.push_back({std::move(ids), {zip}});
  }

  const std::size_t m = plain.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  const auto sm = static_cast<std::int64_t>(m);
#pragma omp parallel
  {
    std::vector<std::pair<std::size_t, std::size_t>> local;
#pragma omp for schedule(dynamic, 16) nowait
    for (std::int64_t si = 0; si < sm; ++si) {
      const auto i = static_cast<std::size_t>(si);
      for (std::size_t j = i + 1; j < m; ++j) {
        if (jaccard_index(sets[i], sets[j]) >= options.threshold) local.emplace_back(i, j);
      }
    }
#pragma omp critical(kitclust_family_edges)
    edges.insert(edges.end(), local.begin(), local.end());
  }
  UnionFind uf(m);
  for (const auto& [i, j] : edges) uf.unite(i, j);

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < m; ++i) components[uf.find(i)].push_back(i);
  for (const auto& [root, members] : components) {
    Pending p;
    std::set<std::uint32_t> code;
    for (auto i : members) {
      p.archive_ids.push_back(plain[i]->archive_id);
      code.insert(sets[i].begin(), sets[i].end());
    }
    std::sort(p.archive_ids.begin(), p.archive_ids.end());
    for (auto id : code) p.id_basis.push_back(interner.token(id));
    std::sort(p.id_basis.begin(), p.id_basis.end());

    if (members.size() > 1) {
      double weakest = 1.0;
      for (std::size_t x = 0; x < members.size(); ++x) {
        for (std::size_t y = x + 1; y < members.size(); ++y) {
          weakest = std::min(weakest, jaccard_index(sets[members[x]], sets[members[y]]));
        }
      }
      if (weakest < options.chain_warning_below) {
        spdlog::warn("kit family of {} archives is chained: weakest pairwise similarity {:.3f} < {:.2f}",
                     members.size(), weakest, options.chain_warning_below);
      }
    }
    pending.push_back(std::move(p));
  }

  std::vector<KitFamily> families;
  std::map<std::string, std::size_t> seen;
  for (auto& p : pending) {
    KitFamily f;
    f.family_id = sha256_hex(joined(p.id_basis)).substr(0, 12);
    if (seen.contains(f.family_id)) {
      f.family_id = sha256_hex(joined(p.id_basis) + "\n" + joined(p.archive_ids)).substr(0, 12);
    }
    seen[f.family_id]++;
    f.member_archive_ids = std::move(p.archive_ids);
    families.push_back(std::move(f));
  }
  std::sort(families.begin(), families.end(), [](const auto& a, const auto& b) { return a.family_id < b.family_id; });
  return families;
}

std::vector<KitFamily> map_urls(std::vector<KitFamily> families, std::span<const KitArchive> archives,
                                std::span<const UrlRecord> records, UrlMappingStats* stats) {
  std::set<std::string> known;
  for (const auto& a : archives) known.insert(a.archive_id);
  std::unordered_map<std::string, std::size_t> family_of;
  for (std::size_t i = 0; i < families.size(); ++i) {
    for (const auto& a : families[i].member_archive_ids) family_of.emplace(a, i);
  }

  std::map<std::string, std::set<std::string>> archives_per_domain;
  std::vector<std::string> domains;
  domains.reserve(records.size());
  for (const auto& r : records) {
    if (!known.contains(r.archive_id)) {
      throw InputError("url record references unknown archive_id '" + r.archive_id + "' (url " + r.url + ")");
    }
    std::string domain = r.root_domain;
    if (domain.empty()) {
      const auto parts = parse_url(r.url);
      if (!parts) throw InputError("url record has unparseable url '" + r.url + "'");
      domain = parts->host;
    }
    archives_per_domain[domain].insert(r.archive_id);
    domains.push_back(std::move(domain));
  }

  UrlMappingStats local;
  std::vector<std::set<std::string>> urls(families.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (archives_per_domain[domains[i]].size() >= 2) {
      ++local.discarded_multi_archive_domain;
      continue;
    }
    const auto it = family_of.find(records[i].archive_id);
    if (it == family_of.end()) {
      ++local.discarded_no_family;
      continue;
    }
    if (urls[it->second].insert(records[i].url).second) ++local.attached;
  }
  for (std::size_t i = 0; i < families.size(); ++i) {
    families[i].deployed_urls.assign(urls[i].begin(), urls[i].end());
  }
  if (stats) *stats = local;
  return families;
}

KitArchive parse_archive_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    KitArchive a;
    a.archive_id = j.at("archive_id").get<std::string>();
    a.zip_sha256 = j.at("zip_sha256").get<std::string>();
    if (!is_sha256_hex(a.zip_sha256)) throw InputError("archive " + a.archive_id + ": zip_sha256 is not hex64");
    a.encrypted = j.value("encrypted", false);
    std::set<std::string> paths;
    for (const auto& f : j.value("files", nlohmann::json::array())) {
      KitFile kf;
      kf.path = f.at("path").get<std::string>();
      kf.sha256 = f.at("sha256").get<std::string>();
      if (!is_sha256_hex(kf.sha256)) throw InputError("archive " + a.archive_id + ": file hash is not hex64");
      if (!paths.insert(kf.path).second) {
        throw InputError("archive " + a.archive_id + ": duplicate file path '" + kf.path + "'");
      }
      kf.is_code = is_code_path(kf.path, f.value("first_line", std::string{}));
      a.files.push_back(std::move(kf));
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid archive record: ") + e.what());
  }
}

UrlRecord parse_url_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    UrlRecord r;
    r.url = j.at("url").get<std::string>();
    r.archive_id = j.at("archive_id").get<std::string>();
    r.root_domain = j.value("root_domain", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid url record: ") + e.what());
  }
}

std::string serialize_family(const KitFamily& family) {
  nlohmann::ordered_json j;
  j["family_id"] = family.family_id;
  j["archives"] = family.member_archive_ids;
  j["urls"] = family.deployed_urls;
  return j.dump();
}

KitFamily parse_family_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    KitFamily f;
    f.family_id = j.at("family_id").get<std::string>();
    f.member_archive_ids = j.value("archives", std::vector<std::string>{});
    f.deployed_urls = j.value("urls", std::vector<std::string>{});
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid family record: ") + e.what());
  }
}

}  // namespace kitclust
