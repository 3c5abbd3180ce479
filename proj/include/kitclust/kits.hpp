#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kitclust {

struct KitFile {
  std::string path;
  std::string sha256;
  bool is_code = false;

  bool operator==(const KitFile&) const = default;
};

struct KitArchive {
  std::string archive_id;
  std::string zip_sha256;
  bool encrypted = false;
  std::vector<KitFile> files;

  bool operator==(const KitArchive&) const = default;
};

struct KitFamily {
  std::string family_id;  // 12 hex chars
  std::vector<std::string> member_archive_ids;  // sorted
  std::vector<std::string> deployed_urls;       // sorted

  bool operator==(const KitFamily&) const = default;
};

struct UrlRecord {
  std::string url;
  std::string archive_id;
  std::string root_domain;  // host of url when not supplied
};

// Extension allowlist (php, js, py, html, htm, phtml, asp, aspx, pl, cgi,
// sh) or a "#!" first line.
bool is_code_path(std::string_view path, std::string_view first_line = {});

// Sorted sha256 values of the archive's code files. Throws InputError for
// encrypted archives.
std::vector<std::string> code_file_set(const KitArchive& archive);

struct FamilyOptions {
  double threshold = 0.90;
  double chain_warning_below = 0.75;  // warn when a family's weakest pair falls below this
};

// Encrypted archives group by zip hash; the rest by connected components of
// the "code-set Jaccard >= threshold" graph. Archives without code files
// are excluded. Families sorted by family_id.
std::vector<KitFamily> group_families(std::span<const KitArchive> archives, const FamilyOptions& options = {});

struct UrlMappingStats {
  std::size_t attached = 0;
  std::size_t discarded_multi_archive_domain = 0;
  std::size_t discarded_no_family = 0;
};

// Domains that yielded two or more distinct archives lose all their URLs.
// Throws InputError naming a record whose archive_id is not in `archives`.
std::vector<KitFamily> map_urls(std::vector<KitFamily> families, std::span<const KitArchive> archives,
                                std::span<const UrlRecord> records, UrlMappingStats* stats = nullptr);

KitArchive parse_archive_record(std::string_view line);
UrlRecord parse_url_record(std::string_view line);
std::string serialize_family(const KitFamily& family);
KitFamily parse_family_record(std::string_view line);

}  // namespace kitclust
