#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace kitclust {

struct UrlParts {
  std::string scheme;  // lowercase
  std::string host;    // lowercase, no port, no trailing dot; IPv6 without brackets
  std::string path;    // begins with '/' or is empty
};

// Absolute URLs only ("scheme://host..."); nullopt when the host is empty.
std::optional<UrlParts> parse_url(std::string_view url);

bool is_ip_literal(std::string_view host);

// Public-suffix rule set (normal, wildcard and exception rules).
class PublicSuffixList {
 public:
  static PublicSuffixList parse(std::string_view dat_text);

  // Snapshot compiled into the library.
  static const PublicSuffixList& builtin();

  // Public suffix of a lowercase hostname (always at least one label).
  std::string public_suffix(std::string_view host) const;

  // eTLD+1. IP literals come back unchanged. Throws InputError
  // ("suffix-only host") when the host is itself a public suffix.
  std::string registrable_domain(std::string_view host) const;

  std::size_t rule_count() const { return normal_.size() + wildcard_.size() + exception_.size(); }

 private:
  std::unordered_set<std::string> normal_;
  std::unordered_set<std::string> wildcard_;   // "*.X" stored as "X"
  std::unordered_set<std::string> exception_;  // "!X" stored as "X"
};

// Registrable domain under the bundled snapshot.
std::string e2ld_of(std::string_view hostname);

}  // namespace kitclust
