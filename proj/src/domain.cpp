#include "kitclust/domain.hpp"

#include <algorithm>
#include <vector>

#include "kitclust/error.hpp"

namespace kitclust {

extern const char* const kPublicSuffixSnapshot;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<UrlParts> parse_url(std::string_view url) {
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  const std::string_view scheme = url.substr(0, sep);
  for (char c : scheme) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.')) return std::nullopt;
  }
  std::string_view rest = url.substr(sep + 3);
  const auto auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  std::string_view tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

  if (const auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

  std::string_view host;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(1, close - 1);
  } else {
    host = authority.substr(0, authority.find(':'));
  }
  while (!host.empty() && host.back() == '.') host.remove_suffix(1);
  if (host.empty()) return std::nullopt;

  UrlParts parts;
  parts.scheme = lower(scheme);
  parts.host = lower(host);
  if (!tail.empty() && tail.front() == '/') {
    parts.path = std::string(tail.substr(0, tail.find_first_of("?#")));
  }
  return parts;
}

bool is_ip_literal(std::string_view host) {
  if (host.find(':') != std::string_view::npos) return true;  // IPv6
  int labels = 0;
  std::size_t start = 0;
  while (start <= host.size()) {
    const auto dot = host.find('.', start);
    const auto label = host.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (label.empty() || label.size() > 3) return false;
    if (!std::all_of(label.begin(), label.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
    if (std::stoi(std::string(label)) > 255) return false;
    ++labels;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels == 4;
}

PublicSuffixList PublicSuffixList::parse(std::string_view dat_text) {
  PublicSuffixList psl;
  std::size_t pos = 0;
  while (pos < dat_text.size()) {
    auto eol = dat_text.find('\n', pos);
    if (eol == std::string_view::npos) eol = dat_text.size();
    std::string_view line = trim(dat_text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.starts_with("//")) continue;
    // Rules end at the first whitespace.
    line = line.substr(0, line.find_first_of(" \t"));
    if (line.starts_with("!")) {
      psl.exception_.insert(lower(line.substr(1)));
    } else if (line.starts_with("*.")) {
      psl.wildcard_.insert(lower(line.substr(2)));
    } else {
      psl.normal_.insert(lower(line));
    }
  }
  return psl;
}

const PublicSuffixList& PublicSuffixList::builtin() {
  static const PublicSuffixList psl = parse(kPublicSuffixSnapshot);
  return psl;
}

std::string PublicSuffixList::public_suffix(std::string_view host_in) const {
  const std::string host = lower(host_in);
  // Offsets of every label start, left to right.
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (host[i] == '.') starts.push_back(i + 1);
  }
  // Longest candidate first; the first rule hit is the prevailing one.
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::string_view candidate = std::string_view(host).substr(starts[k]);
    const std::string key(candidate);
    if (exception_.contains(key)) {
      return k + 1 < starts.size() ? std::string(std::string_view(host).substr(starts[k + 1])) : key;
    }
    if (normal_.contains(key)) return key;
    if (k + 1 < starts.size() && wildcard_.contains(std::string(std::string_view(host).substr(starts[k + 1])))) {
      return key;
    }
  }
  // Implicit "*" rule.
  return std::string(std::string_view(host).substr(starts.back()));
}

std::string PublicSuffixList::registrable_domain(std::string_view host_in) const {
  if (host_in.empty()) throw InputError("empty hostname");
  if (is_ip_literal(host_in)) return std::string(host_in);
  const std::string host = lower(host_in);
  const std::string suffix = public_suffix(host);
  if (suffix.size() >= host.size()) throw InputError("suffix-only host: '" + host + "'");
  const std::size_t cut = host.size() - suffix.size() - 1;  // the '.' before the suffix
  const auto label_start = host.rfind('.', cut - 1);
  return label_start == std::string::npos ? host : host.substr(label_start + 1);
}

std::string e2ld_of(std::string_view hostname) {
  return PublicSuffixList::builtin().registrable_domain(hostname);
}

}  // namespace kitclust
