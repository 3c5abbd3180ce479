#include "kitclust/set_metrics.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "kitclust/error.hpp"
#include "kitclust/profile.hpp"

namespace kitclust {

static_assert(std::endian::native == std::endian::little, "KFD1 I/O assumes a little-endian host");

std::uint32_t TokenInterner::intern(std::string_view token) {
  auto [it, inserted] = ids_.try_emplace(std::string(token), static_cast<std::uint32_t>(tokens_.size()));
  if (inserted) tokens_.push_back(it->first);
  return it->second;
}

IdSet TokenInterner::to_ids(std::span<const std::string> tokens) {
  IdSet out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(intern(t));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t intersection_size(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept {
  std::size_t i = 0, j = 0, common = 0;
  const std::size_t na = a.size(), nb = b.size();
  while (i < na && j < nb) {
    const auto x = a[i];
    const auto y = b[j];
    common += static_cast<std::size_t>(x == y);
    i += static_cast<std::size_t>(x <= y);
    j += static_cast<std::size_t>(y <= x);
  }
  return common;
}

double jaccard_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept {
  if (a.empty() && b.empty()) return 1.0;
  const auto common = intersection_size(a, b);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double jaccard_distance(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept {
  return 1.0 - jaccard_index(a, b);
}

double jaccard_index(std::span<const std::string> a, std::span<const std::string> b) noexcept {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    const int c = a[i].compare(b[j]);
    if (c == 0) {
      ++common;
      ++i;
      ++j;
    } else if (c < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double jaccard_distance(std::span<const std::string> a, std::span<const std::string> b) noexcept {
  return 1.0 - jaccard_index(a, b);
}

std::vector<std::string> set_intersection(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

namespace {

CondensedDistances allocate(std::span<const IdSet> sets, std::vector<std::string>& ids,
                            const DistanceOptions& options) {
  if (sets.empty()) throw InputError("pairwise_distances: empty input");
  if (ids.size() != sets.size()) throw InputError("pairwise_distances: ids and sets differ in length");
  const std::size_t n = sets.size();
  const std::size_t pairs = CondensedDistances::pair_count(n);
  if (pairs > options.max_bytes / sizeof(double)) {
    throw InfeasibleError("window too large: " + options.label + " has " + std::to_string(n) + " items, needing " +
                          std::to_string(pairs * sizeof(double)) + " bytes against a budget of " +
                          std::to_string(options.max_bytes));
  }
  CondensedDistances d;
  d.n = n;
  d.values.resize(pairs);
  d.ids = std::move(ids);
  return d;
}

inline void fill_row(CondensedDistances& d, std::span<const IdSet> sets, std::size_t i) {
  double* row = d.values.data() + (i + 1 < d.n ? d.index(i, i + 1) : 0);
  const IdSet& a = sets[i];
  for (std::size_t j = i + 1; j < d.n; ++j) *row++ = jaccard_distance(a, sets[j]);
}

}  // namespace

CondensedDistances pairwise_distances(std::span<const IdSet> sets, std::vector<std::string> ids,
                                      const DistanceOptions& options) {
  CondensedDistances d = allocate(sets, ids, options);
  const auto n = static_cast<std::int64_t>(d.n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n - 1; ++i) fill_row(d, sets, static_cast<std::size_t>(i));
  return d;
}

CondensedDistances pairwise_distances_serial(std::span<const IdSet> sets, std::vector<std::string> ids,
                                             const DistanceOptions& options) {
  CondensedDistances d = allocate(sets, ids, options);
  for (std::size_t i = 0; i + 1 < d.n; ++i) fill_row(d, sets, i);
  return d;
}

CondensedDistances pairwise_distances(std::span<const ApiProfile> profiles, const DistanceOptions& options) {
  TokenInterner interner;
  std::vector<IdSet> sets;
  std::vector<std::string> ids;
  sets.reserve(profiles.size());
  ids.reserve(profiles.size());
  for (const auto& p : profiles) {
    sets.push_back(interner.to_ids(p.features));
    ids.push_back(p.page_id);
  }
  return pairwise_distances(sets, std::move(ids), options);
}

void write_kfd(std::ostream& out, const CondensedDistances& d) {
  out.write("KFD1", 4);
  const std::uint64_t n = d.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(d.values.data()),
            static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!out) throw InputError("failed writing KFD1 stream");
}

CondensedDistances read_kfd(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "KFD1", 4) != 0) throw InputError("not a KFD1 stream");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) throw InputError("truncated KFD1 header");
  CondensedDistances d;
  d.n = static_cast<std::size_t>(n);
  d.values.resize(CondensedDistances::pair_count(d.n));
  in.read(reinterpret_cast<char*>(d.values.data()), static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!in) throw InputError("truncated KFD1 payload");
  d.ids.resize(d.n);
  for (std::size_t i = 0; i < d.n; ++i) d.ids[i] = std::to_string(i);
  return d;
}

}  // namespace kitclust
