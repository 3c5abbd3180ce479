#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kitclust {

struct ApiProfile;

// Sorted, duplicate-free token ids.
using IdSet = std::vector<std::uint32_t>;

class TokenInterner {
 public:
  std::uint32_t intern(std::string_view token);
  const std::string& token(std::uint32_t id) const { return tokens_[id]; }
  std::size_t size() const { return tokens_.size(); }

  // Sorted id set for a sorted or unsorted token list.
  IdSet to_ids(std::span<const std::string> tokens);

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> tokens_;
};

std::size_t intersection_size(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept;

// |A∩B| / |A∪B|; 1.0 for two empty sets.
double jaccard_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept;
double jaccard_distance(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) noexcept;

// Same over sorted, duplicate-free string sets.
double jaccard_index(std::span<const std::string> a, std::span<const std::string> b) noexcept;
double jaccard_distance(std::span<const std::string> a, std::span<const std::string> b) noexcept;

// Sorted intersection of two sorted string sets.
std::vector<std::string> set_intersection(std::span<const std::string> a, std::span<const std::string> b);

// Upper triangle, row-major, without the diagonal.
struct CondensedDistances {
  std::size_t n = 0;
  std::vector<double> values;
  std::vector<std::string> ids;

  static std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

  // Position of (i, j), i < j.
  std::size_t index(std::size_t i, std::size_t j) const { return n * i - i * (i + 1) / 2 + (j - i - 1); }

  double at(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return i < j ? values[index(i, j)] : values[index(j, i)];
  }
};

inline constexpr std::size_t kDefaultDistanceBudgetBytes = std::size_t{2} << 30;

struct DistanceOptions {
  std::size_t max_bytes = kDefaultDistanceBudgetBytes;
  std::string label = "input";  // names the window in budget errors
  // Called with each window's matrix before clustering.
  std::function<void(std::int64_t window_id, const CondensedDistances&)> on_window;
};

// Row-parallel. Throws InfeasibleError ("window too large") when the
// matrix would exceed options.max_bytes, InputError on empty input.
CondensedDistances pairwise_distances(std::span<const IdSet> sets, std::vector<std::string> ids,
                                      const DistanceOptions& options = {});
CondensedDistances pairwise_distances_serial(std::span<const IdSet> sets, std::vector<std::string> ids,
                                             const DistanceOptions& options = {});

// Interns the profiles' features on the fly; ids are page ids.
CondensedDistances pairwise_distances(std::span<const ApiProfile> profiles, const DistanceOptions& options = {});

// Binary export: "KFD1", little-endian u64 n, then the f64 values.
void write_kfd(std::ostream& out, const CondensedDistances& d);
CondensedDistances read_kfd(std::istream& in);

}  // namespace kitclust
