#include "kitclust/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <set>
#include <unordered_map>

#include "kitclust/error.hpp"

namespace kitclust {

ClusteringResult noise_to_singletons(const ClusteringResult& result) {
  ClusteringResult out = result;
  int next = 0;
  for (int l : result.labels) next = std::max(next, l + 1);
  next = std::max(next, result.n_clusters);
  for (auto& l : out.labels) {
    if (l == kNoise) l = next++;
  }
  out.n_clusters = next;
  return out;
}

namespace {

struct Contingency {
  std::vector<std::uint64_t> rows;  // class sizes
  std::vector<std::uint64_t> cols;  // cluster sizes
  std::vector<std::uint64_t> cells;  // non-zero cell counts
  std::vector<std::pair<std::size_t, std::size_t>> cell_pos;
  std::uint64_t n = 0;
};

std::vector<std::size_t> dense(std::span<const Label> labels, std::size_t& k) {
  std::unordered_map<Label, std::size_t> ids;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(ids.emplace(l, ids.size()).first->second);
  k = ids.size();
  return out;
}

Contingency contingency(std::span<const Label> labels_true, std::span<const Label> labels_pred) {
  if (labels_true.size() != labels_pred.size()) {
    throw InputError("label length mismatch: " + std::to_string(labels_true.size()) + " vs " +
                     std::to_string(labels_pred.size()));
  }
  Contingency c;
  std::size_t kt = 0, kp = 0;
  const auto t = dense(labels_true, kt);
  const auto p = dense(labels_pred, kp);
  c.rows.assign(kt, 0);
  c.cols.assign(kp, 0);
  std::unordered_map<std::uint64_t, std::size_t> cell_index;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++c.rows[t[i]];
    ++c.cols[p[i]];
    const auto key = static_cast<std::uint64_t>(t[i]) * kp + p[i];
    auto [it, fresh] = cell_index.emplace(key, c.cells.size());
    if (fresh) {
      c.cells.push_back(0);
      c.cell_pos.emplace_back(t[i], p[i]);
    }
    ++c.cells[it->second];
  }
  c.n = t.size();
  return c;
}

std::uint64_t pairs(std::uint64_t m) { return m * (m - (m > 0 ? 1 : 0)) / 2; }

double entropy(std::span<const std::uint64_t> counts, std::uint64_t n) {
  double h = 0.0;
  const double dn = static_cast<double>(n);
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / dn;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double fowlkes_mallows(std::span<const Label> labels_true, std::span<const Label> labels_pred) {
  const auto c = contingency(labels_true, labels_pred);
  if (c.n < 2) throw InputError("fowlkes_mallows needs at least two items");
  std::uint64_t tp = 0, true_pairs = 0, pred_pairs = 0;
  for (auto v : c.cells) tp += pairs(v);
  for (auto v : c.rows) true_pairs += pairs(v);
  for (auto v : c.cols) pred_pairs += pairs(v);
  if (true_pairs == 0 || pred_pairs == 0) return 0.0;
  return static_cast<double>(tp) / std::sqrt(static_cast<double>(true_pairs) * static_cast<double>(pred_pairs));
}

VMeasure v_measure(std::span<const Label> labels_true, std::span<const Label> labels_pred) {
  const auto c = contingency(labels_true, labels_pred);
  if (c.n == 0) throw InputError("v_measure needs at least one item");
  const double h_c = entropy(c.rows, c.n);
  const double h_k = entropy(c.cols, c.n);
  double h_c_given_k = 0.0, h_k_given_c = 0.0;
  const double dn = static_cast<double>(c.n);
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    const auto [r, k] = c.cell_pos[i];
    const double nij = static_cast<double>(c.cells[i]);
    h_c_given_k -= nij / dn * std::log(nij / static_cast<double>(c.cols[k]));
    h_k_given_c -= nij / dn * std::log(nij / static_cast<double>(c.rows[r]));
  }
  VMeasure v;
  v.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_k / h_c;
  v.completeness = h_k == 0.0 ? 1.0 : 1.0 - h_k_given_c / h_k;
  const double sum = v.homogeneity + v.completeness;
  v.v = sum == 0.0 ? 0.0 : 2.0 * v.homogeneity * v.completeness / sum;
  return v;
}

double silhouette(const CondensedDistances& d, const ClusteringResult& result) {
  if (result.labels.size() != d.n) throw InputError("silhouette undefined: label count differs from distance matrix");
  std::set<int> distinct;
  for (int l : result.labels) {
    if (l == kNoise) throw InputError("silhouette undefined: noise labels present");
    distinct.insert(l);
  }
  if (distinct.size() < 2) throw InputError("silhouette undefined: fewer than two clusters");

  std::map<int, std::size_t> slot;
  for (int l : distinct) slot.emplace(l, slot.size());
  const std::size_t k = distinct.size();
  std::vector<std::size_t> label(d.n), size(k, 0);
  for (std::size_t i = 0; i < d.n; ++i) {
    label[i] = slot[result.labels[i]];
    ++size[label[i]];
  }

  double total = 0.0;
  const auto n = static_cast<std::int64_t>(d.n);
#pragma omp parallel for reduction(+ : total) schedule(dynamic, 16)
  for (std::int64_t si = 0; si < n; ++si) {
    const auto i = static_cast<std::size_t>(si);
    if (size[label[i]] == 1) continue;
    std::vector<double> sums(k, 0.0);
    for (std::size_t j = 0; j < d.n; ++j) {
      if (j != i) sums[label[j]] += d.at(i, j);
    }
    const double a = sums[label[i]] / static_cast<double>(size[label[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != label[i]) b = std::min(b, sums[c] / static_cast<double>(size[c]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(d.n);
}

ClusterEvaluation evaluate(std::span<const Label> labels_true, std::span<const Label> labels_pred) {
  ClusterEvaluation e;
  e.fmi = fowlkes_mallows(labels_true, labels_pred);
  const auto v = v_measure(labels_true, labels_pred);
  e.homogeneity = v.homogeneity;
  e.completeness = v.completeness;
  e.v_measure = v.v;
  e.n_items = labels_true.size();
  e.n_classes = std::set<Label>(labels_true.begin(), labels_true.end()).size();
  e.n_clusters = std::set<Label>(labels_pred.begin(), labels_pred.end()).size();
  return e;
}

std::vector<Label> encode_labels(std::span<const std::string> names) {
  std::unordered_map<std::string, Label> ids;
  std::vector<Label> out;
  out.reserve(names.size());
  for (const auto& s : names) out.push_back(ids.emplace(s, static_cast<Label>(ids.size())).first->second);
  return out;
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw InputError("bounded_draw: empty range");
  // rejection keeps the draw uniform
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

std::vector<std::string> rebalance(std::span<const std::string> labels_true, std::span<const std::string> page_ids,
                                   std::uint64_t seed) {
  if (labels_true.size() != page_ids.size()) throw InputError("rebalance: label and page counts differ");
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels_true.size(); ++i) classes[labels_true[i]].push_back(i);
  if (classes.size() < 2) throw InputError("rebalance needs at least two classes");

  const std::vector<std::size_t>* largest = nullptr;
  std::size_t second = 0;
  for (const auto& [name, members] : classes) {
    if (!largest || members.size() > largest->size()) {
      if (largest) second = std::max(second, largest->size());
      largest = &members;
    } else {
      second = std::max(second, members.size());
    }
  }

  std::vector<char> keep(page_ids.size(), 1);
  if (largest->size() > second) {
    std::vector<std::size_t> pool = *largest;
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates: the first `second` slots are the sample
    for (std::size_t i = 0; i < second; ++i) {
      const auto j = i + static_cast<std::size_t>(bounded_draw(rng, pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    for (std::size_t i = second; i < pool.size(); ++i) keep[pool[i]] = 0;
    spdlog::info("rebalance: largest class {} -> {} pages", largest->size(), second);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < page_ids.size(); ++i) {
    if (keep[i]) out.push_back(page_ids[i]);
  }
  return out;
}

LabeledItems label_items(std::span<const ApiProfile> profiles, std::span<const GlobalCluster> clusters,
                         std::span<const KitFamily> truth) {
  std::unordered_map<std::string, std::set<std::string>> families_of_url;
  for (const auto& f : truth) {
    for (const auto& u : f.deployed_urls) families_of_url[u].insert(f.family_id);
  }
  std::unordered_map<std::string, const GlobalCluster*> cluster_of;
  for (const auto& c : clusters) {
    for (const auto& m : c.members) {
      auto [it, fresh] = cluster_of.emplace(m, &c);
      if (fresh) continue;
      const auto* cur = it->second;
      if (c.members.size() > cur->members.size() ||
          (c.members.size() == cur->members.size() && c.cluster_id < cur->cluster_id)) {
        it->second = &c;
      }
    }
  }

  LabeledItems items;
  std::size_t ambiguous = 0;
  for (const auto& p : profiles) {
    const auto it = families_of_url.find(p.page_url);
    if (it == families_of_url.end()) continue;
    if (it->second.size() != 1) {
      ++ambiguous;
      continue;
    }
    items.page_ids.push_back(p.page_id);
    items.family.push_back(*it->second.begin());
    const auto c = cluster_of.find(p.page_id);
    items.cluster.push_back(c == cluster_of.end() ? std::string{} : c->second->cluster_id);
  }
  if (ambiguous) spdlog::warn("{} pages skipped: url deployed by several families", ambiguous);
  return items;
}

ClusterEvaluation evaluate_items(const LabeledItems& items) {
  const auto truth = encode_labels(items.family);
  std::vector<Label> pred;
  pred.reserve(items.cluster.size());
  std::map<std::string, Label> ids;
  Label next_noise = -1;
  for (const auto& c : items.cluster) {
    if (c.empty()) {
      pred.push_back(next_noise--);  // singleton
    } else {
      pred.push_back(ids.emplace(c, static_cast<Label>(ids.size())).first->second);
    }
  }
  return evaluate(truth, pred);
}

std::string serialize_evaluation(const ClusterEvaluation& e, const EvaluationRun& run) {
  nlohmann::ordered_json j;
  j["fmi"] = e.fmi;
  j["v_measure"] = e.v_measure;
  j["homogeneity"] = e.homogeneity;
  j["completeness"] = e.completeness;
  j["n_items"] = e.n_items;
  j["n_clusters"] = e.n_clusters;
  j["n_classes"] = e.n_classes;
  nlohmann::ordered_json p;
  p["min_features"] = run.min_features;
  p["window_days"] = run.window_days;
  p["step_days"] = run.step_days;
  p["eps"] = run.eps;
  p["min_cluster_size"] = run.min_cluster_size;
  p["min_shared_apis"] = run.min_shared_apis;
  p["rebalanced"] = run.rebalanced;
  p["seed"] = run.seed;
  j["run"] = std::move(p);
  return j.dump();
}

}  // namespace kitclust
