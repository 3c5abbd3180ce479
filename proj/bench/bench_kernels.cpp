// Serial vs OpenMP timings for the hot kernels.
// Usage: kitclust_bench [--pages N] [--reps R]
#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <fmt/format.h>
#include <functional>

#include "kitclust/cluster.hpp"
#include "kitclust/profile.hpp"
#include "kitclust/set_metrics.hpp"
#include "kitclust/synth.hpp"
#include "kitclust/trace.hpp"

using namespace kitclust;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const std::string& name, double serial, double parallel) {
  fmt::print("{:<24} {:>10.4f} {:>10.4f} {:>8.2f}x\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kitclust kernel benchmark"};
  std::size_t pages = 4000;
  int reps = 3;
  app.add_option("--pages", pages, "pages in the synthetic corpus")->check(CLI::Range(10, 1000000));
  app.add_option("--reps", reps, "repetitions (best time is reported)")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  SynthParams sp;
  sp.pages_per_family = 20;
  sp.n_families = std::max<std::size_t>(1, pages / sp.pages_per_family);
  const auto corpus = synth_corpus(sp);
  std::vector<std::string> lines;
  for (const auto& p : corpus.pages) lines.push_back(serialize_trace(p));

  fmt::print("{} pages, {} OpenMP threads, best of {}\n", lines.size(), omp_get_max_threads(), reps);
  fmt::print("{:<24} {:>10} {:>10} {:>9}\n", "kernel", "serial s", "omp s", "speedup");

  row("parse traces", best_of(reps, [&] { (void)parse_trace_lines_serial(lines); }),
      best_of(reps, [&] { (void)parse_trace_lines(lines); }));

  FeatureConfig cfg;
  cfg.min_features = 1;
  row("build profiles", best_of(reps, [&] { (void)build_profiles_serial(corpus.pages, cfg); }),
      best_of(reps, [&] { (void)build_profiles(corpus.pages, cfg); }));

  const auto profiles = build_profiles(corpus.pages, cfg);
  TokenInterner interner;
  std::vector<IdSet> sets;
  std::vector<std::string> ids;
  for (const auto& p : profiles) {
    sets.push_back(interner.to_ids(p.features));
    ids.push_back(p.page_id);
  }
  row("pairwise distances", best_of(reps, [&] { (void)pairwise_distances_serial(sets, ids); }),
      best_of(reps, [&] { (void)pairwise_distances(sets, ids); }));

  const auto d = pairwise_distances(sets, ids);
  row("core distances", best_of(reps, [&] { (void)kernels::core_distances_serial(d, 2); }),
      best_of(reps, [&] { (void)kernels::core_distances(d, 2); }));

  const auto core = kernels::core_distances(d, 2);
  row("mutual-reachability MST", best_of(reps, [&] { (void)kernels::mutual_reachability_mst_serial(d, core); }),
      best_of(reps, [&] { (void)kernels::mutual_reachability_mst(d, core); }));
  return 0;
}
