#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "spemix/gem.hpp"
#include "spemix/metrics.hpp"
#include "spemix/simulate.hpp"

namespace spemix {

// Worker count: SPE_MIX_THREADS when set and parseable, otherwise the
// hardware concurrency, never below one.
inline int thread_budget() {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (budget < 1) budget = 1;
  const char* env = std::getenv("SPE_MIX_THREADS");
  if (env && *env) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end && *end == '\0' && parsed >= 1)
      budget = static_cast<int>(parsed < 1024 ? parsed : 1024);
    else
      warn("SPE_MIX_THREADS: ignoring unparseable value '" +
           std::string(env) + "'");
  }
  return budget;
}

// Atomic-counter work pool. Job i writes only to slot i of whatever the
// caller owns, so results are identical for every thread count. The first
// exception wins; remaining workers drain the queue without running jobs.
inline void parallel_for(int n_jobs, const std::function<void(int)>& body,
                         int threads = 0) {
  if (n_jobs <= 0) return;
  if (threads <= 0) threads = thread_budget();
  if (threads > n_jobs) threads = n_jobs;
  if (threads == 1) {
    for (int i = 0; i < n_jobs; ++i) body(i);
    return;
  }

  std::atomic<int> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&]() {
    while (!abort.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_jobs) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct SweepCell {
  ModelSpec spec;
  int G = 0;
  std::uint64_t seed = 0;
  FitResult result;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  int best_index = -1;

  bool has_best() const { return best_index >= 0; }
  const SweepCell& best() const {
    if (!has_best())
      throw NoConvergedFitError("SweepReport: no converged fit to report");
    return cells[static_cast<std::size_t>(best_index)];
  }
};

// Highest BIC among converged cells; exact ties go to the model with fewer
// free parameters, then to the smaller G, then to grid order.
inline int pick_best_by_bic(const std::vector<SweepCell>& cells) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const FitResult& r = cells[i].result;
    if (r.failed || !r.converged) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const FitResult& b = cells[best].result;
    if (r.bic_value > b.bic_value ||
        (r.bic_value == b.bic_value &&
         (r.free_params < b.free_params ||
          (r.free_params == b.free_params && cells[i].G < cells[best].G))))
      best = i;
  }
  return best;
}

// Fits the full (spec, G) grid. Cell failures are recorded, not fatal; a
// grid in which nothing converged is an error because every downstream
// report would be empty. Cell seeds derive from (base seed, spec index, G),
// so reruns and thread-count changes cannot alter any fit.
inline SweepReport sweep(const MatrixXd& data,
                         const std::vector<ModelSpec>& specs, int g_min,
                         int g_max, std::uint64_t seed,
                         const FitOptions& base_options = {},
                         const std::vector<int>& labels = {},
                         int threads = 0) {
  if (specs.empty()) throw ValidationError("sweep: empty model list");
  if (g_min < 1 || g_max < g_min)
    throw ValidationError("sweep: need 1 <= g_min <= g_max");

  SweepReport report;
  for (std::size_t s = 0; s < specs.size(); ++s)
    for (int G = g_min; G <= g_max; ++G) {
      SweepCell cell;
      cell.spec = specs[s];
      cell.G = G;
      cell.seed = derive_seed(seed, s, static_cast<std::uint64_t>(G));
      report.cells.push_back(cell);
    }

  parallel_for(
      static_cast<int>(report.cells.size()),
      [&](int i) {
        SweepCell& cell = report.cells[static_cast<std::size_t>(i)];
        FitOptions options = base_options;
        options.seed = cell.seed;
        try {
          cell.result = fit(data, cell.spec, cell.G, options, labels);
        } catch (const ValidationError& err) {
          cell.result.failed = true;
          cell.result.failure_reason = err.what();
        } catch (const NumericalError& err) {
          cell.result.failed = true;
          cell.result.failure_reason = err.what();
        }
      },
      threads);

  report.best_index = pick_best_by_bic(report.cells);
  if (report.best_index < 0)
    throw NoConvergedFitError("sweep: no grid cell converged");
  return report;
}

// One simulate-then-sweep replication.
struct ReplicateOutcome {
  int replicate = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t sweep_seed = 0;
  bool has_best = false;
  std::string best_spec;
  int best_g = 0;
  double best_loglik = 0.0;
  double best_bic = 0.0;
  double ari = 0.0;
  int converged_cells = 0;
  int total_cells = 0;
};

// Replicated simulation study: each replicate simulates a fresh dataset and
// sweeps the grid; replicates run in parallel with serial inner sweeps, and
// every seed derives from (base seed, replicate index), so the outcome list
// is deterministic for any worker count.
inline std::vector<ReplicateOutcome> replicate_study(
    const SimulationConfig& config, int n_replicates, std::uint64_t seed,
    const std::vector<ModelSpec>& specs, int g_min, int g_max,
    SamplerKind sampler = SamplerKind::Rejection,
    const FitOptions& base_options = {}, int threads = 0) {
  if (n_replicates < 1)
    throw ValidationError("replicate_study: need at least one replicate");
  config.validate();

  std::vector<ReplicateOutcome> outcomes(
      static_cast<std::size_t>(n_replicates));
  parallel_for(
      n_replicates,
      [&](int r) {
        ReplicateOutcome& out = outcomes[static_cast<std::size_t>(r)];
        out.replicate = r + 1;
        out.data_seed = derive_seed(seed, static_cast<std::uint64_t>(r), 1);
        out.sweep_seed = derive_seed(seed, static_cast<std::uint64_t>(r), 2);
        const Dataset ds = simulate(config, out.data_seed, sampler);
        try {
          SweepReport report = sweep(ds.x, specs, g_min, g_max, out.sweep_seed,
                                     base_options, {}, /*threads=*/1);
          out.total_cells = static_cast<int>(report.cells.size());
          for (const SweepCell& cell : report.cells)
            if (!cell.result.failed && cell.result.converged)
              ++out.converged_cells;
          const SweepCell& best = report.best();
          out.has_best = true;
          out.best_spec = model_spec_name(best.spec);
          out.best_g = best.G;
          out.best_loglik = best.result.loglik;
          out.best_bic = best.result.bic_value;
          out.ari = adjusted_rand_index(best.result.hard_labels,
                                        ds.labels_zero_based());
        } catch (const NoConvergedFitError&) {
          out.has_best = false;
        }
      },
      threads);
  return outcomes;
}

// Frequency tables and ARI quartiles over the replicates that produced a
// selected model.
struct ReplicateSummary {
  int n_replicates = 0;
  int n_with_best = 0;
  std::map<int, int> g_frequency;
  std::map<std::string, int> spec_frequency;
  double ari_q1 = 0.0;
  double ari_median = 0.0;
  double ari_q3 = 0.0;
};

inline ReplicateSummary summarize_replicates(
    const std::vector<ReplicateOutcome>& outcomes) {
  ReplicateSummary summary;
  summary.n_replicates = static_cast<int>(outcomes.size());
  std::vector<double> aris;
  for (const ReplicateOutcome& out : outcomes) {
    if (!out.has_best) continue;
    ++summary.n_with_best;
    ++summary.g_frequency[out.best_g];
    ++summary.spec_frequency[out.best_spec];
    aris.push_back(out.ari);
  }
  if (!aris.empty()) {
    summary.ari_q1 = quantile_type7(aris, 0.25);
    summary.ari_median = quantile_type7(aris, 0.5);
    summary.ari_q3 = quantile_type7(aris, 0.75);
  }
  return summary;
}

}  // namespace spemix
