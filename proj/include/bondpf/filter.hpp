#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bondpf/model.hpp"

namespace bondpf {

enum class Resampling { Multinomial, Systematic };

struct FilterOptions {
  unsigned workers = 1;
  Resampling resampling = Resampling::Multinomial;
  /// Keep the per-event state tables and ancestor indices needed by
  /// trajectories(). Memory is O(K N d).
  bool record_history = true;
};

/// Ancestor-index genealogy plus the post-event state table of every event.
struct Genealogy {
  std::vector<double> times;
  std::vector<RowMatrix> y;
  std::vector<RowMatrix> x;
  /// parents[n][k]: index at event n-1 of particle k at event n (parents[0] empty).
  std::vector<std::vector<std::uint32_t>> parents;
};

/// K equally weighted particles. Randomness is counter based: the pair
/// (seed, steps) fully determines every draw of the next update.
struct ParticleCloud {
  double time = 0.0;
  RowMatrix y;  // K x d mid yields, bp
  RowMatrix x;  // K x d log-spread states
  bool record_history = true;
  Genealogy history;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(y.rows()); }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(y.cols()); }
};

struct WeightVector {
  std::vector<double> log_w;
  std::vector<double> norm_w;
  double ess = 0.0;
};

/// Normalizes log-weights by max subtraction. Throws AllWeightsZero when
/// every entry is -inf (or NaN).
WeightVector normalize_log_weights(std::vector<double> log_w);

struct FilterDiagnostics {
  std::size_t event_index = 0;  // 1-based
  double time = 0.0;
  double ess = 0.0;
  double min_log_weight = 0.0;
  double max_log_weight = 0.0;
  std::size_t zero_weights = 0;
  /// Entropy (nats) of the offspring-count distribution of the resampling map.
  double resample_entropy = 0.0;
};

struct QuantityStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> quantiles;
};

struct BondSummary {
  QuantityStats y;
  QuantityStats psi;
};

struct PosteriorSummary {
  double time = 0.0;
  std::vector<double> levels;
  std::vector<BondSummary> bonds;
};

std::vector<double> default_levels();

/// Order-statistic quantile of an ascending sample, interpolating linearly at
/// h = (K-1) p (the K = 4 median of {1,2,3,4} is 2.5).
double empirical_quantile(const std::vector<double>& sorted_values, double p);

/// K i.i.d. draws from the prior at time 0. Throws InvalidPrior, or
/// InvalidArgument for K < 2.
ParticleCloud init(const ValidatedModel& model, const Prior& prior, std::size_t particles, std::uint64_t seed,
                   const FilterOptions& options = {});

/// Builds a cloud from explicit particle states (for restarts and tests).
ParticleCloud make_cloud(RowMatrix y, RowMatrix x, double time, std::uint64_t seed, bool record_history);

/// One six-step update: spread draw, weights, resampling, censored or exact
/// draw of y + eps for the traded bond, its mid, then the other bonds.
/// On error the cloud is left untouched.
FilterDiagnostics step(ParticleCloud& cloud, const ValidatedModel& model, const ObservationEvent& event,
                       const FilterOptions& options = {});

/// Diffuses a copy of the cloud to time t and summarizes it.
PosteriorSummary predict(const ParticleCloud& cloud, const ValidatedModel& model, double t,
                         const std::vector<double>& levels = default_levels(), const FilterOptions& options = {});

PosteriorSummary posterior(const ParticleCloud& cloud, const ValidatedModel& model,
                           const std::vector<double>& levels = default_levels());

/// Summary of arbitrary K x d state matrices.
PosteriorSummary summarize(double time, const RowMatrix& y, const RowMatrix& x, const Vector& psi_scale,
                           const std::vector<double>& levels);

struct Trajectories {
  std::vector<double> times;    // N + 1 entries, prior time first
  std::vector<RowMatrix> y;     // per time: K x d, row k on particle k's ancestral line
  std::vector<RowMatrix> psi;
};

/// Materializes the ancestral paths of the current particles.
/// Throws HistoryDisabled if the cloud was built without history.
Trajectories trajectories(const ParticleCloud& cloud, const ValidatedModel& model);

/// Runs an event stream from the prior. Convenience for tests and tools.
struct FilterRun {
  ParticleCloud cloud;
  std::vector<FilterDiagnostics> diagnostics;
};
FilterRun run_filter(const ValidatedModel& model, const Prior& prior, const std::vector<ObservationEvent>& events,
                     std::size_t particles, std::uint64_t seed, const FilterOptions& options = {});

}  // namespace bondpf
