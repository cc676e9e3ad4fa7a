#include "bondpf/filter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "bondpf/gaussian.hpp"
#include "bondpf/parallel.hpp"
#include "bondpf/rng.hpp"

namespace bondpf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSpreadTag = 6;

void check_levels(const std::vector<double>& levels) {
  double last = 0.0;
  for (double p : levels) {
    if (!(p > last && p < 1.0))
      throw Error(ErrorCode::InvalidArgument, "quantile levels must be strictly increasing in (0, 1)");
    last = p;
  }
}

// Fills rows [begin, end) of `out` with mean + factor z, one rng stream per row.
template <class StreamFor>
void gaussian_rows(RowMatrix& out, std::size_t begin, std::size_t end, const Vector& mean, const Matrix& factor,
                   StreamFor&& stream_for) {
  const auto rows = static_cast<Eigen::Index>(end - begin);
  const Eigen::Index d = factor.cols();
  RowMatrix z(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Rng rng = stream_for(begin + static_cast<std::size_t>(r));
    for (Eigen::Index j = 0; j < d; ++j) z(r, j) = rng.normal();
  }
  auto block = out.middleRows(static_cast<Eigen::Index>(begin), rows);
  block.noalias() = z * factor.transpose();
  block.rowwise() += mean.transpose();
}

// Step 1: propagate log-spreads from `x` over tau (OU) or redraw (IID).
void draw_spreads(const RowMatrix& x, const ValidatedModel& model, double tau, std::uint64_t seed,
                  std::uint64_t tag, std::uint64_t counter, unsigned workers, RowMatrix& out) {
  const std::size_t K = static_cast<std::size_t>(x.rows());
  const Eigen::Index d = x.cols();
  out.resize(x.rows(), d);
  if (const auto* ou = std::get_if<OuSpread>(&model.params().spread)) {
    const OuTransition tr = ou_transition(ou->a, ou->vvt, tau);
    const Matrix factor = psd_factor(tr.cov);
    for_each_chunk(K, workers, [&](std::size_t begin, std::size_t end) {
      gaussian_rows(out, begin, end, Vector::Zero(d), factor,
                    [&](std::size_t k) { return Rng::stream(seed, tag, counter, k); });
      for (std::size_t k = begin; k < end; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        out.row(r) += x.row(r).cwiseProduct(tr.mean_factor.transpose());
      }
    });
  } else {
    const auto& iid = std::get<IidSpread>(model.params().spread);
    const Vector sd = iid.var.cwiseSqrt();
    for_each_chunk(K, workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        Rng rng = Rng::stream(seed, tag, counter, k);
        for (Eigen::Index j = 0; j < d; ++j) out(static_cast<Eigen::Index>(k), j) = iid.mean[j] + sd[j] * rng.normal();
      }
    });
  }
}

struct EventTerms {
  double level;  // Y or Z
  double alpha;  // d2d half-width, 0 otherwise
};

EventTerms terms_of(const EventKind& kind) {
  return std::visit(
      [](const auto& k) -> EventTerms {
        if constexpr (requires { k.alpha; }) return {k.Y, k.alpha};
        else if constexpr (requires { k.Z; }) return {k.Z, 0.0};
        else return {k.Y, 0.0};
      },
      kind);
}

// Step 2: log likelihood multiplier of one particle.
double log_weight(const EventKind& kind, double y_prev, double psi, double s) {
  struct Visitor {
    double y_prev, psi, s;
    double operator()(const ClientBuy& e) const { return std_normal_log_pdf((e.Y + psi - y_prev) / s); }
    double operator()(const ClientSell& e) const { return std_normal_log_pdf((e.Y - psi - y_prev) / s); }
    double operator()(const TradedAwayBuy& e) const { return std_normal_log_cdf(-(e.Z + psi - y_prev) / s); }
    double operator()(const TradedAwaySell& e) const { return std_normal_log_cdf((e.Z - psi - y_prev) / s); }
    double operator()(const InterDealer& e) const {
      return std_normal_log_cdf_diff((e.Y - e.alpha - y_prev) / s, (e.Y + e.alpha - y_prev) / s);
    }
  };
  return std::visit(Visitor{y_prev, psi, s}, kind);
}

// Step 4: y + eps of the traded bond for one resampled particle.
double draw_y_tilde(const EventKind& kind, double y_prev, double psi, double s2, Rng& rng) {
  struct Visitor {
    double y_prev, psi, s2;
    Rng& rng;
    double operator()(const ClientBuy& e) const { return e.Y + psi; }
    double operator()(const ClientSell& e) const { return e.Y - psi; }
    double operator()(const TradedAwayBuy& e) const {
      return sample_truncated_normal(y_prev, s2, TruncationSpec::above(e.Z + psi), rng);
    }
    double operator()(const TradedAwaySell& e) const {
      return sample_truncated_normal(y_prev, s2, TruncationSpec::below(e.Z - psi), rng);
    }
    double operator()(const InterDealer& e) const {
      return sample_truncated_normal(y_prev, s2, TruncationSpec::between(e.Y - e.alpha, e.Y + e.alpha), rng);
    }
  };
  return std::visit(Visitor{y_prev, psi, s2, rng}, kind);
}

std::vector<std::uint32_t> resample(const std::vector<double>& w, Resampling scheme, Rng& rng) {
  const std::size_t K = w.size();
  std::vector<double> cdf(K);
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  const double total = cdf.back();
  std::size_t last_positive = K - 1;
  while (w[last_positive] == 0.0 && last_positive > 0) --last_positive;

  // Ascending targets in [0, 1): normalized exponential spacings give the
  // order statistics of K uniforms.
  std::vector<double> u(K);
  if (scheme == Resampling::Multinomial) {
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      acc += rng.exponential();
      u[k] = acc;
    }
    const double norm = acc + rng.exponential();
    for (double& v : u) v /= norm;
  } else {
    const double u0 = rng.uniform();
    for (std::size_t k = 0; k < K; ++k) u[k] = (u0 + static_cast<double>(k)) / static_cast<double>(K);
  }

  // Merge: each target picks the first index with cdf > u * total, which is
  // never a zero-weight entry; rounding past the end falls back to the last
  // positive one.
  std::vector<std::uint32_t> out(K);
  std::size_t idx = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double target = u[k] * total;
    while (idx < K && cdf[idx] <= target) ++idx;
    out[k] = static_cast<std::uint32_t>(idx < K ? idx : last_positive);
  }
  return out;
}

double offspring_entropy(const std::vector<std::uint32_t>& ancestors) {
  std::vector<std::uint32_t> counts(ancestors.size(), 0);
  for (auto a : ancestors) ++counts[a];
  const double K = static_cast<double>(ancestors.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / K;
    h -= p * std::log(p);
  }
  return h;
}

QuantityStats stats_of(std::vector<double>& values, const std::vector<double>& levels) {
  QuantityStats s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  std::sort(values.begin(), values.end());
  s.quantiles.reserve(levels.size());
  for (double p : levels) s.quantiles.push_back(empirical_quantile(values, p));
  return s;
}

}  // namespace

std::vector<double> default_levels() { return {0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99}; }

double empirical_quantile(const std::vector<double>& sorted_values, double p) {
  const std::size_t n = sorted_values.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  const double h = static_cast<double>(n - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted_values[n - 1];
  const double frac = h - static_cast<double>(lo);
  const double a = sorted_values[lo];
  const double b = sorted_values[lo + 1];
  return frac == 0.0 ? a : a + frac * (b - a);
}

WeightVector normalize_log_weights(std::vector<double> log_w) {
  WeightVector out;
  double top = kNegInf;
  for (double lw : log_w)
    if (!std::isnan(lw)) top = std::max(top, lw);
  if (top == kNegInf || std::isinf(top))
    throw Error(ErrorCode::AllWeightsZero, "all particle weights vanish for this observation");
  out.norm_w.resize(log_w.size());
  double total = 0.0;
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    const double w = std::isnan(log_w[k]) ? 0.0 : std::exp(log_w[k] - top);
    out.norm_w[k] = w;
    total += w;
  }
  double sq = 0.0;
  for (auto& w : out.norm_w) {
    w /= total;
    sq += w * w;
  }
  out.ess = 1.0 / sq;
  out.log_w = std::move(log_w);
  return out;
}

ParticleCloud make_cloud(RowMatrix y, RowMatrix x, double time, std::uint64_t seed, bool record_history) {
  if (y.rows() != x.rows() || y.cols() != x.cols())
    throw Error(ErrorCode::DimensionMismatch, "y and x particle matrices differ in shape");
  if (y.rows() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two particles");
  ParticleCloud cloud;
  cloud.time = time;
  cloud.y = std::move(y);
  cloud.x = std::move(x);
  cloud.seed = seed;
  cloud.record_history = record_history;
  if (record_history) {
    cloud.history.times.push_back(time);
    cloud.history.y.push_back(cloud.y);
    cloud.history.x.push_back(cloud.x);
    cloud.history.parents.emplace_back();
  }
  return cloud;
}

ParticleCloud init(const ValidatedModel& model, const Prior& prior, std::size_t particles, std::uint64_t seed,
                   const FilterOptions& options) {
  validate_prior(prior, model.dim());
  if (particles < 2) throw Error(ErrorCode::InvalidArgument, "need at least two particles");
  if (particles > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::InvalidArgument, "too many particles");
  const auto K = static_cast<Eigen::Index>(particles);
  const auto d = static_cast<Eigen::Index>(model.dim());
  RowMatrix y(K, d);
  RowMatrix x(K, d);
  const Matrix fy = psd_factor(prior.cov_y);
  const Matrix fx = psd_factor(prior.cov_x);
  for_each_chunk(particles, options.workers, [&](std::size_t begin, std::size_t end) {
    gaussian_rows(y, begin, end, prior.mean_y, fy,
                  [&](std::size_t k) { return Rng::stream(seed, stream_tag::kPrior, 0, k); });
    gaussian_rows(x, begin, end, prior.mean_x, fx,
                  [&](std::size_t k) { return Rng::stream(seed, stream_tag::kPrior, 1, k); });
  });
  return make_cloud(std::move(y), std::move(x), 0.0, seed, options.record_history);
}

FilterDiagnostics step(ParticleCloud& cloud, const ValidatedModel& model, const ObservationEvent& event,
                       const FilterOptions& options) {
  const std::size_t d = model.dim();
  if (cloud.dim() != d) throw Error(ErrorCode::DimensionMismatch, "cloud and model dimensions differ");
  if (event.bond >= d) throw Error(ErrorCode::UnknownBond, "event refers to bond " + std::to_string(event.bond));
  if (!std::isfinite(event.time) || !(event.time > cloud.time))
    throw Error(ErrorCode::NonMonotoneTime, "event time must be strictly after the cloud time");
  if (const auto* idb = std::get_if<InterDealer>(&event.kind); idb && !(idb->alpha > 0.0))
    throw Error(ErrorCode::NonPositiveParameter, "d2d alpha must be positive");
  const EventTerms terms = terms_of(event.kind);
  if (!std::isfinite(terms.level) || !std::isfinite(terms.alpha))
    throw Error(ErrorCode::InvalidArgument, "event level must be finite");

  const std::size_t K = cloud.size();
  const auto i = static_cast<Eigen::Index>(event.bond);
  const auto& p = model.params();
  const double tau = event.time - cloud.time;
  const double sigma2_dt = p.sigma[i] * p.sigma[i] * tau;
  const double sigma2_eps = p.sigma_eps[i] * p.sigma_eps[i];
  const double s2 = sigma2_dt + sigma2_eps;
  const double s = std::sqrt(s2);
  const double psi_scale = p.psi_scale[i];
  const std::uint64_t n = cloud.steps + 1;

  // Step 1.
  // Per-thread scratch: steady-state steps allocate no K x d buffers. Worker
  // lambdas must reach it through these references, not by name.
  struct Scratch {
    RowMatrix x_hat, y_new, x_new;
  };
  thread_local Scratch scratch;
  RowMatrix& x_hat = scratch.x_hat;
  RowMatrix& y_new = scratch.y_new;
  RowMatrix& x_new = scratch.x_new;
  draw_spreads(cloud.x, model, tau, cloud.seed, kSpreadTag, n, options.workers, x_hat);

  // Step 2.
  std::vector<double> log_w(K);
  for_each_chunk(K, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      log_w[k] = log_weight(event.kind, cloud.y(r, i), psi_scale * std::exp(x_hat(r, i)), s);
    }
  });
  WeightVector weights = normalize_log_weights(std::move(log_w));

  // Step 3.
  Rng resample_rng = Rng::stream(cloud.seed, stream_tag::kResample, n);
  const std::vector<std::uint32_t> ancestors = resample(weights.norm_w, options.resampling, resample_rng);

  // Steps 4-6.
  const auto& cond = d > 1 ? model.conditional(event.bond) : ConditionalStructure{};
  const Matrix scaled_factor_t = (cond.factor * std::sqrt(tau)).transpose();
  y_new.resize(cloud.y.rows(), cloud.y.cols());
  x_new.resize(cloud.x.rows(), cloud.x.cols());
  for_each_chunk(K, options.workers, [&](std::size_t begin, std::size_t end) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    const auto others = static_cast<Eigen::Index>(cond.others.size());
    // Chunk buffers belong to the executing thread.
    thread_local RowMatrix z;
    thread_local RowMatrix noise;
    thread_local Vector delta;
    z.resize(rows, others);
    noise.resize(rows, others);
    delta.resize(rows);
    for (std::size_t k = begin; k < end; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto a = static_cast<Eigen::Index>(ancestors[k]);
      x_new.row(r) = x_hat.row(a);
      Rng rng = Rng::stream(cloud.seed, stream_tag::kParticle, n, k);
      const double y_prev = cloud.y(a, i);
      const double psi = psi_scale * std::exp(x_hat(a, i));
      const double y_tilde = draw_y_tilde(event.kind, y_prev, psi, s2, rng);
      const ScalarMoments post = conditional_posterior_y(y_prev, y_tilde, sigma2_dt, sigma2_eps);
      const double y_i = post.var > 0.0 ? post.mean + std::sqrt(post.var) * rng.normal() : post.mean;
      y_new(r, i) = y_i;
      delta[r - static_cast<Eigen::Index>(begin)] = y_i - y_prev;
      for (Eigen::Index j = 0; j < others; ++j) z(r - static_cast<Eigen::Index>(begin), j) = rng.normal();
    }
    if (others == 0) return;
    noise.noalias() = z * scaled_factor_t;
    for (std::size_t k = begin; k < end; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto local = r - static_cast<Eigen::Index>(begin);
      const auto a = static_cast<Eigen::Index>(ancestors[k]);
      for (Eigen::Index j = 0; j < others; ++j) {
        const auto col = static_cast<Eigen::Index>(cond.others[static_cast<std::size_t>(j)]);
        y_new(r, col) = cloud.y(a, col) + cond.loading[j] * delta[local] + noise(local, j);
      }
    }
  });

  FilterDiagnostics diag;
  diag.event_index = n;
  diag.time = event.time;
  diag.ess = weights.ess;
  diag.min_log_weight = *std::min_element(weights.log_w.begin(), weights.log_w.end());
  diag.max_log_weight = *std::max_element(weights.log_w.begin(), weights.log_w.end());
  diag.zero_weights = static_cast<std::size_t>(
      std::count_if(weights.norm_w.begin(), weights.norm_w.end(), [](double w) { return w == 0.0; }));
  diag.resample_entropy = offspring_entropy(ancestors);

  cloud.y.swap(y_new);
  cloud.x.swap(x_new);
  cloud.time = event.time;
  cloud.steps = n;
  if (cloud.record_history) {
    cloud.history.times.push_back(cloud.time);
    cloud.history.y.push_back(cloud.y);
    cloud.history.x.push_back(cloud.x);
    cloud.history.parents.push_back(ancestors);
  }
  return diag;
}

PosteriorSummary summarize(double time, const RowMatrix& y, const RowMatrix& x, const Vector& psi_scale,
                           const std::vector<double>& levels) {
  check_levels(levels);
  PosteriorSummary out;
  out.time = time;
  out.levels = levels;
  const Eigen::Index K = y.rows();
  std::vector<double> buf(static_cast<std::size_t>(K));
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    BondSummary b;
    for (Eigen::Index k = 0; k < K; ++k) buf[static_cast<std::size_t>(k)] = y(k, j);
    b.y = stats_of(buf, levels);
    for (Eigen::Index k = 0; k < K; ++k) buf[static_cast<std::size_t>(k)] = psi_scale[j] * std::exp(x(k, j));
    b.psi = stats_of(buf, levels);
    out.bonds.push_back(std::move(b));
  }
  return out;
}

PosteriorSummary posterior(const ParticleCloud& cloud, const ValidatedModel& model,
                           const std::vector<double>& levels) {
  return summarize(cloud.time, cloud.y, cloud.x, model.params().psi_scale, levels);
}

PosteriorSummary predict(const ParticleCloud& cloud, const ValidatedModel& model, double t,
                         const std::vector<double>& levels, const FilterOptions& options) {
  if (!std::isfinite(t) || t < cloud.time) throw Error(ErrorCode::TimeInPast, "prediction time precedes the cloud");
  check_levels(levels);
  if (t == cloud.time) return posterior(cloud, model, levels);
  const double tau = t - cloud.time;
  const std::size_t K = cloud.size();
  const auto d = static_cast<Eigen::Index>(cloud.dim());
  const std::uint64_t tag = stream_tag::kPredict + (cloud.steps << 8);
  const auto t_bits = std::bit_cast<std::uint64_t>(t);
  RowMatrix y(cloud.y.rows(), d);
  const Matrix factor = model.covariance_factor() * std::sqrt(tau);
  for_each_chunk(K, options.workers, [&](std::size_t begin, std::size_t end) {
    gaussian_rows(y, begin, end, Vector::Zero(d), factor,
                  [&](std::size_t k) { return Rng::stream(cloud.seed, tag, t_bits, k); });
    const auto rows = static_cast<Eigen::Index>(end - begin);
    y.middleRows(static_cast<Eigen::Index>(begin), rows) += cloud.y.middleRows(static_cast<Eigen::Index>(begin), rows);
  });
  RowMatrix x;
  draw_spreads(cloud.x, model, tau, cloud.seed, tag + 1, t_bits, options.workers, x);
  return summarize(t, y, x, model.params().psi_scale, levels);
}

Trajectories trajectories(const ParticleCloud& cloud, const ValidatedModel& model) {
  if (!cloud.record_history) throw Error(ErrorCode::HistoryDisabled, "cloud was built without history");
  const auto& h = cloud.history;
  const std::size_t steps = h.times.size();
  const std::size_t K = cloud.size();
  const Vector& scale = model.params().psi_scale;
  Trajectories out;
  out.times = h.times;
  out.y.resize(steps);
  out.psi.resize(steps);
  std::vector<std::uint32_t> line(K);
  std::iota(line.begin(), line.end(), 0U);
  for (std::size_t n = steps; n-- > 0;) {
    RowMatrix& y = out.y[n];
    RowMatrix& psi = out.psi[n];
    y.resize(cloud.y.rows(), cloud.y.cols());
    psi.resize(cloud.y.rows(), cloud.y.cols());
    for (std::size_t k = 0; k < K; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto src = static_cast<Eigen::Index>(line[k]);
      y.row(r) = h.y[n].row(src);
      psi.row(r) = (h.x[n].row(src).array().exp() * scale.transpose().array()).matrix();
    }
    if (n > 0)
      for (auto& idx : line) idx = h.parents[n][idx];
  }
  return out;
}

FilterRun run_filter(const ValidatedModel& model, const Prior& prior, const std::vector<ObservationEvent>& events,
                     std::size_t particles, std::uint64_t seed, const FilterOptions& options) {
  FilterRun run{init(model, prior, particles, seed, options), {}};
  run.diagnostics.reserve(events.size());
  for (const auto& e : events) run.diagnostics.push_back(step(run.cloud, model, e, options));
  return run;
}

}  // namespace bondpf
