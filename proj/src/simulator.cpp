#include "bondpf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bondpf/gaussian.hpp"
#include "bondpf/rng.hpp"

namespace bondpf {

namespace {

void fail(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::InvalidConfig, field + ": " + message);
}

std::size_t categorical(const double* p, std::size_t n, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += p[j];
    if (u < acc) return j;
  }
  for (std::size_t j = n; j-- > 0;)
    if (p[j] > 0.0) return j;
  return n - 1;
}

Vector draw_gaussian(const Vector& mean, const Matrix& factor, Rng& rng) {
  Vector z(factor.cols());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  return mean + factor * z;
}

}  // namespace

void validate_sim_config(const SimConfig& cfg, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) fail("horizon", "must be a positive number of days");
  if (cfg.intensity.size() != n) fail("intensity", "needs one entry per bond");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(cfg.intensity[i] >= 0.0) || !std::isfinite(cfg.intensity[i])) fail("intensity", "must be nonnegative");
  double total = 0.0;
  for (double p : cfg.mixture) {
    if (!(p >= 0.0)) fail("mixture", "probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("mixture", "probabilities sum to " + std::to_string(total) + ", not 1");
  if (!(cfg.away_offset_scale >= 0.0)) fail("away_offset_scale", "must be nonnegative");
  if (cfg.d2d_alpha.size() != n) fail("d2d_alpha", "needs one entry per bond");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(cfg.d2d_alpha[i] > 0.0)) fail("d2d_alpha", "must be positive");
  if (cfg.composite) {
    if (!(cfg.composite->step > 0.0)) fail("composite.step", "must be positive");
    if (!(cfg.composite->spread_multiple > 0.0)) fail("composite.spread_multiple", "must be positive");
  }
}

MarketTruth simulate(const ValidatedModel& model, const Prior& prior, const SimConfig& cfg) {
  const std::size_t d = model.dim();
  validate_sim_config(cfg, d);
  validate_prior(prior, d);
  const auto& p = model.params();
  const auto dn = static_cast<Eigen::Index>(d);

  Rng rng = Rng::stream(cfg.seed, stream_tag::kSimulator);
  MarketTruth truth;
  truth.horizon = cfg.horizon;
  truth.y0 = draw_gaussian(prior.mean_y, psd_factor(prior.cov_y), rng);
  truth.x0 = draw_gaussian(prior.mean_x, psd_factor(prior.cov_x), rng);

  // Arrivals of the merged Poisson process.
  struct Arrival {
    double t;
    std::size_t bond;
    std::size_t kind;
  };
  std::vector<Arrival> arrivals;
  const double total_rate = cfg.intensity.sum();
  if (total_rate > 0.0) {
    Rng clock = Rng::stream(cfg.seed, stream_tag::kSimulator, 1);
    const Vector share = cfg.intensity / total_rate;
    for (double t = clock.exponential() / total_rate; t <= cfg.horizon; t += clock.exponential() / total_rate) {
      const std::size_t bond = categorical(share.data(), d, clock.uniform());
      const std::size_t kind = categorical(cfg.mixture.data(), cfg.mixture.size(), clock.uniform());
      arrivals.push_back({t, bond, kind});
    }
  }

  // Timeline: events, composite grid points, horizon.
  enum class Mark { Event, Grid, Horizon };
  struct Point {
    double t;
    Mark mark;
    std::size_t index;
  };
  std::vector<Point> timeline;
  for (std::size_t n = 0; n < arrivals.size(); ++n) timeline.push_back({arrivals[n].t, Mark::Event, n});
  if (cfg.composite) {
    const auto count = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.composite->step + 1e-9));
    for (std::size_t g = 0; g <= count; ++g)
      timeline.push_back({static_cast<double>(g) * cfg.composite->step, Mark::Grid, g});
    truth.composite.labels = model.universe().labels;
    truth.composite.samples.assign(d, {});
  }
  timeline.push_back({cfg.horizon, Mark::Horizon, 0});
  std::stable_sort(timeline.begin(), timeline.end(), [](const Point& a, const Point& b) { return a.t < b.t; });

  truth.y_true.resize(static_cast<Eigen::Index>(arrivals.size()), dn);
  truth.x_true.resize(static_cast<Eigen::Index>(arrivals.size()), dn);

  const Matrix& cov_factor = model.covariance_factor();
  Vector y = truth.y0;
  Vector x = truth.x0;
  double now = 0.0;
  for (const Point& pt : timeline) {
    const double dt = pt.t - now;
    if (dt > 0.0) {
      y += std::sqrt(dt) * draw_gaussian(Vector::Zero(dn), cov_factor, rng);
      if (const auto* ou = std::get_if<OuSpread>(&p.spread)) {
        const OuTransition tr = ou_transition(ou->a, ou->vvt, dt);
        x = draw_gaussian(tr.mean_factor.cwiseProduct(x), psd_factor(tr.cov), rng);
      } else {
        const auto& iid = std::get<IidSpread>(p.spread);
        for (Eigen::Index j = 0; j < dn; ++j) x[j] = iid.mean[j] + std::sqrt(iid.var[j]) * rng.normal();
      }
      now = pt.t;
    }
    if (pt.mark == Mark::Grid) {
      for (std::size_t j = 0; j < d; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        truth.composite.samples[j].push_back(
            {pt.t, y[c], cfg.composite->spread_multiple * p.psi_scale[c] * std::exp(x[c])});
      }
      continue;
    }
    if (pt.mark == Mark::Horizon) continue;

    const Arrival& a = arrivals[pt.index];
    const auto i = static_cast<Eigen::Index>(a.bond);
    const double psi = p.psi_scale[i] * std::exp(x[i]);
    const double eps = p.sigma_eps[i] * rng.normal();
    double aux = 0.0;
    ObservationEvent e;
    e.time = a.t;
    e.bond = a.bond;
    switch (a.kind) {
      case 0:
        e.kind = ClientBuy{y[i] - psi + eps};
        break;
      case 1:
        e.kind = ClientSell{y[i] + psi + eps};
        break;
      case 2:
        aux = std::abs(cfg.away_offset_scale * rng.normal());
        e.kind = TradedAwayBuy{y[i] - psi + eps - aux};
        break;
      case 3:
        aux = std::abs(cfg.away_offset_scale * rng.normal());
        e.kind = TradedAwaySell{y[i] + psi + eps + aux};
        break;
      default:
        aux = cfg.d2d_alpha[i] * (2.0 * rng.uniform() - 1.0);
        e.kind = InterDealer{y[i] + eps + aux, cfg.d2d_alpha[i]};
        break;
    }
    const auto row = static_cast<Eigen::Index>(truth.events.size());
    truth.y_true.row(row) = y.transpose();
    truth.x_true.row(row) = x.transpose();
    truth.times.push_back(a.t);
    truth.events.push_back(e);
    truth.eps.push_back(eps);
    truth.aux.push_back(aux);
  }
  truth.y_horizon = y;
  truth.x_horizon = x;
  return truth;
}

}  // namespace bondpf
