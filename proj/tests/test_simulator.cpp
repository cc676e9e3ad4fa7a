#include <cmath>

#include "bondpf/simulator.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bondpf;
using namespace bondpf::testing;

namespace {

SimConfig trio_config(double horizon, double intensity, std::uint64_t seed) {
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.intensity = Vector::Constant(3, intensity);
  cfg.mixture = {0.2, 0.2, 0.2, 0.2, 0.2};
  cfg.away_offset_scale = 2.0;
  cfg.d2d_alpha = Vector::Constant(3, 1.5);
  cfg.seed = seed;
  return cfg;
}

double kind_offset(const ObservationEvent& e, double y, double psi, double eps, double aux) {
  return std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ClientBuy>) return k.Y - (y - psi + eps);
        else if constexpr (std::is_same_v<K, ClientSell>) return k.Y - (y + psi + eps);
        else if constexpr (std::is_same_v<K, TradedAwayBuy>) return k.Z - (y - psi + eps - aux);
        else if constexpr (std::is_same_v<K, TradedAwaySell>) return k.Z - (y + psi + eps + aux);
        else return k.Y - (y + eps + aux);
      },
      e.kind);
}

}  // namespace

TEST_CASE("zero intensity gives a path and no events") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  SimConfig cfg = trio_config(5.0, 0.0, 1);
  const MarketTruth t = simulate(m, trio_prior(p, Vector::Constant(3, 100.0)), cfg);
  CHECK(t.events.empty());
  CHECK(t.y_horizon.size() == 3);
  CHECK(t.y_horizon != t.y0);
}

TEST_CASE("noiseless client buys sit exactly at y - Psi") {
  const ModelParams p = scalar_params(0.5, 0.0, 0.8);
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(1));
  SimConfig cfg;
  cfg.horizon = 10.0;
  cfg.intensity = Vector::Constant(1, 20.0);
  cfg.mixture = {1.0, 0.0, 0.0, 0.0, 0.0};
  cfg.d2d_alpha = Vector::Ones(1);
  cfg.seed = 2;
  const MarketTruth t = simulate(m, scalar_prior(100.0, 1.0), cfg);
  REQUIRE(t.events.size() > 100);
  for (std::size_t n = 0; n < t.events.size(); ++n) {
    REQUIRE(std::holds_alternative<ClientBuy>(t.events[n].kind));
    CHECK(std::get<ClientBuy>(t.events[n].kind).Y == t.y_true(static_cast<Eigen::Index>(n), 0) - 0.8);
  }
}

TEST_CASE("events are consistent with the stored path and draws") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  const MarketTruth t = simulate(m, trio_prior(p, Vector::Constant(3, 100.0)), trio_config(20.0, 10.0, 3));
  REQUIRE(t.events.size() > 300);
  std::array<int, 5> seen{};
  for (std::size_t n = 0; n < t.events.size(); ++n) {
    const auto& e = t.events[n];
    const auto r = static_cast<Eigen::Index>(n);
    const auto i = static_cast<Eigen::Index>(e.bond);
    const double psi = p.psi_scale[i] * std::exp(t.x_true(r, i));
    CHECK(std::abs(kind_offset(e, t.y_true(r, i), psi, t.eps[n], t.aux[n])) < 1e-12);
    ++seen[e.kind.index()];
    if (const auto* away = std::get_if<TradedAwayBuy>(&e.kind))
      CHECK(away->Z <= t.y_true(r, i) - psi + t.eps[n]);
    if (const auto* away = std::get_if<TradedAwaySell>(&e.kind))
      CHECK(away->Z >= t.y_true(r, i) + psi + t.eps[n]);
    if (const auto* idb = std::get_if<InterDealer>(&e.kind)) {
      CHECK(idb->Y >= t.y_true(r, i) - idb->alpha + t.eps[n]);
      CHECK(idb->Y <= t.y_true(r, i) + idb->alpha + t.eps[n]);
    }
    if (n > 0) CHECK(t.times[n] > t.times[n - 1]);
  }
  for (int c : seen) CHECK(c > 20);
  CHECK_NOTHROW(validate_events(t.events, 3));
}

TEST_CASE("same seed reproduces, different seed differs") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  const Prior prior = trio_prior(p, Vector::Constant(3, 100.0));
  const MarketTruth a = simulate(m, prior, trio_config(3.0, 5.0, 4));
  const MarketTruth b = simulate(m, prior, trio_config(3.0, 5.0, 4));
  const MarketTruth c = simulate(m, prior, trio_config(3.0, 5.0, 5));
  CHECK(a.events == b.events);
  CHECK(a.y_true == b.y_true);
  CHECK(a.events != c.events);
}

TEST_CASE("daily increments reproduce sigma and rho over 10^4 days") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  SimConfig cfg = trio_config(10'000.0, 0.0, 6);
  cfg.composite = CompositeGrid{1.0, 6.0};
  const MarketTruth t = simulate(m, trio_prior(p, Vector::Constant(3, 100.0)), cfg);
  const auto& s = t.composite.samples;
  REQUIRE(s[0].size() == 10'001);
  Matrix inc(10'000, 3);
  for (Eigen::Index n = 0; n < 10'000; ++n)
    for (Eigen::Index i = 0; i < 3; ++i)
      inc(n, i) = s[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + 1)].mid -
                  s[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)].mid;
  const Matrix centered = inc.rowwise() - inc.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 9'999.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(std::abs(std::sqrt(cov(i, i)) / p.sigma[i] - 1.0) < 0.05);
    for (Eigen::Index j = 0; j < i; ++j)
      CHECK(std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)) - p.rho(i, j)) < 0.02);
  }
}

TEST_CASE("IID spreads are independent log-normals with the configured moments") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  const MarketTruth t = simulate(m, trio_prior(p, Vector::Constant(3, 100.0)), trio_config(2000.0, 10.0, 7));
  const auto N = t.x_true.rows();
  REQUIRE(N > 50'000);
  const Vector col = t.x_true.col(0);
  const double mean = col.mean();
  const Vector c = col.array() - mean;
  const double lag1 = c.head(N - 1).dot(c.tail(N - 1)) / c.squaredNorm();
  CHECK(std::abs(lag1) < 3.0 / std::sqrt(static_cast<double>(N)));
  const Vector psi = col.array().exp();
  const double m_psi = psi.mean();
  const double s_psi = std::sqrt((psi.array() - m_psi).square().sum() / static_cast<double>(N - 1));
  CHECK(std::abs(m_psi / 0.79 - 1.0) < 0.03);
  CHECK(std::abs(s_psi / 0.79 - 1.0) < 0.08);
}

TEST_CASE("OU spreads follow the exact transition") {
  ModelParams p = scalar_params(0.5, 0.1);
  p.spread = OuSpread{Vector::Constant(1, 1.5), Matrix::Constant(1, 1, 0.9)};
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(1));
  SimConfig cfg;
  cfg.horizon = 20'000.0;
  cfg.intensity = Vector::Zero(1);
  cfg.d2d_alpha = Vector::Ones(1);
  cfg.composite = CompositeGrid{0.5, 6.0};
  cfg.seed = 8;
  const MarketTruth t = simulate(m, scalar_prior(0.0, 1.0), cfg);
  const auto& s = t.composite.samples[0];
  std::vector<double> x;
  for (const auto& c : s) x.push_back(std::log(*c.spread / 6.0));
  // AR(1) coefficient of the sampled OU is exp(-a step); stationary variance VV'/(2a).
  double num = 0.0;
  double den = 0.0;
  double ss = 0.0;
  for (std::size_t n = 1; n < x.size(); ++n) {
    num += x[n] * x[n - 1];
    den += x[n - 1] * x[n - 1];
    ss += x[n] * x[n];
  }
  CHECK(std::abs(num / den - std::exp(-0.75)) < 0.02);
  CHECK(std::abs(ss / static_cast<double>(x.size() - 1) - 0.3) < 0.02);
}

TEST_CASE("config validation names the field") {
  const ModelParams p = trio_params();
  const ValidatedModel m = validate_params(p, BondUniverse::numbered(3));
  const Prior prior = trio_prior(p, Vector::Constant(3, 100.0));
  auto message = [&](SimConfig cfg) -> std::string {
    try {
      simulate(m, prior, cfg);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidConfig);
      return e.what();
    }
    return "";
  };
  SimConfig bad = trio_config(1.0, 1.0, 0);
  bad.mixture = {0.2, 0.2, 0.2, 0.2, 0.1};
  CHECK(message(bad).starts_with("mixture"));
  bad = trio_config(-1.0, 1.0, 0);
  CHECK(message(bad).starts_with("horizon"));
  bad = trio_config(1.0, 1.0, 0);
  bad.intensity = Vector::Ones(2);
  CHECK(message(bad).starts_with("intensity"));
  bad = trio_config(1.0, 1.0, 0);
  bad.d2d_alpha[1] = 0.0;
  CHECK(message(bad).starts_with("d2d_alpha"));
}
