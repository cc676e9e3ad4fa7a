#include "bondpf/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace bondpf {

namespace {

constexpr std::size_t kMinIncrements = 30;

struct GridPath {
  std::vector<double> value;
  std::vector<bool> usable;  // increment n -> n+1 usable
};

GridPath align(const std::vector<CompositeSample>& samples, double start, double step, std::size_t points) {
  GridPath out;
  out.value.resize(points);
  out.usable.assign(points > 0 ? points - 1 : 0, false);
  std::vector<bool> fresh(points, false);
  std::size_t cursor = 0;
  double last = samples.front().mid;
  for (std::size_t n = 0; n < points; ++n) {
    const double g = start + static_cast<double>(n) * step;
    bool seen = false;
    while (cursor < samples.size() && samples[cursor].t <= g + 1e-12 * step) {
      last = samples[cursor].mid;
      seen = true;
      ++cursor;
    }
    out.value[n] = last;
    fresh[n] = n == 0 || seen;
  }
  for (std::size_t n = 1; n < points; ++n) out.usable[n - 1] = fresh[n] && fresh[n - 1];
  return out;
}

struct Moments2 {
  std::size_t n = 0;
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
};

Moments2 paired_moments(const GridPath& a, const GridPath& b) {
  std::vector<double> da;
  std::vector<double> db;
  for (std::size_t n = 0; n < a.usable.size(); ++n) {
    if (!a.usable[n] || !b.usable[n]) continue;
    da.push_back(a.value[n + 1] - a.value[n]);
    db.push_back(b.value[n + 1] - b.value[n]);
  }
  Moments2 m;
  m.n = da.size();
  if (m.n < 2) return m;
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t k = 0; k < m.n; ++k) {
    ma += da[k];
    mb += db[k];
  }
  ma /= static_cast<double>(m.n);
  mb /= static_cast<double>(m.n);
  for (std::size_t k = 0; k < m.n; ++k) {
    m.cov += (da[k] - ma) * (db[k] - mb);
    m.var_a += (da[k] - ma) * (da[k] - ma);
    m.var_b += (db[k] - mb) * (db[k] - mb);
  }
  const double denom = static_cast<double>(m.n - 1);
  m.cov /= denom;
  m.var_a /= denom;
  m.var_b /= denom;
  return m;
}

}  // namespace

void validate_series(const CompositeSeries& series) {
  if (series.labels.size() != series.samples.size())
    throw Error(ErrorCode::DimensionMismatch, "composite series: label and sample counts differ");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!seen.insert(series.labels[i]).second)
      throw Error(ErrorCode::InvalidArgument, "composite series: duplicate bond " + series.labels[i]);
    const auto& s = series.samples[i];
    for (std::size_t n = 0; n < s.size(); ++n) {
      if (!std::isfinite(s[n].t) || !std::isfinite(s[n].mid))
        throw Error(ErrorCode::InvalidArgument, "composite series: non-finite sample for " + series.labels[i]);
      if (n > 0 && !(s[n].t > s[n - 1].t))
        throw Error(ErrorCode::NonMonotoneTime, "composite series: timestamps not increasing for " + series.labels[i]);
      if (s[n].spread && !(*s[n].spread > 0.0))
        throw Error(ErrorCode::NonPositiveParameter, "composite series: nonpositive spread for " + series.labels[i]);
    }
  }
}

Matrix repair_correlation(const Matrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.transpose()));
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  Matrix c = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  const Vector inv_sd = c.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  c = inv_sd.asDiagonal() * c * inv_sd.asDiagonal();
  c = 0.5 * (c + c.transpose());
  c.diagonal().setOnes();
  return c;
}

VolatilityEstimate estimate_sigma_rho(const CompositeSeries& series, double sampling_interval) {
  validate_series(series);
  if (!(sampling_interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampling interval must be positive");
  const std::size_t d = series.size();
  if (d == 0) throw Error(ErrorCode::InsufficientData, "composite series has no bonds");
  double start = -std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d; ++i) {
    if (series.samples[i].empty())
      throw Error(ErrorCode::InsufficientData, "no composite samples for " + series.labels[i]);
    start = std::max(start, series.samples[i].front().t);
    end = std::min(end, series.samples[i].back().t);
  }
  if (!(end > start)) throw Error(ErrorCode::NoOverlap, "composite series do not overlap in time");
  const auto points = static_cast<std::size_t>(std::floor((end - start) / sampling_interval + 1e-9)) + 1;

  std::vector<GridPath> paths;
  paths.reserve(d);
  for (std::size_t i = 0; i < d; ++i) paths.push_back(align(series.samples[i], start, sampling_interval, points));

  VolatilityEstimate out;
  const auto dn = static_cast<Eigen::Index>(d);
  out.sigma.resize(dn);
  out.rho = Matrix::Identity(dn, dn);
  for (std::size_t i = 0; i < d; ++i) {
    const Moments2 m = paired_moments(paths[i], paths[i]);
    if (m.n < kMinIncrements)
      throw Error(ErrorCode::InsufficientData, "only " + std::to_string(m.n) + " usable increments for " + series.labels[i]);
    if (!(m.var_a > 0.0))
      throw Error(ErrorCode::InsufficientData, "degenerate (zero) volatility for " + series.labels[i]);
    out.sigma[static_cast<Eigen::Index>(i)] = std::sqrt(m.var_a / sampling_interval);
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const Moments2 m = paired_moments(paths[i], paths[j]);
      if (m.n < kMinIncrements)
        throw Error(ErrorCode::InsufficientData,
                    "only " + std::to_string(m.n) + " joint increments for " + series.labels[i] + "/" + series.labels[j]);
      const double denom = std::sqrt(m.var_a * m.var_b);
      const double r = denom > 0.0 ? std::clamp(m.cov / denom, -1.0, 1.0) : 0.0;
      out.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      out.rho(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    }
  }
  if (!is_psd(out.rho)) {
    out.rho = repair_correlation(out.rho);
    out.repaired = true;
  }
  return out;
}

SpreadFit lognormal_from_moments(double mean, double std) {
  if (!(mean > 0.0) || !std::isfinite(mean))
    throw Error(ErrorCode::InsufficientData, "degenerate spread law: mean must be positive");
  if (!(std >= 0.0) || !std::isfinite(std)) throw Error(ErrorCode::InvalidArgument, "spread std must be nonnegative");
  SpreadFit fit;
  fit.mean = mean;
  fit.std = std;
  fit.psi_scale = 1.0;
  fit.var_x = std::log1p((std * std) / (mean * mean));
  fit.mean_x = std::log(mean) - 0.5 * fit.var_x;
  return fit;
}

Vector average_spread(const CompositeSeries& series) {
  Vector out(static_cast<Eigen::Index>(series.size()));
  for (std::size_t i = 0; i < series.size(); ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : series.samples[i]) {
      if (!s.spread) continue;
      sum += *s.spread;
      ++n;
    }
    if (n == 0) throw Error(ErrorCode::MissingSpreads, "no composite spreads for " + series.labels[i]);
    out[static_cast<Eigen::Index>(i)] = sum / static_cast<double>(n);
  }
  return out;
}

Vector derive_sigma_eps(const CompositeSeries& series, double fraction) {
  if (!(fraction >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise fraction must be nonnegative");
  return fraction * average_spread(series);
}

std::vector<SpreadFit> fit_spread_lognormal(const SpreadProxySample& proxies, const CompositeSeries* series,
                                            const SpreadFitOptions& options) {
  const std::size_t d = options.mode == SpreadFitMode::Composite || proxies.values.empty()
                            ? (series != nullptr ? series->size() : 0)
                            : proxies.values.size();
  if (series != nullptr && series->size() != d)
    throw Error(ErrorCode::DimensionMismatch, "proxy and composite bond counts differ");

  auto composite_fit = [&](std::size_t i) {
    if (series == nullptr)
      throw Error(ErrorCode::InsufficientData, "no composite spreads available for bond " + std::to_string(i + 1));
    CompositeSeries one{{series->labels[i]}, {series->samples[i]}};
    const double half = 0.5 * average_spread(one)[0];
    return lognormal_from_moments(options.mean_fraction * half, options.std_fraction * half);
  };

  std::vector<SpreadFit> fits;
  fits.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (options.mode == SpreadFitMode::Composite) {
      fits.push_back(composite_fit(i));
      continue;
    }
    const auto& v = proxies.values[i];
    if (v.size() < options.min_proxies) {
      if (series == nullptr)
        throw Error(ErrorCode::InsufficientData,
                    "only " + std::to_string(v.size()) + " spread proxies for bond " + std::to_string(i + 1) +
                        " and no composite fallback");
      SpreadFit fit = composite_fit(i);
      fit.used_fallback = true;
      fits.push_back(fit);
      continue;
    }
    double mean = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spread proxies must be nonnegative");
      mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    if (!(std > 1e-12 * mean))
      throw Error(ErrorCode::InsufficientData, "spread proxies have zero dispersion for bond " + std::to_string(i + 1));
    fits.push_back(lognormal_from_moments(mean, std));
  }
  return fits;
}

OuSpread ou_from_stationary(const std::vector<SpreadFit>& fits, const Vector& a) {
  const auto d = static_cast<Eigen::Index>(fits.size());
  if (a.size() != d) throw Error(ErrorCode::DimensionMismatch, "one reversion rate per bond is required");
  OuSpread ou{a, Matrix::Zero(d, d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(a[i] > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "reversion rates must be positive");
    ou.vvt(i, i) = 2.0 * a[i] * fits[static_cast<std::size_t>(i)].var_x;
  }
  return ou;
}

SpreadProxySample spread_proxies(const CompositeSeries& series, const std::vector<TradePrint>& trades) {
  validate_series(series);
  SpreadProxySample out;
  out.values.assign(series.size(), {});
  for (const auto& trade : trades) {
    if (trade.bond >= series.size()) throw Error(ErrorCode::UnknownBond, "trade refers to an unknown bond");
    const auto& s = series.samples[trade.bond];
    const auto it = std::upper_bound(s.begin(), s.end(), trade.t,
                                     [](double t, const CompositeSample& c) { return t < c.t; });
    if (it == s.begin()) continue;
    out.values[trade.bond].push_back(std::abs(trade.ytb - std::prev(it)->mid));
  }
  return out;
}

}  // namespace bondpf
