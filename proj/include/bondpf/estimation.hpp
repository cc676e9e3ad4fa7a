#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bondpf/model.hpp"

namespace bondpf {

struct CompositeSample {
  double t = 0.0;                 // days
  double mid = 0.0;               // composite mid YtB, bp
  std::optional<double> spread;   // composite full bid-ask spread, bp
};

/// Composite (e.g. CBBT-style) mid and spread samples per bond.
struct CompositeSeries {
  std::vector<std::string> labels;
  std::vector<std::vector<CompositeSample>> samples;  // per bond, strictly increasing t

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

/// Per bond: |trade YtB - composite mid YtB| values, bp.
struct SpreadProxySample {
  std::vector<std::vector<double>> values;
};

/// Checks label uniqueness, increasing timestamps, positive spreads.
void validate_series(const CompositeSeries& series);

struct VolatilityEstimate {
  Vector sigma;   // bp day^-1/2
  Matrix rho;
  bool repaired = false;  // correlation matrix was projected back to PSD
};

/// Sample covariance of last-observation-carried-forward increments on a
/// regular grid of step `sampling_interval` days. An increment counts for a
/// bond only if the bond printed a fresh sample in that grid interval and in
/// the one before it; pairs use increments fresh on both bonds.
/// Throws InsufficientData (fewer than 30 increments, or zero volatility) or
/// NoOverlap.
VolatilityEstimate estimate_sigma_rho(const CompositeSeries& series, double sampling_interval);

/// Nearest PSD correlation by eigenvalue clipping at 0 and rescaling to unit diagonal.
Matrix repair_correlation(const Matrix& rho);

enum class SpreadFitMode { Composite, Data };

struct SpreadFitOptions {
  SpreadFitMode mode = SpreadFitMode::Composite;
  /// Composite mode targets: fractions of the average composite half-spread.
  double mean_fraction = 1.0 / 3.0;
  double std_fraction = 1.0 / 3.0;
  std::size_t min_proxies = 10;
};

struct SpreadFit {
  double mean = 0.0;      // target E[psi], bp
  double std = 0.0;       // target SD[psi], bp
  double psi_scale = 1.0;
  double mean_x = 0.0;
  double var_x = 0.0;
  bool used_fallback = false;  // data mode fell back to composite targets
};

/// Log-normal moment matching with psi_scale = 1:
/// var_x = ln(1 + s^2/m^2), mean_x = ln m - var_x / 2.
SpreadFit lognormal_from_moments(double mean, double std);

/// Per-bond log-normal spread law. Data mode uses proxy moments and falls back
/// to composite targets when a bond has too few proxies and spreads exist.
std::vector<SpreadFit> fit_spread_lognormal(const SpreadProxySample& proxies, const CompositeSeries* series,
                                            const SpreadFitOptions& options);

/// Builds an OU spread law whose stationary variance matches each fit, for
/// user-chosen reversion rates. Cross-bond spread correlation is not fitted.
OuSpread ou_from_stationary(const std::vector<SpreadFit>& fits, const Vector& a);

/// sigma_eps_i = fraction * average composite spread of bond i.
Vector derive_sigma_eps(const CompositeSeries& series, double fraction);

/// Mean composite full spread of each bond. Throws MissingSpreads.
Vector average_spread(const CompositeSeries& series);

/// Proxy |trade - composite mid| with the mid carried forward to each trade time.
struct TradePrint {
  double t = 0.0;
  std::size_t bond = 0;
  double ytb = 0.0;
};
SpreadProxySample spread_proxies(const CompositeSeries& series, const std::vector<TradePrint>& trades);

}  // namespace bondpf
