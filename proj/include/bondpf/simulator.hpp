#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "bondpf/estimation.hpp"
#include "bondpf/model.hpp"

namespace bondpf {

/// Probabilities of the five event kinds, in wire order
/// client_buy, client_sell, away_buy, away_sell, d2d.
using EventMixture = std::array<double, 5>;

struct CompositeGrid {
  double step = 1.0;             // days
  double spread_multiple = 6.0;  // composite full spread = multiple * psi
};

struct SimConfig {
  double horizon = 1.0;               // days
  Vector intensity;                   // events per bond per day
  EventMixture mixture{0.2, 0.2, 0.2, 0.2, 0.2};
  double away_offset_scale = 1.0;     // half-normal scale of losing-quote offsets, bp
  Vector d2d_alpha;                   // per bond band half-width, bp
  std::optional<CompositeGrid> composite;
  std::uint64_t seed = 0;
};

/// Throws Error(InvalidConfig) naming the offending field.
void validate_sim_config(const SimConfig& cfg, std::size_t d);

struct MarketTruth {
  Vector y0;
  Vector x0;
  std::vector<double> times;
  RowMatrix y_true;  // N x d at event times
  RowMatrix x_true;
  std::vector<ObservationEvent> events;
  /// Per event: observation noise and the auxiliary draw (losing-quote offset
  /// for away events, position inside the band for d2d, 0 otherwise).
  std::vector<double> eps;
  std::vector<double> aux;
  double horizon = 0.0;
  Vector y_horizon;
  Vector x_horizon;
  CompositeSeries composite;  // empty unless a grid is configured
};

/// Exact simulation: Brownian mids and OU (or i.i.d.) log-spreads, Poisson
/// event arrivals, and observations generated from the true state.
MarketTruth simulate(const ValidatedModel& model, const Prior& prior, const SimConfig& cfg);

}  // namespace bondpf
