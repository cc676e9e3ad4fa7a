#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bondpf/error.hpp"

namespace bondpf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Particle-major storage: row k is particle k.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BondUniverse {
  std::vector<std::string> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  /// Index of a label, or size() when absent.
  [[nodiscard]] std::size_t find(const std::string& label) const noexcept;

  static BondUniverse numbered(std::size_t d);
};

/// Log-spread x follows dx = -A x dt + V dB with A = diag(a).
struct OuSpread {
  Vector a;    // day^-1
  Matrix vvt;  // V V', day^-1
};

/// Log-spreads drawn afresh at every event, independently per bond.
struct IidSpread {
  Vector mean;
  Vector var;
};

using SpreadDynamics = std::variant<OuSpread, IidSpread>;

/// Units: basis points for yields, days for time.
struct ModelParams {
  Vector sigma;      // bp day^-1/2
  Matrix rho;
  Vector psi_scale;  // bp, psi = psi_scale * exp(x)
  Vector sigma_eps;  // bp
  SpreadDynamics spread = IidSpread{};
};

/// Gaussian prior for (y0, x0) with independent y and x blocks.
struct Prior {
  Vector mean_y;
  Matrix cov_y;
  Vector mean_x;
  Matrix cov_x;
};

/// Step-6 structure for one observed bond: the other coordinates move by
/// `loading * delta` plus Gaussian noise with covariance `cov * tau`.
struct ConditionalStructure {
  std::vector<std::size_t> others;  // indices != i, in increasing order
  Vector loading;                   // rho(i,j) sigma_j / sigma_i
  Matrix cov;                       // Sigma_{|i} per unit time
  Matrix factor;                    // cov = factor * factor'
};

class ValidatedModel {
 public:
  [[nodiscard]] const BondUniverse& universe() const noexcept { return universe_; }
  [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
  [[nodiscard]] std::size_t dim() const noexcept { return universe_.size(); }

  /// Sigma(i,j) = rho(i,j) sigma_i sigma_j.
  [[nodiscard]] const Matrix& covariance() const noexcept { return cov_; }
  [[nodiscard]] const Matrix& covariance_factor() const noexcept { return cov_factor_; }
  /// Square-root factor of VV' (OU mode only, empty otherwise).
  [[nodiscard]] const Matrix& vvt_factor() const noexcept { return vvt_factor_; }
  [[nodiscard]] const ConditionalStructure& conditional(std::size_t bond) const {
    return conditional_.at(bond);
  }

  [[nodiscard]] bool is_ou() const noexcept {
    return std::holds_alternative<OuSpread>(params_.spread);
  }

  friend ValidatedModel validate_params(const ModelParams& params, const BondUniverse& universe);

 private:
  ValidatedModel() = default;

  BondUniverse universe_;
  ModelParams params_;
  Matrix cov_;
  Matrix cov_factor_;
  Matrix vvt_factor_;
  std::vector<ConditionalStructure> conditional_;
};

/// Checks dimensions, positivity and positive semi-definiteness, then caches
/// the square-root factors. Throws ValidationError listing every violation.
ValidatedModel validate_params(const ModelParams& params, const BondUniverse& universe);

/// Throws Error(InvalidPrior) if the prior does not fit a d-bond model.
void validate_prior(const Prior& prior, std::size_t d);

// Observation events. Yields in bp.
struct ClientBuy {
  double Y;
};
struct ClientSell {
  double Y;
};
struct TradedAwayBuy {
  double Z;
};
struct TradedAwaySell {
  double Z;
};
struct InterDealer {
  double Y;
  double alpha;
};

using EventKind = std::variant<ClientBuy, ClientSell, TradedAwayBuy, TradedAwaySell, InterDealer>;

struct ObservationEvent {
  double time = 0.0;  // days
  std::size_t bond = 0;
  EventKind kind = ClientBuy{0.0};

  friend bool operator==(const ObservationEvent&, const ObservationEvent&) = default;
};

inline bool operator==(const ClientBuy& a, const ClientBuy& b) { return a.Y == b.Y; }
inline bool operator==(const ClientSell& a, const ClientSell& b) { return a.Y == b.Y; }
inline bool operator==(const TradedAwayBuy& a, const TradedAwayBuy& b) { return a.Z == b.Z; }
inline bool operator==(const TradedAwaySell& a, const TradedAwaySell& b) { return a.Z == b.Z; }
inline bool operator==(const InterDealer& a, const InterDealer& b) {
  return a.Y == b.Y && a.alpha == b.alpha;
}

/// Wire names: client_buy, client_sell, away_buy, away_sell, d2d.
std::string kind_name(const EventKind& kind);

/// Checks bond range, alpha > 0, finiteness and strictly increasing times.
void validate_events(const std::vector<ObservationEvent>& events, std::size_t d);

// Linear-algebra helpers shared across modules.

/// Smallest eigenvalue >= -tol * max(|largest|, tiny) and symmetric.
bool is_psd(const Matrix& m, double tol = 1e-10);

/// Returns F with F F' = m. Cholesky when m is positive definite, otherwise
/// an eigen-decomposition with negative eigenvalues clipped to zero.
Matrix psd_factor(const Matrix& m);

}  // namespace bondpf
