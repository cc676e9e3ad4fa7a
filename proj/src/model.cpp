#include "bondpf/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace bondpf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveSemiDefinite: return "NotPositiveSemiDefinite";
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::WrongSpreadMode: return "WrongSpreadMode";
    case ErrorCode::WrongDimension: return "WrongDimension";
    case ErrorCode::EmptyInterval: return "EmptyInterval";
    case ErrorCode::DegenerateBoth: return "DegenerateBoth";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::AllWeightsZero: return "AllWeightsZero";
    case ErrorCode::UnknownBond: return "UnknownBond";
    case ErrorCode::TimeInPast: return "TimeInPast";
    case ErrorCode::HistoryDisabled: return "HistoryDisabled";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::MissingSpreads: return "MissingSpreads";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << "invalid model:";
  for (const auto& v : violations) os << " [" << to_string(v.code) << " " << v.field << ": " << v.message << "]";
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidArgument : violations.front().code,
            join_violations(violations)),
      violations_(std::move(violations)) {}

bool ValidationError::has(ErrorCode code) const noexcept {
  for (const auto& v : violations_)
    if (v.code == code) return true;
  return false;
}

std::size_t BondUniverse::find(const std::string& label) const noexcept {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  return labels.size();
}

BondUniverse BondUniverse::numbered(std::size_t d) {
  BondUniverse u;
  for (std::size_t i = 0; i < d; ++i) u.labels.push_back("bond" + std::to_string(i + 1));
  return u;
}

bool is_psd(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if (!m.allFinite()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double largest = std::max(std::abs(ev.maxCoeff()), 1e-300);
  return ev.minCoeff() >= -tol * largest;
}

Matrix psd_factor(const Matrix& m) {
  if (m.size() == 0) return m;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) {
    Matrix l = llt.matrixL();
    if (l.allFinite()) return l;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

namespace {

class Checker {
 public:
  explicit Checker(std::size_t d) : d_(static_cast<Eigen::Index>(d)) {}

  bool vector(const Vector& v, const char* field) {
    if (v.size() != d_) {
      add(ErrorCode::DimensionMismatch, field,
          "length " + std::to_string(v.size()) + ", expected " + std::to_string(d_));
      return false;
    }
    if (!v.allFinite()) {
      add(ErrorCode::NonPositiveParameter, field, "non-finite entry");
      return false;
    }
    return true;
  }

  bool matrix(const Matrix& m, const char* field) {
    if (m.rows() != d_ || m.cols() != d_) {
      add(ErrorCode::DimensionMismatch, field,
          std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
              std::to_string(d_) + "x" + std::to_string(d_));
      return false;
    }
    if (!m.allFinite()) {
      add(ErrorCode::NotPositiveSemiDefinite, field, "non-finite entry");
      return false;
    }
    return true;
  }

  void positive(const Vector& v, const char* field, bool allow_zero = false) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (allow_zero ? v[i] < 0.0 : v[i] <= 0.0) {
        add(ErrorCode::NonPositiveParameter, field,
            "entry " + std::to_string(i) + " = " + std::to_string(v[i]));
        return;
      }
    }
  }

  void psd(const Matrix& m, const char* field) {
    if (!is_psd(m)) add(ErrorCode::NotPositiveSemiDefinite, field, "not symmetric positive semi-definite");
  }

  void add(ErrorCode code, std::string field, std::string message) {
    violations_.push_back({code, std::move(field), std::move(message)});
  }

  std::vector<Violation> take() { return std::move(violations_); }
  [[nodiscard]] bool ok() const noexcept { return violations_.empty(); }

 private:
  Eigen::Index d_;
  std::vector<Violation> violations_;
};

ConditionalStructure build_conditional(const Matrix& cov, const Vector& sigma, const Matrix& rho,
                                       std::size_t i) {
  const auto d = static_cast<std::size_t>(sigma.size());
  ConditionalStructure c;
  for (std::size_t j = 0; j < d; ++j)
    if (j != i) c.others.push_back(j);
  const auto n = static_cast<Eigen::Index>(c.others.size());
  c.loading.resize(n);
  Vector cross(n);  // rho(i,j) sigma_j
  c.cov.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto j = static_cast<Eigen::Index>(c.others[a]);
    const auto ii = static_cast<Eigen::Index>(i);
    c.loading[a] = rho(ii, j) * sigma[j] / sigma[ii];
    cross[a] = rho(ii, j) * sigma[j];
    for (Eigen::Index b = 0; b < n; ++b) c.cov(a, b) = cov(j, static_cast<Eigen::Index>(c.others[b]));
  }
  c.cov -= cross * cross.transpose();
  c.cov = 0.5 * (c.cov + c.cov.transpose());
  c.factor = psd_factor(c.cov);
  return c;
}

}  // namespace

ValidatedModel validate_params(const ModelParams& params, const BondUniverse& universe) {
  const std::size_t d = universe.size();
  Checker check(d);
  if (d == 0) check.add(ErrorCode::DimensionMismatch, "bonds", "universe is empty");
  std::set<std::string> seen;
  for (const auto& label : universe.labels) {
    if (label.empty()) check.add(ErrorCode::InvalidArgument, "bonds", "empty label");
    else if (!seen.insert(label).second) check.add(ErrorCode::InvalidArgument, "bonds", "duplicate label " + label);
  }
  if (!check.ok()) throw ValidationError(check.take());

  if (check.vector(params.sigma, "sigma")) check.positive(params.sigma, "sigma");
  if (check.vector(params.psi_scale, "psi_scale")) check.positive(params.psi_scale, "psi_scale");
  if (check.vector(params.sigma_eps, "sigma_eps")) check.positive(params.sigma_eps, "sigma_eps", true);
  if (check.matrix(params.rho, "rho")) {
    const Matrix& rho = params.rho;
    bool unit = true;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) unit = unit && std::abs(rho(i, i) - 1.0) <= 1e-12;
    if (!unit) check.add(ErrorCode::NotPositiveSemiDefinite, "rho", "diagonal must be 1");
    else check.psd(rho, "rho");
  }
  if (const auto* ou = std::get_if<OuSpread>(&params.spread)) {
    if (check.vector(ou->a, "a")) check.positive(ou->a, "a");
    if (check.matrix(ou->vvt, "vvt")) check.psd(ou->vvt, "vvt");
  } else {
    const auto& iid = std::get<IidSpread>(params.spread);
    check.vector(iid.mean, "spread.mean");
    if (check.vector(iid.var, "spread.var")) check.positive(iid.var, "spread.var", true);
  }
  if (!check.ok()) throw ValidationError(check.take());

  ValidatedModel m;
  m.universe_ = universe;
  m.params_ = params;
  m.cov_ = params.sigma.asDiagonal() * params.rho * params.sigma.asDiagonal();
  m.cov_ = 0.5 * (m.cov_ + m.cov_.transpose());
  if (!is_psd(m.cov_)) throw ValidationError({{ErrorCode::NotPositiveSemiDefinite, "sigma/rho", "covariance not PSD"}});
  m.cov_factor_ = psd_factor(m.cov_);
  if (const auto* ou = std::get_if<OuSpread>(&params.spread)) m.vvt_factor_ = psd_factor(ou->vvt);
  m.conditional_.reserve(d);
  for (std::size_t i = 0; i < d; ++i)
    m.conditional_.push_back(build_conditional(m.cov_, params.sigma, params.rho, i));
  return m;
}

void validate_prior(const Prior& prior, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidPrior, "invalid prior: " + what); };
  if (prior.mean_y.size() != n || prior.mean_x.size() != n) fail("mean length does not match bond count");
  if (prior.cov_y.rows() != n || prior.cov_y.cols() != n) fail("cov_y has wrong shape");
  if (prior.cov_x.rows() != n || prior.cov_x.cols() != n) fail("cov_x has wrong shape");
  if (!prior.mean_y.allFinite() || !prior.mean_x.allFinite()) fail("non-finite mean");
  if (!is_psd(prior.cov_y)) fail("cov_y not symmetric positive semi-definite");
  if (!is_psd(prior.cov_x)) fail("cov_x not symmetric positive semi-definite");
}

std::string kind_name(const EventKind& kind) {
  struct Name {
    std::string operator()(const ClientBuy&) const { return "client_buy"; }
    std::string operator()(const ClientSell&) const { return "client_sell"; }
    std::string operator()(const TradedAwayBuy&) const { return "away_buy"; }
    std::string operator()(const TradedAwaySell&) const { return "away_sell"; }
    std::string operator()(const InterDealer&) const { return "d2d"; }
  };
  return std::visit(Name{}, kind);
}

void validate_events(const std::vector<ObservationEvent>& events, std::size_t d) {
  double last = 0.0;
  for (std::size_t n = 0; n < events.size(); ++n) {
    const auto& e = events[n];
    const std::string where = "event " + std::to_string(n + 1);
    if (!std::isfinite(e.time) || e.time <= last)
      throw Error(ErrorCode::NonMonotoneTime, where + ": time must be finite and strictly increasing");
    if (e.bond >= d) throw Error(ErrorCode::UnknownBond, where + ": bond index out of range");
    const bool finite = std::visit(
        [](const auto& k) {
          if constexpr (requires { k.alpha; }) return std::isfinite(k.Y) && std::isfinite(k.alpha);
          else if constexpr (requires { k.Z; }) return std::isfinite(k.Z);
          else return std::isfinite(k.Y);
        },
        e.kind);
    if (!finite) throw Error(ErrorCode::InvalidArgument, where + ": non-finite level");
    if (const auto* idb = std::get_if<InterDealer>(&e.kind); idb && !(idb->alpha > 0.0))
      throw Error(ErrorCode::NonPositiveParameter, where + ": d2d alpha must be positive");
    last = e.time;
  }
}

}  // namespace bondpf
