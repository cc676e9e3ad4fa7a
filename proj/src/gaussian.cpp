#include "bondpf/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace bondpf {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper tail 1 - Phi(u).
double upper_tail(double u) noexcept { return 0.5 * std::erfc(u / kSqrt2); }

// Keeps a draw inside the open interval (lo, hi) despite rounding.
double inside(double x, double lo, double hi) noexcept {
  if (x <= lo) return std::nextafter(lo, kInf);
  if (x >= hi) return std::nextafter(hi, -kInf);
  return x;
}

double sample_above(double a, Rng& rng) {
  if (a > 3.0) {
    // Marsaglia: x = sqrt(a^2 - 2 ln U1), accepted when U2 x < a.
    const double a2 = a * a;
    for (;;) {
      const double x = std::sqrt(a2 - 2.0 * std::log(rng.uniform_open()));
      if (rng.uniform_open() * x < a) return x;
    }
  }
  const double q = upper_tail(a);
  return inside(std_normal_upper_quantile(rng.uniform_open() * q), a, kInf);
}

// 0 <= a < b.
double sample_between_upper(double a, double b, Rng& rng) {
  if (a > 3.0) {
    const double width = b - a;
    const double mass = -std::expm1(-a * width);
    for (;;) {
      const double e = -std::log1p(-rng.uniform_open() * mass) / a;
      if (rng.uniform_open() < std::exp(-0.5 * e * e)) return inside(a + e, a, b);
    }
  }
  const double qa = upper_tail(a);
  const double qb = upper_tail(b);
  const double q = qa - rng.uniform_open() * (qa - qb);
  return inside(std_normal_upper_quantile(q), a, b);
}

double sample_between(double a, double b, Rng& rng) {
  if (b <= 0.0) return -sample_between_upper(-b, -a, rng);
  if (a >= 0.0) return sample_between_upper(a, b, rng);
  const double pa = std_normal_cdf(a);
  const double pb = std_normal_cdf(b);
  const double p = pa + rng.uniform_open() * (pb - pa);
  return inside(std_normal_quantile(p), a, b);
}

}  // namespace

double std_normal_pdf(double u) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

double std_normal_log_pdf(double u) noexcept { return -0.5 * u * u - kLogSqrt2Pi; }

double std_normal_cdf(double u) noexcept { return 0.5 * std::erfc(-u / kSqrt2); }

double std_normal_log_cdf(double u) noexcept {
  if (std::isnan(u)) return u;
  if (u < -37.0) {
    // Asymptotic expansion of the Mills ratio.
    const double z = 1.0 / (u * u);
    const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z * (1.0 - 9.0 * z))));
    return -0.5 * u * u - std::log(-u) - kLogSqrt2Pi + std::log(series);
  }
  if (u > 5.0) return std::log1p(-upper_tail(u));
  return std::log(std_normal_cdf(u));
}

double std_normal_log_cdf_diff(double a, double b) noexcept {
  if (!(a < b)) return -kInf;
  double hi;
  double lo;
  if (a > 0.0) {
    hi = std_normal_log_cdf(-a);
    lo = std_normal_log_cdf(-b);
  } else {
    hi = std_normal_log_cdf(b);
    lo = std_normal_log_cdf(a);
  }
  if (hi == -kInf) return -kInf;
  const double r = std::exp(lo - hi);
  if (r >= 1.0) return -kInf;
  return hi + std::log1p(-r);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "normal quantile needs p in (0, 1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double std_normal_upper_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidArgument, "normal quantile needs q in (0, 1)");
  return kSqrt2 * boost::math::erfc_inv(2.0 * q);
}

OuTransition ou_transition(const Vector& a, const Matrix& vvt, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "OU transition needs tau > 0");
  const Eigen::Index d = a.size();
  if (vvt.rows() != d || vvt.cols() != d) throw Error(ErrorCode::DimensionMismatch, "vvt does not match a");
  OuTransition out;
  out.mean_factor = (-a.array() * tau).exp().matrix();
  out.cov.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double rate = a[i] + a[j];
      out.cov(i, j) = -std::expm1(-rate * tau) / rate * vvt(i, j);
    }
  }
  return out;
}

OuTransition ou_transition(const ValidatedModel& model, double tau) {
  const auto* ou = std::get_if<OuSpread>(&model.params().spread);
  if (ou == nullptr) throw Error(ErrorCode::WrongSpreadMode, "OU transition requested in IID spread mode");
  return ou_transition(ou->a, ou->vvt, tau);
}

RowMatrix sample_mvn(const Vector& mean, const Matrix& cov_factor, std::size_t n, Rng& rng) {
  if (cov_factor.rows() != mean.size())
    throw Error(ErrorCode::DimensionMismatch, "covariance factor rows do not match mean length");
  const auto rows = static_cast<Eigen::Index>(n);
  RowMatrix z(rows, cov_factor.cols());
  for (Eigen::Index k = 0; k < rows; ++k)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(k, j) = rng.normal();
  RowMatrix out = z * cov_factor.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

double sample_truncated_std_normal(const TruncationSpec& spec, Rng& rng) {
  switch (spec.side) {
    case TruncationSpec::Side::Above:
      return sample_above(spec.lower, rng);
    case TruncationSpec::Side::Below:
      return -sample_above(-spec.upper, rng);
    case TruncationSpec::Side::Between:
      if (!(spec.lower < spec.upper))
        throw Error(ErrorCode::EmptyInterval, "truncation interval is empty");
      return sample_between(spec.lower, spec.upper, rng);
  }
  return 0.0;
}

double sample_truncated_normal(double mu, double var, const TruncationSpec& spec, Rng& rng) {
  if (!(var > 0.0)) throw Error(ErrorCode::InvalidArgument, "truncated normal needs var > 0");
  if (spec.side == TruncationSpec::Side::Between && !(spec.lower < spec.upper))
    throw Error(ErrorCode::EmptyInterval, "truncation interval is empty");
  const double sd = std::sqrt(var);
  TruncationSpec std_spec = spec;
  std_spec.lower = (spec.lower - mu) / sd;
  std_spec.upper = (spec.upper - mu) / sd;
  return mu + sd * sample_truncated_std_normal(std_spec, rng);
}

double truncated_std_normal_cdf(const TruncationSpec& spec, double u) {
  const double a = spec.side == TruncationSpec::Side::Below ? -kInf : spec.lower;
  const double b = spec.side == TruncationSpec::Side::Above ? kInf : spec.upper;
  if (u <= a) return 0.0;
  if (u >= b) return 1.0;
  if (a >= 0.0) {
    const double qa = upper_tail(a);
    return (qa - upper_tail(u)) / (qa - upper_tail(b));
  }
  const double pa = std_normal_cdf(a);
  return (std_normal_cdf(u) - pa) / (std_normal_cdf(b) - pa);
}

ConditionalMoments conditional_mvn_given_one(const ValidatedModel& model, std::size_t bond, double delta,
                                             double tau) {
  if (model.dim() < 2) throw Error(ErrorCode::WrongDimension, "conditioning needs at least two bonds");
  if (bond >= model.dim()) throw Error(ErrorCode::UnknownBond, "bond index out of range");
  const auto& c = model.conditional(bond);
  return {c.loading * delta, c.cov * tau};
}

ScalarMoments conditional_posterior_y(double y_prev, double y_tilde, double sigma2_dt, double sigma2_eps) {
  if (sigma2_dt < 0.0 || sigma2_eps < 0.0)
    throw Error(ErrorCode::InvalidArgument, "variances must be nonnegative");
  if (sigma2_dt == 0.0 && sigma2_eps == 0.0)
    throw Error(ErrorCode::DegenerateBoth, "state and observation variances are both zero");
  if (sigma2_eps == 0.0) return {y_tilde, 0.0};
  if (sigma2_dt == 0.0) return {y_prev, 0.0};
  const double total = sigma2_dt + sigma2_eps;
  return {(sigma2_dt * y_tilde + sigma2_eps * y_prev) / total, sigma2_dt * sigma2_eps / total};
}

}  // namespace bondpf
