#pragma once

#include <cstddef>

#include "bondpf/model.hpp"
#include "bondpf/rng.hpp"

namespace bondpf {

double std_normal_pdf(double u) noexcept;
double std_normal_log_pdf(double u) noexcept;
/// Phi(u) via erfc; relative accuracy holds deep into the lower tail.
double std_normal_cdf(double u) noexcept;
/// ln Phi(u), finite for every finite u (asymptotic series below -37).
double std_normal_log_cdf(double u) noexcept;
/// ln(Phi(b) - Phi(a)) for a < b, computed on the side of the tail that
/// avoids cancellation. Returns -inf when the interval carries no mass.
double std_normal_log_cdf_diff(double a, double b) noexcept;
/// Phi^{-1}(p) for p in (0, 1).
double std_normal_quantile(double p);
/// The u with 1 - Phi(u) = q, accurate for tiny q.
double std_normal_upper_quantile(double q);

struct OuTransition {
  Vector mean_factor;  // exp(-a tau)
  Matrix cov;          // Gamma(tau)
};

/// Diagonal-A closed form of the OU transition over tau days.
/// Throws WrongSpreadMode outside OU mode, InvalidArgument for tau <= 0.
OuTransition ou_transition(const ValidatedModel& model, double tau);
/// Same closed form on raw parameters.
OuTransition ou_transition(const Vector& a, const Matrix& vvt, double tau);

/// n rows of mean + factor z with z ~ N(0, I).
RowMatrix sample_mvn(const Vector& mean, const Matrix& cov_factor, std::size_t n, Rng& rng);

struct TruncationSpec {
  enum class Side { Above, Below, Between };
  Side side;
  double lower;
  double upper;

  static TruncationSpec above(double a) { return {Side::Above, a, 0.0}; }
  static TruncationSpec below(double b) { return {Side::Below, 0.0, b}; }
  static TruncationSpec between(double a, double b) { return {Side::Between, a, b}; }
};

/// Exact draw from N(mu, var) restricted to the given region. Inverse-CDF in
/// the body of the law, Marsaglia's tail method for one-sided cuts more than
/// 3 sd above the mean, exponential-proposal rejection for far two-sided
/// intervals. Throws EmptyInterval when lower >= upper.
double sample_truncated_normal(double mu, double var, const TruncationSpec& spec, Rng& rng);

/// Standard-normal version, the building block of the above.
double sample_truncated_std_normal(const TruncationSpec& spec, Rng& rng);

/// CDF of the truncated standard normal at u.
double truncated_std_normal_cdf(const TruncationSpec& spec, double u);

struct ConditionalMoments {
  Vector mean_shift;
  Matrix cov;
};

/// Moments of the remaining d-1 increments given increment `delta` of bond i
/// over tau days. Throws WrongDimension when d < 2.
ConditionalMoments conditional_mvn_given_one(const ValidatedModel& model, std::size_t bond, double delta,
                                             double tau);

struct ScalarMoments {
  double mean;
  double var;
};

/// Law of y_new given y_prev and y_new + eps = y_tilde, with Var(y_new - y_prev)
/// = sigma2_dt and Var(eps) = sigma2_eps. Throws DegenerateBoth if both are 0.
ScalarMoments conditional_posterior_y(double y_prev, double y_tilde, double sigma2_dt, double sigma2_eps);

}  // namespace bondpf
