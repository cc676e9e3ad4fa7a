#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bondpf/model.hpp"
#include "bondpf/rng.hpp"

namespace bondpf::testing {

inline constexpr double kPi = 3.14159265358979323846;

/// Desk-scale three-bond configuration: volatilities, correlations and
/// spread moments of a typical investment-grade trio.
struct DeskTrio {
  Vector sigma{{0.50, 0.62, 0.69}};
  Vector spread_mean{{0.79, 0.73, 0.65}};
  Matrix rho{{1.0, 0.843, 0.835}, {0.843, 1.0, 0.887}, {0.835, 0.887, 1.0}};
};

/// IID log-normal spread law with E[psi] = SD[psi] = m, so var_x = ln 2.
inline ModelParams trio_params(double noise_fraction = 0.05) {
  DeskTrio t;
  ModelParams p;
  p.sigma = t.sigma;
  p.rho = t.rho;
  p.psi_scale = Vector::Ones(3);
  p.sigma_eps = noise_fraction * 6.0 * t.spread_mean;
  IidSpread iid{Vector(3), Vector::Constant(3, std::log(2.0))};
  for (Eigen::Index i = 0; i < 3; ++i) iid.mean[i] = std::log(t.spread_mean[i]) - 0.5 * std::log(2.0);
  p.spread = iid;
  return p;
}

inline Prior trio_prior(const ModelParams& p, const Vector& mean_y, double prior_days = 1.0) {
  const Matrix cov = p.sigma.asDiagonal() * p.rho * p.sigma.asDiagonal();
  const auto& iid = std::get<IidSpread>(p.spread);
  return Prior{mean_y, prior_days * cov, iid.mean, Matrix(iid.var.asDiagonal())};
}

/// d = 1 model with a deterministic spread psi = psi_scale.
inline ModelParams scalar_params(double sigma, double sigma_eps, double psi = 1.0) {
  ModelParams p;
  p.sigma = Vector::Constant(1, sigma);
  p.rho = Matrix::Ones(1, 1);
  p.psi_scale = Vector::Constant(1, psi);
  p.sigma_eps = Vector::Constant(1, sigma_eps);
  p.spread = IidSpread{Vector::Zero(1), Vector::Zero(1)};
  return p;
}

inline Prior scalar_prior(double mean, double var) {
  return Prior{Vector::Constant(1, mean), Matrix::Constant(1, 1, var), Vector::Zero(1), Matrix::Zero(1, 1)};
}

/// Random correlation matrix from a random factor model.
inline Matrix random_correlation(std::size_t d, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  Matrix f(n, n + 1);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = rng.normal();
  Matrix c = f * f.transpose();
  const Vector s = c.diagonal().cwiseSqrt().cwiseInverse();
  c = s.asDiagonal() * c * s.asDiagonal();
  c.diagonal().setOnes();
  return 0.5 * (c + c.transpose());
}

/// Brute-force Gaussian conditioning of x_{-i} on x_i through the precision
/// matrix: Cov = (Q_{-i,-i})^{-1}, mean = -Cov Q_{-i,i} delta.
struct BruteConditional {
  Vector mean;
  Matrix cov;
};
inline BruteConditional precision_condition(const Matrix& cov, std::size_t i, double delta) {
  const auto d = cov.rows();
  const Matrix q = cov.inverse();
  std::vector<Eigen::Index> rest;
  for (Eigen::Index j = 0; j < d; ++j)
    if (j != static_cast<Eigen::Index>(i)) rest.push_back(j);
  const auto n = static_cast<Eigen::Index>(rest.size());
  Matrix qrr(n, n);
  Vector qri(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    qri[a] = q(rest[static_cast<std::size_t>(a)], static_cast<Eigen::Index>(i));
    for (Eigen::Index b = 0; b < n; ++b) qrr(a, b) = q(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
  }
  BruteConditional out;
  out.cov = qrr.inverse();
  out.mean = -out.cov * qri * delta;
  return out;
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double f = cdf(xs[k]);
    d = std::max({d, f - static_cast<double>(k) / n, static_cast<double>(k + 1) / n - f});
  }
  return d;
}

/// Independent oracle for Phi: adaptive Gauss-Kronrod integration of the density.
inline double quadrature_phi(double u) {
  auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); };
  using boost::math::quadrature::gauss_kronrod;
  if (u <= 0.0) return gauss_kronrod<double, 61>::integrate(pdf, -std::numeric_limits<double>::infinity(), u, 15, 1e-15);
  return 1.0 - gauss_kronrod<double, 61>::integrate(pdf, u, std::numeric_limits<double>::infinity(), 15, 1e-15);
}

/// Posterior mean and std of a scalar under N(m, v) prior times a likelihood,
/// by adaptive quadrature over +-12 prior sd.
struct ScalarPosterior {
  double mean;
  double std;
};
inline ScalarPosterior quadrature_posterior(double m, double v, const std::function<double(double)>& likelihood) {
  using boost::math::quadrature::gauss_kronrod;
  const double sd = std::sqrt(v);
  auto dens = [&](double y) { return std::exp(-0.5 * (y - m) * (y - m) / v) * likelihood(y); };
  const double a = m - 12.0 * sd;
  const double b = m + 12.0 * sd;
  const double z0 = gauss_kronrod<double, 61>::integrate(dens, a, b, 15, 1e-14);
  const double z1 = gauss_kronrod<double, 61>::integrate([&](double y) { return y * dens(y); }, a, b, 15, 1e-14);
  const double mean = z1 / z0;
  const double z2 = gauss_kronrod<double, 61>::integrate(
      [&](double y) { return (y - mean) * (y - mean) * dens(y); }, a, b, 15, 1e-14);
  return {mean, std::sqrt(z2 / z0)};
}

/// Scalar Kalman filter with random-walk state and observation z = y + noise.
struct Kalman {
  double mean;
  double var;
  void predict(double q) { var += q; }
  void update(double z, double r) {
    const double gain = var / (var + r);
    mean += gain * (z - mean);
    var *= 1.0 - gain;
  }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh scratch directory under the system temp directory.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bondpf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bondpf::testing
