#include "lossnet/bounds.hpp"

#include <cassert>
#include <cmath>
#include <string>

namespace lossnet {

namespace {

void check_moments(double rho1, double rho2) {
  if (!(rho1 > 0.0) || !std::isfinite(rho1) || !std::isfinite(rho2))
    throw DomainError("rho1 must be positive and finite");
  // Jensen, with a little slack for moments computed in floating point.
  if (rho2 < rho1 * rho1 * (1.0 - 1e-12)) throw DomainError("moments violate rho2 >= rho1^2");
}

}  // namespace

double lambda_ffg(double rho1, double rho2) {
  check_moments(rho1, rho2);
  return 1.0 / (rho2 + rho1 + 1.0);
}

double lambda_star(double rho1, double rho2) {
  check_moments(rho1, rho2);
  return 1.0 / (std::sqrt(rho2) + rho1);
}

double lambda_double_star(double rho1, double rho2) {
  check_moments(rho1, rho2);
  return 4.0 / (3.0 * rho1 + std::sqrt(rho1 * rho1 + 8.0 * rho2));
}

CriticalBounds critical_bounds(double rho1, double rho2) {
  return {lambda_ffg(rho1, rho2), lambda_star(rho1, rho2), lambda_double_star(rho1, rho2)};
}

std::pair<double, double> tstar_eigen(double rho1, double rho2) {
  if (!(rho1 > 0.0) || !(rho2 > 0.0)) throw DomainError("T* needs positive moments");
  const double disc = std::sqrt(rho1 * rho1 + 8.0 * rho2);
  assert(disc > 0.0);  // eps1 == eps2 is impossible for rho2 > 0
  return {(3.0 * rho1 + disc) / 4.0, (3.0 * rho1 - disc) / 4.0};
}

Eigen::Matrix2d tstar_matrix(double rho1, double rho2) {
  Eigen::Matrix2d t;
  t << rho1 / 2.0, rho2 / 2.0, 1.0, rho1;
  return t;
}

std::vector<FG> fg_sequence(double rho1, double rho2, int n) {
  if (n < 1) throw DomainError("fg_sequence needs n >= 1");
  const Eigen::Matrix2d t = tstar_matrix(rho1, rho2);
  std::vector<FG> out;
  out.reserve(static_cast<std::size_t>(n));
  Eigen::Vector2d v(rho1 / 2.0, 1.0);
  for (int k = 1; k <= n; ++k) {
    out.push_back({v(0), v(1)});
    v = t * v;
  }
  return out;
}

FG fg_closed_form(double rho1, double rho2, int k) {
  if (k < 0) throw DomainError("fg index must be >= 0");
  const auto [e1, e2] = tstar_eigen(rho1, rho2);
  const double p1 = std::pow(e1, k);
  const double p2 = std::pow(e2, k);
  return {(p1 * (e1 - rho1) + p2 * (rho1 - e2)) / (e1 - e2), (p1 - p2) / (e1 - e2)};
}

double log_series_term(double lambda, double v, int n, double rho1, double rho2) {
  if (n < 1) throw DomainError("series index must be >= 1");
  if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
  const auto [e1, e2] = tstar_eigen(rho1, rho2);
  // f_k = e1^k * fs, g_k = e1^k * gs with fs, gs bounded in k.
  const int k = n - 1;
  const double r = e2 / e1;
  const double rk = std::pow(r, k);
  const double fs = ((e1 - rho1) + rk * (rho1 - e2)) / (e1 - e2);
  const double gs = (1.0 - rk) / (e1 - e2);
  const double inner = v * (gs * rho1 + fs) + rho2 * gs + rho1 * fs;
  return n * std::log(lambda) + k * std::log(e1) + std::log(inner);
}

double series_term(double lambda, double v, int n, double rho1, double rho2) {
  return std::exp(log_series_term(lambda, v, n, rho1, rho2));
}

Eigen::MatrixXd mean_matrix_discrete(double lambda, const LengthDistribution& pi) {
  if (!pi.is_discrete()) throw DomainError("mean matrix needs a discrete length law");
  const auto atoms = pi.atoms();
  const auto k = static_cast<Eigen::Index>(atoms.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      m(i, j) = lambda * atoms[j].prob * (atoms[i].value + atoms[j].value);
  return m;
}

double spectral_radius(const Eigen::MatrixXd& m, const SpectralOptions& opt) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("matrix must be square");
  if ((m.array() < 0.0).any()) throw DomainError("matrix must be nonnegative");
  const Eigen::Index k = m.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(k) / std::sqrt(static_cast<double>(k));
  double estimate = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Eigen::VectorXd y = m * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    y /= norm;
    const double change = (y - x).norm();
    x = std::move(y);
    const double prev = estimate;
    estimate = norm;
    if (it > 1 && std::abs(estimate - prev) <= opt.rel_tol * estimate &&
        change <= opt.rel_tol)
      return x.dot(m * x);
  }
  throw ConvergenceError(
      "power iteration did not converge in " + std::to_string(opt.max_iter) + " iterations",
      opt.max_iter);
}

nlohmann::json bounds_to_json(double rho1, double rho2) {
  const auto b = critical_bounds(rho1, rho2);
  const auto [e1, e2] = tstar_eigen(rho1, rho2);
  return {{"rho1", rho1}, {"rho2", rho2},        {"ffg", b.ffg}, {"star", b.star},
          {"double_star", b.double_star}, {"eps1", e1}, {"eps2", e2}};
}

}  // namespace lossnet
