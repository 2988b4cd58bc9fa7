#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lossnet/model.hpp"

namespace lossnet {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sufficient-condition rates for the absence of backward oriented percolation.
struct CriticalBounds {
  double ffg;          // 1 / (rho2 + rho1 + 1)
  double star;         // 1 / (sqrt(rho2) + rho1)
  double double_star;  // 4 / (3 rho1 + sqrt(rho1^2 + 8 rho2))
};

double lambda_ffg(double rho1, double rho2);
double lambda_star(double rho1, double rho2);
double lambda_double_star(double rho1, double rho2);
CriticalBounds critical_bounds(double rho1, double rho2);

/// Eigenvalues eps1 >= eps2 of T* = [[rho1/2, rho2/2], [1, rho1]].
std::pair<double, double> tstar_eigen(double rho1, double rho2);
Eigen::Matrix2d tstar_matrix(double rho1, double rho2);

struct FG {
  double f;
  double g;
};

/// (f_k, g_k) for k = 1..n by iterating T* from (rho1/2, 1).
std::vector<FG> fg_sequence(double rho1, double rho2, int n);
/// Same quantities from the eigen-decomposition; k = 0 gives (1, 0).
FG fg_closed_form(double rho1, double rho2, int k);

/// log of the n-th term of the dominating series for a green root of length v:
///   lambda^n (v (g_{n-1} rho1 + f_{n-1}) + rho2 g_{n-1} + rho1 f_{n-1}).
/// Accumulated in log space so that n in the hundreds stays finite.
double log_series_term(double lambda, double v, int n, double rho1, double rho2);
double series_term(double lambda, double v, int n, double rho1, double rho2);

/// k x k mean-offspring matrix M[u][v] = lambda pi(v) (u + v) over the atoms of pi.
Eigen::MatrixXd mean_matrix_discrete(double lambda, const LengthDistribution& pi);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, int iterations)
      : std::runtime_error(what), iterations(iterations) {}
  int iterations;
};

struct SpectralOptions {
  double rel_tol = 1e-10;
  int max_iter = 100'000;
};

/// Dominant eigenvalue of a nonnegative square matrix by power iteration.
double spectral_radius(const Eigen::MatrixXd& m, const SpectralOptions& opt = {});

nlohmann::json bounds_to_json(double rho1, double rho2);

}  // namespace lossnet
