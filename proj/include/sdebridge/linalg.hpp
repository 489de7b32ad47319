#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace sdebridge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Matrix exponential by scaling-and-squaring with Pade approximants
// (Higham 2005 degree selection).
Mat expm(const Mat& A);

// Solves B*X + X*B' + C = 0 for X via the Kronecker system.
// Throws std::runtime_error when the Lyapunov operator is singular
// (e.g. B = 0 or eigenvalue pairs summing to zero).
Mat solve_lyapunov(const Mat& B, const Mat& C);

// Quick solvability probe for solve_lyapunov without throwing.
bool lyapunov_solvable(const Mat& B);

// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton
// iteration on the Legendre polynomial.
struct GaussLegendre {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};
const GaussLegendre& gauss_legendre(int n);

// Composite Gauss-Legendre integration of a matrix-valued function over
// [a, b] with panel doubling until the Frobenius change is below
// tol * (1 + |I|_F).  Node budget: panels_per_level * 16 <= max_nodes.
Mat integrate_matrix(const std::function<Mat(double)>& f, double a, double b,
                     double tol = 1e-10, int max_nodes = 64);
Vec integrate_vector(const std::function<Vec(double)>& f, double a, double b,
                     double tol = 1e-10, int max_nodes = 64);

// Cholesky-backed helpers for symmetric positive definite matrices.
// `context` names the caller in the error message (e.g. the time point at
// which a covariance failed to factor).
Mat spd_solve(const Mat& S, const Mat& rhs, const std::string& context);
double spd_logdet(const Mat& S, const std::string& context);

// log N(x; mean, S)
double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& S,
                       const std::string& context);

}  // namespace sdebridge
