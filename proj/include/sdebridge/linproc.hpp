#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sdebridge/core.hpp"
#include "sdebridge/linalg.hpp"

namespace sdebridge {

// Linear process dXt = (B Xt + beta(t)) dt + sigma dWt on [0, T], pinned to
// the segment's end data (T, v).  A time-dependent beta is only supported
// with B = 0; the auxiliaries used for nonlinear targets are built that way.
struct LinearAuxiliary {
    Mat B;
    Vec beta;                                         // constant part
    std::function<Vec(double)> beta_fun;              // optional, requires B = 0
    std::function<Vec(double, double)> beta_integral; // optional exact integral of beta_fun
    Mat sigma;
    double T = 0;
    Vec v;

    std::optional<Mat> lambda;  // solution of B L + L B' + a = 0, when solvable
    Mat a;                      // sigma sigma'

    bool b_zero = false;
    bool time_dependent() const { return static_cast<bool>(beta_fun); }
    Vec beta_at(double t) const { return time_dependent() ? beta_fun(t) : beta; }
    int dim() const { return static_cast<int>(B.rows()); }
};

LinearAuxiliary make_auxiliary(const Mat& B, const Vec& beta, const Mat& sigma, double T,
                               const Vec& v);

// B = 0 implied; beta_integral(a, b) = int_a^b beta(s) ds may be empty, in
// which case adaptive quadrature is used.
LinearAuxiliary make_auxiliary_time_dependent(const std::function<Vec(double)>& beta_fun,
                                              const std::function<Vec(double, double)>& beta_integral,
                                              const Mat& sigma, double T, const Vec& v);

// Time change removing the conditioning singularity: tau(s) = s(2 - s/T).
double tau(double s, double T);
// T - tau(s) computed as (T-s)^2/T; this is the horizon the pulled-back
// quantities are evaluated at, and the form that keeps J exact for B = 0.
double tau_complement(double s, double T);

// Mean and covariance of X_T given X_t = x.
struct Moments {
    Vec mean;
    Mat K;
};
Moments transition_moments(const LinearAuxiliary& aux, double t, const Vec& x);

// log ptilde(t, x; T, v)
double aux_log_density(const LinearAuxiliary& aux, double t, const Vec& x);

// Pulled-back conditioning path: v(s) with dv/ds = B v(s) + beta(s), v(T) = v.
Vec v_of_s(const LinearAuxiliary& aux, double s);
Vec v_at_horizon(const LinearAuxiliary& aux, double q);
Vec v_dot(const LinearAuxiliary& aux, double s);

// Negative Hessian H(t) = Phi' K(t)^{-1} Phi and score r(t, x) of
// log ptilde(t, .; T, v).
struct HR {
    Mat H;
    Vec r;
};
HR H_r_tilde(const LinearAuxiliary& aux, double t, const Vec& x);
Mat K_at_horizon(const LinearAuxiliary& aux, double q);
Mat H_at_horizon(const LinearAuxiliary& aux, double q);

// J(s) = H(tau(s)) (T-s)^2 / T, the bounded kernel of the time-changed
// bridge.  s is the time-changed variable; requires tau(s) <= T(1 - 1e-12).
Mat J_of_s(const LinearAuxiliary& aux, double s);
// Accelerated route J(s) = q (e^{-Bq} lambda e^{-B'q} - lambda)^{-1};
// requires the Lyapunov solution.
Mat J_closed_form(const LinearAuxiliary& aux, double s);

// Per-segment cache over the uniform s-grid of m points (endpoints included).
struct BridgeContext {
    LinearAuxiliary aux;
    Vec u;
    int m = 0;
    double ds = 0;
    std::vector<double> s;        // size m
    std::vector<double> t_image;  // tau(s_j)
    std::vector<double> hq;       // tau_complement(s_j)
    std::vector<Vec> v_pull;      // v at horizon hq_j; last entry is v exactly
    std::vector<Vec> vdot;        // B v_pull + beta(t_image)
    std::vector<Mat> J;           // j = 0..m-2
};

BridgeContext precompute_bridge_grid(const LinearAuxiliary& aux, const Vec& u, int m);

}  // namespace sdebridge
