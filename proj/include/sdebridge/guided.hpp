#pragma once

#include "sdebridge/core.hpp"
#include "sdebridge/linproc.hpp"

namespace sdebridge {

enum class MatchPolicy {
    strict,       // dispersion must match the auxiliary at (T, v) to 1e-8
    approximate,  // mismatch allowed; caller inspects matching_rel_error
};

// Guided proposal for one segment: target diffusion `model` at parameter
// `theta`, steered by the linear auxiliary towards (T, v).
struct GuidedBridge {
    const DiffusionModel* model = nullptr;
    Vec theta;
    BridgeContext ctx;
    double matching_rel_error = 0;

    double T() const { return ctx.aux.T; }
    const Vec& u() const { return ctx.u; }
    const Vec& v() const { return ctx.aux.v; }
};

GuidedBridge make_guided_bridge(const DiffusionModel& model, const Vec& theta,
                                const LinearAuxiliary& aux, const Vec& u, int m,
                                MatchPolicy policy = MatchPolicy::strict);

// Approximate-matching bridges with relative dispersion mismatch above 10%
// emit a warning (stderr, rate limited) and bump this counter.
std::uint64_t matching_warning_count();
void reset_matching_warning_count();

// b(t,x) + a(t,x) r(t,x): drift of the guided proposal in original time.
Vec guided_drift(const GuidedBridge& gb, double t, const Vec& x);

// G(t,x) = (b - btilde)' r - 1/2 tr[(a - atilde)(H - r r')], the integrand of
// log Psi.  Requires t < T.
double G_integrand(const GuidedBridge& gb, double t, const Vec& x);

// Left Riemann sum of G over the path's own grid (last point excluded).
double log_psi_direct(const GuidedBridge& gb, const Path& path);

// Time-changed scaled bridge U_s = (v(tau(s)) - X(tau(s))) / (T - s).
struct UPath {
    std::vector<double> s;  // uniform grid, m points
    std::vector<Vec> U;
    std::vector<Vec> X;     // states at the tau-image points; X.back() == v
};

struct USdeCoeffs {
    Vec drift;
    Mat noise;  // multiplies dW
};
// Coefficients at arbitrary s < T (grid-free evaluation).
USdeCoeffs u_sde_coefficients(const GuidedBridge& gb, double s, const Vec& U);

// Maps X(tau(s)) <-> U_s.
Vec gamma_map(const GuidedBridge& gb, double s, const Vec& U);

// Euler solve of the U SDE driven by innovations Z on the cached s-grid;
// deterministic map g(theta, Z).
UPath solve_g(const GuidedBridge& gb, const WienerIncrements& Z);

// log Psi via the time-changed left-Riemann rule on the cached grid.
double log_psi_timechanged(const GuidedBridge& gb, const UPath& up);

// Recovers innovations Z such that solve_g reproduces the given states at
// the tau-image grid.  The last increment is not determined by the states;
// `z_last` is carried over.  Requires a square invertible dispersion.
WienerIncrements invert_g(const GuidedBridge& gb, const std::vector<Vec>& X, const Vec& z_last);

// One-step Euler covariance errors of the two bridge discretizations
// (direct and time-changed) for step h = T/m at s in [0, T-h], and their
// ratio R_m(i) at grid index i = 1..m.
double disc_error_direct(double T, double h, double s, double a_norm);
double disc_error_timechanged(double T, double h, double s, double a_norm);
double disc_error_ratio(int m, int i);

}  // namespace sdebridge
