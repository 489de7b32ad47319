#include "sdebridge/guided.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace sdebridge {

namespace {
std::atomic<std::uint64_t> g_match_warnings{0};
}

std::uint64_t matching_warning_count() { return g_match_warnings.load(); }
void reset_matching_warning_count() { g_match_warnings.store(0); }

GuidedBridge make_guided_bridge(const DiffusionModel& model, const Vec& theta,
                                const LinearAuxiliary& aux, const Vec& u, int m,
                                MatchPolicy policy) {
    if (model.state_dim != aux.dim())
        throw std::invalid_argument("make_guided_bridge: model/auxiliary dimension mismatch");
    GuidedBridge gb;
    gb.model = &model;
    gb.theta = theta;
    gb.ctx = precompute_bridge_grid(aux, u, m);
    const Mat a_end = model.diffusion(aux.T, aux.v, theta);
    const double scale = std::max(aux.a.norm(), 1e-300);
    gb.matching_rel_error = (a_end - aux.a).norm() / scale;
    if (policy == MatchPolicy::strict && (a_end - aux.a).norm() > 1e-8 * (1.0 + aux.a.norm()))
        throw std::invalid_argument(
            "make_guided_bridge: auxiliary diffusion does not match the target at (T, v); "
            "relative error " + std::to_string(gb.matching_rel_error));
    if (policy == MatchPolicy::approximate && gb.matching_rel_error > 0.10) {
        const std::uint64_t n = g_match_warnings.fetch_add(1) + 1;
        if (n <= 3)
            std::fprintf(stderr,
                         "warning: auxiliary diffusion mismatch %.1f%% at the segment endpoint "
                         "(matching holds only approximately)\n",
                         100.0 * gb.matching_rel_error);
    }
    return gb;
}

Vec guided_drift(const GuidedBridge& gb, double t, const Vec& x) {
    const HR hr = H_r_tilde(gb.ctx.aux, t, x);
    return gb.model->drift(t, x, gb.theta) + gb.model->diffusion(t, x, gb.theta) * hr.r;
}

double G_integrand(const GuidedBridge& gb, double t, const Vec& x) {
    const LinearAuxiliary& aux = gb.ctx.aux;
    const HR hr = H_r_tilde(aux, t, x);
    const Vec bdiff = gb.model->drift(t, x, gb.theta) - (aux.B * x + aux.beta_at(t));
    const Mat adiff = gb.model->diffusion(t, x, gb.theta) - aux.a;
    const double quad = hr.r.dot(adiff * hr.r);
    return bdiff.dot(hr.r) - 0.5 * ((adiff * hr.H).trace() - quad);
}

double log_psi_direct(const GuidedBridge& gb, const Path& path) {
    if (path.t.size() < 2) throw std::invalid_argument("log_psi_direct: path too short");
    double acc = 0;
    for (std::size_t j = 0; j + 1 < path.t.size(); ++j)
        acc += G_integrand(gb, path.t[j], path.x[j]) * (path.t[j + 1] - path.t[j]);
    return acc;
}

Vec gamma_map(const GuidedBridge& gb, double s, const Vec& U) {
    const double T = gb.T();
    return v_at_horizon(gb.ctx.aux, tau_complement(s, T)) - (T - s) * U;
}

USdeCoeffs u_sde_coefficients(const GuidedBridge& gb, double s, const Vec& U) {
    const double T = gb.T();
    if (!(s < T)) throw std::invalid_argument("u_sde_coefficients: s must be < T");
    const LinearAuxiliary& aux = gb.ctx.aux;
    const double q = tau_complement(s, T);
    const double t = tau(s, T);
    const Vec vp = v_at_horizon(aux, q);
    const Vec x = vp - (T - s) * U;
    const Vec vd = aux.B * vp + aux.beta_at(t);
    const Mat J = H_at_horizon(aux, q) * q;
    const Vec b = gb.model->drift(t, x, gb.theta);
    const Mat a = gb.model->diffusion(t, x, gb.theta);
    USdeCoeffs c;
    c.drift = (2.0 / T) * (vd - b) + (U - 2.0 * (a * (J * U))) / (T - s);
    c.noise = -(std::sqrt(2.0 / T) / std::sqrt(T - s)) *
              gb.model->dispersion(t, x, gb.theta);
    return c;
}

UPath solve_g(const GuidedBridge& gb, const WienerIncrements& Z) {
    const BridgeContext& ctx = gb.ctx;
    const int m = ctx.m;
    if (static_cast<int>(Z.dW.size()) != m - 1)
        throw std::invalid_argument("solve_g: innovation count does not match the grid");
    const double T = gb.T();
    const double ds = ctx.ds;
    const double root = std::sqrt(2.0 / T);

    UPath up;
    up.s = ctx.s;
    up.U.resize(m);
    up.X.resize(m);
    up.U[0] = (ctx.v_pull[0] - ctx.u) / T;
    for (int j = 0; j < m - 1; ++j) {
        const double rem = T - ctx.s[j];
        const double t = ctx.t_image[j];
        const Vec& U = up.U[j];
        up.X[j] = ctx.v_pull[j] - rem * U;
        const Vec b = gb.model->drift(t, up.X[j], gb.theta);
        const Mat sig = gb.model->dispersion(t, up.X[j], gb.theta);
        const Mat a = sig * sig.transpose();
        const Vec drift = (2.0 / T) * (ctx.vdot[j] - b) + (U - 2.0 * (a * (ctx.J[j] * U))) / rem;
        up.U[j + 1] = U + ds * drift - (root / std::sqrt(rem)) * (sig * Z.dW[j]);
        if (!up.U[j + 1].allFinite())
            throw std::runtime_error("solve_g: non-finite state at step " + std::to_string(j + 1));
    }
    up.X[m - 1] = gb.v();
    return up;
}

double log_psi_timechanged(const GuidedBridge& gb, const UPath& up) {
    const BridgeContext& ctx = gb.ctx;
    const int m = ctx.m;
    if (static_cast<int>(up.U.size()) != m)
        throw std::invalid_argument("log_psi_timechanged: path does not match the grid");
    const double T = gb.T();
    double acc = 0;
    for (int j = 0; j < m - 1; ++j) {
        const double rem = T - ctx.s[j];
        const double t = ctx.t_image[j];
        const Vec& x = up.X[j];
        const Vec bdiff = gb.model->drift(t, x, gb.theta) -
                          (ctx.aux.B * x + ctx.aux.beta_at(t));
        const Mat adiff = gb.model->diffusion(t, x, gb.theta) - ctx.aux.a;
        const Vec JU = ctx.J[j] * up.U[j];
        const double term1 = 2.0 * bdiff.dot(JU);
        const double term2 = -(adiff * ctx.J[j]).trace() / rem;
        const double term3 = (T / rem) * JU.dot(adiff * JU);
        acc += term1 + term2 + term3;
    }
    return acc * ctx.ds;
}

WienerIncrements invert_g(const GuidedBridge& gb, const std::vector<Vec>& X, const Vec& z_last) {
    const BridgeContext& ctx = gb.ctx;
    const int m = ctx.m;
    if (static_cast<int>(X.size()) != m)
        throw std::invalid_argument("invert_g: state count does not match the grid");
    if (gb.model->state_dim != gb.model->noise_dim)
        throw std::invalid_argument("invert_g: requires square dispersion");
    const double T = gb.T();
    const double ds = ctx.ds;
    const double root = std::sqrt(2.0 / T);

    std::vector<Vec> U(m - 1);
    for (int j = 0; j < m - 1; ++j) U[j] = (ctx.v_pull[j] - X[j]) / (T - ctx.s[j]);

    WienerIncrements Z;
    Z.t = ctx.s;
    Z.dW.resize(m - 1);
    for (int j = 0; j + 1 < m - 1; ++j) {
        const double rem = T - ctx.s[j];
        const double t = ctx.t_image[j];
        const Vec b = gb.model->drift(t, X[j], gb.theta);
        const Mat sig = gb.model->dispersion(t, X[j], gb.theta);
        const Mat a = sig * sig.transpose();
        const Vec drift =
            (2.0 / T) * (ctx.vdot[j] - b) + (U[j] - 2.0 * (a * (ctx.J[j] * U[j]))) / rem;
        const Vec incr = U[j + 1] - U[j] - ds * drift;
        Z.dW[j] = sig.partialPivLu().solve(incr / (-root / std::sqrt(rem)));
        if (!Z.dW[j].allFinite())
            throw std::runtime_error("invert_g: singular dispersion at step " + std::to_string(j));
    }
    Z.dW[m - 2] = z_last;
    return Z;
}

double disc_error_direct(double T, double h, double s, double a_norm) {
    if (!(h > 0) || !(T > 0)) throw std::invalid_argument("disc_error_direct: need h, T > 0");
    // Grids built as s = (i-1) h land within rounding of T - h at the last
    // step; tolerate that.
    if (s < 0 || s > T - h + 1e-12 * T)
        throw std::invalid_argument("disc_error_direct: need 0 <= s <= T - h");
    return h * h / (T - s) * a_norm;
}

double disc_error_timechanged(double T, double h, double s, double a_norm) {
    if (!(h > 0) || !(T > 0)) throw std::invalid_argument("disc_error_timechanged: need h, T > 0");
    if (s < 0 || s > T - h + 1e-12 * T)
        throw std::invalid_argument("disc_error_timechanged: need 0 <= s <= T - h");
    const double f = std::max(0.0, 1.0 - h / (T - s));
    return h * h / T * f * f * a_norm;
}

double disc_error_ratio(int m, int i) {
    if (m < 1 || i < 1 || i > m) throw std::invalid_argument("disc_error_ratio: need 1 <= i <= m");
    const double mi = m - i;
    return mi * mi / (double(m) * (mi + 1.0));
}

}  // namespace sdebridge
