#include "sdebridge/linproc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdebridge {

namespace {

void check_dims(const Mat& B, const Mat& sigma, const Vec& v, double T) {
    if (B.rows() != B.cols()) throw std::invalid_argument("auxiliary: B must be square");
    if (sigma.rows() != B.rows()) throw std::invalid_argument("auxiliary: sigma row dim mismatch");
    if (v.size() != B.rows()) throw std::invalid_argument("auxiliary: v dim mismatch");
    if (!(T > 0)) throw std::invalid_argument("auxiliary: T must be positive");
    if (!B.allFinite() || !sigma.allFinite() || !v.allFinite())
        throw std::invalid_argument("auxiliary: non-finite inputs");
}

// Upper blocks of exp([[M, beta],[0, 0]] q): returns Phi = e^{Mq} and
// I = int_0^q e^{Mu} du * beta in one call.
void phi_and_integral(const Mat& M, const Vec& beta, double q, Mat& Phi, Vec& I) {
    const Eigen::Index d = M.rows();
    Mat Aug = Mat::Zero(d + 1, d + 1);
    Aug.topLeftCorner(d, d) = M * q;
    Aug.topRightCorner(d, 1) = beta * q;
    const Mat E = expm(Aug);
    Phi = E.topLeftCorner(d, d);
    I = E.topRightCorner(d, 1);
}

// int_{T-q}^{T} beta(s) ds for the time-dependent (B = 0) case.
Vec beta_area(const LinearAuxiliary& aux, double q) {
    if (q == 0) return Vec::Zero(aux.dim());
    const double t0 = aux.T - q;
    if (aux.beta_integral) return aux.beta_integral(t0, aux.T);
    return integrate_vector(aux.beta_fun, t0, aux.T);
}

}  // namespace

LinearAuxiliary make_auxiliary(const Mat& B, const Vec& beta, const Mat& sigma, double T,
                               const Vec& v) {
    check_dims(B, sigma, v, T);
    if (beta.size() != B.rows()) throw std::invalid_argument("auxiliary: beta dim mismatch");
    LinearAuxiliary aux;
    aux.B = B;
    aux.beta = beta;
    aux.sigma = sigma;
    aux.T = T;
    aux.v = v;
    aux.a = sigma * sigma.transpose();
    aux.b_zero = B.isZero(0.0);
    if (!aux.b_zero && lyapunov_solvable(B)) aux.lambda = solve_lyapunov(B, aux.a);
    return aux;
}

LinearAuxiliary make_auxiliary_time_dependent(const std::function<Vec(double)>& beta_fun,
                                              const std::function<Vec(double, double)>& beta_integral,
                                              const Mat& sigma, double T, const Vec& v) {
    if (!beta_fun) throw std::invalid_argument("auxiliary: beta_fun required");
    const Eigen::Index d = sigma.rows();
    LinearAuxiliary aux;
    aux.B = Mat::Zero(d, d);
    aux.beta = Vec::Zero(d);
    aux.beta_fun = beta_fun;
    aux.beta_integral = beta_integral;
    aux.sigma = sigma;
    aux.T = T;
    aux.v = v;
    aux.a = sigma * sigma.transpose();
    aux.b_zero = true;
    check_dims(aux.B, sigma, v, T);
    if (beta_fun(0.0).size() != d) throw std::invalid_argument("auxiliary: beta_fun dim mismatch");
    return aux;
}

double tau(double s, double T) {
    if (s < 0 || s > T) throw std::invalid_argument("tau: s outside [0, T]");
    return s * (2.0 - s / T);
}

double tau_complement(double s, double T) {
    if (s < 0 || s > T) throw std::invalid_argument("tau_complement: s outside [0, T]");
    return (T - s) * (T - s) / T;
}

Mat K_at_horizon(const LinearAuxiliary& aux, double q) {
    if (q < 0) throw std::invalid_argument("K_at_horizon: negative horizon");
    if (aux.b_zero) return aux.a * q;
    if (aux.lambda) {
        const Mat Phi = expm(aux.B * q);
        Mat K = *aux.lambda - Phi * (*aux.lambda) * Phi.transpose();
        return 0.5 * (K + K.transpose());
    }
    const Mat& B = aux.B;
    const Mat& a = aux.a;
    Mat K = integrate_matrix(
        [&](double u) {
            const Mat E = expm(B * u);
            return Mat(E * a * E.transpose());
        },
        0.0, q);
    return 0.5 * (K + K.transpose());
}

Moments transition_moments(const LinearAuxiliary& aux, double t, const Vec& x) {
    if (t < 0 || t > aux.T) throw std::invalid_argument("transition_moments: t outside [0, T]");
    const double q = aux.T - t;
    Moments mo;
    mo.K = K_at_horizon(aux, q);
    if (aux.b_zero) {
        mo.mean = x + (aux.time_dependent() ? beta_area(aux, q) : Vec(q * aux.beta));
    } else {
        Mat Phi;
        Vec Ib;
        phi_and_integral(aux.B, aux.beta, q, Phi, Ib);
        mo.mean = Phi * x + Ib;
    }
    return mo;
}

double aux_log_density(const LinearAuxiliary& aux, double t, const Vec& x) {
    if (!(t < aux.T)) throw std::invalid_argument("aux_log_density: t must be < T");
    const Moments mo = transition_moments(aux, t, x);
    return gaussian_logpdf(aux.v, mo.mean, mo.K,
                           "aux_log_density at t=" + std::to_string(t));
}

Vec v_at_horizon(const LinearAuxiliary& aux, double q) {
    if (q < 0) throw std::invalid_argument("v_at_horizon: negative horizon");
    if (q == 0) return aux.v;
    if (aux.b_zero)
        return aux.v - (aux.time_dependent() ? beta_area(aux, q) : Vec(q * aux.beta));
    Mat Phineg;
    Vec Ineg;
    phi_and_integral(-aux.B, aux.beta, q, Phineg, Ineg);
    return Phineg * aux.v - Ineg;
}

Vec v_of_s(const LinearAuxiliary& aux, double s) {
    if (s < 0 || s > aux.T) throw std::invalid_argument("v_of_s: s outside [0, T]");
    return v_at_horizon(aux, aux.T - s);
}

Vec v_dot(const LinearAuxiliary& aux, double s) {
    return aux.B * v_of_s(aux, s) + aux.beta_at(s);
}

HR H_r_tilde(const LinearAuxiliary& aux, double t, const Vec& x) {
    if (!(t < aux.T)) throw std::invalid_argument("H_r_tilde: t must be < T");
    const double q = aux.T - t;
    const Mat K = K_at_horizon(aux, q);
    HR out;
    if (aux.b_zero) {
        const Vec resid = aux.v - x - (aux.time_dependent() ? beta_area(aux, q) : Vec(q * aux.beta));
        const std::string ctx = "H_r_tilde: K(t=" + std::to_string(t) + ")";
        out.H = spd_solve(K, Mat::Identity(aux.dim(), aux.dim()), ctx);
        out.r = spd_solve(K, Mat(resid), ctx);
    } else {
        Mat Phi;
        Vec Ib;
        phi_and_integral(aux.B, aux.beta, q, Phi, Ib);
        const std::string ctx = "H_r_tilde: K(t=" + std::to_string(t) + ")";
        const Mat KinvPhi = spd_solve(K, Phi, ctx);
        out.H = Phi.transpose() * KinvPhi;
        out.r = Phi.transpose() * spd_solve(K, Mat(aux.v - Ib - Phi * x), ctx);
    }
    out.H = 0.5 * (out.H + out.H.transpose());
    return out;
}

Mat H_at_horizon(const LinearAuxiliary& aux, double q) {
    const Mat K = K_at_horizon(aux, q);
    const std::string ctx = "H_at_horizon: K(q=" + std::to_string(q) + ")";
    Mat H;
    if (aux.b_zero) {
        H = spd_solve(K, Mat::Identity(aux.dim(), aux.dim()), ctx);
    } else {
        const Mat Phi = expm(aux.B * q);
        H = Phi.transpose() * spd_solve(K, Phi, ctx);
    }
    return 0.5 * (H + H.transpose());
}

Mat J_of_s(const LinearAuxiliary& aux, double s) {
    const double q = tau_complement(s, aux.T);
    if (q < aux.T * 1e-12)
        throw std::invalid_argument("J_of_s: tau(s) exceeds T(1 - 1e-12), s=" + std::to_string(s));
    return H_at_horizon(aux, q) * q;
}

Mat J_closed_form(const LinearAuxiliary& aux, double s) {
    if (!aux.lambda) throw std::runtime_error("J_closed_form: Lyapunov solution unavailable");
    const double q = tau_complement(s, aux.T);
    if (q < aux.T * 1e-12)
        throw std::invalid_argument("J_closed_form: tau(s) exceeds T(1 - 1e-12)");
    const Mat E = expm(-aux.B * q);
    const Mat D = E * (*aux.lambda) * E.transpose() - *aux.lambda;
    Mat J = spd_solve(D, Mat::Identity(aux.dim(), aux.dim()) * q, "J_closed_form: D(s=" + std::to_string(s) + ")");
    return 0.5 * (J + J.transpose());
}

BridgeContext precompute_bridge_grid(const LinearAuxiliary& aux, const Vec& u, int m) {
    if (m < 2) throw std::invalid_argument("precompute_bridge_grid: m must be >= 2");
    if (u.size() != aux.dim()) throw std::invalid_argument("precompute_bridge_grid: u dim mismatch");
    BridgeContext ctx;
    ctx.aux = aux;
    ctx.u = u;
    ctx.m = m;
    ctx.s = uniform_grid(0.0, aux.T, m);
    ctx.ds = aux.T / (m - 1);
    ctx.t_image.resize(m);
    ctx.hq.resize(m);
    ctx.v_pull.resize(m);
    ctx.vdot.resize(m);
    ctx.J.resize(m - 1);
    for (int j = 0; j < m; ++j) {
        ctx.t_image[j] = tau(ctx.s[j], aux.T);
        ctx.hq[j] = tau_complement(ctx.s[j], aux.T);
        ctx.v_pull[j] = (j == m - 1) ? aux.v : v_at_horizon(aux, ctx.hq[j]);
        ctx.vdot[j] = aux.B * ctx.v_pull[j] + aux.beta_at(ctx.t_image[j]);
        if (j < m - 1) ctx.J[j] = H_at_horizon(aux, ctx.hq[j]) * ctx.hq[j];
    }
    return ctx;
}

}  // namespace sdebridge
