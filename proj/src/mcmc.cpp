#include "sdebridge/mcmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdebridge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool nonneg_path(const UPath& up) {
    for (const Vec& x : up.X)
        if ((x.array() < 0).any()) return false;
    return true;
}

struct SegBuild {
    GuidedBridge gb;
    UPath up;
    double log_psi = 0, log_ptilde = 0;
};

// Rebuilds one segment at `theta` keeping its innovations; throws on any
// non-finite intermediate.
SegBuild build_segment(const ModelBundle& b, const Segment& s, const Vec& theta, int m,
                       const WienerIncrements& Z) {
    SegBuild sb;
    const LinearAuxiliary aux = b.make_aux(theta, s.T, s.u, s.v);
    sb.gb = make_guided_bridge(b.model, theta, aux, s.u, m, b.match_policy);
    sb.up = solve_g(sb.gb, Z);
    sb.log_psi = log_psi_timechanged(sb.gb, sb.up);
    sb.log_ptilde = aux_log_density(sb.gb.ctx.aux, 0.0, s.u);
    if (!std::isfinite(sb.log_psi) || !std::isfinite(sb.log_ptilde))
        throw std::runtime_error("non-finite likelihood contribution");
    return sb;
}

// All segments at `theta` with the current innovations kept; false when any
// segment failed (non-finite).  `nonneg` reports the positivity check.
bool build_all(const ModelBundle& b, const ChainState& st, const Vec& theta, ThreadPool& pool,
               std::vector<SegBuild>& out, bool& nonneg) {
    const int n = static_cast<int>(st.seg.size());
    out.clear();
    out.resize(n);
    std::vector<char> ok(n, 1), pos(n, 1);
    pool.parallel_for(n, [&](int i) {
        try {
            out[i] = build_segment(b, st.segments[i], theta, st.m, st.seg[i].Z);
            pos[i] = nonneg_path(out[i].up) ? 1 : 0;
        } catch (...) {
            ok[i] = 0;
        }
    });
    nonneg = true;
    for (int i = 0; i < n; ++i) {
        if (!ok[i]) return false;
        if (!pos[i]) nonneg = false;
    }
    return true;
}

void apply_builds(ChainState& st, const Vec& theta, std::vector<SegBuild>& builds) {
    st.theta = theta;
    for (std::size_t i = 0; i < st.seg.size(); ++i) {
        st.seg[i].gb = std::move(builds[i].gb);
        st.seg[i].up = std::move(builds[i].up);
        st.seg[i].log_psi = builds[i].log_psi;
        st.seg[i].log_ptilde = builds[i].log_ptilde;
    }
}

Vec subvector(const Vec& theta, const std::vector<int>& idx) {
    Vec v(static_cast<int>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v(static_cast<int>(k)) = theta(idx[k]);
    return v;
}

// xi^{-2} entries for the drift coefficients: Gaussian marginals contribute
// 1/var, anything else is treated as flat.
Vec drift_xi_inv2(const PriorSpec& prior, const std::vector<int>& idx, bool require_gaussian,
                  Vec* prior_mean = nullptr) {
    Vec xi = Vec::Zero(static_cast<int>(idx.size()));
    if (prior_mean) *prior_mean = Vec::Zero(xi.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const PriorMarginal& m = prior.marginals.at(idx[k]);
        if (m.family == PriorFamily::gaussian) {
            xi(static_cast<int>(k)) = 1.0 / m.var;
            if (prior_mean) (*prior_mean)(static_cast<int>(k)) = m.mean;
        } else if (require_gaussian) {
            throw std::invalid_argument(
                "gibbs drift update: Gaussian prior required for drift coefficient " +
                std::to_string(idx[k] + 1));
        }
    }
    return xi;
}

}  // namespace

ChainState make_chain_state(const ModelBundle& bundle, const Observations& data, int m,
                            const Vec& theta_init, bool positivity, int cap, RngStream& rng) {
    if (data.t.size() != data.x.size())
        throw std::invalid_argument("make_chain_state: observation times/states size mismatch");
    if (data.t.size() < 2)
        throw std::invalid_argument("make_chain_state: need at least 2 observations");
    if (m < 2) throw std::invalid_argument("make_chain_state: need m >= 2 grid points");
    if (theta_init.size() != bundle.param_dim)
        throw std::invalid_argument("make_chain_state: theta_init has wrong dimension");
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        if (data.x[i].size() != bundle.model.state_dim)
            throw std::invalid_argument("make_chain_state: observation dimension mismatch");
        if (i + 1 < data.t.size() && !(data.t[i + 1] > data.t[i]))
            throw std::invalid_argument("make_chain_state: observation times must increase");
        if (positivity && (data.x[i].array() < 0).any())
            throw std::invalid_argument(
                "make_chain_state: positivity constraint with a negative observation at t=" +
                std::to_string(data.t[i]));
    }

    ChainState st;
    st.theta = theta_init;
    st.m = m;
    const int n = static_cast<int>(data.t.size()) - 1;
    st.segments.resize(n);
    st.seg.resize(n);
    for (int i = 0; i < n; ++i) {
        st.segments[i] = Segment{data.x[i], data.x[i + 1], data.t[i + 1] - data.t[i]};
        const Segment& s = st.segments[i];
        SegmentState& ss = st.seg[i];
        const LinearAuxiliary aux = bundle.make_aux(theta_init, s.T, s.u, s.v);
        ss.gb = make_guided_bridge(bundle.model, theta_init, aux, s.u, m, bundle.match_policy);
        bool have = false;
        const int tries = positivity ? cap : 1;
        for (int attempt = 0; attempt < tries && !have; ++attempt) {
            WienerIncrements Z = sample_wiener(rng, ss.gb.ctx.s, bundle.model.noise_dim);
            if (positivity) {
                try {
                    UPath up = solve_g(ss.gb, Z);
                    if (!nonneg_path(up)) continue;
                    ss.up = std::move(up);
                } catch (const std::exception&) {
                    continue;
                }
            } else {
                ss.up = solve_g(ss.gb, Z);
            }
            ss.Z = std::move(Z);
            have = true;
        }
        if (!have)
            throw std::runtime_error(
                "make_chain_state: no nonnegative initial bridge for segment " +
                std::to_string(i + 1) + " within " + std::to_string(cap) + " attempts");
        ss.log_psi = log_psi_timechanged(ss.gb, ss.up);
        ss.log_ptilde = aux_log_density(ss.gb.ctx.aux, 0.0, s.u);
        if (!std::isfinite(ss.log_psi) || !std::isfinite(ss.log_ptilde))
            throw std::runtime_error("make_chain_state: non-finite likelihood at segment " +
                                     std::to_string(i + 1));
    }
    return st;
}

void update_innovations(ChainState& st, const ModelBundle& bundle, bool positivity, int cap,
                        const RngStream& stream_base, ThreadPool& pool, ChainOutput& out) {
    const int n = static_cast<int>(st.seg.size());
    std::vector<char> accepted(n, 0);
    std::vector<std::uint64_t> nonfinite(n, 0), caphit(n, 0);
    pool.parallel_for(n, [&](int i) {
        RngStream rs = stream_base.substream(static_cast<std::uint64_t>(i));
        SegmentState& ss = st.seg[i];
        const int tries = positivity ? cap : 1;
        bool have = false;
        UPath up_prop;
        WienerIncrements Z_prop;
        for (int attempt = 0; attempt < tries && !have; ++attempt) {
            WienerIncrements Z = sample_wiener(rs, ss.gb.ctx.s, bundle.model.noise_dim);
            try {
                UPath cand = solve_g(ss.gb, Z);
                if (positivity && !nonneg_path(cand)) continue;
                up_prop = std::move(cand);
                Z_prop = std::move(Z);
                have = true;
            } catch (const std::exception&) {
                ++nonfinite[i];
            }
        }
        if (!have) {
            if (positivity) ++caphit[i];
            return;
        }
        const double lp = log_psi_timechanged(ss.gb, up_prop);
        if (!std::isfinite(lp)) {
            ++nonfinite[i];
            return;
        }
        const double log_a = lp - ss.log_psi;
        if (std::log(rs.uniform01()) < log_a) {
            ss.Z = std::move(Z_prop);
            ss.up = std::move(up_prop);
            ss.log_psi = lp;
            accepted[i] = 1;
        }
    });
    out.innovation_proposals += static_cast<std::uint64_t>(n);
    for (int i = 0; i < n; ++i) {
        out.innovation_accepts += accepted[i];
        out.flag_nonfinite += nonfinite[i];
        out.flag_cap_hits += caphit[i];
    }
}

bool update_theta_mh(ChainState& st, const ModelBundle& bundle, const ProposalKernel& kernel,
                     const std::vector<int>& idx, const PriorSpec& prior, bool positivity,
                     int cap, RngStream& rng, ThreadPool& pool, ChainOutput& out,
                     double* log_a_out) {
    ++out.theta_proposals;
    if (log_a_out) *log_a_out = kNegInf;
    const int tries = positivity ? cap : 1;
    Vec th_prop;
    std::vector<SegBuild> builds;
    bool have = false;
    for (int attempt = 0; attempt < tries && !have; ++attempt) {
        th_prop = kernel.propose(st.theta, idx, rng);
        if (!prior.in_support(th_prop)) return false;  // the prior ratio vanishes
        bool nonneg = true;
        if (!build_all(bundle, st, th_prop, pool, builds, nonneg)) {
            ++out.flag_nonfinite;
            if (!positivity) return false;
            continue;
        }
        if (positivity && !nonneg) continue;
        have = true;
    }
    if (!have) {
        ++out.flag_cap_hits;
        return false;
    }

    double log_a = kernel.log_q_ratio(th_prop, st.theta, idx) + prior.log_ratio(th_prop, st.theta);
    for (std::size_t i = 0; i < st.seg.size(); ++i)
        log_a += builds[i].log_ptilde - st.seg[i].log_ptilde + builds[i].log_psi -
                 st.seg[i].log_psi;
    if (log_a_out) *log_a_out = log_a;
    if (std::log(rng.uniform01()) < log_a) {
        apply_builds(st, th_prop, builds);
        ++out.theta_accepts;
        return true;
    }
    return false;
}

ConjugateStats conjugate_stats(const ModelBundle& bundle, const Vec& theta,
                               const std::vector<Path>& paths, const Vec& xi_inv2) {
    const int N = bundle.n_basis;
    if (N <= 0 || !bundle.basis)
        throw std::invalid_argument("conjugate_stats: model does not declare a drift basis");
    if (xi_inv2.size() != N)
        throw std::invalid_argument("conjugate_stats: xi_inv2 has wrong dimension");
    const int d = bundle.model.state_dim;
    ConjugateStats cs;
    cs.mu = Vec::Zero(N);
    cs.Sigma = Mat::Zero(N, N);
    for (const Path& p : paths) {
        for (std::size_t j = 0; j + 1 < p.t.size(); ++j) {
            const Vec& x = p.x[j];
            const double dt = p.t[j + 1] - p.t[j];
            const Vec dY = p.x[j + 1] - x;
            const Mat a = bundle.model.diffusion(p.t[j], x, theta);
            Eigen::LLT<Mat> llt(a);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error(
                    "conjugate_stats: singular diffusion matrix along the path");
            Mat Phi(d, N);
            for (int k = 0; k < N; ++k) Phi.col(k) = bundle.basis(x, k);
            const Mat aInvPhi = llt.solve(Phi);
            cs.mu += aInvPhi.transpose() * dY;
            cs.Sigma += (Phi.transpose() * aInvPhi) * dt;
        }
    }
    cs.Sigma = ((cs.Sigma + cs.Sigma.transpose()) / 2.0).eval();
    cs.W = cs.Sigma;
    cs.W.diagonal() += xi_inv2;
    return cs;
}

std::vector<Path> chain_paths(const ChainState& st) {
    std::vector<Path> out(st.seg.size());
    for (std::size_t i = 0; i < st.seg.size(); ++i) {
        out[i].t = st.seg[i].gb.ctx.t_image;
        out[i].x = st.seg[i].up.X;
    }
    return out;
}

void update_gibbs_drift(ChainState& st, const ModelBundle& bundle, const PriorSpec& prior,
                        RngStream& rng, ThreadPool& pool, ChainOutput& out) {
    if (bundle.n_basis <= 0 || bundle.drift_idx.empty() || !bundle.basis)
        throw std::invalid_argument(
            "gibbs drift update: model does not declare a linear drift basis");
    if (static_cast<int>(bundle.drift_idx.size()) != bundle.n_basis)
        throw std::invalid_argument("gibbs drift update: basis/index size mismatch");
    if (bundle.model.state_dim != bundle.model.noise_dim)
        throw std::invalid_argument(
            "gibbs drift update: requires a square invertible dispersion");
    const int N = bundle.n_basis;
    Vec prior_mean;
    const Vec xi_inv2 = drift_xi_inv2(prior, bundle.drift_idx, true, &prior_mean);

    const ConjugateStats cs = conjugate_stats(bundle, st.theta, chain_paths(st), xi_inv2);
    Eigen::LLT<Mat> llt(cs.W);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("gibbs drift update: W is not positive definite");
    const Vec mu_adj = cs.mu + xi_inv2.cwiseProduct(prior_mean);
    const Vec mean = llt.solve(mu_adj);
    const Vec draw = mean + llt.matrixU().solve(rng.normal_vec(N));

    Vec th = st.theta;
    for (int k = 0; k < N; ++k) th(bundle.drift_idx[k]) = draw(k);

    const int n = static_cast<int>(st.seg.size());
    std::vector<SegBuild> builds(n);
    std::vector<WienerIncrements> Zs(n);
    pool.parallel_for(n, [&](int i) {
        const Segment& s = st.segments[i];
        SegBuild sb;
        const LinearAuxiliary aux = bundle.make_aux(th, s.T, s.u, s.v);
        sb.gb = make_guided_bridge(bundle.model, th, aux, s.u, st.m, bundle.match_policy);
        WienerIncrements Z = invert_g(sb.gb, st.seg[i].up.X, st.seg[i].Z.dW.back());
        sb.up = solve_g(sb.gb, Z);
        sb.log_psi = log_psi_timechanged(sb.gb, sb.up);
        sb.log_ptilde = aux_log_density(sb.gb.ctx.aux, 0.0, s.u);
        if (!std::isfinite(sb.log_psi) || !std::isfinite(sb.log_ptilde))
            throw std::runtime_error("gibbs drift update: non-finite likelihood at segment " +
                                     std::to_string(i + 1));
        builds[i] = std::move(sb);
        Zs[i] = std::move(Z);
    });
    apply_builds(st, th, builds);
    for (int i = 0; i < n; ++i) st.seg[i].Z = std::move(Zs[i]);
    ++out.gibbs_draws;
}

double preconditioned_log_q_ratio(const Vec& prop, const Vec& cur, double alpha,
                                  const Mat& W_cur, const Mat& W_prop) {
    if (!(alpha > 0)) throw std::invalid_argument("preconditioned_log_q_ratio: alpha must be > 0");
    const Vec d = prop - cur;
    const double ld_cur = spd_logdet(W_cur, "preconditioned_log_q_ratio: W");
    const double ld_prop = spd_logdet(W_prop, "preconditioned_log_q_ratio: W'");
    const double quad = d.dot(W_prop * d) - d.dot(W_cur * d);
    return 0.5 * (ld_prop - ld_cur) - quad / (2.0 * alpha * alpha);
}

bool update_theta_alg3(ChainState& st, const ModelBundle& bundle, const PriorSpec& prior,
                       double alpha, bool positivity, int cap, RngStream& rng, ThreadPool& pool,
                       ChainOutput& out, double* log_a_out) {
    if (bundle.drift_idx.empty() || bundle.n_basis <= 0)
        throw std::invalid_argument("alg3 update: model does not declare a linear drift basis");
    ++out.theta_proposals;
    if (log_a_out) *log_a_out = kNegInf;
    const int N = bundle.n_basis;
    const Vec xi_inv2 = drift_xi_inv2(prior, bundle.drift_idx, false);

    const ConjugateStats cur = conjugate_stats(bundle, st.theta, chain_paths(st), xi_inv2);
    Eigen::LLT<Mat> llt(cur.W);
    if (llt.info() != Eigen::Success) {
        ++out.flag_w_not_pd;
        return false;
    }
    const Vec vcur = subvector(st.theta, bundle.drift_idx);

    const int tries = positivity ? cap : 1;
    Vec th_prop;
    std::vector<SegBuild> builds;
    bool have = false;
    for (int attempt = 0; attempt < tries && !have; ++attempt) {
        const Vec step = llt.matrixU().solve(rng.normal_vec(N));
        th_prop = st.theta;
        for (int k = 0; k < N; ++k) th_prop(bundle.drift_idx[k]) = vcur(k) + alpha * step(k);
        if (!prior.in_support(th_prop)) return false;  // the prior ratio vanishes
        bool nonneg = true;
        if (!build_all(bundle, st, th_prop, pool, builds, nonneg)) {
            ++out.flag_nonfinite;
            if (!positivity) return false;
            continue;
        }
        if (positivity && !nonneg) continue;
        have = true;
    }
    if (!have) {
        ++out.flag_cap_hits;
        return false;
    }

    std::vector<Path> prop_paths(builds.size());
    for (std::size_t i = 0; i < builds.size(); ++i) {
        prop_paths[i].t = builds[i].gb.ctx.t_image;
        prop_paths[i].x = builds[i].up.X;
    }
    Mat W_prop;
    try {
        W_prop = conjugate_stats(bundle, th_prop, prop_paths, xi_inv2).W;
        spd_logdet(W_prop, "alg3 update: W'");
    } catch (const std::exception&) {
        ++out.flag_w_not_pd;
        return false;
    }

    const Vec vprop = subvector(th_prop, bundle.drift_idx);
    double log_a = preconditioned_log_q_ratio(vprop, vcur, alpha, cur.W, W_prop) +
                   prior.log_ratio(th_prop, st.theta);
    for (std::size_t i = 0; i < st.seg.size(); ++i)
        log_a += builds[i].log_ptilde - st.seg[i].log_ptilde + builds[i].log_psi -
                 st.seg[i].log_psi;
    if (log_a_out) *log_a_out = log_a;
    if (std::log(rng.uniform01()) < log_a) {
        apply_builds(st, th_prop, builds);
        ++out.theta_accepts;
        return true;
    }
    return false;
}

ChainOutput run_chain(const ModelBundle& bundle, const Observations& data,
                      const RunOptions& opt) {
    if (opt.iterations < 0) throw std::invalid_argument("run_chain: iterations must be >= 0");
    if (opt.theta_init.size() != bundle.param_dim)
        throw std::invalid_argument("run_chain: theta_init has wrong dimension");
    if (opt.prior.dim() != bundle.param_dim)
        throw std::invalid_argument("run_chain: prior dimension mismatch");
    if (!opt.prior.in_support(opt.theta_init))
        throw std::invalid_argument("run_chain: theta_init outside the prior support");
    const bool positivity = opt.positivity.value_or(bundle.positivity);
    const double alpha =
        opt.alpha > 0
            ? opt.alpha
            : (bundle.drift_idx.empty() ? 1.0 : 2.38 / std::sqrt(double(bundle.drift_idx.size())));

    ThreadPool pool(std::max(1, opt.threads));
    RngStream root(opt.seed, 0);
    RngStream init_rng = root.substream(0);
    const RngStream innov_root = root.substream(1);
    const RngStream theta_root = root.substream(2);

    ChainState st = make_chain_state(bundle, data, opt.m, opt.theta_init, positivity,
                                     opt.positivity_cap, init_rng);

    ChainOutput out;
    out.seed = opt.seed;
    out.config_echo = opt.config_echo;
    out.param_names = bundle.param_names;
    out.trace.resize(opt.iterations, bundle.param_dim);

    std::vector<int> all_idx(bundle.param_dim);
    for (int k = 0; k < bundle.param_dim; ++k) all_idx[k] = k;

    for (int it = 0; it < opt.iterations; ++it) {
        try {
            update_innovations(st, bundle, positivity, opt.positivity_cap,
                               innov_root.substream(static_cast<std::uint64_t>(it)), pool, out);
            RngStream tr = theta_root.substream(static_cast<std::uint64_t>(it));
            double log_a = std::numeric_limits<double>::quiet_NaN();
            switch (opt.algorithm) {
                case Algorithm::alg1:
                    update_theta_mh(st, bundle, opt.theta_kernel, all_idx, opt.prior, positivity,
                                    opt.positivity_cap, tr, pool, out, &log_a);
                    break;
                case Algorithm::alg2:
                    if (!bundle.gamma_idx.empty())
                        update_theta_mh(st, bundle, opt.theta_kernel, bundle.gamma_idx, opt.prior,
                                        positivity, opt.positivity_cap, tr, pool, out, &log_a);
                    update_gibbs_drift(st, bundle, opt.prior, tr, pool, out);
                    break;
                case Algorithm::alg3:
                    update_theta_alg3(st, bundle, opt.prior, alpha, positivity,
                                      opt.positivity_cap, tr, pool, out, &log_a);
                    break;
            }
            if (opt.record_log_a2) out.log_a2.push_back(log_a);
            out.trace.row(it) = st.theta.transpose();
        } catch (const std::exception& e) {
            throw std::runtime_error("run_chain: iteration " + std::to_string(it) + ": " +
                                     e.what());
        }
    }
    return out;
}

double cache_residual(const ModelBundle& bundle, const ChainState& st) {
    double worst = 0;
    for (std::size_t i = 0; i < st.seg.size(); ++i) {
        const SegBuild fresh =
            build_segment(bundle, st.segments[i], st.theta, st.m, st.seg[i].Z);
        worst = std::max(worst, std::abs(fresh.log_psi - st.seg[i].log_psi));
        worst = std::max(worst, std::abs(fresh.log_ptilde - st.seg[i].log_ptilde));
        for (std::size_t j = 0; j < fresh.up.X.size(); ++j)
            worst = std::max(worst,
                             (fresh.up.X[j] - st.seg[i].up.X[j]).cwiseAbs().maxCoeff());
    }
    return worst;
}

ActEstimate act_estimate(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    if (n < 100) throw std::invalid_argument("act_estimate: need at least 100 samples");
    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    double c0 = 0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= n;
    const double scale = 1.0 + mean * mean;
    if (c0 <= 1e-28 * scale) return {1.0, true};

    auto rho = [&](int k) {
        double s = 0;
        for (int i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
        return s / (n * c0);
    };
    double tau = -1.0;
    for (int p = 0; 2 * p + 1 < n; ++p) {
        const double g = rho(2 * p) + rho(2 * p + 1);
        if (g <= 0) break;
        tau += 2.0 * g;
    }
    return {tau, false};
}

}  // namespace sdebridge
