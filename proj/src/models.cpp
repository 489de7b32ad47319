#include "sdebridge/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>

namespace sdebridge {

namespace {
std::atomic<std::uint64_t> g_clamp_count{0};
}

std::uint64_t cle_clamp_count() { return g_clamp_count.load(); }
void reset_cle_clamp_count() { g_clamp_count.store(0); }

Vec ReactionNetwork::h(const Vec& x) const {
    Vec out(n_reactions());
    for (int k = 0; k < n_reactions(); ++k) out(k) = hazards[k].eval(x);
    return out;
}

HazardLinearization linearize_hazards(const ReactionNetwork& net,
                                      const std::vector<Vec>& design) {
    const int d = net.dim();
    const int K = net.n_reactions();
    if (design.size() < 2) throw std::invalid_argument("linearize_hazards: need >= 2 design points");
    HazardLinearization lin;
    lin.c = Vec::Zero(K);
    lin.U = Mat::Zero(K, d);
    for (int i = 0; i < K; ++i) {
        const Hazard& hz = net.hazards[i];
        if (hz.affine) {
            lin.c(i) = hz.c;
            lin.U.row(i) = hz.u.transpose();
            continue;
        }
        const int p = static_cast<int>(hz.vars.size());
        const int n = static_cast<int>(design.size());
        Mat D(n, p + 1);
        Vec y(n), w(n);
        std::set<std::vector<double>> distinct;
        for (int j = 0; j < n; ++j) {
            const Vec& x = design[j];
            y(j) = hz.eval(x);
            w(j) = std::max(y(j), 0.0);
            D(j, 0) = 1.0;
            for (int k = 0; k < p; ++k) D(j, k + 1) = x(hz.vars[k]);
            if (w(j) > 0) {
                std::vector<double> key(p);
                for (int k = 0; k < p; ++k) key[k] = x(hz.vars[k]);
                distinct.insert(key);
            }
        }
        if (distinct.size() < 2)
            throw std::runtime_error("linearize_hazards: degenerate weighted design for hazard " +
                                     std::to_string(i + 1));
        const Vec sw = w.array().sqrt();
        const Vec coef = (sw.asDiagonal() * D)
                             .colPivHouseholderQr()
                             .solve(Vec(sw.asDiagonal() * y));
        lin.c(i) = coef(0);
        for (int k = 0; k < p; ++k) lin.U(i, hz.vars[k]) = coef(k + 1);
    }
    return lin;
}

DiffusionModel cle_model(const ReactionNetwork& net) {
    auto nptr = std::make_shared<ReactionNetwork>(net);
    DiffusionModel m;
    m.state_dim = net.dim();
    m.noise_dim = net.n_reactions();
    m.drift = [nptr](double, const Vec& x, const Vec& theta) -> Vec {
        return nptr->S * theta.cwiseProduct(nptr->h(x));
    };
    m.dispersion = [nptr](double, const Vec& x, const Vec& theta) -> Mat {
        Vec arg = theta.cwiseProduct(nptr->h(x));
        for (int k = 0; k < arg.size(); ++k)
            if (arg(k) < 0) {
                arg(k) = 0;
                g_clamp_count.fetch_add(1, std::memory_order_relaxed);
            }
        return nptr->S * arg.array().sqrt().matrix().asDiagonal();
    };
    return m;
}

ReactionNetwork prokaryotic_network(double K_DNA) {
    if (K_DNA < 1) throw std::invalid_argument("prokaryotic_network: K_DNA must be >= 1");
    ReactionNetwork net;
    net.K_DNA = K_DNA;
    net.S.resize(4, 8);
    net.S << 0, 0, 1, 0, 0, 0, -1, 0,
             0, 0, 0, 1, -2, 2, 0, -1,
            -1, 1, 0, 0, 1, -1, 0, 0,
            -1, 1, 0, 0, 0, 0, 0, 0;

    auto affine = [](double c, const Vec& u) {
        Hazard h;
        h.affine = true;
        h.c = c;
        h.u = u;
        h.eval = [c, u](const Vec& x) { return c + u.dot(x); };
        return h;
    };
    auto e = [](int i) {
        Vec v = Vec::Zero(4);
        v(i) = 1;
        return v;
    };

    Hazard h1;  // x3 * x4 (RNA-polymerase binding: P2 and DNA)
    h1.eval = [](const Vec& x) { return x(2) * x(3); };
    h1.vars = {2, 3};
    Hazard h5;  // dimerisation: x2 choose 2
    h5.eval = [](const Vec& x) { return 0.5 * x(1) * (x(1) - 1.0); };
    h5.vars = {1};

    net.hazards = {h1,
                   affine(K_DNA, -e(3)),
                   affine(0, e(3)),
                   affine(0, e(0)),
                   h5,
                   affine(0, e(2)),
                   affine(0, e(0)),
                   affine(0, e(1))};
    return net;
}

SsaResult ssa_simulate(const ReactionNetwork& net, const Vec& theta, const Vec& x0,
                       const std::vector<double>& snapshot_times, RngStream& rng) {
    if (theta.size() != net.n_reactions())
        throw std::invalid_argument("ssa_simulate: theta dim mismatch");
    if (x0.size() != net.dim()) throw std::invalid_argument("ssa_simulate: x0 dim mismatch");
    for (std::size_t i = 1; i < snapshot_times.size(); ++i)
        if (!(snapshot_times[i] > snapshot_times[i - 1]))
            throw std::invalid_argument("ssa_simulate: snapshot times must increase");
    const double t_end = snapshot_times.empty() ? 0.0 : snapshot_times.back();

    SsaResult out;
    Vec x = x0;
    double t = 0;
    out.jumps.t.push_back(0);
    out.jumps.x.push_back(x);
    std::size_t snap = 0;
    const std::uint64_t max_events = 100000000ull;
    std::uint64_t events = 0;
    for (;;) {
        Vec lam = theta.cwiseProduct(net.h(x));
        for (int k = 0; k < lam.size(); ++k)
            if (lam(k) < 0)
                throw std::runtime_error("ssa_simulate: negative hazard at reaction " +
                                         std::to_string(k + 1));
        const double total = lam.sum();
        double t_next = (total > 0) ? t + rng.exponential(total)
                                    : std::numeric_limits<double>::infinity();
        while (snap < snapshot_times.size() && snapshot_times[snap] < t_next) {
            out.snapshots.t.push_back(snapshot_times[snap]);
            out.snapshots.x.push_back(x);
            ++snap;
        }
        if (snap >= snapshot_times.size() || t_next > t_end || total <= 0) break;
        const double pick = rng.uniform01() * total;
        double acc = 0;
        int reaction = net.n_reactions() - 1;
        for (int k = 0; k < lam.size(); ++k) {
            acc += lam(k);
            if (pick <= acc) {
                reaction = k;
                break;
            }
        }
        x += net.S.col(reaction);
        t = t_next;
        out.jumps.t.push_back(t);
        out.jumps.x.push_back(x);
        if (++events >= max_events)
            throw std::runtime_error("ssa_simulate: event budget exceeded (explosive network?)");
    }
    return out;
}

ModelBundle arctan_bundle() {
    ModelBundle b;
    b.name = "arctan";
    b.param_dim = 3;
    b.param_names = {"alpha", "beta", "sigma"};
    b.model.state_dim = 1;
    b.model.noise_dim = 1;
    b.model.drift = [](double, const Vec& x, const Vec& th) -> Vec {
        return Vec::Constant(1, th(0) * std::atan(x(0)) + th(1));
    };
    b.model.dispersion = [](double, const Vec&, const Vec& th) -> Mat {
        return Mat::Constant(1, 1, th(2));
    };
    b.make_aux = [](const Vec& th, double T, const Vec&, const Vec& v) {
        const double alpha = th(0), beta = th(1), sigma = th(2);
        Mat B(1, 1);
        Vec be(1);
        if (alpha == 0) {
            B(0, 0) = 0;
            be(0) = beta;
        } else {
            const double cb = std::cos(-beta / alpha);
            B(0, 0) = alpha * cb * cb;
            be(0) = 0.5 * alpha * std::sin(2.0 * beta / alpha);
        }
        return make_auxiliary(B, be, Mat::Constant(1, 1, sigma), T, v);
    };
    b.aux_theta_dependent = true;
    b.match_policy = MatchPolicy::strict;
    b.n_basis = 2;
    b.basis = [](const Vec& x, int k) -> Vec {
        return Vec::Constant(1, k == 0 ? std::atan(x(0)) : 1.0);
    };
    b.drift_idx = {0, 1};
    b.gamma_idx = {2};
    return b;
}

ModelBundle prokaryotic_bundle(double K_DNA, const std::vector<Vec>& design) {
    auto net = std::make_shared<ReactionNetwork>(prokaryotic_network(K_DNA));
    auto lin = std::make_shared<HazardLinearization>(linearize_hazards(*net, design));
    ModelBundle b;
    b.name = "prokaryotic";
    b.param_dim = 8;
    for (int i = 1; i <= 8; ++i) b.param_names.push_back("theta" + std::to_string(i));
    b.model = cle_model(*net);
    b.make_aux = [net, lin](const Vec& th, double T, const Vec&, const Vec& v) {
        const Mat B = lin->B_theta(net->S, th);
        const Vec be = lin->beta_theta(net->S, th);
        Vec arg = th.cwiseProduct(lin->htilde(v));
        for (int k = 0; k < arg.size(); ++k)
            if (arg(k) < 0) {
                arg(k) = 0;
                g_clamp_count.fetch_add(1, std::memory_order_relaxed);
            }
        const Mat sig = net->S * arg.array().sqrt().matrix().asDiagonal();
        return make_auxiliary(B, be, sig, T, v);
    };
    b.aux_theta_dependent = true;
    b.match_policy = MatchPolicy::approximate;
    b.positivity = true;
    b.n_basis = 8;
    b.basis = [net](const Vec& x, int k) -> Vec {
        return net->S.col(k) * net->hazards[k].eval(x);
    };
    b.drift_idx = {0, 1, 2, 3, 4, 5, 6, 7};
    return b;
}

namespace {

struct LvTrajectory {
    double T = 0;
    double dt = 0;
    std::vector<double> X, Y;  // noise-free solution in original coordinates

    double lerp(const std::vector<double>& f, double t) const {
        if (t <= 0) return f.front();
        if (t >= T) return f.back();
        const double r = t / dt;
        const std::size_t i = std::min(static_cast<std::size_t>(r), f.size() - 2);
        const double w = r - static_cast<double>(i);
        return (1.0 - w) * f[i] + w * f[i + 1];
    }
};

LvTrajectory lv_flow(double theta, double T, double x0, double y0) {
    const int n = 10000;
    LvTrajectory tr;
    tr.T = T;
    tr.dt = T / n;
    tr.X.resize(n + 1);
    tr.Y.resize(n + 1);
    tr.X[0] = x0;
    tr.Y[0] = y0;
    auto fx = [theta](double x, double y) { return theta * x - x * y; };
    auto fy = [theta](double x, double y) { return -theta * y + x * y; };
    for (int i = 0; i < n; ++i) {
        const double x = tr.X[i], y = tr.Y[i], h = tr.dt;
        const double k1x = fx(x, y), k1y = fy(x, y);
        const double k2x = fx(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
        const double k2y = fy(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
        const double k3x = fx(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
        const double k3y = fy(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
        const double k4x = fx(x + h * k3x, y + h * k3y);
        const double k4y = fy(x + h * k3x, y + h * k3y);
        tr.X[i + 1] = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
        tr.Y[i + 1] = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
        if (!(tr.X[i + 1] > 0) || !(tr.Y[i + 1] > 0))
            throw std::runtime_error("lotka_volterra: noise-free flow left the positive quadrant");
    }
    return tr;
}

}  // namespace

ModelBundle lotka_volterra_bundle() {
    ModelBundle b;
    b.name = "lotka_volterra";
    b.param_dim = 2;
    b.param_names = {"theta", "sigma"};
    b.model.state_dim = 2;
    b.model.noise_dim = 2;
    b.model.drift = [](double, const Vec& x, const Vec& th) -> Vec {
        Vec d(2);
        d << th(0) - std::exp(x(1)), -th(0) + std::exp(x(0));
        return d;
    };
    b.model.dispersion = [](double, const Vec&, const Vec& th) -> Mat {
        return th(1) * Mat::Identity(2, 2);
    };
    b.make_aux = [](const Vec& th, double T, const Vec& u, const Vec& v) {
        auto tr = std::make_shared<LvTrajectory>(
            lv_flow(th(0), T, std::exp(u(0)), std::exp(u(1))));
        const double theta = th(0);
        auto beta_fun = [tr, theta](double t) -> Vec {
            Vec be(2);
            be << theta - tr->lerp(tr->Y, t), -theta + tr->lerp(tr->X, t);
            return be;
        };
        auto beta_integral = [tr](double a, double c) -> Vec {
            Vec out(2);
            out << std::log(tr->lerp(tr->X, c)) - std::log(tr->lerp(tr->X, a)),
                std::log(tr->lerp(tr->Y, c)) - std::log(tr->lerp(tr->Y, a));
            return out;
        };
        return make_auxiliary_time_dependent(beta_fun, beta_integral,
                                             th(1) * Mat::Identity(2, 2), T, v);
    };
    b.aux_theta_dependent = true;
    b.match_policy = MatchPolicy::strict;
    b.to_state = [](const Vec& x) -> Vec { return x.array().log(); };
    b.from_state = [](const Vec& x) -> Vec { return x.array().exp(); };
    return b;
}

ModelBundle toy_bundle() {
    ModelBundle b;
    b.name = "toy";
    b.param_dim = 1;
    b.param_names = {"tau"};
    b.model.state_dim = 1;
    b.model.noise_dim = 1;
    b.model.drift = [](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(1); };
    b.model.dispersion = [](double, const Vec&, const Vec& th) -> Mat {
        return Mat::Constant(1, 1, 1.0 / std::sqrt(th(0)));
    };
    b.make_aux = [](const Vec& th, double T, const Vec&, const Vec& v) {
        return make_auxiliary(Mat::Zero(1, 1), Vec::Zero(1),
                              Mat::Constant(1, 1, 1.0 / std::sqrt(th(0))), T, v);
    };
    b.aux_theta_dependent = true;
    b.match_policy = MatchPolicy::strict;
    return b;
}

double toy_posterior_shape() { return 1.5; }
double toy_posterior_rate(double x1) { return 1.0 + 0.5 * x1 * x1; }

ModelBundle make_bundle(const std::string& name, double K_DNA,
                        const std::vector<Vec>& linearization_design) {
    if (name == "arctan") return arctan_bundle();
    if (name == "prokaryotic") return prokaryotic_bundle(K_DNA, linearization_design);
    if (name == "lotka_volterra") return lotka_volterra_bundle();
    if (name == "toy") return toy_bundle();
    throw std::invalid_argument("unknown model: " + name);
}

}  // namespace sdebridge
