#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sdebridge/mcmc.hpp"
#include "sdebridge/models.hpp"

using namespace sdebridge;

namespace {

// Brownian motion with unknown constant drift c: the auxiliary process is the
// model itself, so the guided machinery is exact and the conjugate update has
// a scalar closed form.
ModelBundle bm_drift_bundle() {
    ModelBundle b;
    b.name = "bm_drift";
    b.param_dim = 1;
    b.param_names = {"c"};
    b.model.state_dim = 1;
    b.model.noise_dim = 1;
    b.model.drift = [](double, const Vec&, const Vec& th) -> Vec {
        return Vec::Constant(1, th(0));
    };
    b.model.dispersion = [](double, const Vec&, const Vec&) -> Mat {
        return Mat::Identity(1, 1);
    };
    b.make_aux = [](const Vec& th, double T, const Vec&, const Vec& v) {
        return make_auxiliary(Mat::Zero(1, 1), Vec::Constant(1, th(0)),
                              Mat::Identity(1, 1), T, v);
    };
    b.n_basis = 1;
    b.basis = [](const Vec&, int) -> Vec { return Vec::Ones(1); };
    b.drift_idx = {0};
    return b;
}

Observations three_point_data() {
    Observations d;
    d.t = {0.0, 1.0, 2.5};
    d.x = {Vec::Constant(1, 0.3), Vec::Constant(1, 1.1), Vec::Constant(1, 0.2)};
    return d;
}

RunOptions toy_options(double x1) {
    RunOptions opt;
    opt.algorithm = Algorithm::alg1;
    opt.iterations = 200;
    opt.m = 16;
    opt.theta_init = Vec::Constant(1, 1.0);
    opt.prior.marginals = {exponential_prior(1.0)};
    opt.theta_kernel = independence_gamma_kernel(toy_posterior_shape(), toy_posterior_rate(x1));
    opt.seed = 99;
    return opt;
}

Observations toy_data(double x1) {
    Observations d;
    d.t = {0.0, 1.0};
    d.x = {Vec::Zero(1), Vec::Constant(1, x1)};
    return d;
}

}  // namespace

TEST_CASE("conjugate stats telescope for a constant basis with unit diffusion") {
    const ModelBundle b = bm_drift_bundle();
    Path p1, p2;
    p1.t = {0.0, 0.25, 0.7, 1.3};
    p1.x = {Vec::Constant(1, 0.1), Vec::Constant(1, -0.4), Vec::Constant(1, 0.9),
            Vec::Constant(1, 0.35)};
    p2.t = {0.0, 0.5, 1.1};
    p2.x = {Vec::Constant(1, -1.0), Vec::Constant(1, 0.2), Vec::Constant(1, 2.0)};

    const Vec theta = Vec::Constant(1, 0.7);
    SUBCASE("with a proper gaussian prior term") {
        const Vec xi = Vec::Constant(1, 0.25);
        const ConjugateStats cs = conjugate_stats(b, theta, {p1, p2}, xi);
        // mu telescopes to the summed displacements, Sigma to the total time.
        CHECK(cs.mu(0) == doctest::Approx((0.35 - 0.1) + (2.0 - (-1.0))).epsilon(1e-14));
        CHECK(cs.Sigma(0, 0) == doctest::Approx(1.3 + 1.1).epsilon(1e-14));
        CHECK(cs.W(0, 0) == doctest::Approx(1.3 + 1.1 + 0.25).epsilon(1e-14));
    }
    SUBCASE("a flat prior leaves W equal to Sigma") {
        const ConjugateStats cs = conjugate_stats(b, theta, {p1, p2}, Vec::Zero(1));
        CHECK(cs.W(0, 0) == cs.Sigma(0, 0));
    }
}

TEST_CASE("conjugate stats match a direct Ito-sum evaluation") {
    ModelBundle b;
    b.param_dim = 2;
    b.model.state_dim = 2;
    b.model.noise_dim = 2;
    b.model.drift = [](double, const Vec& x, const Vec& th) -> Vec {
        Vec d(2);
        d << th(0) * x(1) + th(1), -th(0) * x(0) + th(1) * x(0) * x(1);
        return d;
    };
    b.model.dispersion = [](double, const Vec& x, const Vec&) -> Mat {
        Mat s(2, 2);
        s << 1.0 + 0.1 * std::sin(x(0)), 0.2, 0.0, 0.9;
        return s;
    };
    b.n_basis = 2;
    b.basis = [](const Vec& x, int k) -> Vec {
        Vec f(2);
        if (k == 0)
            f << x(1), -x(0);
        else
            f << 1.0, x(0) * x(1);
        return f;
    };
    b.drift_idx = {0, 1};

    RngStream rng(31, 4);
    Path p;
    double t = 0;
    Vec x = Vec::Zero(2);
    for (int j = 0; j < 60; ++j) {
        p.t.push_back(t);
        p.x.push_back(x);
        t += rng.uniform(0.005, 0.02);
        x = x + 0.1 * rng.normal_vec(2);
    }

    Vec xi(2);
    xi << 0.5, 2.0;
    const Vec theta = (Vec(2) << 0.3, -0.8).finished();
    const ConjugateStats cs = conjugate_stats(b, theta, {p}, xi);

    Vec mu = Vec::Zero(2);
    Mat Sigma = Mat::Zero(2, 2);
    for (std::size_t j = 0; j + 1 < p.t.size(); ++j) {
        const Mat ainv = b.model.diffusion(p.t[j], p.x[j], theta).inverse();
        Mat Phi(2, 2);
        Phi.col(0) = b.basis(p.x[j], 0);
        Phi.col(1) = b.basis(p.x[j], 1);
        mu += Phi.transpose() * ainv * (p.x[j + 1] - p.x[j]);
        Sigma += Phi.transpose() * ainv * Phi * (p.t[j + 1] - p.t[j]);
    }
    for (int r = 0; r < 2; ++r) {
        CHECK(cs.mu(r) == doctest::Approx(mu(r)).epsilon(1e-10));
        for (int c = 0; c < 2; ++c)
            CHECK(cs.Sigma(r, c) == doctest::Approx(Sigma(r, c)).epsilon(1e-10));
    }
    CHECK((cs.W - cs.Sigma - Mat(xi.asDiagonal())).norm() == doctest::Approx(0.0));
}

TEST_CASE("conjugate stats reject models without a basis and bad dimensions") {
    CHECK_THROWS_AS(conjugate_stats(toy_bundle(), Vec::Ones(1), {}, Vec::Zero(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(conjugate_stats(bm_drift_bundle(), Vec::Ones(1), {}, Vec::Zero(2)),
                    std::invalid_argument);
}

TEST_CASE("gibbs drift draw matches the scalar closed form and keeps the paths") {
    const ModelBundle b = bm_drift_bundle();
    const Observations data = three_point_data();
    ThreadPool pool(1);
    RngStream init_rng(5, 1);
    ChainState st = make_chain_state(b, data, 16, Vec::Constant(1, 0.4), false, 1000, init_rng);

    const double m0 = 0.2, var0 = 4.0;
    PriorSpec prior;
    prior.marginals = {gaussian_prior(m0, var0)};

    const std::vector<Path> before = chain_paths(st);
    const ConjugateStats cs = conjugate_stats(b, st.theta, before, Vec::Constant(1, 1.0 / var0));
    const double W = cs.W(0, 0);
    const double mean = (cs.mu(0) + m0 / var0) / W;
    RngStream clone(5, 7);
    const double predicted = mean + clone.normal() / std::sqrt(W);

    ChainOutput out;
    RngStream rng(5, 7);
    update_gibbs_drift(st, b, prior, rng, pool, out);

    CHECK(out.gibbs_draws == 1);
    CHECK(st.theta(0) == doctest::Approx(predicted).epsilon(1e-12));
    // Alg 2 keeps the paths and rebuilds the innovations by inversion; the
    // round trip may only move the states by solver noise.
    const std::vector<Path> after = chain_paths(st);
    double dev = 0;
    for (std::size_t i = 0; i < before.size(); ++i)
        for (std::size_t j = 0; j < before[i].x.size(); ++j)
            dev = std::max(dev, (after[i].x[j] - before[i].x[j]).cwiseAbs().maxCoeff());
    CHECK(dev <= 1e-9);
    CHECK(cache_residual(b, st) <= 1e-8);
}

TEST_CASE("gibbs drift update rejects unusable configurations") {
    ThreadPool pool(1);
    ChainOutput out;
    RngStream rng(1, 1);

    ChainState toy_st;  // never touched: the basis check fires first
    PriorSpec prior;
    prior.marginals = {gaussian_prior(0, 1)};
    CHECK_THROWS_AS(update_gibbs_drift(toy_st, toy_bundle(), prior, rng, pool, out),
                    std::invalid_argument);

    const ModelBundle b = bm_drift_bundle();
    RngStream init_rng(5, 1);
    ChainState st =
        make_chain_state(b, three_point_data(), 8, Vec::Constant(1, 0.4), false, 1000, init_rng);
    PriorSpec flat;
    flat.marginals = {flat_log_prior()};
    CHECK_THROWS_WITH_AS(update_gibbs_drift(st, b, flat, rng, pool, out),
                         doctest::Contains("Gaussian prior required"), std::invalid_argument);
}

TEST_CASE("preconditioned proposal ratio equals the gaussian density difference") {
    Mat Wc(3, 3), Wp(3, 3);
    Wc << 4.0, 0.5, 0.1, 0.5, 3.0, -0.2, 0.1, -0.2, 2.0;
    Wp << 2.5, -0.3, 0.0, -0.3, 5.0, 0.4, 0.0, 0.4, 1.5;
    Vec cur(3), prop(3);
    cur << 0.4, -1.2, 0.7;
    prop << 0.9, -0.8, 0.2;
    const double alpha = 0.7;

    auto logq = [](const Vec& x, const Vec& mean, const Mat& cov) {
        const Vec r = x - mean;
        return -0.5 * (r.dot(cov.inverse() * r) +
                       std::log(std::pow(2 * M_PI, x.size()) * cov.determinant()));
    };
    const double expected = logq(cur, prop, alpha * alpha * Wp.inverse()) -
                            logq(prop, cur, alpha * alpha * Wc.inverse());
    CHECK(preconditioned_log_q_ratio(prop, cur, alpha, Wc, Wp) ==
          doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("cache residual flags stale per-segment quantities") {
    const ModelBundle b = bm_drift_bundle();
    RngStream rng(11, 1);
    ChainState st =
        make_chain_state(b, three_point_data(), 12, Vec::Constant(1, -0.3), false, 1000, rng);
    CHECK(cache_residual(b, st) <= 1e-10);
    st.seg[0].log_psi += 1e-3;
    CHECK(cache_residual(b, st) >= 0.9e-3);
}

TEST_CASE("make_chain_state validates its inputs") {
    const ModelBundle b = bm_drift_bundle();
    RngStream rng(1, 1);
    Observations data = three_point_data();

    Observations short_data;
    short_data.t = {0.0};
    short_data.x = {Vec::Zero(1)};
    CHECK_THROWS_AS(make_chain_state(b, short_data, 8, Vec::Zero(1), false, 10, rng),
                    std::invalid_argument);

    Observations mismatched = data;
    mismatched.t.pop_back();
    CHECK_THROWS_AS(make_chain_state(b, mismatched, 8, Vec::Zero(1), false, 10, rng),
                    std::invalid_argument);

    CHECK_THROWS_AS(make_chain_state(b, data, 1, Vec::Zero(1), false, 10, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_chain_state(b, data, 8, Vec::Zero(2), false, 10, rng),
                    std::invalid_argument);

    Observations negative = data;
    negative.x[1] = Vec::Constant(1, -0.5);
    CHECK_THROWS_WITH_AS(make_chain_state(b, negative, 8, Vec::Zero(1), true, 10, rng),
                         doctest::Contains("negative observation"), std::invalid_argument);
}

TEST_CASE("toy model accepts every proposal from the exact posterior") {
    const double x1 = 1.3;
    RunOptions opt = toy_options(x1);
    opt.record_log_a2 = true;
    const ChainOutput out = run_chain(toy_bundle(), toy_data(x1), opt);

    REQUIRE(out.log_a2.size() == static_cast<std::size_t>(opt.iterations));
    double worst = 0;
    for (double la : out.log_a2) worst = std::max(worst, std::abs(la));
    CHECK(worst <= 1e-9);
    CHECK(out.theta_accepts == out.theta_proposals);
}

TEST_CASE("run_chain is reproducible and thread count never changes the trace") {
    const double x1 = 0.8;
    RunOptions opt = toy_options(x1);
    opt.iterations = 40;
    const ChainOutput a = run_chain(toy_bundle(), toy_data(x1), opt);
    const ChainOutput b = run_chain(toy_bundle(), toy_data(x1), opt);
    opt.threads = 3;
    const ChainOutput c = run_chain(toy_bundle(), toy_data(x1), opt);

    REQUIRE(a.trace.rows() == 40);
    CHECK((a.trace.array() == b.trace.array()).all());
    CHECK((a.trace.array() == c.trace.array()).all());
    CHECK(a.innovation_accepts == c.innovation_accepts);
    CHECK(a.theta_accepts == c.theta_accepts);
}

TEST_CASE("a positivity constraint that never binds leaves the chain untouched") {
    // Bridges between 5 and 6 on a unit interval essentially never cross zero,
    // so the constrained chain must consume the identical random stream.
    Observations d;
    d.t = {0.0, 1.0};
    d.x = {Vec::Constant(1, 5.0), Vec::Constant(1, 6.0)};
    RunOptions opt = toy_options(0.0);
    opt.iterations = 30;
    opt.theta_kernel = log_rw_uniform_kernel(0.2);
    const ChainOutput off = run_chain(toy_bundle(), d, opt);
    opt.positivity = true;
    const ChainOutput on = run_chain(toy_bundle(), d, opt);
    CHECK((off.trace.array() == on.trace.array()).all());
    CHECK(on.flag_cap_hits == 0);
}

TEST_CASE("prior normalization offsets never affect the chain") {
    const double x1 = 1.1;
    RunOptions opt = toy_options(x1);
    opt.iterations = 50;
    opt.theta_kernel = log_rw_uniform_kernel(0.4);
    const ChainOutput base = run_chain(toy_bundle(), toy_data(x1), opt);
    opt.prior.log_offset = 5.0;
    const ChainOutput shifted = run_chain(toy_bundle(), toy_data(x1), opt);
    CHECK((base.trace.array() == shifted.trace.array()).all());
    CHECK(base.theta_accepts == shifted.theta_accepts);
}

TEST_CASE("zero iterations produce an empty trace with the bookkeeping intact") {
    RunOptions opt = toy_options(1.0);
    opt.iterations = 0;
    const ChainOutput out = run_chain(toy_bundle(), toy_data(1.0), opt);
    CHECK(out.trace.rows() == 0);
    CHECK(out.trace.cols() == 1);
    CHECK(out.param_names == std::vector<std::string>{"tau"});
    CHECK(out.innovation_proposals == 0);
}

TEST_CASE("alg3 runs on a linear-drift model and explores") {
    const ModelBundle b = bm_drift_bundle();
    RunOptions opt;
    opt.algorithm = Algorithm::alg3;
    opt.iterations = 60;
    opt.m = 12;
    opt.theta_init = Vec::Constant(1, 0.0);
    opt.prior.marginals = {gaussian_prior(0.0, 25.0)};
    opt.seed = 17;
    const ChainOutput out = run_chain(b, three_point_data(), opt);
    CHECK(out.trace.allFinite());
    CHECK(out.theta_proposals == 60);
    CHECK(out.theta_accepts > 0);
    CHECK(out.flag_w_not_pd == 0);
    // The walk must actually move off the initial point.
    CHECK(out.trace.col(0).maxCoeff() != out.trace.col(0).minCoeff());
}

TEST_CASE("act estimate recovers known autocorrelation times") {
    SUBCASE("iid noise") {
        RngStream rng(3, 9);
        std::vector<double> x(20000);
        for (double& v : x) v = rng.normal();
        const ActEstimate a = act_estimate(x);
        CHECK(!a.constant);
        CHECK(a.value >= 0.8);
        CHECK(a.value <= 1.3);
    }
    SUBCASE("AR(1) with rho = 0.9 has act (1+rho)/(1-rho) = 19") {
        RngStream rng(4, 9);
        const double rho = 0.9;
        std::vector<double> x(100000);
        double s = 0;
        for (double& v : x) {
            s = rho * s + std::sqrt(1 - rho * rho) * rng.normal();
            v = s;
        }
        const ActEstimate a = act_estimate(x);
        CHECK(a.value == doctest::Approx(19.0).epsilon(0.2));
    }
    SUBCASE("constant series") {
        std::vector<double> x(500, 2.75);
        const ActEstimate a = act_estimate(x);
        CHECK(a.constant);
        CHECK(a.value == 1.0);
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(act_estimate(std::vector<double>(99, 0.0)), std::invalid_argument);
    }
}
