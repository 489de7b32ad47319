#include <doctest.h>

#include <cmath>

#include "sdebridge/models.hpp"

using namespace sdebridge;

namespace {

// Small three-species test network:
//   0 -> A, A -> B, A + B -> C, 2C -> 0
// with mass-action hazards (1, x1, x1 x2, x3 (x3 - 1)/2).
ReactionNetwork toy_network() {
    ReactionNetwork net;
    net.S.resize(3, 4);
    net.S << 1, -1, -1, 0,
             0,  1, -1, 0,
             0,  0,  1, -2;
    Hazard h0;
    h0.affine = true;
    h0.c = 1.0;
    h0.u = Vec::Zero(3);
    h0.eval = [](const Vec&) { return 1.0; };
    Hazard h1;
    h1.affine = true;
    h1.c = 0.0;
    h1.u = Vec::Zero(3);
    h1.u(0) = 1.0;
    h1.eval = [](const Vec& x) { return x(0); };
    Hazard h2;
    h2.eval = [](const Vec& x) { return x(0) * x(1); };
    h2.vars = {0, 1};
    Hazard h3;
    h3.eval = [](const Vec& x) { return 0.5 * x(2) * (x(2) - 1.0); };
    h3.vars = {2};
    net.hazards = {h0, h1, h2, h3};
    return net;
}

}  // namespace

TEST_CASE("arctan auxiliary is tangent at the drift root") {
    const ModelBundle b = make_bundle("arctan", 0, {});
    REQUIRE(b.param_dim == 3);
    CHECK(b.drift_idx == std::vector<int>{0, 1});
    CHECK(b.gamma_idx == std::vector<int>{2});

    Vec theta(3);
    theta << -2.0, 0.6, 0.75;
    const LinearAuxiliary aux = b.make_aux(theta, 1.0, Vec::Zero(1), Vec::Zero(1));
    const double xstar = std::tan(-theta(1) / theta(0));
    auto drift = [&](double x) { return theta(0) * std::atan(x) + theta(1); };
    auto lin = [&](double x) { return aux.B(0, 0) * x + aux.beta(0); };
    // value and slope agree at the root of the drift
    CHECK(std::abs(drift(xstar) - lin(xstar)) < 1e-12);
    const double eps = 1e-3;
    const double num_slope = (drift(xstar + eps) - drift(xstar - eps)) / (2 * eps);
    CHECK(std::abs(num_slope - aux.B(0, 0)) < 1e-6);
    CHECK(aux.sigma(0, 0) == theta(2));

    // alpha = 0 degenerates to a driftless auxiliary with beta as the shift
    Vec t0(3);
    t0 << 0.0, 0.4, 0.5;
    const LinearAuxiliary a0 = b.make_aux(t0, 1.0, Vec::Zero(1), Vec::Zero(1));
    CHECK(a0.B(0, 0) == 0.0);
    CHECK(a0.beta(0) == 0.4);

    // drift evaluation of the bundle itself
    CHECK(b.model.drift(0.0, Vec::Constant(1, 1.0), theta)(0) ==
          doctest::Approx(-2.0 * std::atan(1.0) + 0.6));
    REQUIRE(b.n_basis == 2);
    CHECK(b.basis(Vec::Constant(1, 2.0), 0)(0) == doctest::Approx(std::atan(2.0)));
    CHECK(b.basis(Vec::Constant(1, 2.0), 1)(0) == 1.0);
}

TEST_CASE("cle drift and dispersion on the test network") {
    const ReactionNetwork net = toy_network();
    const DiffusionModel m = cle_model(net);
    REQUIRE(m.state_dim == 3);
    REQUIRE(m.noise_dim == 4);

    Vec x(3), theta(4);
    x << 1, 1, 2;
    theta << 1, 1, 1, 1;
    // all four hazards evaluate to 1 here, so the drift is the row sums of S
    const Vec h = net.h(x);
    CHECK((h - Vec::Ones(4)).norm() == 0.0);
    const Vec drift = m.drift(0.0, x, theta);
    CHECK(drift(0) == doctest::Approx(-1.0));
    CHECK(drift(1) == doctest::Approx(0.0));
    CHECK(drift(2) == doctest::Approx(-1.0));

    // dispersion columns scale with sqrt(theta_k h_k)
    Vec th2(4);
    th2 << 4, 1, 1, 9;
    const Mat sig = m.dispersion(0.0, x, th2);
    CHECK(sig(0, 0) == doctest::Approx(2.0));   // S(0,0) sqrt(4)
    CHECK(sig(2, 3) == doctest::Approx(-6.0));  // S(2,3) sqrt(9)

    // negative hazard arguments are clamped and counted
    reset_cle_clamp_count();
    Vec bad(3);
    bad << -1, 1, 2;  // x1 < 0 makes hazard 2 negative
    const Mat sb = m.dispersion(0.0, bad, theta);
    CHECK(sb(0, 1) == 0.0);
    CHECK(cle_clamp_count() > 0);
    reset_cle_clamp_count();
}

TEST_CASE("hazard linearization passes affine through and fits WLS") {
    const ReactionNetwork net = toy_network();
    std::vector<Vec> design;
    RngStream r(61, 0);
    for (int i = 0; i < 40; ++i) {
        Vec x(3);
        x << 1.0 + 5.0 * r.uniform01(), 2.0 + 3.0 * r.uniform01(), 1.0 + 4.0 * r.uniform01();
        design.push_back(x);
    }
    const HazardLinearization lin = linearize_hazards(net, design);
    REQUIRE(lin.c.size() == 4);
    REQUIRE(lin.U.rows() == 4);
    REQUIRE(lin.U.cols() == 3);

    // affine hazards are exact
    CHECK(lin.c(0) == 1.0);
    CHECK(lin.U.row(0).norm() == 0.0);
    CHECK(lin.c(1) == 0.0);
    CHECK(lin.U(1, 0) == 1.0);
    CHECK(lin.U(1, 1) == 0.0);

    // a hazard that is secretly affine in its regressors is recovered exactly
    ReactionNetwork net2 = toy_network();
    net2.hazards[2].eval = [](const Vec& x) { return 3.0 * x(0) + 2.0 * x(1) + 0.5; };
    const HazardLinearization lin2 = linearize_hazards(net2, design);
    CHECK(std::abs(lin2.c(2) - 0.5) < 1e-9);
    CHECK(std::abs(lin2.U(2, 0) - 3.0) < 1e-9);
    CHECK(std::abs(lin2.U(2, 1) - 2.0) < 1e-9);
    CHECK(std::abs(lin2.U(2, 2)) < 1e-12);  // not a regressor

    // x2 fixed across the design: h = x1 x2 = 5 x1 exactly
    std::vector<Vec> fixed;
    for (int i = 0; i < 12; ++i) {
        Vec x(3);
        x << 1.0 + i, 5.0, 2.0 + 0.25 * i;
        fixed.push_back(x);
    }
    const HazardLinearization lin3 = linearize_hazards(net, fixed);
    CHECK(std::abs(lin3.U(2, 0) - 5.0) < 1e-9);
    CHECK(std::abs(lin3.c(2) + lin3.U(2, 1) * 5.0) < 1e-8);

    // degenerate design: every point identical
    std::vector<Vec> degen(5, design[0]);
    CHECK_THROWS_AS(linearize_hazards(net, degen), std::runtime_error);
}

TEST_CASE("prokaryotic network structure") {
    const ReactionNetwork net = prokaryotic_network(10.0);
    REQUIRE(net.dim() == 4);
    REQUIRE(net.n_reactions() == 8);
    CHECK(net.K_DNA == 10.0);

    Vec x(4);
    x << 1, 2, 3, 4;
    const Vec h = net.h(x);
    // (x3 x4, K - x4, x4, x1, x2(x2-1)/2, x3, x1, x2)
    CHECK(h(0) == doctest::Approx(12.0));
    CHECK(h(1) == doctest::Approx(6.0));
    CHECK(h(2) == doctest::Approx(4.0));
    CHECK(h(3) == doctest::Approx(1.0));
    CHECK(h(4) == doctest::Approx(1.0));
    CHECK(h(5) == doctest::Approx(3.0));
    CHECK(h(6) == doctest::Approx(1.0));
    CHECK(h(7) == doctest::Approx(2.0));

    // spot checks of the stoichiometry
    CHECK(net.S(1, 4) == -2.0);  // dimerization consumes two protein copies
    CHECK(net.S(3, 0) == -1.0);  // repression binds free DNA
    CHECK(net.S(2, 0) == -1.0);  // and sequesters the dimer
    CHECK(net.S(0, 6) == -1.0);  // RNA degradation
    CHECK(net.S.col(1).isApprox(-net.S.col(0)));  // unbinding reverses repression
    CHECK(net.S.col(5).isApprox(-net.S.col(4)));  // dissociation reverses dimerization

    // only the repression pair touches free DNA, so x4 + bound DNA = K holds
    for (int k = 2; k < 8; ++k) CHECK(net.S(3, k) == 0.0);
}

TEST_CASE("ssa pure birth process is poisson") {
    ReactionNetwork net;
    net.S.resize(1, 1);
    net.S << 1;
    Hazard h;
    h.affine = true;
    h.c = 1.0;
    h.u = Vec::Zero(1);
    h.eval = [](const Vec&) { return 1.0; };
    net.hazards = {h};

    RngStream r(67, 0);
    const int n = 4000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        RngStream ri = r.substream(i);
        const SsaResult res =
            ssa_simulate(net, Vec::Constant(1, 2.0), Vec::Zero(1), {0.0, 3.0}, ri);
        const double cnt = res.snapshots.x[1](0);
        sum += cnt;
        sum2 += cnt * cnt;
    }
    // counts at t = 3 with rate 2 are Poisson(6)
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 6.0) < 4.0 * std::sqrt(6.0 / n));
    CHECK(std::abs(var - 6.0) < 0.5);

    // absorbing states stop the clock
    ReactionNetwork dead = net;
    dead.hazards[0].c = 0.0;
    dead.hazards[0].eval = [](const Vec&) { return 0.0; };
    RngStream rd(1, 0);
    const SsaResult res = ssa_simulate(dead, Vec::Ones(1), Vec::Zero(1), {0.0, 5.0}, rd);
    CHECK(res.snapshots.x[1](0) == 0.0);
}

TEST_CASE("lotka volterra flow conserves the first integral") {
    // The noise-free system dx = (theta - y)x, dy = (-theta + x)y conserves
    // theta log(x y) - x - y along trajectories.
    const ModelBundle b = make_bundle("lotka_volterra", 0, {});
    REQUIRE(b.param_dim == 2);
    Vec theta(2);
    theta << 1.3, 0.4;
    const Vec u = (Vec(2) << std::log(2.0), std::log(0.7)).finished();
    const LinearAuxiliary aux = b.make_aux(theta, 4.0, u, u);
    REQUIRE(aux.time_dependent());

    auto invariant = [&](const Vec& beta_point, double t) {
        // reconstruct (x, y) from beta(t) = (theta - y, -theta + x)
        const double y = theta(0) - beta_point(0);
        const double x = theta(0) + beta_point(1);
        return theta(0) * (std::log(x) + std::log(y)) - x - y;
    };
    const double c0 = invariant(aux.beta_at(0.0), 0.0);
    for (double t : {0.5, 1.5, 2.7, 4.0}) {
        CHECK(std::abs(invariant(aux.beta_at(t), t) - c0) < 1e-6 * (1.0 + std::abs(c0)));
    }

    // beta_integral matches quadrature of beta_fun
    const Vec direct = integrate_vector([&](double t) { return aux.beta_at(t); }, 0.3, 2.1);
    const Vec exact = aux.beta_integral(0.3, 2.1);
    CHECK((direct - exact).norm() < 1e-7 * (1.0 + exact.norm()));

    // coordinate maps are log/exp
    const Vec p = (Vec(2) << 3.0, 5.0).finished();
    CHECK((b.from_state(b.to_state(p)) - p).norm() < 1e-12);
    CHECK(b.to_state(p)(0) == doctest::Approx(std::log(3.0)));
}

TEST_CASE("toy bundle and its conjugate posterior") {
    const ModelBundle b = make_bundle("toy", 0, {});
    REQUIRE(b.param_dim == 1);
    CHECK(b.model.dispersion(0.0, Vec::Zero(1), Vec::Constant(1, 4.0))(0, 0) ==
          doctest::Approx(0.5));  // tau^{-1/2}
    CHECK(b.model.drift(0.0, Vec::Zero(1), Vec::Ones(1))(0) == 0.0);
    CHECK(toy_posterior_shape() == doctest::Approx(1.5));
    CHECK(toy_posterior_rate(2.0) == doctest::Approx(3.0));
}

TEST_CASE("unknown model names are rejected") {
    CHECK_THROWS_AS(make_bundle("heston", 0, {}), std::invalid_argument);
}
