#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sdebridge/core.hpp"
#include "sdebridge/guided.hpp"
#include "sdebridge/linproc.hpp"

namespace sdebridge {

// Process-wide count of clamped negative hazard arguments inside CLE
// dispersions (see cle_model); reset per run to surface the flag.
std::uint64_t cle_clamp_count();
void reset_cle_clamp_count();

struct Hazard {
    std::function<double(const Vec&)> eval;
    bool affine = false;
    double c = 0;             // affine representation h(x) = c + u'x
    Vec u;
    std::vector<int> vars;    // regressors for the affine surrogate fit
};

struct ReactionNetwork {
    Mat S;  // d x K stoichiometry, integer-valued
    std::vector<Hazard> hazards;
    double K_DNA = 0;  // conservation constant, prokaryotic model only

    int dim() const { return static_cast<int>(S.rows()); }
    int n_reactions() const { return static_cast<int>(S.cols()); }
    Vec h(const Vec& x) const;
};

// Affine surrogates htilde(x) = c + U x for all hazards; linear hazards
// pass through unchanged.  Gives Btilde, betatilde by linearity in theta.
struct HazardLinearization {
    Vec c;
    Mat U;  // K x d
    Vec htilde(const Vec& x) const { return c + U * x; }
    Mat B_theta(const Mat& S, const Vec& theta) const {
        return S * theta.asDiagonal() * U;
    }
    Vec beta_theta(const Mat& S, const Vec& theta) const {
        return S * theta.asDiagonal() * c;
    }
};

// Weighted least squares per nonlinear hazard over the design points, with
// weights equal to the hazard's own value there.
HazardLinearization linearize_hazards(const ReactionNetwork& net,
                                      const std::vector<Vec>& design);

// Chemical Langevin equation dX = S h_theta(X) dt + S diag(sqrt(h_theta(X))) dW,
// negative hazard arguments clamped at 0 (counted).
DiffusionModel cle_model(const ReactionNetwork& net);

ReactionNetwork prokaryotic_network(double K_DNA);

struct SsaResult {
    Path jumps;              // event-time path (post-jump states)
    Observations snapshots;  // states at the requested times
};
SsaResult ssa_simulate(const ReactionNetwork& net, const Vec& theta, const Vec& x0,
                       const std::vector<double>& snapshot_times, RngStream& rng);

// Everything the samplers and the CLI need to know about one catalogued
/// model: the diffusion, its auxiliary-process builder, the linear-in-theta
// drift structure when present, and coordinate maps for I/O.
struct ModelBundle {
    std::string name;
    DiffusionModel model;
    std::function<LinearAuxiliary(const Vec& theta, double T, const Vec& u, const Vec& v)>
        make_aux;
    bool aux_theta_dependent = true;
    MatchPolicy match_policy = MatchPolicy::strict;
    bool positivity = false;

    // drift b_theta(x) = sum_k theta[drift_idx[k]] * basis(x, k)
    int n_basis = 0;
    std::function<Vec(const Vec&, int)> basis;
    std::vector<int> drift_idx;
    std::vector<int> gamma_idx;

    std::function<Vec(const Vec&)> to_state;    // data coords -> state coords
    std::function<Vec(const Vec&)> from_state;  // state coords -> data coords

    int param_dim = 0;
    std::vector<std::string> param_names;
};

// drift alpha*arctan(x) + beta, dispersion sigma; theta = (alpha, beta, sigma).
ModelBundle arctan_bundle();

// theta = (theta_1..theta_8); the linearization is fitted on the given
// design points (conventionally the observed data).
ModelBundle prokaryotic_bundle(double K_DNA, const std::vector<Vec>& design);

// Log-coordinate Lotka-Volterra; theta = (theta, sigma).  Data live in the
// positive quadrant; to_state/from_state are componentwise log/exp.
ModelBundle lotka_volterra_bundle();

// X_t = tau^{-1/2} W_t; theta = (tau).  Exact posterior under an Exp(1)
/// prior and a single observation x1 at T = 1: Gamma(3/2, 1 + x1^2/2).
ModelBundle toy_bundle();
double toy_posterior_shape();
double toy_posterior_rate(double x1);

ModelBundle make_bundle(const std::string& name, double K_DNA,
                        const std::vector<Vec>& linearization_design);

}  // namespace sdebridge
