#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdebridge/guided.hpp"
#include "sdebridge/models.hpp"
#include "sdebridge/prior.hpp"
#include "sdebridge/proposal.hpp"
#include "sdebridge/thread_pool.hpp"

namespace sdebridge {

enum class Algorithm { alg1, alg2, alg3 };

// One inter-observation interval, shifted to [0, T], in state coordinates.
struct Segment {
    Vec u, v;
    double T = 0;
};

// Per-segment sampler state.  The caches must always equal a fresh
// recomputation from (theta, Z); cache_residual checks exactly that.
struct SegmentState {
    GuidedBridge gb;
    WienerIncrements Z;
    UPath up;
    double log_psi = 0;
    double log_ptilde = 0;
};

struct ChainState {
    Vec theta;
    std::vector<Segment> segments;
    std::vector<SegmentState> seg;
    int m = 0;
};

struct ChainOutput {
    Mat trace;  // iterations x p
    std::vector<std::string> param_names;

    std::uint64_t innovation_accepts = 0, innovation_proposals = 0;
    std::uint64_t theta_accepts = 0, theta_proposals = 0;
    std::uint64_t gibbs_draws = 0;

    std::uint64_t flag_nonfinite = 0;   // proposals rejected on non-finite log Psi
    std::uint64_t flag_cap_hits = 0;    // positivity resampling cap exceeded
    std::uint64_t flag_w_not_pd = 0;    // Algorithm 3 preconditioner failures

    std::vector<double> log_a2;  // per theta-update log acceptance ratio, when recorded

    std::uint64_t seed = 0;
    std::string config_echo;

    double innovation_rate() const {
        return innovation_proposals ? double(innovation_accepts) / double(innovation_proposals) : 0;
    }
    double theta_rate() const {
        return theta_proposals ? double(theta_accepts) / double(theta_proposals) : 0;
    }
};

struct RunOptions {
    Algorithm algorithm = Algorithm::alg1;
    int iterations = 1000;
    int m = 20;
    Vec theta_init;
    PriorSpec prior;
    ProposalKernel theta_kernel;          // alg1: all parameters; alg2: the gamma block
    double alpha = 0;                     // alg3 step scale; 0 -> 2.38/sqrt(#drift params)
    std::optional<bool> positivity;       // default: the model's declaration
    int positivity_cap = 1000;
    int threads = 1;
    std::uint64_t seed = 0;
    bool record_log_a2 = false;
    std::string config_echo;
};

// Builds the initial state: one segment per observation interval, innovations
// drawn from `rng` (resampled under a positivity constraint).
ChainState make_chain_state(const ModelBundle& bundle, const Observations& data, int m,
                            const Vec& theta_init, bool positivity, int cap, RngStream& rng);

// Algorithm 1 step 2: independence proposals Z per segment, accepted with
// Psi-ratio probability.  Segments run in parallel on disjoint substreams of
// `stream_base` (segment i uses stream_base.substream(i)).
void update_innovations(ChainState& st, const ModelBundle& bundle, bool positivity, int cap,
                        const RngStream& stream_base, ThreadPool& pool, ChainOutput& out);

// Algorithm 1 step 3 (and Algorithm 2's gamma move when idx = gamma block):
// Metropolis-Hastings on theta[idx] with the bridges re-solved from the kept
// innovations.  Returns true when accepted.
bool update_theta_mh(ChainState& st, const ModelBundle& bundle, const ProposalKernel& kernel,
                     const std::vector<int>& idx, const PriorSpec& prior, bool positivity,
                     int cap, RngStream& rng, ThreadPool& pool, ChainOutput& out,
                     double* log_a_out = nullptr);

// Ito-sum regression statistics of the linear-drift representation:
// mu[k] = sum phi_k' a^{-1} dY, Sigma[k,l] = sum phi_k' a^{-1} phi_l dt over
// the concatenated paths, W = Sigma + diag(xi_inv2).
struct ConjugateStats {
    Vec mu;
    Mat Sigma;
    Mat W;
};
ConjugateStats conjugate_stats(const ModelBundle& bundle, const Vec& theta,
                               const std::vector<Path>& paths, const Vec& xi_inv2);

// Algorithm 2 step 3.2: conjugate Gaussian draw of the drift coefficients,
// innovations rebuilt by inverting the Euler recursion so the path is kept.
void update_gibbs_drift(ChainState& st, const ModelBundle& bundle, const PriorSpec& prior,
                        RngStream& rng, ThreadPool& pool, ChainOutput& out);

// log q(cur | prop) - log q(prop | cur) for the preconditioned kernels
// N(cur, alpha^2 W_cur^{-1}) and N(prop, alpha^2 W_prop^{-1}).
double preconditioned_log_q_ratio(const Vec& prop, const Vec& cur, double alpha,
                                  const Mat& W_cur, const Mat& W_prop);

// Algorithm 3: random walk on the drift coefficients preconditioned by the
// regression matrix W computed on the current (forward) and proposed
// (reverse) paths.  Returns true when accepted.
bool update_theta_alg3(ChainState& st, const ModelBundle& bundle, const PriorSpec& prior,
                       double alpha, bool positivity, int cap, RngStream& rng, ThreadPool& pool,
                       ChainOutput& out, double* log_a_out = nullptr);

// Full sampler loop; bit-reproducible from (options, seed) for any thread
// count.
ChainOutput run_chain(const ModelBundle& bundle, const Observations& data,
                      const RunOptions& opt);

// Largest absolute deviation between the cached per-segment quantities and a
// fresh recomputation from (theta, Z).
double cache_residual(const ModelBundle& bundle, const ChainState& st);

// Integrated autocorrelation time by initial-positive-sequence windowing.
struct ActEstimate {
    double value = 1;
    bool constant = false;
};
ActEstimate act_estimate(const std::vector<double>& x);

// Per-segment paths on the tau-image grids (local segment time).
std::vector<Path> chain_paths(const ChainState& st);

}  // namespace sdebridge
