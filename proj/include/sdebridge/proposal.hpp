#pragma once

#include <vector>

#include "sdebridge/linalg.hpp"
#include "sdebridge/rng.hpp"

namespace sdebridge {

enum class ProposalFamily {
    log_rw_uniform,      // log theta' = log theta + U(-w, w)
    log_rw_gaussian,     // log theta' = log theta + N(0, w^2)
    gaussian_rw,         // theta' = theta + N(0, w^2)
    independence_gamma,  // theta' ~ Gamma(shape, rate), independent of theta
};

// Componentwise proposal for a subset of the parameter vector.
struct ProposalKernel {
    ProposalFamily family = ProposalFamily::log_rw_uniform;
    double w = 0.1;
    double shape = 1, rate = 1;

    // Returns theta with the idx components replaced by fresh draws.
    Vec propose(const Vec& theta, const std::vector<int>& idx, RngStream& rng) const;
    // log q(cur | prop) - log q(prop | cur) over the idx components.
    double log_q_ratio(const Vec& prop, const Vec& cur, const std::vector<int>& idx) const;
};

ProposalKernel log_rw_uniform_kernel(double w);
ProposalKernel log_rw_gaussian_kernel(double sd);
ProposalKernel gaussian_rw_kernel(double sd);
ProposalKernel independence_gamma_kernel(double shape, double rate);

}  // namespace sdebridge
