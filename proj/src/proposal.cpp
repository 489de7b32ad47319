#include "sdebridge/proposal.hpp"

#include <cmath>
#include <stdexcept>

namespace sdebridge {

Vec ProposalKernel::propose(const Vec& theta, const std::vector<int>& idx,
                            RngStream& rng) const {
    Vec out = theta;
    for (int k : idx) {
        if (k < 0 || k >= theta.size()) throw std::invalid_argument("propose: index out of range");
        switch (family) {
            case ProposalFamily::log_rw_uniform:
                if (!(theta(k) > 0))
                    throw std::invalid_argument("propose: log walk needs a positive state");
                out(k) = theta(k) * std::exp(rng.uniform(-w, w));
                break;
            case ProposalFamily::log_rw_gaussian:
                if (!(theta(k) > 0))
                    throw std::invalid_argument("propose: log walk needs a positive state");
                out(k) = theta(k) * std::exp(w * rng.normal());
                break;
            case ProposalFamily::gaussian_rw:
                out(k) = theta(k) + w * rng.normal();
                break;
            case ProposalFamily::independence_gamma:
                out(k) = rng.gamma(shape, rate);
                break;
        }
    }
    return out;
}

double ProposalKernel::log_q_ratio(const Vec& prop, const Vec& cur,
                                   const std::vector<int>& idx) const {
    double acc = 0;
    for (int k : idx) {
        switch (family) {
            case ProposalFamily::log_rw_uniform:
            case ProposalFamily::log_rw_gaussian:
                // symmetric in log space; the theta-space densities differ by
                // the Jacobian 1/theta
                acc += std::log(prop(k)) - std::log(cur(k));
                break;
            case ProposalFamily::gaussian_rw:
                break;
            case ProposalFamily::independence_gamma:
                acc += (shape - 1.0) * (std::log(cur(k)) - std::log(prop(k))) -
                       rate * (cur(k) - prop(k));
                break;
        }
    }
    return acc;
}

ProposalKernel log_rw_uniform_kernel(double w) {
    if (!(w > 0)) throw std::invalid_argument("log_rw_uniform_kernel: w must be > 0");
    ProposalKernel k;
    k.family = ProposalFamily::log_rw_uniform;
    k.w = w;
    return k;
}

ProposalKernel log_rw_gaussian_kernel(double sd) {
    if (!(sd > 0)) throw std::invalid_argument("log_rw_gaussian_kernel: sd must be > 0");
    ProposalKernel k;
    k.family = ProposalFamily::log_rw_gaussian;
    k.w = sd;
    return k;
}

ProposalKernel gaussian_rw_kernel(double sd) {
    if (!(sd > 0)) throw std::invalid_argument("gaussian_rw_kernel: sd must be > 0");
    ProposalKernel k;
    k.family = ProposalFamily::gaussian_rw;
    k.w = sd;
    return k;
}

ProposalKernel independence_gamma_kernel(double shape, double rate) {
    if (!(shape > 0) || !(rate > 0))
        throw std::invalid_argument("independence_gamma_kernel: shape, rate must be > 0");
    ProposalKernel k;
    k.family = ProposalFamily::independence_gamma;
    k.shape = shape;
    k.rate = rate;
    return k;
}

}  // namespace sdebridge
