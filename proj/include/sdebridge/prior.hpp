#pragma once

#include <string>
#include <vector>

#include "sdebridge/linalg.hpp"

namespace sdebridge {

enum class PriorFamily {
    gaussian,     // N(mean, var) on theta_k
    uniform_log,  // log theta_k uniform on [lo, hi]
    flat_log,     // improper, flat on log theta_k
    exponential,  // Exp(rate) on theta_k
};

struct PriorMarginal {
    PriorFamily family = PriorFamily::flat_log;
    double mean = 0, var = 1;  // gaussian
    double lo = 0, hi = 0;     // uniform_log, bounds on log theta
    double rate = 1;           // exponential

    bool in_support(double x) const;
    // Normalized where the family is proper; flat_log returns -log x.
    double log_density(double x) const;
    // log pi(prop) - log pi(cur) with the normalizing constants cancelled
    // symbolically.  Both arguments must be in support.
    double log_ratio(double prop, double cur) const;
};

PriorMarginal gaussian_prior(double mean, double var);
PriorMarginal uniform_log_prior(double lo, double hi);
PriorMarginal flat_log_prior();
PriorMarginal exponential_prior(double rate);

// Product of independent marginals, one per parameter.  `log_offset` shifts
// log_density by a constant without touching log_ratio; the sampler only
// ever consumes ratios, so the offset must not change any chain decision.
struct PriorSpec {
    std::vector<PriorMarginal> marginals;
    double log_offset = 0;

    int dim() const { return static_cast<int>(marginals.size()); }
    bool in_support(const Vec& theta) const;
    double log_density(const Vec& theta) const;
    // -inf when prop leaves the support; cur is assumed in support.
    double log_ratio(const Vec& prop, const Vec& cur) const;
};

// Flat-on-log marginals for every parameter.
PriorSpec default_prior(int dim);

}  // namespace sdebridge
