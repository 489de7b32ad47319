#include "sdebridge/prior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdebridge {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
}

bool PriorMarginal::in_support(double x) const {
    switch (family) {
        case PriorFamily::gaussian: return std::isfinite(x);
        case PriorFamily::uniform_log: {
            if (!(x > 0)) return false;
            const double lx = std::log(x);
            return lx >= lo && lx <= hi;
        }
        case PriorFamily::flat_log:
        case PriorFamily::exponential: return x > 0;
    }
    return false;
}

double PriorMarginal::log_density(double x) const {
    if (!in_support(x)) return kNegInf;
    switch (family) {
        case PriorFamily::gaussian: {
            const double z = x - mean;
            return -0.5 * (kLog2Pi + std::log(var)) - z * z / (2.0 * var);
        }
        case PriorFamily::uniform_log: return -std::log(x) - std::log(hi - lo);
        case PriorFamily::flat_log: return -std::log(x);
        case PriorFamily::exponential: return std::log(rate) - rate * x;
    }
    return kNegInf;
}

double PriorMarginal::log_ratio(double prop, double cur) const {
    switch (family) {
        case PriorFamily::gaussian: {
            const double zp = prop - mean, zc = cur - mean;
            return -(zp * zp - zc * zc) / (2.0 * var);
        }
        case PriorFamily::uniform_log:
        case PriorFamily::flat_log: return std::log(cur) - std::log(prop);
        case PriorFamily::exponential: return -rate * (prop - cur);
    }
    return kNegInf;
}

PriorMarginal gaussian_prior(double mean, double var) {
    if (!(var > 0)) throw std::invalid_argument("gaussian_prior: var must be > 0");
    PriorMarginal m;
    m.family = PriorFamily::gaussian;
    m.mean = mean;
    m.var = var;
    return m;
}

PriorMarginal uniform_log_prior(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("uniform_log_prior: need hi > lo");
    PriorMarginal m;
    m.family = PriorFamily::uniform_log;
    m.lo = lo;
    m.hi = hi;
    return m;
}

PriorMarginal flat_log_prior() {
    PriorMarginal m;
    m.family = PriorFamily::flat_log;
    return m;
}

PriorMarginal exponential_prior(double rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential_prior: rate must be > 0");
    PriorMarginal m;
    m.family = PriorFamily::exponential;
    m.rate = rate;
    return m;
}

bool PriorSpec::in_support(const Vec& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("prior: theta dim mismatch");
    for (int k = 0; k < dim(); ++k)
        if (!marginals[k].in_support(theta(k))) return false;
    return true;
}

double PriorSpec::log_density(const Vec& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("prior: theta dim mismatch");
    double acc = log_offset;
    for (int k = 0; k < dim(); ++k) {
        acc += marginals[k].log_density(theta(k));
        if (acc == kNegInf) return kNegInf;
    }
    return acc;
}

double PriorSpec::log_ratio(const Vec& prop, const Vec& cur) const {
    if (prop.size() != dim() || cur.size() != dim())
        throw std::invalid_argument("prior: theta dim mismatch");
    if (!in_support(prop)) return kNegInf;
    double acc = 0;
    for (int k = 0; k < dim(); ++k) acc += marginals[k].log_ratio(prop(k), cur(k));
    return acc;
}

PriorSpec default_prior(int dim) {
    PriorSpec p;
    p.marginals.assign(dim, flat_log_prior());
    return p;
}

}  // namespace sdebridge
