#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdebridge/mcmc.hpp"

namespace sdebridge {

// Flat dotted key-value configuration.  Grammar: one `key = value` per line,
// '#' starts a comment, vectors are space-separated.  The full key list is
// documented in the README.
struct RunConfig {
    std::string model_name;
    double k_dna = 10;

    Algorithm algorithm = Algorithm::alg1;
    int iterations = 1000;
    int burnin = 0;
    int thin = 1;
    int m = 20;
    Vec theta_init;                 // empty when unset
    std::string positivity = "auto";  // auto | on | off
    double alpha = 0;               // 0 -> algorithm default
    int cap = 1000;

    std::vector<PriorMarginal> priors;  // prior.1 .. prior.p
    bool have_kernel = false;
    ProposalKernel kernel;

    std::string data_source;  // "simulate" or a CSV path

    // simulate block
    Vec sim_theta, sim_x0;
    double sim_t_end = 0;
    double sim_obs_step = 0;
    long sim_fine_steps = 0;  // fine grid point count (Euler schemes)
    std::string sim_scheme;   // euler | ssa; empty -> model default

    // bridges block
    Vec bridges_u, bridges_v, bridges_theta;
    double bridges_t_span = 0;
    int bridges_n_samples = 0;
    int bridges_m = 100;

    // discretization block
    double disc_t_span = 1;
    std::vector<int> disc_m_list;
    long disc_replicates = 100000;

    std::string output_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ParseResult {
    RunConfig config;
    std::vector<std::string> errors;  // all problems, not only the first
    bool ok() const { return errors.empty(); }
};

ParseResult parse_config(const std::string& text);

// Canonical serialization; parse(emit(c)) reproduces c.
std::string emit_config(const RunConfig& c);

PriorSpec config_prior(const RunConfig& c, int param_dim);  // validates count/order

}  // namespace sdebridge
