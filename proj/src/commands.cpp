#include "sdebridge/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "sdebridge/csvio.hpp"

namespace sdebridge {

using nlohmann::json;

namespace {

// RNG purpose tags; tags 0..2 belong to run_chain internals.
constexpr std::uint64_t kSimStream = 3;
constexpr std::uint64_t kBridgeStream = 4;
constexpr std::uint64_t kDiscStream = 5;

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

[[noreturn]] void usage_error(const std::vector<std::string>& problems) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
}

std::vector<double> obs_times(double t_end, double step) {
    const double n_real = t_end / step;
    const long n = std::lround(n_real);
    if (n < 1 || std::abs(n_real - double(n)) > 1e-9)
        usage_error({"sim.t_end must be a multiple of sim.obs_step"});
    std::vector<double> times(n + 1);
    for (long i = 0; i <= n; ++i) times[i] = step * double(i);
    times.back() = t_end;
    return times;
}

ModelBundle load_bundle(const RunConfig& c, const std::vector<Vec>& design) {
    if (c.model_name.empty()) usage_error({"model.name: required"});
    return make_bundle(c.model_name, c.k_dna, design);
}

Vec to_state_coords(const ModelBundle& b, const Vec& x) {
    return b.to_state ? b.to_state(x) : x;
}

Vec from_state_coords(const ModelBundle& b, const Vec& x) {
    return b.from_state ? b.from_state(x) : x;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json finite_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

// Post-processed per-parameter summaries: burn-in dropped, thinned, then
// mean / sd / ACT per column.
json param_summaries(const Mat& trace, const std::vector<std::string>& names, int burnin,
                     int thin) {
    json params = json::array();
    const int p = static_cast<int>(trace.cols());
    std::vector<double> kept;
    for (int k = 0; k < p; ++k) {
        kept.clear();
        for (int i = burnin; i < trace.rows(); i += thin) kept.push_back(trace(i, k));
        json entry;
        entry["name"] = (k < static_cast<int>(names.size()) && !names[k].empty())
                            ? names[k]
                            : ("theta" + std::to_string(k + 1));
        entry["samples"] = kept.size();
        if (kept.empty()) {
            entry["mean"] = nullptr;
            entry["sd"] = nullptr;
            entry["act"] = nullptr;
            entry["act_flag"] = nullptr;
        } else {
            double mean = 0;
            for (double v : kept) mean += v;
            mean /= double(kept.size());
            double var = 0;
            for (double v : kept) var += (v - mean) * (v - mean);
            var = kept.size() > 1 ? var / double(kept.size() - 1) : 0.0;
            entry["mean"] = finite_or_null(mean);
            entry["sd"] = finite_or_null(std::sqrt(var));
            if (kept.size() >= 100) {
                const ActEstimate act = act_estimate(kept);
                entry["act"] = finite_or_null(act.value);
                entry["act_flag"] = act.constant ? json("constant") : json(nullptr);
            } else {
                entry["act"] = nullptr;
                entry["act_flag"] = nullptr;
            }
        }
        params.push_back(entry);
    }
    return params;
}

}  // namespace

RunConfig apply_overrides(RunConfig c, const CliOverrides& o) {
    if (o.seed) c.seed = *o.seed;
    if (o.out_dir) c.output_dir = *o.out_dir;
    if (o.threads) c.threads = *o.threads;
    return c;
}

Observations simulate_observations(const RunConfig& c) {
    std::vector<std::string> problems;
    if (c.model_name.empty()) problems.push_back("model.name: required");
    if (!c.sim_theta.size()) problems.push_back("sim.theta: required");
    if (!c.sim_x0.size()) problems.push_back("sim.x0: required");
    if (!(c.sim_t_end > 0)) problems.push_back("sim.t_end: required");
    if (!(c.sim_obs_step > 0)) problems.push_back("sim.obs_step: required");
    std::string scheme = c.sim_scheme;
    if (scheme.empty()) scheme = (c.model_name == "prokaryotic") ? "ssa" : "euler";
    if (scheme == "euler" && c.sim_fine_steps < 2)
        problems.push_back("sim.fine_steps: required for the euler scheme");
    if (!problems.empty()) usage_error(problems);

    const std::vector<double> times = obs_times(c.sim_t_end, c.sim_obs_step);
    RngStream rng = RngStream(c.seed, 0).substream(kSimStream);

    if (scheme == "ssa") {
        if (c.model_name != "prokaryotic")
            usage_error({"sim.scheme: ssa is only available for the prokaryotic model"});
        const ReactionNetwork net = prokaryotic_network(c.k_dna);
        if (c.sim_theta.size() != net.n_reactions())
            usage_error({"sim.theta: expected " + std::to_string(net.n_reactions()) + " rates"});
        if (c.sim_x0.size() != net.dim())
            usage_error({"sim.x0: expected " + std::to_string(net.dim()) + " components"});
        const SsaResult r = ssa_simulate(net, c.sim_theta, c.sim_x0, times, rng);
        return r.snapshots;
    }

    // Euler fine grid in state coordinates, subsampled at the observation
    // times, returned in data coordinates.
    ModelBundle b = [&]() {
        if (c.model_name == "prokaryotic") {
            ModelBundle pb;
            pb.name = "prokaryotic";
            pb.model = cle_model(prokaryotic_network(c.k_dna));
            pb.param_dim = 8;
            return pb;
        }
        return make_bundle(c.model_name, c.k_dna, {});
    }();
    if (c.sim_theta.size() != b.param_dim)
        usage_error({"sim.theta: expected " + std::to_string(b.param_dim) + " parameters"});
    if (c.sim_x0.size() != b.model.state_dim)
        usage_error({"sim.x0: expected " + std::to_string(b.model.state_dim) + " components"});
    const std::vector<double> grid = uniform_grid(0.0, c.sim_t_end, int(c.sim_fine_steps));
    const Vec x0 = to_state_coords(b, c.sim_x0);
    const WienerIncrements W = sample_wiener(rng, grid, b.model.noise_dim);
    const Path fine = euler_maruyama(b.model, c.sim_theta, x0, grid, W);
    Observations obs = subsample(fine, times, 1e-9);
    if (b.from_state)
        for (auto& x : obs.x) x = b.from_state(x);
    return obs;
}

int cmd_simulate(const RunConfig& c) {
    const Observations obs = simulate_observations(c);
    const std::string csv_path = join_path(c.output_dir, "observations.csv");
    write_csv_atomic(csv_path, observations_to_table(obs));

    std::string scheme = c.sim_scheme;
    if (scheme.empty()) scheme = (c.model_name == "prokaryotic") ? "ssa" : "euler";
    json prov;
    prov["command"] = "simulate";
    prov["model"] = c.model_name;
    prov["scheme"] = scheme;
    prov["seed"] = c.seed;
    prov["theta"] = vec_json(c.sim_theta);
    prov["x0"] = vec_json(c.sim_x0);
    prov["t_end"] = c.sim_t_end;
    prov["obs_step"] = c.sim_obs_step;
    if (scheme == "euler") prov["fine_steps"] = c.sim_fine_steps;
    prov["n_observations"] = obs.t.size();
    write_text_atomic(join_path(c.output_dir, "provenance.json"), prov.dump(2) + "\n");

    std::printf("wrote %s (%zu observations)\n", csv_path.c_str(), obs.t.size());
    return 0;
}

namespace {

struct RunSetup {
    ModelBundle bundle;
    Observations data;  // state coordinates
    RunOptions opt;
};

RunSetup prepare_run(const RunConfig& c) {
    std::vector<std::string> problems;
    if (c.model_name.empty()) problems.push_back("model.name: required");
    if (c.data_source.empty()) problems.push_back("data.source: required");
    if (!c.theta_init.size()) problems.push_back("mcmc.theta_init: required");
    if (c.priors.empty()) problems.push_back("prior.N: required");
    if (!problems.empty()) usage_error(problems);

    Observations data = (c.data_source == "simulate")
                            ? simulate_observations(c)
                            : table_to_observations(read_csv(c.data_source), c.data_source);
    if (data.t.size() < 2) usage_error({"data: need at least 2 observations"});

    // the observed values double as the linearization design points where the
    // model needs them
    ModelBundle b = load_bundle(c, data.x);
    if (b.to_state)
        for (auto& x : data.x) x = b.to_state(x);
    if (c.theta_init.size() != b.param_dim)
        usage_error({"mcmc.theta_init: expected " + std::to_string(b.param_dim) + " values"});
    const bool needs_kernel = c.algorithm == Algorithm::alg1 ||
                              (c.algorithm == Algorithm::alg2 && !b.gamma_idx.empty());
    if (needs_kernel && !c.have_kernel) usage_error({"proposal.theta: required"});

    RunOptions opt;
    opt.algorithm = c.algorithm;
    opt.iterations = c.iterations;
    opt.m = c.m;
    opt.theta_init = c.theta_init;
    opt.prior = config_prior(c, b.param_dim);
    opt.theta_kernel = c.kernel;
    opt.alpha = c.alpha;
    if (c.positivity != "auto") opt.positivity = (c.positivity == "on");
    opt.positivity_cap = c.cap;
    opt.threads = c.threads;
    opt.seed = c.seed;
    opt.config_echo = emit_config(c);
    return RunSetup{std::move(b), std::move(data), std::move(opt)};
}

}  // namespace

ChainOutput run_config_chain(const RunConfig& c) {
    RunSetup s = prepare_run(c);
    reset_cle_clamp_count();
    reset_matching_warning_count();
    return run_chain(s.bundle, s.data, s.opt);
}

int cmd_run(const RunConfig& c) {
    RunSetup s = prepare_run(c);
    const ModelBundle& b = s.bundle;
    reset_cle_clamp_count();
    reset_matching_warning_count();
    const ChainOutput out = run_chain(b, s.data, s.opt);
    const Observations& data = s.data;

    CsvTable trace;
    trace.header.push_back("iter");
    for (int k = 1; k <= b.param_dim; ++k) trace.header.push_back("theta" + std::to_string(k));
    for (int i = 0; i < out.trace.rows(); ++i) {
        std::vector<double> row(b.param_dim + 1);
        row[0] = i;
        for (int k = 0; k < b.param_dim; ++k) row[k + 1] = out.trace(i, k);
        trace.rows.push_back(std::move(row));
    }
    const std::string trace_path = join_path(c.output_dir, "trace.csv");
    write_csv_atomic(trace_path, trace);

    json summary;
    summary["command"] = "run";
    summary["model"] = c.model_name;
    summary["algorithm"] = c.algorithm == Algorithm::alg1   ? "alg1"
                           : c.algorithm == Algorithm::alg2 ? "alg2"
                                                            : "alg3";
    summary["iterations"] = c.iterations;
    summary["burnin"] = c.burnin;
    summary["thin"] = c.thin;
    summary["m"] = c.m;
    summary["seed"] = out.seed;
    summary["n_observations"] = data.t.size();
    summary["n_segments"] = data.t.size() - 1;
    summary["parameters"] = param_summaries(out.trace, out.param_names, c.burnin, c.thin);
    summary["acceptance"]["innovations"] = finite_or_null(out.innovation_rate());
    summary["acceptance"]["theta"] =
        out.theta_proposals ? finite_or_null(out.theta_rate()) : json(nullptr);
    summary["acceptance"]["gibbs_draws"] = out.gibbs_draws;
    summary["flags"]["nonfinite_psi"] = out.flag_nonfinite;
    summary["flags"]["positivity_cap_hits"] = out.flag_cap_hits;
    summary["flags"]["w_not_pd"] = out.flag_w_not_pd;
    summary["flags"]["cle_clamps"] = cle_clamp_count();
    summary["flags"]["matching_warnings"] = matching_warning_count();
    summary["config"] = out.config_echo;
    write_text_atomic(join_path(c.output_dir, "summary.json"), summary.dump(2) + "\n");

    std::printf("wrote %s (%d iterations, bridge acceptance %.3f, theta acceptance %.3f)\n",
                trace_path.c_str(), c.iterations, out.innovation_rate(), out.theta_rate());
    return 0;
}

CsvTable bridges_table(const RunConfig& c) {
    std::vector<std::string> problems;
    if (c.model_name.empty()) problems.push_back("model.name: required");
    if (!c.bridges_u.size()) problems.push_back("bridges.u: required");
    if (!c.bridges_v.size()) problems.push_back("bridges.v: required");
    if (!c.bridges_theta.size()) problems.push_back("bridges.theta: required");
    if (!(c.bridges_t_span > 0)) problems.push_back("bridges.t_span: required");
    if (!problems.empty()) usage_error(problems);

    ModelBundle b = load_bundle(c, {c.bridges_u, c.bridges_v});
    if (c.bridges_theta.size() != b.param_dim)
        usage_error({"bridges.theta: expected " + std::to_string(b.param_dim) + " values"});
    if (c.bridges_u.size() != b.model.state_dim || c.bridges_v.size() != b.model.state_dim)
        usage_error({"bridges.u/v: expected " + std::to_string(b.model.state_dim) +
                     " components"});

    const Vec u = to_state_coords(b, c.bridges_u);
    const Vec v = to_state_coords(b, c.bridges_v);
    const LinearAuxiliary aux =
        b.make_aux(c.bridges_theta, c.bridges_t_span, u, v);
    const GuidedBridge gb =
        make_guided_bridge(b.model, c.bridges_theta, aux, u, c.bridges_m, b.match_policy);

    CsvTable table;
    table.header = {"sample", "s"};
    for (int k = 1; k <= b.model.state_dim; ++k)
        table.header.push_back("x" + std::to_string(k));
    const RngStream root = RngStream(c.seed, 0).substream(kBridgeStream);
    for (int sample = 0; sample < c.bridges_n_samples; ++sample) {
        RngStream rs = root.substream(static_cast<std::uint64_t>(sample));
        const WienerIncrements Z = sample_wiener(rs, gb.ctx.s, b.model.noise_dim);
        const UPath up = solve_g(gb, Z);
        for (int j = 0; j < c.bridges_m; ++j) {
            std::vector<double> row;
            row.reserve(b.model.state_dim + 2);
            row.push_back(sample);
            row.push_back(gb.ctx.s[j]);
            // the pinned endpoints are reported exactly as configured
            const Vec x = (j == 0)                  ? c.bridges_u
                          : (j + 1 == c.bridges_m) ? c.bridges_v
                                                    : from_state_coords(b, up.X[j]);
            for (int k = 0; k < b.model.state_dim; ++k) row.push_back(x(k));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

int cmd_bridges(const RunConfig& c) {
    const CsvTable table = bridges_table(c);
    const std::string path = join_path(c.output_dir, "bridges.csv");
    write_csv_atomic(path, table);
    std::printf("wrote %s (%d samples, m=%d)\n", path.c_str(), c.bridges_n_samples,
                c.bridges_m);
    return 0;
}

CsvTable discretization_table(const RunConfig& c) {
    if (c.disc_m_list.empty()) usage_error({"disc.m_list: required"});
    const double T = c.disc_t_span;
    const long reps = c.disc_replicates;

    // scalar Brownian bridge: the one-step covariance errors have closed
    // forms, the Monte Carlo columns estimate the same quantities empirically
    DiffusionModel bm;
    bm.state_dim = 1;
    bm.noise_dim = 1;
    bm.drift = [](double, const Vec&, const Vec&) { return Vec::Zero(1); };
    bm.dispersion = [](double, const Vec&, const Vec&) { return Mat::Identity(1, 1); };
    const LinearAuxiliary aux =
        make_auxiliary(Mat::Zero(1, 1), Vec::Zero(1), Mat::Identity(1, 1), T, Vec::Zero(1));
    const GuidedBridge gb = make_guided_bridge(bm, Vec::Zero(1), aux, Vec::Zero(1), 2);

    CsvTable table;
    table.header = {"m",         "i",         "h",       "s",
                    "d_direct",  "d_timechanged", "ratio",
                    "mc_direct", "se_direct", "mc_timechanged", "se_timechanged"};
    const RngStream root = RngStream(c.seed, 0).substream(kDiscStream);
    for (int m : c.disc_m_list) {
        const double h = T / m;
        for (int i = 1; i <= m; ++i) {
            RngStream rs =
                root.substream(static_cast<std::uint64_t>(m)).substream(static_cast<std::uint64_t>(i));
            const double s0 = (i - 1) * h;
            const double s1 = i * h;

            const double d = disc_error_direct(T, h, s0, 1.0);
            const double dp = disc_error_timechanged(T, h, s0, 1.0);
            const double ratio = disc_error_ratio(m, i);

            // direct scheme: one Euler step of the guided proposal in
            // original time from a fixed state
            const Vec x0 = Vec::Zero(1);
            const double c_euler_dir = h;
            const double c_true_dir = h * (T - s0 - h) / (T - s0);
            double mean = 0, m2 = 0;
            for (long r = 0; r < reps; ++r) {
                const double xp =
                    x0(0) + h * guided_drift(gb, s0, x0)(0) + std::sqrt(h) * rs.normal();
                const double delta = xp - mean;
                mean += delta / double(r + 1);
                m2 += delta * (xp - mean);
            }
            const double var_dir = m2 / double(reps - 1);
            const double mc_dir = std::abs(var_dir - c_true_dir);
            const double se_dir = c_euler_dir * std::sqrt(2.0 / double(reps - 1));

            // time-changed scheme: one Euler step of the U process over
            // [s0, s1], mapped back to the state scale
            const double rem = T - s0;
            const double c_euler_tc = (T - s1) * (T - s1) * (2.0 / T) * h / rem;
            const double dt_img = tau(s1, T) - tau(s0, T);
            const double c_true_tc =
                (i == m) ? 0.0
                         : dt_img * tau_complement(s1, T) / tau_complement(s0, T);
            const Vec U0 = (Vec::Zero(1) - x0) / rem;
            const USdeCoeffs co = u_sde_coefficients(gb, s0, U0);
            mean = 0;
            m2 = 0;
            for (long r = 0; r < reps; ++r) {
                const Vec U1 = U0 + h * co.drift + co.noise * Vec::Constant(1, std::sqrt(h) * rs.normal());
                const double xp = gamma_map(gb, s1, U1)(0);
                const double delta = xp - mean;
                mean += delta / double(r + 1);
                m2 += delta * (xp - mean);
            }
            const double var_tc = m2 / double(reps - 1);
            const double mc_tc = std::abs(var_tc - c_true_tc);
            const double se_tc = std::max(c_euler_tc, 1e-300) * std::sqrt(2.0 / double(reps - 1));

            table.rows.push_back({double(m), double(i), h, s0, d, dp, ratio, mc_dir, se_dir,
                                  mc_tc, se_tc});
        }
    }
    return table;
}

int cmd_discretization(const RunConfig& c) {
    const CsvTable table = discretization_table(c);
    const std::string path = join_path(c.output_dir, "discretization.csv");
    write_csv_atomic(path, table);
    std::printf("wrote %s (%zu rows, %ld replicates)\n", path.c_str(), table.rows.size(),
                c.disc_replicates);
    return 0;
}

int cmd_diagnose(const RunConfig& c, const std::string& trace_path) {
    const CsvTable trace = read_csv(trace_path);
    if (trace.header.empty() || trace.header[0] != "iter")
        throw std::runtime_error(trace_path + ": expected a trace CSV with an 'iter' column");
    const int p = static_cast<int>(trace.header.size()) - 1;
    if (p < 1) throw std::runtime_error(trace_path + ": no parameter columns");
    Mat samples(static_cast<int>(trace.rows.size()), p);
    for (std::size_t i = 0; i < trace.rows.size(); ++i)
        for (int k = 0; k < p; ++k) samples(static_cast<int>(i), k) = trace.rows[i][k + 1];
    std::vector<std::string> names(trace.header.begin() + 1, trace.header.end());

    json out;
    out["command"] = "diagnose";
    out["trace"] = trace_path;
    out["iterations"] = trace.rows.size();
    out["burnin"] = c.burnin;
    out["thin"] = c.thin;
    out["parameters"] = param_summaries(samples, names, c.burnin, c.thin);
    const std::string path = join_path(c.output_dir, "diagnose.json");
    write_text_atomic(path, out.dump(2) + "\n");

    for (const auto& e : out["parameters"]) {
        const std::string mean =
            e["mean"].is_null() ? "-" : format_double(e["mean"].get<double>());
        const std::string sd = e["sd"].is_null() ? "-" : format_double(e["sd"].get<double>());
        const std::string act = e["act"].is_null() ? "-" : format_double(e["act"].get<double>());
        std::printf("%-10s mean=%-12s sd=%-12s act=%s\n",
                    e["name"].get<std::string>().c_str(), mean.c_str(), sd.c_str(), act.c_str());
    }
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

}  // namespace sdebridge
