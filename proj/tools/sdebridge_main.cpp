#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sdebridge/commands.hpp"
#include "sdebridge/config.hpp"
#include "sdebridge/csvio.hpp"

namespace {

using sdebridge::CliOverrides;
using sdebridge::RunConfig;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonArgs& args, bool config_required) {
    auto* opt = sub->add_option("--config", args.config_path, "configuration file");
    if (config_required) opt->required();
    sub->add_option("--seed", args.seed, "override the configured seed");
    sub->add_option("--out", args.out_dir, "override the configured output directory");
    sub->add_option("--threads", args.threads, "override the configured thread count");
}

// Parse + validate + apply overrides; prints every problem before failing.
RunConfig load_config(const CommonArgs& args) {
    RunConfig c;
    if (!args.config_path.empty()) {
        std::string text;
        try {
            text = sdebridge::read_text(args.config_path);
        } catch (const std::exception& e) {
            throw std::invalid_argument(e.what());
        }
        const sdebridge::ParseResult parsed = sdebridge::parse_config(text);
        if (!parsed.ok()) {
            std::string msg = "invalid configuration:";
            for (const auto& e : parsed.errors) msg += "\n  - " + args.config_path + ": " + e;
            throw std::invalid_argument(msg);
        }
        c = parsed.config;
    }
    CliOverrides o;
    o.seed = args.seed;
    o.out_dir = args.out_dir;
    o.threads = args.threads;
    return sdebridge::apply_overrides(c, o);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian inference for discretely observed diffusions"};
    app.require_subcommand(1);

    CommonArgs sim_args, run_args, bridges_args, disc_args, diag_args;
    std::string trace_path;

    CLI::App* sim = app.add_subcommand("simulate", "simulate observations from a model");
    add_common(sim, sim_args, true);

    CLI::App* run = app.add_subcommand("run", "run an MCMC chain");
    add_common(run, run_args, true);

    CLI::App* bridges = app.add_subcommand("bridges", "sample guided bridge proposals");
    add_common(bridges, bridges_args, true);

    CLI::App* disc =
        app.add_subcommand("discretization", "tabulate one-step discretization errors");
    add_common(disc, disc_args, true);

    CLI::App* diag = app.add_subcommand("diagnose", "summarize an existing trace CSV");
    diag->add_option("trace", trace_path, "trace CSV produced by `run`")->required();
    add_common(diag, diag_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (sim->parsed()) return sdebridge::cmd_simulate(load_config(sim_args));
        if (run->parsed()) return sdebridge::cmd_run(load_config(run_args));
        if (bridges->parsed()) return sdebridge::cmd_bridges(load_config(bridges_args));
        if (disc->parsed()) return sdebridge::cmd_discretization(load_config(disc_args));
        if (diag->parsed()) return sdebridge::cmd_diagnose(load_config(diag_args), trace_path);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
