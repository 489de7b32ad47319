#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "sdebridge/commands.hpp"
#include "sdebridge/config.hpp"
#include "sdebridge/mcmc.hpp"

namespace py = pybind11;
using namespace sdebridge;

namespace {

RunConfig config_from_text(const std::string& text) {
    const ParseResult parsed = parse_config(text);
    if (!parsed.ok()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : parsed.errors) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
    return parsed.config;
}

py::dict table_dict(const CsvTable& table) {
    Mat values(static_cast<int>(table.rows.size()), static_cast<int>(table.header.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        for (std::size_t j = 0; j < table.header.size(); ++j)
            values(static_cast<int>(i), static_cast<int>(j)) = table.rows[i][j];
    py::dict d;
    d["columns"] = table.header;
    d["values"] = values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_sdebridge, m) {
    m.doc() = "MCMC inference for discretely observed diffusions via guided bridge proposals";

    m.def("config_errors",
          [](const std::string& text) { return parse_config(text).errors; },
          py::arg("text"), "Validate a configuration; returns a list of problems (empty if ok).");

    m.def(
        "simulate",
        [](const std::string& config_text) {
            const RunConfig c = config_from_text(config_text);
            const Observations obs = simulate_observations(c);
            Mat x(static_cast<int>(obs.x.size()), obs.x.empty() ? 0 : int(obs.x[0].size()));
            for (std::size_t i = 0; i < obs.x.size(); ++i) x.row(static_cast<int>(i)) = obs.x[i];
            py::dict d;
            d["t"] = Vec(Eigen::Map<const Vec>(obs.t.data(), static_cast<int>(obs.t.size())));
            d["x"] = x;
            return d;
        },
        py::arg("config"), "Simulate observations; returns {'t': times, 'x': states}.");

    m.def(
        "run",
        [](const std::string& config_text) {
            const RunConfig c = config_from_text(config_text);
            ChainOutput out;
            {
                py::gil_scoped_release release;
                out = run_config_chain(c);
            }
            py::dict d;
            d["trace"] = out.trace;
            d["param_names"] = out.param_names;
            d["seed"] = out.seed;
            py::dict acc;
            acc["innovations"] = out.innovation_rate();
            acc["theta"] = out.theta_rate();
            acc["theta_proposals"] = out.theta_proposals;
            acc["gibbs_draws"] = out.gibbs_draws;
            d["acceptance"] = acc;
            py::dict flags;
            flags["nonfinite_psi"] = out.flag_nonfinite;
            flags["positivity_cap_hits"] = out.flag_cap_hits;
            flags["w_not_pd"] = out.flag_w_not_pd;
            d["flags"] = flags;
            return d;
        },
        py::arg("config"),
        "Run an MCMC chain; returns the trace (iterations x parameters) and diagnostics.");

    m.def(
        "bridges",
        [](const std::string& config_text) {
            return table_dict(bridges_table(config_from_text(config_text)));
        },
        py::arg("config"), "Sample guided bridges; returns {'columns', 'values'}.");

    m.def(
        "discretization",
        [](const std::string& config_text) {
            const RunConfig c = config_from_text(config_text);
            CsvTable t;
            {
                py::gil_scoped_release release;
                t = discretization_table(c);
            }
            return table_dict(t);
        },
        py::arg("config"),
        "One-step discretization error table; returns {'columns', 'values'}.");

    m.def(
        "act",
        [](const std::vector<double>& xs) {
            const ActEstimate e = act_estimate(xs);
            return py::make_tuple(e.value, e.constant);
        },
        py::arg("samples"),
        "Autocorrelation time via the initial positive sequence estimator; "
        "returns (value, constant_flag).");
}
