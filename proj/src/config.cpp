#include "sdebridge/config.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "sdebridge/csvio.hpp"

namespace sdebridge {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

class Parser {
public:
    explicit Parser(ParseResult& res) : res_(res) {}

    void fail(const std::string& key, const Entry& e, const std::string& msg) {
        res_.errors.push_back("line " + std::to_string(e.line) + ": " + key + ": " + msg);
    }

    bool number(const std::string& key, const Entry& e, const std::string& tok, double& out) {
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), out);
        if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) {
            fail(key, e, "not a number: '" + tok + "'");
            return false;
        }
        return true;
    }

    bool real(const std::string& key, const Entry& e, double& out) {
        const auto tk = tokens(e.value);
        if (tk.size() != 1) {
            fail(key, e, "expected one number");
            return false;
        }
        return number(key, e, tk[0], out);
    }

    bool integer(const std::string& key, const Entry& e, long long lo, long long hi,
                 long long& out) {
        double v = 0;
        if (!real(key, e, v)) return false;
        out = static_cast<long long>(v);
        if (double(out) != v) {
            fail(key, e, "expected an integer");
            return false;
        }
        if (out < lo || out > hi) {
            fail(key, e, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return false;
        }
        return true;
    }

    bool vector(const std::string& key, const Entry& e, Vec& out) {
        const auto tk = tokens(e.value);
        if (tk.empty()) {
            fail(key, e, "expected at least one number");
            return false;
        }
        out.resize(static_cast<int>(tk.size()));
        for (std::size_t i = 0; i < tk.size(); ++i)
            if (!number(key, e, tk[i], out(static_cast<int>(i)))) return false;
        return true;
    }

private:
    ParseResult& res_;
};

}  // namespace

ParseResult parse_config(const std::string& text) {
    ParseResult res;
    RunConfig& c = res.config;
    Parser P(res);

    std::map<std::string, Entry> kv;
    {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                res.errors.push_back("line " + std::to_string(lineno) +
                                     ": expected 'key = value'");
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                res.errors.push_back("line " + std::to_string(lineno) + ": empty key");
                continue;
            }
            if (kv.count(key)) {
                res.errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                                     key + "'");
                continue;
            }
            kv[key] = Entry{value, lineno};
        }
    }

    std::map<int, PriorMarginal> priors;
    for (const auto& [key, e] : kv) {
        long long n = 0;
        double x = 0;
        if (key == "model.name") {
            c.model_name = e.value;
            if (c.model_name != "arctan" && c.model_name != "prokaryotic" &&
                c.model_name != "lotka_volterra" && c.model_name != "toy")
                P.fail(key, e, "unknown model '" + c.model_name + "'");
        } else if (key == "model.k_dna") {
            if (P.real(key, e, x)) {
                if (x < 1)
                    P.fail(key, e, "must be at least 1");
                else
                    c.k_dna = x;
            }
        } else if (key == "mcmc.algorithm") {
            if (e.value == "alg1")
                c.algorithm = Algorithm::alg1;
            else if (e.value == "alg2")
                c.algorithm = Algorithm::alg2;
            else if (e.value == "alg3")
                c.algorithm = Algorithm::alg3;
            else
                P.fail(key, e, "expected alg1, alg2 or alg3");
        } else if (key == "mcmc.iterations") {
            if (P.integer(key, e, 0, 1000000000, n)) c.iterations = static_cast<int>(n);
        } else if (key == "mcmc.burnin") {
            if (P.integer(key, e, 0, 1000000000, n)) c.burnin = static_cast<int>(n);
        } else if (key == "mcmc.thin") {
            if (P.integer(key, e, 1, 1000000000, n)) c.thin = static_cast<int>(n);
        } else if (key == "mcmc.m") {
            if (P.integer(key, e, 0, 100000000, n)) {
                if (n < 2)
                    P.fail(key, e, "must be at least 2 (grid points per segment)");
                else
                    c.m = static_cast<int>(n);
            }
        } else if (key == "mcmc.theta_init") {
            P.vector(key, e, c.theta_init);
        } else if (key == "mcmc.positivity") {
            if (e.value == "auto" || e.value == "on" || e.value == "off")
                c.positivity = e.value;
            else
                P.fail(key, e, "expected auto, on or off");
        } else if (key == "mcmc.alpha") {
            if (P.real(key, e, x)) {
                if (x < 0)
                    P.fail(key, e, "must be nonnegative");
                else
                    c.alpha = x;
            }
        } else if (key == "mcmc.cap") {
            if (P.integer(key, e, 1, 1000000000, n)) c.cap = static_cast<int>(n);
        } else if (key.rfind("prior.", 0) == 0) {
            const std::string idx_s = key.substr(6);
            long long idx = 0;
            const auto r = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
            if (r.ec != std::errc{} || r.ptr != idx_s.data() + idx_s.size() || idx < 1 ||
                idx > 64) {
                res.errors.push_back("line " + std::to_string(e.line) + ": unknown key '" + key +
                                     "'");
                continue;
            }
            const auto tk = tokens(e.value);
            try {
                if (tk.empty()) throw std::invalid_argument("empty prior");
                if (tk[0] == "gaussian" && tk.size() == 3)
                    priors[int(idx)] = gaussian_prior(std::stod(tk[1]), std::stod(tk[2]));
                else if (tk[0] == "uniform_log" && tk.size() == 3)
                    priors[int(idx)] = uniform_log_prior(std::stod(tk[1]), std::stod(tk[2]));
                else if (tk[0] == "flat_log" && tk.size() == 1)
                    priors[int(idx)] = flat_log_prior();
                else if (tk[0] == "exponential" && tk.size() == 2)
                    priors[int(idx)] = exponential_prior(std::stod(tk[1]));
                else
                    throw std::invalid_argument(
                        "expected 'gaussian MEAN VAR', 'uniform_log LO HI', 'flat_log' or "
                        "'exponential RATE'");
            } catch (const std::exception& ex) {
                P.fail(key, e, ex.what());
            }
        } else if (key == "proposal.theta") {
            const auto tk = tokens(e.value);
            try {
                if (tk.size() == 2 && tk[0] == "log_rw_uniform")
                    c.kernel = log_rw_uniform_kernel(std::stod(tk[1]));
                else if (tk.size() == 2 && tk[0] == "log_rw_gaussian")
                    c.kernel = log_rw_gaussian_kernel(std::stod(tk[1]));
                else if (tk.size() == 2 && tk[0] == "gaussian_rw")
                    c.kernel = gaussian_rw_kernel(std::stod(tk[1]));
                else if (tk.size() == 3 && tk[0] == "independence_gamma")
                    c.kernel = independence_gamma_kernel(std::stod(tk[1]), std::stod(tk[2]));
                else
                    throw std::invalid_argument(
                        "expected 'log_rw_uniform W', 'log_rw_gaussian SD', 'gaussian_rw SD' or "
                        "'independence_gamma SHAPE RATE'");
                c.have_kernel = true;
            } catch (const std::exception& ex) {
                P.fail(key, e, ex.what());
            }
        } else if (key == "data.source") {
            c.data_source = e.value;
            if (c.data_source.empty()) P.fail(key, e, "expected 'simulate' or a CSV path");
        } else if (key == "sim.theta") {
            P.vector(key, e, c.sim_theta);
        } else if (key == "sim.x0") {
            P.vector(key, e, c.sim_x0);
        } else if (key == "sim.t_end") {
            if (P.real(key, e, x)) {
                if (!(x > 0))
                    P.fail(key, e, "must be positive");
                else
                    c.sim_t_end = x;
            }
        } else if (key == "sim.obs_step") {
            if (P.real(key, e, x)) {
                if (!(x > 0))
                    P.fail(key, e, "must be positive");
                else
                    c.sim_obs_step = x;
            }
        } else if (key == "sim.fine_steps") {
            if (P.integer(key, e, 2, 100000000, n)) c.sim_fine_steps = n;
        } else if (key == "sim.scheme") {
            if (e.value == "euler" || e.value == "ssa")
                c.sim_scheme = e.value;
            else
                P.fail(key, e, "expected euler or ssa");
        } else if (key == "bridges.u") {
            P.vector(key, e, c.bridges_u);
        } else if (key == "bridges.v") {
            P.vector(key, e, c.bridges_v);
        } else if (key == "bridges.theta") {
            P.vector(key, e, c.bridges_theta);
        } else if (key == "bridges.t_span") {
            if (P.real(key, e, x)) {
                if (!(x > 0))
                    P.fail(key, e, "must be positive");
                else
                    c.bridges_t_span = x;
            }
        } else if (key == "bridges.n_samples") {
            if (P.integer(key, e, 0, 100000000, n)) c.bridges_n_samples = static_cast<int>(n);
        } else if (key == "bridges.m") {
            if (P.integer(key, e, 2, 100000000, n)) c.bridges_m = static_cast<int>(n);
        } else if (key == "disc.t_span") {
            if (P.real(key, e, x)) {
                if (!(x > 0))
                    P.fail(key, e, "must be positive");
                else
                    c.disc_t_span = x;
            }
        } else if (key == "disc.m_list") {
            const auto tk = tokens(e.value);
            if (tk.empty()) P.fail(key, e, "expected at least one m");
            c.disc_m_list.clear();
            for (const auto& t : tk) {
                double v = 0;
                if (!P.number(key, e, t, v)) break;
                if (v < 2 || double(int(v)) != v) {
                    P.fail(key, e, "each m must be an integer >= 2");
                    break;
                }
                c.disc_m_list.push_back(int(v));
            }
        } else if (key == "disc.replicates") {
            if (P.integer(key, e, 2, 100000000, n)) c.disc_replicates = n;
        } else if (key == "output.dir") {
            c.output_dir = e.value;
            if (c.output_dir.empty()) P.fail(key, e, "expected a directory");
        } else if (key == "seed") {
            // Parsed as an integer directly: seeds above 2^53 must survive.
            const auto tk = tokens(e.value);
            unsigned long long s = 0;
            if (tk.size() != 1) {
                P.fail(key, e, "expected one integer");
            } else {
                const auto r = std::from_chars(tk[0].data(), tk[0].data() + tk[0].size(), s);
                if (r.ec != std::errc{} || r.ptr != tk[0].data() + tk[0].size())
                    P.fail(key, e, "expected a nonnegative integer, got '" + tk[0] + "'");
                else
                    c.seed = s;
            }
        } else if (key == "threads") {
            if (P.integer(key, e, 1, 4096, n)) c.threads = static_cast<int>(n);
        } else {
            res.errors.push_back("line " + std::to_string(e.line) + ": unknown key '" + key +
                                 "'");
        }
    }

    if (!priors.empty()) {
        int expect = 1;
        for (const auto& [idx, m] : priors) {
            if (idx != expect) {
                res.errors.push_back("prior." + std::to_string(expect) +
                                     ": missing (priors must be contiguous from 1)");
                break;
            }
            ++expect;
        }
        c.priors.clear();
        for (const auto& [idx, m] : priors) c.priors.push_back(m);
    }
    return res;
}

namespace {

std::string vec_str(const Vec& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += format_double(v(i));
    }
    return out;
}

std::string prior_str(const PriorMarginal& m) {
    switch (m.family) {
        case PriorFamily::gaussian:
            return "gaussian " + format_double(m.mean) + " " + format_double(m.var);
        case PriorFamily::uniform_log:
            return "uniform_log " + format_double(m.lo) + " " + format_double(m.hi);
        case PriorFamily::flat_log: return "flat_log";
        case PriorFamily::exponential: return "exponential " + format_double(m.rate);
    }
    return "";
}

std::string kernel_str(const ProposalKernel& k) {
    switch (k.family) {
        case ProposalFamily::log_rw_uniform: return "log_rw_uniform " + format_double(k.w);
        case ProposalFamily::log_rw_gaussian: return "log_rw_gaussian " + format_double(k.w);
        case ProposalFamily::gaussian_rw: return "gaussian_rw " + format_double(k.w);
        case ProposalFamily::independence_gamma:
            return "independence_gamma " + format_double(k.shape) + " " + format_double(k.rate);
    }
    return "";
}

}  // namespace

std::string emit_config(const RunConfig& c) {
    std::string out;
    auto put = [&](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    if (!c.model_name.empty()) put("model.name", c.model_name);
    put("model.k_dna", format_double(c.k_dna));
    put("mcmc.algorithm", c.algorithm == Algorithm::alg1   ? "alg1"
                          : c.algorithm == Algorithm::alg2 ? "alg2"
                                                           : "alg3");
    put("mcmc.iterations", std::to_string(c.iterations));
    put("mcmc.burnin", std::to_string(c.burnin));
    put("mcmc.thin", std::to_string(c.thin));
    put("mcmc.m", std::to_string(c.m));
    if (c.theta_init.size()) put("mcmc.theta_init", vec_str(c.theta_init));
    put("mcmc.positivity", c.positivity);
    put("mcmc.alpha", format_double(c.alpha));
    put("mcmc.cap", std::to_string(c.cap));
    for (std::size_t i = 0; i < c.priors.size(); ++i)
        put("prior." + std::to_string(i + 1), prior_str(c.priors[i]));
    if (c.have_kernel) put("proposal.theta", kernel_str(c.kernel));
    if (!c.data_source.empty()) put("data.source", c.data_source);
    if (c.sim_theta.size()) put("sim.theta", vec_str(c.sim_theta));
    if (c.sim_x0.size()) put("sim.x0", vec_str(c.sim_x0));
    if (c.sim_t_end > 0) put("sim.t_end", format_double(c.sim_t_end));
    if (c.sim_obs_step > 0) put("sim.obs_step", format_double(c.sim_obs_step));
    if (c.sim_fine_steps > 0) put("sim.fine_steps", std::to_string(c.sim_fine_steps));
    if (!c.sim_scheme.empty()) put("sim.scheme", c.sim_scheme);
    if (c.bridges_u.size()) put("bridges.u", vec_str(c.bridges_u));
    if (c.bridges_v.size()) put("bridges.v", vec_str(c.bridges_v));
    if (c.bridges_theta.size()) put("bridges.theta", vec_str(c.bridges_theta));
    if (c.bridges_t_span > 0) put("bridges.t_span", format_double(c.bridges_t_span));
    put("bridges.n_samples", std::to_string(c.bridges_n_samples));
    put("bridges.m", std::to_string(c.bridges_m));
    put("disc.t_span", format_double(c.disc_t_span));
    if (!c.disc_m_list.empty()) {
        std::string ms;
        for (std::size_t i = 0; i < c.disc_m_list.size(); ++i) {
            if (i) ms += ' ';
            ms += std::to_string(c.disc_m_list[i]);
        }
        put("disc.m_list", ms);
    }
    put("disc.replicates", std::to_string(c.disc_replicates));
    put("output.dir", c.output_dir);
    put("seed", std::to_string(c.seed));
    put("threads", std::to_string(c.threads));
    return out;
}

PriorSpec config_prior(const RunConfig& c, int param_dim) {
    if (static_cast<int>(c.priors.size()) != param_dim)
        throw std::invalid_argument("config: expected " + std::to_string(param_dim) +
                                    " prior.N entries, got " + std::to_string(c.priors.size()));
    PriorSpec p;
    p.marginals = c.priors;
    return p;
}

}  // namespace sdebridge
