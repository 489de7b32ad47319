#include "sdebridge/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdebridge {

std::vector<double> uniform_grid(double t0, double t1, int n) {
    if (n < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
    if (!(t1 > t0)) throw std::invalid_argument("uniform_grid: t1 must exceed t0");
    std::vector<double> g(n);
    const double dt = (t1 - t0) / (n - 1);
    for (int i = 0; i < n; ++i) g[i] = t0 + i * dt;
    g.back() = t1;
    return g;
}

WienerIncrements sample_wiener(RngStream& rng, const std::vector<double>& grid, int noise_dim) {
    if (grid.size() < 2) throw std::invalid_argument("sample_wiener: grid too short");
    WienerIncrements w;
    w.t = grid;
    w.dW.reserve(grid.size() - 1);
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        const double dt = grid[j + 1] - grid[j];
        if (!(dt > 0)) throw std::invalid_argument("sample_wiener: grid not increasing");
        w.dW.push_back(std::sqrt(dt) * rng.normal_vec(noise_dim));
    }
    return w;
}

Path euler_maruyama(const DiffusionModel& model, const Vec& theta, const Vec& x0,
                    const std::vector<double>& grid, const WienerIncrements& noise) {
    if (noise.dW.size() + 1 != grid.size())
        throw std::invalid_argument("euler_maruyama: noise does not match grid");
    Path p;
    p.t = grid;
    p.x.resize(grid.size());
    p.x[0] = x0;
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        const double dt = grid[j + 1] - grid[j];
        const Vec b = model.drift(grid[j], p.x[j], theta);
        const Mat s = model.dispersion(grid[j], p.x[j], theta);
        p.x[j + 1] = p.x[j] + dt * b + s * noise.dW[j];
        if (!p.x[j + 1].allFinite()) {
            std::string st = "[";
            for (int k = 0; k < p.x[j + 1].size(); ++k)
                st += (k ? "," : "") + std::to_string(p.x[j + 1](k));
            throw std::runtime_error("euler_maruyama: non-finite state at step " +
                                     std::to_string(j + 1) + " (t=" + std::to_string(grid[j + 1]) +
                                     ") state=" + st + "]");
        }
    }
    return p;
}

Observations subsample(const Path& path, const std::vector<double>& times, double tol) {
    Observations o;
    o.t.reserve(times.size());
    o.x.reserve(times.size());
    std::size_t j = 0;
    for (double t : times) {
        while (j < path.t.size() && path.t[j] < t - tol) ++j;
        if (j >= path.t.size() || std::abs(path.t[j] - t) > tol)
            throw std::invalid_argument("subsample: time " + std::to_string(t) +
                                        " not on the path grid");
        o.t.push_back(path.t[j]);
        o.x.push_back(path.x[j]);
    }
    return o;
}

}  // namespace sdebridge
