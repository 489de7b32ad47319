#pragma once

#include <functional>
#include <vector>

#include "sdebridge/linalg.hpp"
#include "sdebridge/rng.hpp"

namespace sdebridge {

// Uniform grid of n points including both endpoints.
std::vector<double> uniform_grid(double t0, double t1, int n);

// Time-indexed states.  x.size() == t.size().
struct Path {
    std::vector<double> t;
    std::vector<Vec> x;
};

using Observations = Path;

// Brownian increments over consecutive grid cells: dW[j] covers [t[j], t[j+1]].
struct WienerIncrements {
    std::vector<double> t;
    std::vector<Vec> dW;
};

// Parametric Ito diffusion dX = b(t,X;theta) dt + sigma(t,X;theta) dW,
// X in R^d, W in R^{d'}.
struct DiffusionModel {
    int state_dim = 0;
    int noise_dim = 0;
    std::function<Vec(double, const Vec&, const Vec&)> drift;
    std::function<Mat(double, const Vec&, const Vec&)> dispersion;

    Mat diffusion(double t, const Vec& x, const Vec& theta) const {
        const Mat s = dispersion(t, x, theta);
        return s * s.transpose();
    }
};

WienerIncrements sample_wiener(RngStream& rng, const std::vector<double>& grid, int noise_dim);

// Euler-Maruyama driven by the given increments; aborts with a diagnostic
// naming the step index when a state turns non-finite.
Path euler_maruyama(const DiffusionModel& model, const Vec& theta, const Vec& x0,
                    const std::vector<double>& grid, const WienerIncrements& noise);

// Extracts path states at the requested times; each time must match a grid
// point within `tol`.
Observations subsample(const Path& path, const std::vector<double>& times, double tol = 1e-9);

}  // namespace sdebridge
