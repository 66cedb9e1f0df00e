#pragma once

// Mean exit time of a one-dimensional diffusion dX = -V'(X) dt + sigma dW from an
// interval: (sigma^2/2) u'' - V' u' = -1, u(l) = u(r) = 0.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sidlab/landscape.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

struct BvpSolution {
    std::vector<double> x;
    std::vector<double> u;

    // Piecewise-linear interpolation on the grid.
    double at(double point) const {
        if (point <= x.front()) return u.front();
        if (point >= x.back()) return u.back();
        const double h = x[1] - x[0];
        const auto i = std::min(static_cast<std::size_t>((point - x.front()) / h), x.size() - 2);
        const double s = (point - x[i]) / h;
        return (1.0 - s) * u[i] + s * u[i + 1];
    }
};

// Second-order central differences on grid_n uniform cells, Thomas algorithm.
inline BvpSolution bvp_mean_exit_1d(const Landscape& land, double lo, double hi, double sigma, std::size_t grid_n) {
    if (land.dim() != 1) throw std::invalid_argument("bvp_mean_exit_1d: landscape must be one-dimensional");
    if (!land.interaction_is_zero()) throw std::invalid_argument("bvp_mean_exit_1d: needs F == 0");
    if (grid_n < 64) throw std::invalid_argument("bvp_mean_exit_1d: grid_n must be >= 64");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw std::invalid_argument("bvp_mean_exit_1d: need a finite interval lo < hi");
    if (!(sigma > 0.0)) throw std::invalid_argument("bvp_mean_exit_1d: sigma must be positive");

    const std::size_t n = grid_n;
    const double h = (hi - lo) / static_cast<double>(n);
    const double diff = 0.5 * sigma * sigma / (h * h);
    BvpSolution sol;
    sol.x.resize(n + 1);
    sol.u.assign(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) sol.x[i] = lo + h * static_cast<double>(i);

    // Unknowns u_1 .. u_{n-1}: sub_i u_{i-1} + diag u_i + sup_i u_{i+1} = -1.
    const std::size_t m = n - 1;
    std::vector<double> sub(m), diag(m), sup(m), rhs(m, -1.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double drift = land.grad_v(Vec{sol.x[k + 1]})[0];
        sub[k] = diff + drift / (2.0 * h);
        diag[k] = -2.0 * diff;
        sup[k] = diff - drift / (2.0 * h);
    }
    for (std::size_t k = 1; k < m; ++k) {
        if (std::abs(diag[k - 1]) < 1e-300) throw std::runtime_error("bvp_mean_exit_1d: singular system");
        const double w = sub[k] / diag[k - 1];
        diag[k] -= w * sup[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    if (std::abs(diag[m - 1]) < 1e-300) throw std::runtime_error("bvp_mean_exit_1d: singular system");
    std::vector<double> u(m);
    u[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) u[k] = (rhs[k] - sup[k] * u[k + 1]) / diag[k];
    for (std::size_t k = 0; k < m; ++k) {
        if (!std::isfinite(u[k])) throw std::runtime_error("bvp_mean_exit_1d: singular system (non-finite solution)");
        sol.u[k + 1] = u[k];
    }
    return sol;
}

}  // namespace sidlab
