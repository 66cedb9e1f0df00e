#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidlab/landscape.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

// Trajectory on a uniform time grid: points[k] sits at start_time + k * dt.
struct Path {
    double dt = 0.0;
    std::vector<Vec> points;
    double start_time = 0.0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    std::size_t dim() const { return points.empty() ? 0 : points.front().dim(); }
    double duration() const { return points.size() < 2 ? 0.0 : dt * static_cast<double>(points.size() - 1); }
    double time_at(std::size_t k) const { return start_time + dt * static_cast<double>(k); }
    const Vec& front() const { return points.front(); }
    const Vec& back() const { return points.back(); }

    // Appends `other`, dropping its first point, which must coincide with our last.
    void glue(const Path& other) {
        if (other.empty()) return;
        if (empty()) {
            *this = other;
            return;
        }
        if (std::abs(other.dt - dt) > 1e-12 * dt) throw std::invalid_argument("Path::glue: step sizes differ");
        points.insert(points.end(), other.points.begin() + 1, other.points.end());
    }

    // Rows of "t,x1,..,xd".
    void write_csv(std::ostream& os) const {
        os << "t";
        for (std::size_t i = 0; i < dim(); ++i) os << ",x" << (i + 1);
        os << '\n';
        os.precision(17);
        for (std::size_t k = 0; k < points.size(); ++k) {
            os << time_at(k);
            for (double c : points[k]) os << ',' << c;
            os << '\n';
        }
    }
};

class NumericalBlowUp : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check_state(const Vec& x, double t) {
    if (!all_finite(x))
        throw NumericalBlowUp("non-finite state at t = " + std::to_string(t) +
                              "; the step size is too large for the landscape stiffness");
}

// Euler integration of phi' = -grad V(phi) - grad F(phi - a).
inline Path integrate_effective_flow(const Vec& x0, const Vec& a, const Landscape& land, double dt, double horizon) {
    if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("integrate_effective_flow: bad dt or horizon");
    require_same_dim(x0, land.dim(), "integrate_effective_flow");
    require_same_dim(a, land.dim(), "integrate_effective_flow");
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    Path path{dt, {}, 0.0};
    path.points.reserve(steps + 1);
    Vec x = x0;
    path.points.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        const Vec drift = land.grad_v(x) + land.grad_f(x - a);
        x.axpy(-dt, drift);
        check_state(x, dt * static_cast<double>(k + 1));
        path.points.push_back(x);
    }
    return path;
}

}  // namespace sidlab
