#pragma once

// Euler-Maruyama integration of the self-interacting diffusion
//     dX = -(grad V(X) + grad F * mu_t(X)) dt + sigma dW,
// its noiseless counterpart, and attractor search.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sidlab/geometry.hpp"
#include "sidlab/landscape.hpp"
#include "sidlab/measures.hpp"
#include "sidlab/path.hpp"
#include "sidlab/rng.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

struct ExitRecord {
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double exit_time = 0.0;  // the horizon when censored
    bool censored = true;
    std::optional<Vec> exit_point;
    bool gamma_before_exit = false;
    std::optional<double> gamma_time;
    std::uint64_t steps = 0;
};

// gamma = first snapshot time t >= t_st with W2(mu_t, delta_a) > (1 + eps) rho.
struct GammaMonitor {
    Vec a;
    double rho = 0.0;
    double eps = 0.5;
    double t_st = 0.0;
    std::size_t snapshot_every = 100;
};

struct W2Sample {
    double t = 0.0;
    double w2 = 0.0;
};

struct SimulationOptions {
    double sigma = 0.0;
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    std::optional<Domain> domain;
    // Keep every k-th state in the returned path; 0 disables path output.
    std::size_t path_every = 0;
    std::optional<GammaMonitor> gamma;
    // Record (t, W2) at every gamma snapshot; needs `gamma`.
    bool keep_w2_trace = false;
    std::size_t measure_cap = OccupationMeasure::kDefaultCap;
    // Store atoms even when the interaction gradient is linear.
    bool force_atoms = false;
};

struct SimulationResult {
    ExitRecord record;
    std::optional<Path> path;
    OccupationMeasure measure;
    std::vector<W2Sample> w2_trace;
};

inline Vec step_sid(const Vec& x, const OccupationMeasure& mu, const Landscape& land, double sigma, double dt,
                    const Vec& xi) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_sid: dt must be positive");
    Vec out = x;
    out.axpy(-dt, land.grad_v(x) + mu.interaction_drift(land, x));
    if (sigma != 0.0) out.axpy(sigma * std::sqrt(dt), xi);
    return out;
}

inline OccupationMeasure make_measure_for(const ExtendedInit& init, const Landscape& land, std::size_t cap,
                                          bool force_atoms = false) {
    const bool linear = land.linear_interaction_gradient().has_value();
    return OccupationMeasure(init, cap, force_atoms || !linear);
}

// The drift at step k sees the path atoms x_0 .. x_{k-1}; x_k is pushed after the step.
inline SimulationResult simulate_sid(const ExtendedInit& init, const Landscape& land, const SimulationOptions& opt) {
    if (!(opt.horizon > 0.0)) throw std::invalid_argument("simulate_sid: horizon must be positive");
    if (!(opt.dt > 0.0)) throw std::invalid_argument("simulate_sid: dt must be positive");
    if (!(opt.sigma >= 0.0)) throw std::invalid_argument("simulate_sid: sigma must be >= 0");
    require_same_dim(init.point(), land.dim(), "simulate_sid");
    const Domain* domain = opt.domain ? &*opt.domain : nullptr;
    if (domain && !domain->contains(init.point())) throw std::invalid_argument("simulate_sid: x0 outside the domain");
    if (opt.gamma && opt.gamma->snapshot_every == 0) throw std::invalid_argument("simulate_sid: snapshot_every must be >= 1");

    const std::size_t d = land.dim();
    const double dt = opt.dt;
    const double noise = opt.sigma * std::sqrt(dt);
    const auto n_steps = static_cast<std::uint64_t>(std::ceil(opt.horizon / dt - 1e-9));
    const double gamma_level = opt.gamma ? (1.0 + opt.gamma->eps) * opt.gamma->rho : 0.0;

    SimulationResult res{{}, std::nullopt, make_measure_for(init, land, opt.measure_cap, opt.force_atoms), {}};
    ExitRecord& rec = res.record;
    rec.sigma = opt.sigma;
    rec.seed = opt.seed;
    OccupationMeasure& mu = res.measure;
    if (opt.path_every > 0) {
        res.path = Path{dt * static_cast<double>(opt.path_every), {}, 0.0};
        res.path->points.push_back(init.point());
    }

    // Quadratic V and F: drift k x + beta (x - mean mu) evaluated directly.
    const auto lin_k = land.linear_confinement_gradient();
    const auto lin_beta = land.linear_interaction_gradient();
    const bool linear = lin_k && lin_beta && !mu.stores_atoms();

    // Running mean of mu for the linear branch: x0 + wsum / wtotal, or a constant
    // when the measure is frozen.
    const Vec& x0 = init.point();
    Vec wsum = Vec::zeros(d);
    double wtotal = 0.0;
    const bool frozen = init.frozen();
    if (!init.measure().empty()) {
        const double t0w = frozen ? 1.0 : init.time();
        for (const Atom& at : init.measure()) wsum.axpy(t0w * at.w, at.x - x0);
        wtotal = t0w;
    }

    NormalStream rng(opt.seed);
    Vec x = x0;
    for (std::uint64_t k = 0; k < n_steps; ++k) {
        const double t = dt * static_cast<double>(k);
        Vec next = x;
        if (linear) {
            const double kk = *lin_k, b = *lin_beta;
            if (b != 0.0 && wtotal > 0.0) {
                const double inv = 1.0 / wtotal;
                for (std::size_t i = 0; i < d; ++i)
                    next[i] -= dt * (kk * x[i] + b * (x[i] - (x0[i] + wsum[i] * inv)));
            } else {
                for (std::size_t i = 0; i < d; ++i) next[i] -= dt * kk * x[i];
            }
            if (!frozen) {
                for (std::size_t i = 0; i < d; ++i) wsum[i] += dt * (x[i] - x0[i]);
                wtotal += dt;
            }
        } else {
            next.axpy(-dt, land.grad_v(x) + mu.interaction_drift(land, x));
        }
        for (std::size_t i = 0; i < d; ++i) next[i] += noise * rng.next();
        check_state(next, t + dt);
        mu.push(x, dt);
        rec.steps = k + 1;

        if (opt.gamma && (k + 1) % opt.gamma->snapshot_every == 0 && (!rec.gamma_time || opt.keep_w2_trace)) {
            const double ts = t + dt;
            const double w2 = mu.w2_to_dirac(opt.gamma->a);
            if (opt.keep_w2_trace) res.w2_trace.push_back({ts, w2});
            if (!rec.gamma_time && ts >= opt.gamma->t_st && w2 > gamma_level) rec.gamma_time = ts;
        }

        if (domain && !domain->contains(next)) {
            const auto hit = domain->detect_crossing(x, next);
            rec.censored = false;
            rec.exit_time = t + hit->lambda * dt;
            rec.exit_point = hit->point;
            rec.gamma_before_exit = rec.gamma_time.has_value();
            return res;
        }
        x = next;
        if (res.path && (k + 1) % opt.path_every == 0) res.path->points.push_back(x);
    }
    rec.censored = true;
    rec.exit_time = opt.horizon;
    rec.gamma_before_exit = rec.gamma_time.has_value();
    return res;
}

// Noiseless SID on a full grid of n = round(T / dt) steps.
inline Path integrate_deterministic(const ExtendedInit& init, const Landscape& land, double dt, double horizon,
                                    std::size_t cap = OccupationMeasure::kDefaultCap) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_deterministic: dt must be positive");
    if (!(horizon >= 0.0)) throw std::invalid_argument("integrate_deterministic: T must be >= 0");
    require_same_dim(init.point(), land.dim(), "integrate_deterministic");
    OccupationMeasure mu = make_measure_for(init, land, cap);
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    Path path{dt, {}, 0.0};
    path.points.reserve(n + 1);
    Vec x = init.point();
    path.points.push_back(x);
    for (std::size_t k = 0; k < n; ++k) {
        Vec next = x;
        next.axpy(-dt, land.grad_v(x) + mu.interaction_drift(land, x));
        check_state(next, dt * static_cast<double>(k + 1));
        mu.push(x, dt);
        x = next;
        path.points.push_back(x);
    }
    return path;
}

// Follows x' = -grad V(x) - grad F(0), i.e. the noiseless dynamics with the
// occupation measure collapsed onto the current state, until the per-step speed
// drops below tol.
inline Vec find_attractor(const Vec& x0, const Landscape& land, double dt, double tol, double t_max) {
    if (!(tol > 0.0)) throw std::invalid_argument("find_attractor: tol must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("find_attractor: dt must be positive");
    require_same_dim(x0, land.dim(), "find_attractor");
    const Vec gf0 = land.grad_f(Vec::zeros(land.dim()));
    Vec x = x0;
    const auto n = static_cast<std::size_t>(std::ceil(t_max / dt));
    for (std::size_t k = 0; k < n; ++k) {
        const Vec drift = land.grad_v(x) + gf0;
        x.axpy(-dt, drift);
        check_state(x, dt * static_cast<double>(k + 1));
        if (norm(drift) < tol) {
            if (norm(land.grad_v(x) + gf0) >= tol)
                throw std::runtime_error("find_attractor: limit point is not stationary");
            return x;
        }
    }
    throw std::runtime_error("find_attractor: no convergence by T_max");
}

}  // namespace sidlab
