#pragma once

// Discretized large-deviation actions, their minimization, the barrier height H
// and the explicit exit path psi.
//
// All functionals use left-Riemann sums with forward differences:
//     A = dt/4 * sum_k |(f_{k+1} - f_k)/dt + b_k(f_k)|^2,
// the same discretization step_sid integrates, so noiseless simulations score ~0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sidlab/dynamics.hpp"
#include "sidlab/geometry.hpp"
#include "sidlab/landscape.hpp"
#include "sidlab/measures.hpp"
#include "sidlab/path.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

inline void require_path(const Path& path, std::size_t min_points, const char* what) {
    if (path.size() < min_points) throw std::invalid_argument(std::string(what) + ": path too short");
    if (!(path.dt > 0.0)) throw std::invalid_argument(std::string(what) + ": path dt must be positive");
}

// Full self-interacting action: the drift at node k uses the prior block and the
// occupation of f_0 .. f_{k-1}.
inline double action_full(const Path& path, const ExtendedInit& init, const Landscape& land,
                          std::size_t cap = std::numeric_limits<std::size_t>::max() / 2) {
    require_path(path, 1, "action_full");
    require_same_dim(path.front(), land.dim(), "action_full");
    const Vec& x0 = init.point();
    require_same_dim(x0, land.dim(), "action_full");
    if (dist(path.front(), x0) > 1e-9 * std::max(1.0, norm(x0)))
        throw std::invalid_argument("action_full: path does not start at the initial point");
    OccupationMeasure mu = make_measure_for(init, land, std::max<std::size_t>(cap, 16));
    const double dt = path.dt;
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const Vec& f = path.points[k];
        Vec r = (path.points[k + 1] - f) / dt;
        r += land.grad_v(f);
        r += mu.interaction_drift(land, f);
        sum += norm2(r);
        mu.push(f, dt);
    }
    return 0.25 * dt * sum;
}

namespace detail {
// r_k = (f_{k+1} - f_k)/dt + grad W_a(f_k)
inline std::vector<Vec> effective_residuals(const Path& path, const Landscape& land, const Vec& a) {
    std::vector<Vec> r;
    r.reserve(path.size() - 1);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const Vec& f = path.points[k];
        Vec rk = (path.points[k + 1] - f) / path.dt;
        rk += land.grad_v(f);
        rk += land.grad_f(f - a);
        r.push_back(rk);
    }
    return r;
}
}  // namespace detail

// Action with the interaction frozen at delta_a: drift grad V + grad F(. - a).
inline double action_effective(const Path& path, const Landscape& land, const Vec& a) {
    require_path(path, 1, "action_effective");
    require_same_dim(a, land.dim(), "action_effective");
    double sum = 0.0;
    for (const Vec& r : detail::effective_residuals(path, land, a)) sum += norm2(r);
    return 0.25 * path.dt * sum;
}

// Exact gradient of action_effective with respect to nodes 1 .. n-2:
//     dA/df_k = (r_{k-1} - r_k)/2 + dt/2 * Hess W_a(f_k) r_k.
inline std::vector<Vec> action_gradient(const Path& path, const Landscape& land, const Vec& a) {
    require_path(path, 3, "action_gradient");
    const std::vector<Vec> r = detail::effective_residuals(path, land, a);
    std::vector<Vec> g;
    g.reserve(path.size() - 2);
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const Vec& f = path.points[k];
        const Mat h = land.hess_v(f) + land.hess_f(f - a);
        Vec gk = 0.5 * (r[k - 1] - r[k]);
        gk.axpy(0.5 * path.dt, h.tmul(r[k]));
        g.push_back(gk);
    }
    return g;
}

// Mean over nodes of |phi' - grad W_a(phi)|; zero on the time-reversed flow.
inline double reversed_flow_residual(const Path& path, const Landscape& land, const Vec& a) {
    require_path(path, 2, "reversed_flow_residual");
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const Vec& f = path.points[k];
        const Vec v = (path.points[k + 1] - f) / path.dt;
        sum += norm(v - land.grad_v(f) - land.grad_f(f - a));
    }
    return sum / static_cast<double>(path.size() - 1);
}

inline Path straight_path(const Vec& from, const Vec& to, double horizon, std::size_t nodes) {
    if (nodes < 2) throw std::invalid_argument("straight_path: need at least two nodes");
    Path p{horizon / static_cast<double>(nodes - 1), {}, 0.0};
    p.points.reserve(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(nodes - 1);
        p.points.push_back((1.0 - s) * from + s * to);
    }
    return p;
}

struct MinimizeOptions {
    std::vector<double> t_grid{1.0, 2.0, 4.0, 8.0, 16.0};
    std::size_t nodes = 3201;
    std::size_t budget = 20000;
    double grad_tol = 1e-6;
    std::size_t memory = 12;
};

struct HorizonResult {
    double horizon = 0.0;
    double value = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct MinimizeResult {
    Path path;
    double value = std::numeric_limits<double>::infinity();
    double horizon = 0.0;
    // False when the chosen horizon stopped on the budget or a stalled line
    // search before reaching grad_tol; the path is then the best found.
    bool converged = false;
    std::vector<HorizonResult> per_horizon;
};

namespace detail {

// Value and gradient of action_effective for interior nodes stored flat
// (node-major, d entries per node); endpoints are fixed.
struct EffectiveObjective {
    const Landscape& land;
    Vec a;
    Vec start, end;
    double dt;
    std::size_t m;  // interior nodes
    std::size_t d;

    Vec node(const std::vector<double>& z, std::size_t k) const {
        if (k == 0) return start;
        if (k == m + 1) return end;
        Vec v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = z[(k - 1) * d + i];
        return v;
    }

    double value(const std::vector<double>& z) const {
        double sum = 0.0;
        Vec f = start;
        for (std::size_t k = 0; k <= m; ++k) {
            const Vec next = node(z, k + 1);
            Vec r = (next - f) / dt;
            r += land.grad_v(f);
            r += land.grad_f(f - a);
            sum += norm2(r);
            f = next;
        }
        return 0.25 * dt * sum;
    }

    double value_grad(const std::vector<double>& z, std::vector<double>& g) const {
        g.assign(m * d, 0.0);
        double sum = 0.0;
        Vec f = start;
        Vec r_prev(d);
        for (std::size_t k = 0; k <= m; ++k) {
            const Vec next = node(z, k + 1);
            Vec r = (next - f) / dt;
            r += land.grad_v(f);
            r += land.grad_f(f - a);
            sum += norm2(r);
            if (k >= 1) {
                const Mat h = land.hess_v(f) + land.hess_f(f - a);
                Vec gk = 0.5 * (r_prev - r);
                gk.axpy(0.5 * dt, h.tmul(r));
                for (std::size_t i = 0; i < d; ++i) g[(k - 1) * d + i] = gk[i];
            }
            r_prev = r;
            f = next;
        }
        return 0.25 * dt * sum;
    }
};

inline double flat_dot(const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

// Solves (1/(2 dt)) tridiag(-1, 2, -1) y = q per coordinate: the Hessian of the
// kinetic part, used as the initial inverse-Hessian guess.
inline void apply_kinetic_inverse(std::vector<double>& q, std::size_t m, std::size_t d, double dt) {
    std::vector<double> c(m), rhs(m);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < m; ++k) rhs[k] = 2.0 * dt * q[k * d + i];
        // Thomas algorithm for diag 2, off-diagonals -1.
        double denom = 2.0;
        c[0] = -1.0 / denom;
        rhs[0] /= denom;
        for (std::size_t k = 1; k < m; ++k) {
            denom = 2.0 + c[k - 1];
            c[k] = -1.0 / denom;
            rhs[k] = (rhs[k] + rhs[k - 1]) / denom;
        }
        for (std::size_t k = m - 1; k-- > 0;) rhs[k] -= c[k] * rhs[k + 1];
        for (std::size_t k = 0; k < m; ++k) q[k * d + i] = rhs[k];
    }
}

// L-BFGS with the kinetic preconditioner and Armijo backtracking; every accepted
// step decreases the action.
inline HorizonResult lbfgs_descent(Path& path, const Landscape& land, const Vec& a, const MinimizeOptions& opt) {
    const std::size_t d = land.dim();
    const std::size_t m = path.size() - 2;
    const std::size_t n = m * d;
    EffectiveObjective obj{land, a, path.front(), path.back(), path.dt, m, d};
    std::vector<double> z(n);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < d; ++i) z[k * d + i] = path.points[k + 1][i];

    HorizonResult out;
    out.horizon = path.duration();
    std::vector<double> grad, trial(n), trial_grad, q(n);
    double value = obj.value_grad(z, grad);
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> alpha;

    std::size_t it = 0;
    for (; it < opt.budget; ++it) {
        if (std::sqrt(flat_dot(grad, grad)) < opt.grad_tol) break;
        q = grad;
        alpha.assign(s_hist.size(), 0.0);
        for (std::size_t j = s_hist.size(); j-- > 0;) {
            alpha[j] = rho_hist[j] * flat_dot(s_hist[j], q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[j] * y_hist[j][i];
        }
        apply_kinetic_inverse(q, m, d, path.dt);
        for (std::size_t j = 0; j < s_hist.size(); ++j) {
            const double beta = rho_hist[j] * flat_dot(y_hist[j], q);
            for (std::size_t i = 0; i < n; ++i) q[i] += (alpha[j] - beta) * s_hist[j][i];
        }
        double slope = -flat_dot(grad, q);
        if (!(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            q = grad;
            apply_kinetic_inverse(q, m, d, path.dt);
            slope = -flat_dot(grad, q);
        }

        double t = 1.0;
        double trial_value = value;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = z[i] - t * q[i];
            trial_value = obj.value(trial);
            if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // no descent progress
        if (trial_value >= value) {
            // Step below rounding resolution of the objective.
            break;
        }

        obj.value_grad(trial, trial_grad);
        std::vector<double> sv(n), yv(n);
        for (std::size_t i = 0; i < n; ++i) {
            sv[i] = trial[i] - z[i];
            yv[i] = trial_grad[i] - grad[i];
        }
        const double sy = flat_dot(sv, yv);
        if (sy > 1e-12 * std::sqrt(flat_dot(sv, sv) * flat_dot(yv, yv))) {
            s_hist.push_back(std::move(sv));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        z.swap(trial);
        grad.swap(trial_grad);
        value = trial_value;
    }
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < d; ++i) path.points[k + 1][i] = z[k * d + i];
    out.iterations = it;
    out.grad_norm = std::sqrt(flat_dot(grad, grad));
    out.converged = out.grad_norm < opt.grad_tol;
    out.value = action_effective(path, land, a);
    return out;
}

}  // namespace detail

// Minimizes action_effective over paths a -> z for each horizon in the grid and
// returns the best. The value is an upper bound on the quasipotential.
inline MinimizeResult minimize_action(const Landscape& land, const Vec& a, const Vec& z,
                                      const MinimizeOptions& opt = {}) {
    require_same_dim(a, land.dim(), "minimize_action");
    require_same_dim(z, land.dim(), "minimize_action");
    if (dist(a, z) == 0.0) throw std::invalid_argument("minimize_action: z must differ from a");
    if (opt.nodes < 8) throw std::invalid_argument("minimize_action: need at least 8 nodes");
    if (opt.t_grid.empty()) throw std::invalid_argument("minimize_action: empty horizon grid");
    MinimizeResult best;
    for (double horizon : opt.t_grid) {
        if (!(horizon > 0.0)) throw std::invalid_argument("minimize_action: horizons must be positive");
        Path p = straight_path(a, z, horizon, opt.nodes);
        HorizonResult hr = detail::lbfgs_descent(p, land, a, opt);
        best.per_horizon.push_back(hr);
        if (hr.value < best.value) {
            best.value = hr.value;
            best.horizon = horizon;
            best.converged = hr.converged;
            best.path = std::move(p);
        }
    }
    return best;
}

struct BarrierResult {
    double h = 0.0;
    Vec z_star;
};

// H = min over the boundary of W_a. Boundary samples are refined by projected
// gradient descent with backtracking (interval boundaries are exact).
inline BarrierResult compute_H(const Landscape& land, const Domain& domain, const Vec& a, std::size_t n_boundary,
                               std::uint64_t seed) {
    require_same_dim(a, land.dim(), "compute_H");
    if (!domain.contains(a)) throw std::invalid_argument("compute_H: a must lie in G");
    const std::vector<Vec> samples = domain.sample_boundary(n_boundary, seed);
    if (samples.empty()) throw std::invalid_argument("compute_H: empty boundary sample");
    auto w = [&](const Vec& x) { return land.effective_potential(a, x).first; };

    BarrierResult best{std::numeric_limits<double>::infinity(), samples.front()};
    for (const Vec& z : samples) {
        const double v = w(z);
        if (v < best.h) best = {v, z};
    }
    if (domain.is_interval()) return best;

    // Refine the best few candidates.
    std::vector<std::pair<double, Vec>> ranked;
    for (const Vec& z : samples) ranked.emplace_back(w(z), z);
    std::sort(ranked.begin(), ranked.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
    ranked.resize(std::min<std::size_t>(ranked.size(), 4));
    for (auto [val, z] : ranked) {
        double step = 0.1;
        for (int it = 0; it < 500 && step > 1e-14; ++it) {
            const Vec g = land.effective_potential(a, z).second;
            Vec n = domain.inner_normal(z);
            const Vec tangential = g - dot(g, n) * n;
            if (norm(tangential) < 1e-13) break;
            const Vec cand = domain.project_to_boundary(z - step * tangential);
            const double cv = w(cand);
            if (cv < val) {
                z = cand;
                val = cv;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        if (val < best.h) best = {val, z};
    }
    return best;
}

// C(rho) = Lip_gradF * (1 + eps) * rho * sqrt(H)
inline double frozen_gap_bound(double rho, double eps, double lip_f, double h) {
    if (rho < 0.0 || eps < 0.0 || lip_f < 0.0 || h < 0.0)
        throw std::invalid_argument("frozen_gap_bound: arguments must be nonnegative");
    return lip_f * (1.0 + eps) * rho * std::sqrt(h);
}

// W2(mu_t, delta_a) along a path started from init, after each node is absorbed.
inline std::vector<W2Sample> occupation_trace(const Path& path, const ExtendedInit& init, const Vec& a) {
    OccupationMeasure mu(init, OccupationMeasure::kDefaultCap, false);
    std::vector<W2Sample> out;
    out.reserve(path.size());
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        mu.push(path.points[k], path.dt);
        out.push_back({path.time_at(k + 1), mu.w2_to_dirac(a)});
    }
    return out;
}

struct PsiOptions {
    MinimizeOptions minimize{};
    double eps = 0.5;
    double exit_length = 0.01;
    std::size_t n_boundary = 256;
    std::uint64_t seed = 1;
    // T_a is doubled until the occupation trace stays within (1 + eps) rho.
    int max_doublings = 12;
};

struct PsiResult {
    Path path;
    double t_a = 0.0;
    double h = 0.0;
    Vec z_star;
    double min_action_value = 0.0;
    bool trace_ok = false;
    double max_w2 = 0.0;
    double action = 0.0;  // action_full of the path
    bool within_margin = false;  // action <= H + eta
};

// Glues: unit-speed segment x0 -> a, constant a for T_a, minimum-action path
// a -> z*, and a straight exit past the boundary along the outward normal.
inline PsiResult build_psi(const ExtendedInit& init, const Landscape& land, const Domain& domain, const Vec& a,
                           double rho, double eta, double t_a, const PsiOptions& opt = {}) {
    const Vec& x0 = init.point();
    if (!domain.contains(x0)) throw std::invalid_argument("build_psi: x0 must lie in G");
    if (!(rho > 0.0) || rho >= domain.inradius(a)) throw std::invalid_argument("build_psi: need 0 < rho < inradius(a)");
    if (!(t_a >= 0.0) || !(eta >= 0.0)) throw std::invalid_argument("build_psi: T_a and eta must be nonnegative");

    PsiResult res;
    const BarrierResult barrier = compute_H(land, domain, a, opt.n_boundary, opt.seed);
    res.h = barrier.h;
    res.z_star = barrier.z_star;
    MinimizeResult mam = minimize_action(land, a, barrier.z_star, opt.minimize);
    res.min_action_value = mam.value;
    const double dt = mam.path.dt;

    // Exit segment, traversed at the reversed-flow speed |grad W_a(z*)|.
    const Vec out_normal = -domain.inner_normal(barrier.z_star);
    const double speed = std::max(norm(land.effective_potential(a, barrier.z_star).second), 1e-3);
    const auto n_exit = static_cast<std::size_t>(std::max(1.0, std::ceil(opt.exit_length / (speed * dt))));
    Path exit_seg{dt, {}, 0.0};
    for (std::size_t k = 0; k <= n_exit; ++k)
        exit_seg.points.push_back(barrier.z_star + (opt.exit_length * static_cast<double>(k) / n_exit) * out_normal);
    if (domain.contains(exit_seg.back())) throw std::runtime_error("build_psi: exit segment ends inside G");

    const double len = dist(x0, a);
    const auto n_in = static_cast<std::size_t>(std::ceil(len / dt));
    double wait = t_a;
    for (int attempt = 0; attempt <= opt.max_doublings; ++attempt) {
        Path psi{dt, {x0}, 0.0};
        for (std::size_t k = 1; k <= n_in; ++k)
            psi.points.push_back(x0 + (static_cast<double>(k) / static_cast<double>(n_in)) * (a - x0));
        const auto n_wait = static_cast<std::size_t>(std::llround(wait / dt));
        for (std::size_t k = 0; k < n_wait; ++k) psi.points.push_back(a);
        psi.glue(mam.path);
        psi.glue(exit_seg);

        double worst = 0.0;
        for (const W2Sample& s : occupation_trace(psi, init, a)) worst = std::max(worst, s.w2);
        res.path = std::move(psi);
        res.t_a = wait;
        res.max_w2 = worst;
        res.trace_ok = worst <= (1.0 + opt.eps) * rho;
        if (res.trace_ok) break;
        wait = std::max(2.0 * wait, 1.0);
    }
    res.action = action_full(res.path, init, land);
    res.within_margin = res.action <= res.h + eta;
    return res;
}

}  // namespace sidlab
