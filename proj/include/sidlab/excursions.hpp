#pragma once

// Stopping-time instrumentation on a recorded trajectory:
//   tau_1     = inf{t >= T_st : X_t in B_rho(a) or on the boundary}
//   theta_m   = inf{t >= tau_m : X_t on S_{(1+eps) rho}(a)}
//   tau_{m+1} = inf{t >= theta_m : X_t in B_rho(a) or on the boundary}
//   gamma     = inf{t >= T_st : W2(mu_t, delta_a) > (1+eps) rho}
// Hitting times are resolved on the path grid; the boundary is hit at the exit time.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sidlab/dynamics.hpp"
#include "sidlab/path.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

struct ExcursionTrace {
    std::vector<double> tau;
    std::vector<double> theta;
    std::optional<double> gamma;  // empty when censored
    double t_in = 0.0;   // time in [tau_k, theta_k)
    double t_out = 0.0;  // time in [theta_k, tau_{k+1})
    std::vector<W2Sample> w2_trace;
    double end_time = 0.0;
};

inline ExcursionTrace trace_excursions(const Path& path, const std::vector<W2Sample>& snapshots, const Vec& a,
                                       double rho, double eps, double t_st,
                                       std::optional<double> exit_time = std::nullopt) {
    if (!(rho > 0.0) || !(eps > 0.0)) throw std::invalid_argument("trace_excursions: rho and eps must be positive");
    if (path.empty()) throw std::invalid_argument("trace_excursions: empty path");
    for (std::size_t i = 1; i < snapshots.size(); ++i)
        if (!(snapshots[i].t > snapshots[i - 1].t))
            throw std::invalid_argument("trace_excursions: inconsistent snapshot grid (times must increase)");

    ExcursionTrace tr;
    tr.w2_trace = snapshots;
    const double outer = (1.0 + eps) * rho;
    for (const W2Sample& s : snapshots) {
        if (s.t >= t_st && s.w2 > outer) {
            tr.gamma = s.t;
            break;
        }
    }

    enum class Seek { kTau, kTheta } seek = Seek::kTau;
    double mark = 0.0;  // time of the last tau or theta
    auto hit_tau = [&](double t) {
        if (!tr.tau.empty()) tr.t_out += t - mark;
        tr.tau.push_back(t);
        mark = t;
        seek = Seek::kTheta;
    };
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = path.time_at(k);
        if (exit_time && t >= *exit_time) break;
        const double r = dist(path.points[k], a);
        if (seek == Seek::kTau) {
            if (r < rho && (!tr.tau.empty() || t >= t_st)) hit_tau(t);
        } else if (r >= outer) {
            tr.t_in += t - mark;
            tr.theta.push_back(t);
            mark = t;
            seek = Seek::kTau;
        }
    }

    const double end = exit_time ? *exit_time : path.time_at(path.size() - 1);
    tr.end_time = end;
    if (exit_time) {
        if (seek == Seek::kTheta) {
            // Left B_{(1+eps) rho}(a) and the domain between two grid points.
            tr.t_in += end - mark;
            tr.theta.push_back(end);
            mark = end;
            seek = Seek::kTau;
            hit_tau(end);
        } else if (!tr.tau.empty() || end >= t_st) {
            hit_tau(end);
        }
    } else if (!tr.tau.empty()) {
        if (seek == Seek::kTheta)
            tr.t_in += end - mark;
        else
            tr.t_out += end - mark;
    }
    return tr;
}

}  // namespace sidlab
