#pragma once

// Exit-time campaigns over a sigma grid, their statistics and persistence.
//
// Config JSON (defaults in brackets):
//   landscape        preset string ["ou"]          dim       [1]
//   domain           see io.hpp (required)
//   init             see io.hpp [{"x0": attractor or 0}]
//   attractor        point [find_attractor from x0]
//   sigma_grid       list of sigma > 0 (required)
//   trajectories_per_sigma  count >= 1 (required)
//   dt               step [0.01 / max(Lip grad V + Lip grad F, 1)]
//   horizon_cap      time [1e6]; horizon = min(cap, exp(2 (H + 1) / sigma^2))
//   master_seed      integer (required)
//   H                barrier [compute_H]
//   rho [0.1 inradius(a)], eps [0.5], T_st [2 x noiseless entry time into B_{rho/2}(a)]
//   snapshot_every   steps between W2 snapshots [100]
//   measure_cap      occupation atoms [4096]
//   threads          workers [1]; 0 = hardware concurrency
//   output           directory for records.csv and summary.json [none]

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sidlab/action.hpp"
#include "sidlab/dynamics.hpp"
#include "sidlab/geometry.hpp"
#include "sidlab/io.hpp"
#include "sidlab/landscape.hpp"
#include "sidlab/rng.hpp"

namespace sidlab {

struct ExperimentConfig {
    std::string landscape = "ou";
    std::size_t dim = 1;
    json domain;
    std::optional<json> init;
    std::optional<Vec> attractor;
    std::vector<double> sigma_grid;
    std::size_t trajectories_per_sigma = 0;
    std::optional<double> dt;
    double horizon_cap = 1e6;
    std::uint64_t master_seed = 0;
    std::optional<double> h;
    std::optional<double> rho;
    double eps = 0.5;
    std::optional<double> t_st;
    std::size_t snapshot_every = 100;
    std::size_t measure_cap = OccupationMeasure::kDefaultCap;
    std::size_t threads = 1;
    std::string output;

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        c.landscape = j.value("landscape", c.landscape);
        c.dim = j.value("dim", c.dim);
        if (!j.contains("domain")) throw std::invalid_argument("config: 'domain' is required");
        c.domain = j.at("domain");
        if (j.contains("init")) c.init = j.at("init");
        if (j.contains("attractor")) c.attractor = vec_from_json(j.at("attractor"));
        if (!j.contains("sigma_grid")) throw std::invalid_argument("config: 'sigma_grid' is required");
        c.sigma_grid = j.at("sigma_grid").get<std::vector<double>>();
        if (!j.contains("trajectories_per_sigma")) throw std::invalid_argument("config: 'trajectories_per_sigma' is required");
        c.trajectories_per_sigma = j.at("trajectories_per_sigma").get<std::size_t>();
        if (j.contains("dt")) c.dt = j.at("dt").get<double>();
        c.horizon_cap = j.value("horizon_cap", c.horizon_cap);
        if (!j.contains("master_seed")) throw std::invalid_argument("config: 'master_seed' is required");
        c.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("H")) c.h = j.at("H").get<double>();
        if (j.contains("rho")) c.rho = j.at("rho").get<double>();
        c.eps = j.value("eps", c.eps);
        if (j.contains("T_st")) c.t_st = j.at("T_st").get<double>();
        c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
        c.measure_cap = j.value("measure_cap", c.measure_cap);
        c.threads = j.value("threads", c.threads);
        c.output = j.value("output", c.output);
        c.validate();
        return c;
    }

    // Experiment identity; excludes execution-only fields (threads, output).
    json to_json() const {
        json j{{"landscape", landscape},
               {"dim", dim},
               {"domain", domain},
               {"sigma_grid", sigma_grid},
               {"trajectories_per_sigma", trajectories_per_sigma},
               {"horizon_cap", horizon_cap},
               {"master_seed", master_seed},
               {"eps", eps},
               {"snapshot_every", snapshot_every},
               {"measure_cap", measure_cap}};
        if (init) j["init"] = *init;
        if (attractor) j["attractor"] = vec_to_json(*attractor);
        if (dt) j["dt"] = *dt;
        if (h) j["H"] = *h;
        if (rho) j["rho"] = *rho;
        if (t_st) j["T_st"] = *t_st;
        return j;
    }

    std::uint64_t hash() const { return fnv1a64(to_json().dump()); }

    void validate() const {
        if (sigma_grid.empty()) throw std::invalid_argument("config: sigma_grid is empty");
        for (double s : sigma_grid)
            if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("config: sigma values must be > 0");
        if (trajectories_per_sigma < 1) throw std::invalid_argument("config: trajectories_per_sigma must be >= 1");
        if (dt && !(*dt > 0.0)) throw std::invalid_argument("config: dt must be > 0");
        if (!(horizon_cap > 0.0)) throw std::invalid_argument("config: horizon_cap must be > 0");
        if (rho && !(*rho > 0.0)) throw std::invalid_argument("config: rho must be > 0");
        if (!(eps > 0.0)) throw std::invalid_argument("config: eps must be > 0");
        if (snapshot_every < 1) throw std::invalid_argument("config: snapshot_every must be >= 1");
    }
};

// dt <= 0.01 / max(Lip grad V + Lip grad F, 1), using whatever constants the
// catalog records (ball-local ones included); 1e-3 when nothing is known.
inline double recommended_dt(const Landscape& land) {
    const auto& cat = land.catalog();
    auto known = [](const Validity& v) -> std::optional<double> {
        if (v.scope == Validity::Scope::kGlobal || v.scope == Validity::Scope::kOnBall) return v.constant;
        return std::nullopt;
    };
    const auto lv = known(cat.grad_v_lipschitz);
    const auto lf = known(cat.grad_f_lipschitz);
    if (!lv || !lf) return 1e-3;
    return 0.01 / std::max(*lv + *lf, 1.0);
}

// exp(2 (H + 1) / sigma^2) capped.
inline double default_horizon(double h, double sigma, double cap) {
    const double expo = 2.0 * (h + 1.0) / (sigma * sigma);
    return expo > std::log(cap) ? cap : std::min(cap, std::exp(expo));
}

// Twice the time the noiseless SID from init needs to enter B_{rho/2}(a).
inline double default_t_st(const ExtendedInit& init, const Landscape& land, const Vec& a, double rho, double dt,
                           double t_max = 1e4) {
    OccupationMeasure mu = make_measure_for(init, land, OccupationMeasure::kDefaultCap);
    Vec x = init.point();
    const auto n = static_cast<std::size_t>(std::ceil(t_max / dt));
    for (std::size_t k = 0; k <= n; ++k) {
        if (dist(x, a) < 0.5 * rho) return 2.0 * dt * static_cast<double>(k);
        Vec next = x;
        next.axpy(-dt, land.grad_v(x) + mu.interaction_drift(land, x));
        check_state(next, dt * static_cast<double>(k + 1));
        mu.push(x, dt);
        x = next;
    }
    throw std::runtime_error("default T_st: noiseless trajectory does not enter B_{rho/2}(a)");
}

struct ResolvedCampaign {
    Vec a;
    double h = 0.0;
    std::optional<Vec> z_star;
    double rho = 0.0;
    double eps = 0.5;
    double t_st = 0.0;
    double dt = 0.0;
    std::vector<double> horizons;  // per sigma
    std::vector<std::string> warnings;
};

struct SigmaStats {
    double sigma = 0.0;
    std::size_t count = 0;
    std::size_t censored = 0;
    double mean_exit = std::numeric_limits<double>::quiet_NaN();    // over exits
    double median_exit = std::numeric_limits<double>::quiet_NaN();  // over exits
    double log_mean = std::numeric_limits<double>::quiet_NaN();
    double gamma_before_exit_fraction = 0.0;
    std::vector<Vec> exit_points;
};

struct CampaignResult {
    ResolvedCampaign resolved;
    std::vector<ExitRecord> records;  // sorted by (sigma, seed)
    std::vector<SigmaStats> stats;    // in sigma_grid order
    std::uint64_t config_hash = 0;
};

inline std::vector<SigmaStats> aggregate(const std::vector<ExitRecord>& records, const std::vector<double>& sigma_grid) {
    std::vector<SigmaStats> out;
    for (double sigma : sigma_grid) {
        SigmaStats s;
        s.sigma = sigma;
        std::vector<double> times;
        std::size_t gamma_hits = 0;
        for (const ExitRecord& r : records) {
            if (r.sigma != sigma) continue;
            ++s.count;
            if (r.gamma_before_exit) ++gamma_hits;
            if (r.censored) {
                ++s.censored;
                continue;
            }
            times.push_back(r.exit_time);
            s.exit_points.push_back(*r.exit_point);
        }
        if (s.count) s.gamma_before_exit_fraction = static_cast<double>(gamma_hits) / static_cast<double>(s.count);
        if (!times.empty()) {
            s.mean_exit = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
            s.log_mean = std::log(s.mean_exit);
            std::vector<double> sorted = times;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t n = sorted.size();
            s.median_exit = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline ResolvedCampaign resolve_campaign(const ExperimentConfig& cfg, const Landscape& land, const Domain& domain,
                                         const ExtendedInit& init) {
    ResolvedCampaign r;
    r.eps = cfg.eps;
    r.a = cfg.attractor ? *cfg.attractor : find_attractor(init.point(), land, 1e-3, 1e-9, 1e4);
    require_same_dim(r.a, land.dim(), "campaign attractor");
    if (!domain.contains(r.a)) throw std::invalid_argument("campaign: attractor outside the domain");
    if (cfg.h) {
        r.h = *cfg.h;
    } else {
        const BarrierResult b = compute_H(land, domain, r.a, 256, cfg.master_seed);
        r.h = b.h;
        r.z_star = b.z_star;
    }
    const double inr = domain.inradius(r.a);
    r.rho = cfg.rho ? *cfg.rho : 0.1 * inr;
    r.dt = cfg.dt ? *cfg.dt : recommended_dt(land);
    r.t_st = cfg.t_st ? *cfg.t_st : default_t_st(init, land, r.a, r.rho, r.dt);
    for (double sigma : cfg.sigma_grid) {
        r.horizons.push_back(default_horizon(r.h, sigma, cfg.horizon_cap));
        if (sigma * std::sqrt(r.dt) > 0.1 * inr) {
            std::ostringstream w;
            w << "sigma*sqrt(dt) = " << sigma * std::sqrt(r.dt) << " exceeds 10% of the inradius " << inr
              << " at sigma = " << sigma;
            r.warnings.push_back(w.str());
        }
    }
    return r;
}

inline std::vector<std::string> record_header(std::size_t dim) {
    std::vector<std::string> h{"sigma", "seed", "exit_time", "censored"};
    for (std::size_t i = 0; i < dim; ++i) h.push_back("exit_x" + std::to_string(i + 1));
    h.push_back("gamma_before_exit");
    return h;
}

inline void write_records_csv(std::ostream& os, const std::vector<ExitRecord>& records, std::size_t dim) {
    const auto header = record_header(dim);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n' << std::setprecision(17);
    for (const ExitRecord& r : records) {
        os << r.sigma << ',' << r.seed << ',' << r.exit_time << ',' << (r.censored ? 1 : 0);
        for (std::size_t i = 0; i < dim; ++i) {
            os << ',';
            if (r.exit_point) os << (*r.exit_point)[i];
        }
        os << ',' << (r.gamma_before_exit ? 1 : 0) << '\n';
    }
}

inline json summary_json(const ExperimentConfig& cfg, const CampaignResult& res) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << res.config_hash;
    json per_sigma = json::array();
    for (const SigmaStats& s : res.stats) {
        per_sigma.push_back({{"sigma", s.sigma},
                             {"count", s.count},
                             {"censored", s.censored},
                             {"mean_exit", num(s.mean_exit)},
                             {"median_exit", num(s.median_exit)},
                             {"log_mean", num(s.log_mean)},
                             {"gamma_before_exit_fraction", s.gamma_before_exit_fraction}});
    }
    const ResolvedCampaign& r = res.resolved;
    return {{"config", cfg.to_json()},
            {"config_hash", hash.str()},
            {"resolved",
             {{"attractor", vec_to_json(r.a)},
              {"H", r.h},
              {"rho", r.rho},
              {"eps", r.eps},
              {"T_st", r.t_st},
              {"dt", r.dt},
              {"horizons", r.horizons}}},
            {"warnings", r.warnings},
            {"stats", per_sigma}};
}

inline void persist_campaign(const ExperimentConfig& cfg, const CampaignResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream rec(fs::path(dir) / "records.csv");
    if (!rec) throw std::runtime_error("cannot write " + (fs::path(dir) / "records.csv").string());
    write_records_csv(rec, res.records, cfg.dim);
    std::ofstream sum(fs::path(dir) / "summary.json");
    if (!sum) throw std::runtime_error("cannot write " + (fs::path(dir) / "summary.json").string());
    sum << summary_json(cfg, res).dump(2) << '\n';
    if (!rec || !sum) throw std::runtime_error("write failure in " + dir);
}

// Runs every (sigma, trajectory) pair; trajectory j at sigma index i uses seed
// derive_seed(master_seed, i, j). Results do not depend on the worker count.
inline CampaignResult run_exit_campaign(const ExperimentConfig& cfg,
                                        const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    cfg.validate();
    const Landscape land = make_preset(cfg.landscape, cfg.dim);
    const Domain domain = domain_from_json(cfg.domain);
    if (domain.dim() != land.dim()) throw std::invalid_argument("config: domain and landscape dimensions differ");
    ExtendedInit init;
    if (cfg.init) {
        init = init_from_json(*cfg.init);
    } else {
        init = ExtendedInit::at(cfg.attractor ? *cfg.attractor : Vec::zeros(land.dim()));
    }
    if (!domain.contains(init.point())) throw std::invalid_argument("config: x0 outside the domain");

    CampaignResult res;
    res.config_hash = cfg.hash();
    res.resolved = resolve_campaign(cfg, land, domain, init);
    const ResolvedCampaign& rs = res.resolved;

    const std::size_t n_sigma = cfg.sigma_grid.size();
    const std::size_t n_traj = cfg.trajectories_per_sigma;
    const std::size_t total = n_sigma * n_traj;
    std::vector<ExitRecord> slots(total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total) return;
            const std::size_t si = job / n_traj;
            const std::size_t tj = job % n_traj;
            try {
                SimulationOptions opt;
                opt.sigma = cfg.sigma_grid[si];
                opt.dt = rs.dt;
                opt.horizon = rs.horizons[si];
                opt.seed = derive_seed(cfg.master_seed, si, tj);
                opt.domain = domain;
                opt.gamma = GammaMonitor{rs.a, rs.rho, rs.eps, rs.t_st, cfg.snapshot_every};
                opt.measure_cap = cfg.measure_cap;
                slots[job] = simulate_sid(init, land, opt).record;
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(total);
                return;
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (progress) progress(d, total);
        }
    };
    std::size_t n_threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    n_threads = std::min(n_threads, total);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    res.records = std::move(slots);
    std::stable_sort(res.records.begin(), res.records.end(), [](const ExitRecord& p, const ExitRecord& q) {
        return p.sigma != q.sigma ? p.sigma < q.sigma : p.seed < q.seed;
    });
    res.stats = aggregate(res.records, cfg.sigma_grid);
    if (!cfg.output.empty()) persist_campaign(cfg, res, cfg.output);
    return res;
}

struct WindowFraction {
    double sigma = 0.0;
    double fraction = 0.0;
    std::size_t count = 0;
};

// Per sigma, the share of records with exp(2(H - delta)/sigma^2) < tau < exp(2(H + delta)/sigma^2).
// Censored records count as outside the window.
inline std::vector<WindowFraction> kramers_window_fraction(const std::vector<ExitRecord>& records, double h,
                                                           double delta) {
    if (records.empty()) throw std::invalid_argument("kramers_window_fraction: no records");
    std::vector<WindowFraction> out;
    for (const ExitRecord& r : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const WindowFraction& w) { return w.sigma == r.sigma; });
        if (it == out.end()) {
            out.push_back({r.sigma, 0.0, 0});
            it = out.end() - 1;
        }
        ++it->count;
        if (r.censored) continue;
        const double s2 = r.sigma * r.sigma;
        const double lt = std::log(r.exit_time);
        if (lt > 2.0 * (h - delta) / s2 && lt < 2.0 * (h + delta) / s2) it->fraction += 1.0;
    }
    for (WindowFraction& w : out) w.fraction /= static_cast<double>(w.count);
    std::sort(out.begin(), out.end(), [](const auto& p, const auto& q) { return p.sigma > q.sigma; });
    return out;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    std::size_t points = 0;
    double ci90_lo = 0.0;
    double ci90_hi = 0.0;
    std::vector<std::string> warnings;
};

// Least squares of log(mean exit) (or log median) against 1 / sigma^2; the slope
// estimates 2H. Sigma values whose records are all censored are left out.
inline SlopeFit estimate_kramers_slope(const std::vector<SigmaStats>& stats, bool use_median = false) {
    std::vector<double> xs, ys;
    SlopeFit fit;
    for (const SigmaStats& s : stats) {
        const double v = use_median ? s.median_exit : s.mean_exit;
        if (!std::isfinite(v) || !(v > 0.0)) {
            fit.warnings.push_back("sigma " + std::to_string(s.sigma) + ": no exits, excluded");
            continue;
        }
        if (s.censored > 0)
            fit.warnings.push_back("sigma " + std::to_string(s.sigma) + ": " + std::to_string(s.censored) +
                                   " censored records excluded from the mean");
        if (std::find(xs.begin(), xs.end(), 1.0 / (s.sigma * s.sigma)) != xs.end())
            throw std::invalid_argument("estimate_kramers_slope: repeated sigma");
        xs.push_back(1.0 / (s.sigma * s.sigma));
        ys.push_back(std::log(v));
    }
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("estimate_kramers_slope: need at least two sigma values with exits");
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = ys[i] - fit.intercept - fit.slope * xs[i];
            ssr += e * e;
        }
        fit.stderr_slope = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
        const boost::math::students_t dist(static_cast<double>(n - 2));
        const double q = boost::math::quantile(dist, 0.95);
        fit.ci90_lo = fit.slope - q * fit.stderr_slope;
        fit.ci90_hi = fit.slope + q * fit.stderr_slope;
    } else {
        fit.ci90_lo = fit.ci90_hi = fit.slope;
    }
    return fit;
}

// Share of non-censored exits whose exit point satisfies `region`.
inline double exit_location_mass(const std::vector<ExitRecord>& records, const std::function<bool(const Vec&)>& region) {
    std::size_t exits = 0, inside = 0;
    for (const ExitRecord& r : records) {
        if (r.censored || !r.exit_point) continue;
        ++exits;
        if (region(*r.exit_point)) ++inside;
    }
    if (exits == 0) throw std::invalid_argument("exit_location_mass: all records censored");
    return static_cast<double>(inside) / static_cast<double>(exits);
}

}  // namespace sidlab
