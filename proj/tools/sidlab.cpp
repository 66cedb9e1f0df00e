// sidlab command-line driver.
//
//   sidlab simulate  one trajectory, optional path / W2-trace CSV
//   sidlab campaign  exit-time campaign from a JSON config
//   sidlab barrier   exit barrier H and a minimum-action cross-check
//   sidlab check     assumption reports for a landscape and domain
//   sidlab bvp       mean exit time of the interaction-free 1-d diffusion
//   sidlab psi       builds the glued psi path and scores its action
//
// Results go to stdout as JSON; diagnostics go to stderr.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sidlab/sidlab.hpp"

using namespace sidlab;

namespace {

json read_json_arg(const std::string& arg) {
    const auto first = arg.find_first_not_of(" \t\n");
    if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[')) return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw std::runtime_error("cannot open '" + arg + "'");
    return json::parse(in);
}

Domain domain_or_default(const std::string& arg, std::size_t dim) {
    if (!arg.empty()) return domain_from_json(read_json_arg(arg));
    if (dim == 1) return Domain::interval(-1.0, 1.0);
    return Domain::ball(Vec::zeros(dim), 1.0);
}

Vec vec_arg(const std::vector<double>& v, std::size_t dim, const char* what) {
    if (v.empty()) return Vec::zeros(dim);
    if (v.size() != dim)
        throw std::invalid_argument(std::string(what) + " has " + std::to_string(v.size()) + " coordinates, expected " +
                                    std::to_string(dim));
    Vec out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = v[i];
    return out;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    body(out);
    if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

json record_json(const ExitRecord& r) {
    json j{{"sigma", r.sigma},       {"seed", r.seed},   {"exit_time", r.exit_time},
           {"censored", r.censored}, {"steps", r.steps}, {"gamma_before_exit", r.gamma_before_exit}};
    j["exit_point"] = r.exit_point ? vec_to_json(*r.exit_point) : json(nullptr);
    j["gamma_time"] = r.gamma_time ? json(*r.gamma_time) : json(nullptr);
    return j;
}

json validity_json(const Validity& v) { return v.describe(); }

struct Common {
    std::string landscape = "ou";
    std::size_t dim = 1;
    std::string domain;
    std::vector<double> attractor;

    void add(CLI::App* app, bool with_domain = true) {
        app->add_option("-l,--landscape", landscape, "landscape preset, e.g. ou, dw+quad-attract(1)")
            ->capture_default_str();
        app->add_option("-d,--dim", dim, "state dimension")->capture_default_str()->check(CLI::Range(1, 8));
        if (with_domain)
            app->add_option("-g,--domain", domain,
                            "domain as inline JSON or a JSON file (default interval(-1,1) or the unit ball)");
        app->add_option("-a,--attractor", attractor, "attractor a (default: the origin)");
    }
    Landscape land() const { return make_preset(landscape, dim); }
};

int cmd_simulate(const Common& c, const std::vector<double>& x0_arg, const std::string& t0_arg, double sigma,
                 double dt, double horizon, std::uint64_t seed, bool no_domain, std::size_t path_every,
                 const std::string& path_out, const std::string& trace_out, std::optional<double> rho, double eps,
                 std::size_t cap) {
    const Landscape land = c.land();
    const Vec x0 = vec_arg(x0_arg, land.dim(), "--x0");
    const double t0 = t0_arg.empty() ? 0.0 : time_from_json(t0_arg == "inf" ? json("inf") : json(std::stod(t0_arg)));
    if (t0 != 0.0) throw std::invalid_argument("--t0 needs a prior measure; use 'campaign' with an init block");
    SimulationOptions opt;
    opt.sigma = sigma;
    opt.dt = dt;
    opt.horizon = horizon;
    opt.seed = seed;
    opt.measure_cap = cap;
    Domain domain = domain_or_default(c.domain, land.dim());
    if (!no_domain) opt.domain = domain;
    if (!path_out.empty()) opt.path_every = std::max<std::size_t>(1, path_every);
    const Vec a = vec_arg(c.attractor, land.dim(), "--attractor");
    if (!trace_out.empty()) {
        const double r = rho ? *rho : 0.1 * domain.inradius(a);
        opt.gamma = GammaMonitor{a, r, eps, 0.0, 100};
        opt.keep_w2_trace = true;
    }
    const SimulationResult res = simulate_sid(ExtendedInit::at(x0), land, opt);
    if (!path_out.empty()) write_file(path_out, [&](std::ostream& os) { res.path->write_csv(os); });
    if (!trace_out.empty())
        write_file(trace_out, [&](std::ostream& os) {
            os << "t,w2\n";
            os.precision(17);
            for (const W2Sample& s : res.w2_trace) os << s.t << ',' << s.w2 << '\n';
        });
    json out = record_json(res.record);
    out["final_mean"] = vec_to_json(res.measure.mean());
    out["w2_to_attractor"] = res.measure.w2_to_dirac(a);
    std::cout << out.dump(2) << '\n';
    return 0;
}

struct CampaignOverrides {
    std::optional<std::size_t> threads, trajectories, measure_cap, snapshot_every;
    std::optional<double> dt, horizon_cap, h, rho, eps, t_st;
    std::vector<double> sigmas;
    std::string output, landscape;
};

int cmd_campaign(const std::string& config_path, std::uint64_t seed, const CampaignOverrides& o, bool quiet) {
    json j = read_json_arg(config_path);
    j["master_seed"] = seed;
    auto put = [&](const char* key, const auto& v) {
        if (v) j[key] = *v;
    };
    put("threads", o.threads);
    put("trajectories_per_sigma", o.trajectories);
    put("measure_cap", o.measure_cap);
    put("snapshot_every", o.snapshot_every);
    put("dt", o.dt);
    put("horizon_cap", o.horizon_cap);
    put("H", o.h);
    put("rho", o.rho);
    put("eps", o.eps);
    put("T_st", o.t_st);
    if (!o.sigmas.empty()) j["sigma_grid"] = o.sigmas;
    if (!o.output.empty()) j["output"] = o.output;
    if (!o.landscape.empty()) j["landscape"] = o.landscape;
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);

    std::size_t last = 0;
    auto progress = [&](std::size_t done, std::size_t total) {
        if (quiet) return;
        const std::size_t pct = 100 * done / total;
        if (pct >= last + 5 || done == total) {
            last = pct;
            std::cerr << "\r" << done << "/" << total << " trajectories" << std::flush;
            if (done == total) std::cerr << '\n';
        }
    };
    const CampaignResult res = run_exit_campaign(cfg, progress);
    for (const std::string& w : res.resolved.warnings) std::cerr << "warning: " << w << '\n';
    json out = summary_json(cfg, res);
    if (res.stats.size() >= 2) {
        try {
            const SlopeFit fit = estimate_kramers_slope(res.stats);
            out["slope_fit"] = {{"slope", fit.slope},       {"intercept", fit.intercept},
                                {"stderr", fit.stderr_slope}, {"ci90", {fit.ci90_lo, fit.ci90_hi}},
                                {"points", fit.points},       {"warnings", fit.warnings}};
            out["slope_fit"]["implied_H"] = fit.slope / 2.0;
        } catch (const std::exception& e) {
            out["slope_fit"] = {{"error", e.what()}};
        }
    }
    const auto window = kramers_window_fraction(res.records, res.resolved.h, 0.3 * res.resolved.h);
    json wj = json::array();
    for (const WindowFraction& w : window) wj.push_back({{"sigma", w.sigma}, {"fraction", w.fraction}, {"count", w.count}});
    out["kramers_window_delta_0.3H"] = wj;
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_barrier(const Common& c, std::size_t n_boundary, std::uint64_t seed, bool cross_check, std::size_t nodes) {
    const Landscape land = c.land();
    const Domain domain = domain_or_default(c.domain, land.dim());
    const Vec a = vec_arg(c.attractor, land.dim(), "--attractor");
    const BarrierResult b = compute_H(land, domain, a, n_boundary, seed);
    json out{{"H", b.h}, {"z_star", vec_to_json(b.z_star)}, {"attractor", vec_to_json(a)}};
    if (cross_check) {
        MinimizeOptions opt;
        opt.nodes = nodes;
        const MinimizeResult m = minimize_action(land, a, b.z_star, opt);
        json hz = json::array();
        for (const HorizonResult& h : m.per_horizon)
            hz.push_back({{"T", h.horizon},
                          {"value", h.value},
                          {"grad_norm", h.grad_norm},
                          {"iterations", h.iterations},
                          {"converged", h.converged}});
        out["min_action"] = {{"value", m.value},
                             {"horizon", m.horizon},
                             {"converged", m.converged},
                             {"relative_gap", std::abs(m.value - b.h) / std::max(b.h, 1e-300)},
                             {"per_horizon", hz}};
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_check(const Common& c, double delta_x, double delta_mu, std::size_t samples, std::uint64_t seed,
              double resolution) {
    const Landscape land = c.land();
    const Domain domain = domain_or_default(c.domain, land.dim());
    const Vec a = vec_arg(c.attractor, land.dim(), "--attractor");
    json out;
    const AssumptionCatalog& cat = land.catalog();
    out["catalog"] = {{"C2", cat.c2},
                      {"lip_grad_V", validity_json(cat.grad_v_lipschitz)},
                      {"lip_grad_F", validity_json(cat.grad_f_lipschitz)},
                      {"bound_grad_F", validity_json(cat.grad_f_bounded)},
                      {"confinement_at_infinity", cat.confinement_at_infinity}};

    Box box = domain.bounding_box();
    for (std::size_t i = 0; i < box.dim(); ++i) {
        if (!std::isfinite(box.lo[i])) box.lo[i] = a[i] - 5.0;
        if (!std::isfinite(box.hi[i])) box.hi[i] = a[i] + 5.0;
    }
    const double lip_v = estimate_lipschitz([&](const Vec& x) { return land.grad_v(x); }, box, samples, seed);
    const double lip_f = estimate_lipschitz([&](const Vec& u) { return land.grad_f(u); }, box, samples, seed + 1);
    out["sampled_lipschitz_on_domain_box"] = {{"grad_V", lip_v}, {"grad_F", lip_f}};
    out["recommended_dt"] = recommended_dt(land);

    json sa;
    for (auto [mode, name] : {std::pair{AttractionSampling::kBall, "ball"}, std::pair{AttractionSampling::kSphere, "sphere"}}) {
        const StrongAttractionResult r = check_strong_attraction(land, a, delta_x, delta_mu, samples, seed, mode);
        sa[name] = {{"k_est", r.k_est}, {"pass", r.pass}, {"worst_x", vec_to_json(r.worst_x)}};
    }
    out["strong_attraction"] = sa;

    const BarrierResult b = compute_H(land, domain, a, 256, seed);
    out["H"] = b.h;
    out["z_star"] = vec_to_json(b.z_star);
    if (land.dim() <= 3) {
        const SublevelReport s = check_sublevel(land, a, b.h, domain, resolution);
        json others = json::array();
        for (const Vec& p : s.other_component_points) others.push_back(vec_to_json(p));
        out["sublevel"] = {{"bounded", s.bounded},
                           {"connected", s.connected},
                           {"components", s.components},
                           {"other_components", others},
                           {"touch_points", s.touch_set.size()},
                           {"grid_resolution", s.grid_resolution}};
    } else {
        out["sublevel"] = "skipped (d > 3)";
    }
    try {
        out["level_set_min_gradient"] = level_set_min_gradient(land, a, b.h, domain, samples, seed);
    } catch (const std::exception& e) {
        out["level_set_min_gradient"] = std::string("failed: ") + e.what();
    }
    const FlowStabilityReport fs = check_flow_stability(land, a, domain, 64, 50.0, 1e-3, seed);
    out["flow_stability"] = {{"pass", fs.pass}, {"starts", fs.starts}, {"failures", fs.failures.size()}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_bvp(const std::string& landscape, double lo, double hi, double sigma, std::size_t grid,
            std::optional<double> x0, const std::string& out_path) {
    const Landscape land = make_preset(landscape, 1);
    const BvpSolution sol = bvp_mean_exit_1d(land, lo, hi, sigma, grid);
    if (!out_path.empty())
        write_file(out_path, [&](std::ostream& os) {
            os << "x,u\n";
            os.precision(17);
            for (std::size_t i = 0; i < sol.x.size(); ++i) os << sol.x[i] << ',' << sol.u[i] << '\n';
        });
    const double at = x0 ? *x0 : 0.5 * (lo + hi);
    double umax = 0.0;
    for (double u : sol.u) umax = std::max(umax, u);
    std::cout << json{{"x0", at}, {"mean_exit", sol.at(at)}, {"max_mean_exit", umax}, {"grid", grid}}.dump(2) << '\n';
    return 0;
}

int cmd_psi(const Common& c, const std::vector<double>& x0_arg, double rho, double eta_frac, double t_a, double eps,
            std::size_t nodes, const std::string& out_path) {
    const Landscape land = c.land();
    const Domain domain = domain_or_default(c.domain, land.dim());
    const Vec a = vec_arg(c.attractor, land.dim(), "--attractor");
    Vec x0 = a;
    if (!x0_arg.empty()) x0 = vec_arg(x0_arg, land.dim(), "--x0");
    PsiOptions opt;
    opt.eps = eps;
    opt.minimize.nodes = nodes;
    const double h = compute_H(land, domain, a, opt.n_boundary, opt.seed).h;
    const PsiResult r = build_psi(ExtendedInit::at(x0), land, domain, a, rho, eta_frac * h, t_a, opt);
    if (!out_path.empty()) write_file(out_path, [&](std::ostream& os) { r.path.write_csv(os); });
    std::cout << json{{"H", r.h},
                      {"eta", eta_frac * h},
                      {"z_star", vec_to_json(r.z_star)},
                      {"T_a", r.t_a},
                      {"min_action_value", r.min_action_value},
                      {"action_full", r.action},
                      {"within_margin", r.within_margin},
                      {"max_w2", r.max_w2},
                      {"w2_limit", (1.0 + eps) * rho},
                      {"trace_ok", r.trace_ok},
                      {"duration", r.path.duration()},
                      {"points", r.path.size()}}
                     .dump(2)
              << '\n';
    return r.within_margin && r.trace_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sidlab: exit problems for self-interacting diffusions"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate one trajectory until exit or the horizon");
    Common sim_c;
    sim_c.add(sim);
    std::vector<double> sim_x0;
    std::string sim_t0, path_out, trace_out;
    double sim_sigma = 0.5, sim_dt = 1e-3, sim_horizon = 100.0, sim_eps = 0.5;
    std::uint64_t sim_seed = 0;
    std::size_t path_every = 1, sim_cap = OccupationMeasure::kDefaultCap;
    std::optional<double> sim_rho;
    bool no_domain = false;
    sim->add_option("--x0", sim_x0, "start point (default: origin)");
    sim->add_option("--t0", sim_t0, "prior weight (only 0 is supported here)");
    sim->add_option("-s,--sigma", sim_sigma, "noise level (0 gives the noiseless flow)")->capture_default_str()->check(CLI::NonNegativeNumber);
    sim->add_option("--dt", sim_dt, "time step")->capture_default_str()->check(CLI::PositiveNumber);
    sim->add_option("-T,--horizon", sim_horizon, "time horizon")->capture_default_str();
    sim->add_option("--seed", sim_seed, "RNG seed")->required();
    sim->add_flag("--no-domain", no_domain, "ignore the domain (run to the horizon)");
    sim->add_option("--path-every", path_every, "keep every k-th point")->capture_default_str();
    sim->add_option("--path-out", path_out, "write the path as CSV");
    sim->add_option("--trace-out", trace_out, "write the W2(mu_t, delta_a) trace as CSV");
    sim->add_option("--rho", sim_rho, "rho for the gamma monitor (default 0.1 * inradius)");
    sim->add_option("--eps", sim_eps, "epsilon for the gamma monitor")->capture_default_str();
    sim->add_option("--cap", sim_cap, "atom cap of the occupation measure")->capture_default_str();

    // campaign
    auto* camp = app.add_subcommand("campaign", "run an exit-time campaign from a JSON config");
    std::string config_path;
    std::uint64_t camp_seed = 0;
    CampaignOverrides ov;
    bool quiet = false;
    camp->add_option("-c,--config", config_path, "config file or inline JSON")->required();
    camp->add_option("--seed", camp_seed, "master seed (replaces the config value)")->required();
    camp->add_option("-j,--threads", ov.threads, "worker threads (0 = hardware)");
    camp->add_option("-n,--trajectories", ov.trajectories, "trajectories per sigma");
    camp->add_option("--sigma", ov.sigmas, "sigma grid");
    camp->add_option("-l,--landscape", ov.landscape, "landscape preset");
    camp->add_option("--dt", ov.dt, "time step");
    camp->add_option("--horizon-cap", ov.horizon_cap, "horizon cap");
    camp->add_option("--H", ov.h, "known barrier H (skips compute_H)");
    camp->add_option("--rho", ov.rho, "rho");
    camp->add_option("--eps", ov.eps, "epsilon");
    camp->add_option("--t-st", ov.t_st, "stabilization time T_st");
    camp->add_option("--measure-cap", ov.measure_cap, "atom cap of the occupation measure");
    camp->add_option("--snapshot-every", ov.snapshot_every, "steps between W2 snapshots");
    camp->add_option("-o,--output", ov.output, "directory for records.csv and summary.json");
    camp->add_flag("-q,--quiet", quiet, "no progress on stderr");

    // barrier
    auto* bar = app.add_subcommand("barrier", "compute H = min over the boundary of W_a - W_a(a)");
    Common bar_c;
    bar_c.add(bar);
    std::size_t n_boundary = 256, nodes = 3201;
    std::uint64_t bar_seed = 1;
    bool cross = false;
    bar->add_option("-n,--boundary-samples", n_boundary, "boundary samples")->capture_default_str();
    bar->add_option("--seed", bar_seed, "sampling seed")->capture_default_str();
    bar->add_flag("--cross-check", cross, "also minimize the effective action from a to z*");
    bar->add_option("--nodes", nodes, "path nodes for the cross-check")->capture_default_str();

    // check
    auto* chk = app.add_subcommand("check", "report assumption diagnostics");
    Common chk_c;
    chk_c.add(chk);
    double delta_x = 0.5, delta_mu = 0.5, resolution = 0.02;
    std::size_t samples = 2000;
    std::uint64_t chk_seed = 1;
    chk->add_option("--delta-x", delta_x, "strong attraction: state radius")->capture_default_str();
    chk->add_option("--delta-mu", delta_mu, "strong attraction: W2 radius")->capture_default_str();
    chk->add_option("--samples", samples, "samples per check")->capture_default_str();
    chk->add_option("--seed", chk_seed, "sampling seed")->capture_default_str();
    chk->add_option("--resolution", resolution, "grid resolution of the sublevel check")->capture_default_str();

    // bvp
    auto* bvp = app.add_subcommand("bvp", "solve (sigma^2/2) u'' - V' u' = -1 on (lo, hi), u = 0 at the ends");
    std::string bvp_land = "ou", bvp_out;
    double lo = -1.0, hi = 1.0, bvp_sigma = 0.5;
    std::size_t grid = 4000;
    std::optional<double> bvp_x0;
    bvp->add_option("-l,--landscape", bvp_land, "landscape preset (F must vanish)")->capture_default_str();
    bvp->add_option("--lo", lo, "left end")->capture_default_str();
    bvp->add_option("--hi", hi, "right end")->capture_default_str();
    bvp->add_option("-s,--sigma", bvp_sigma, "noise level")->capture_default_str();
    bvp->add_option("--grid", grid, "grid intervals")->capture_default_str();
    bvp->add_option("--x0", bvp_x0, "evaluation point (default: midpoint)");
    bvp->add_option("--out", bvp_out, "write u on the grid as CSV");

    // psi
    auto* psi = app.add_subcommand("psi", "build the glued exit path psi and score its action");
    Common psi_c;
    psi_c.add(psi);
    std::vector<double> psi_x0;
    double rho = 0.05, eta = 0.1, t_a = 50.0, psi_eps = 0.5;
    std::size_t psi_nodes = 3201;
    std::string psi_out;
    psi->add_option("--x0", psi_x0, "start point (default: the attractor)");
    psi->add_option("--rho", rho, "radius rho")->capture_default_str();
    psi->add_option("--eta", eta, "margin as a fraction of H")->capture_default_str();
    psi->add_option("--t-a", t_a, "initial wait at a")->capture_default_str();
    psi->add_option("--eps", psi_eps, "epsilon")->capture_default_str();
    psi->add_option("--nodes", psi_nodes, "nodes of the minimum-action piece")->capture_default_str();
    psi->add_option("--out", psi_out, "write the path as CSV");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim)
            return cmd_simulate(sim_c, sim_x0, sim_t0, sim_sigma, sim_dt, sim_horizon, sim_seed, no_domain, path_every,
                                path_out, trace_out, sim_rho, sim_eps, sim_cap);
        if (*camp) return cmd_campaign(config_path, camp_seed, ov, quiet);
        if (*bar) return cmd_barrier(bar_c, n_boundary, bar_seed, cross, nodes);
        if (*chk) return cmd_check(chk_c, delta_x, delta_mu, samples, chk_seed, resolution);
        if (*bvp) return cmd_bvp(bvp_land, lo, hi, bvp_sigma, grid, bvp_x0, bvp_out);
        if (*psi) return cmd_psi(psi_c, psi_x0, rho, eta, t_a, psi_eps, psi_nodes, psi_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
