#pragma once

// Occupation measures of self-interacting paths and the extended initial
// condition (t0, mu0, x0).
//
// The measure at path time t is
//     mu_t = t0/(t0+t) mu0 + 1/(t0+t) * int_0^t delta_{X_s} ds,
// with the time integral stored as atoms (x_k, dt). With t0 = +inf the measure is
// frozen at mu0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sidlab/landscape.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

struct Atom {
    Vec x;
    double w = 0.0;
};

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

class ExtendedInit {
public:
    ExtendedInit() = default;

    // Weights are normalized to sum to one.
    static ExtendedInit make(double t0, std::vector<Atom> mu0, const Vec& x0) {
        if (!(t0 >= 0.0)) throw std::invalid_argument("make_init: t0 must be >= 0");
        if (mu0.empty() && t0 > 0.0) throw std::invalid_argument("make_init: empty prior measure with t0 > 0");
        double total = 0.0;
        for (const Atom& a : mu0) {
            if (!(a.w > 0.0) || !std::isfinite(a.w)) throw std::invalid_argument("make_init: atom weights must be positive");
            require_same_dim(a.x, x0.dim(), "make_init");
            total += a.w;
        }
        for (Atom& a : mu0) a.w /= total;
        ExtendedInit out;
        out.t0_ = t0;
        out.mu0_ = std::move(mu0);
        out.x0_ = x0;
        return out;
    }
    // Plain start at x0: no past.
    static ExtendedInit at(const Vec& x0) { return make(0.0, {}, x0); }
    // Frozen drift grad F * mu0 (t0 = +inf).
    static ExtendedInit frozen(std::vector<Atom> mu0, const Vec& x0) { return make(kInfiniteTime, std::move(mu0), x0); }

    double time() const { return t0_; }
    const std::vector<Atom>& measure() const { return mu0_; }
    const Vec& point() const { return x0_; }
    std::size_t dim() const { return x0_.dim(); }
    bool frozen() const { return std::isinf(t0_); }

private:
    double t0_ = 0.0;
    std::vector<Atom> mu0_;
    Vec x0_;
};

inline ExtendedInit make_init(double t0, std::vector<Atom> mu0, const Vec& x0) {
    return ExtendedInit::make(t0, std::move(mu0), x0);
}

class OccupationMeasure {
public:
    static constexpr std::size_t kDefaultCap = 4096;

    OccupationMeasure() = default;

    // `store_atoms = false` keeps only the exact moments; valid when the
    // interaction gradient is linear (or zero).
    explicit OccupationMeasure(const ExtendedInit& init, std::size_t cap = kDefaultCap, bool store_atoms = true)
        : dim_(init.dim()),
          prior_weight_(init.time()),
          prior_atoms_(init.measure()),
          cap_(cap),
          store_atoms_(store_atoms),
          ref_(init.point()),
          prior_m1_(Vec::zeros(init.dim())),
          path_m1_(Vec::zeros(init.dim())) {
        if (cap_ < 16) throw std::invalid_argument("occupation measure cap must be >= 16");
        for (const Atom& a : prior_atoms_) {
            const Vec off = a.x - ref_;
            prior_m1_.axpy(a.w, off);
            prior_m2_ += a.w * norm2(off);
        }
    }

    std::size_t dim() const { return dim_; }
    double prior_weight() const { return prior_weight_; }
    double elapsed() const { return elapsed_; }
    std::size_t cap() const { return cap_; }
    bool frozen() const { return std::isinf(prior_weight_); }
    bool stores_atoms() const { return store_atoms_; }
    const std::vector<Atom>& prior_atoms() const { return prior_atoms_; }
    // Path atoms carry their raw time mass dt (not normalized).
    const std::vector<Atom>& path_atoms() const { return path_atoms_; }
    std::size_t path_pushes() const { return pushes_; }

    bool empty() const { return (prior_weight_ == 0.0 || prior_atoms_.empty()) && elapsed_ == 0.0; }

    // Normalized mass of the prior block, t0 / (t0 + t).
    double prior_fraction() const {
        if (frozen()) return 1.0;
        const double total = prior_weight_ + elapsed_;
        return total > 0.0 ? prior_weight_ / total : 0.0;
    }
    // Normalizer applied to raw path masses, 1 / (t0 + t).
    double path_scale() const {
        if (frozen()) return 0.0;
        const double total = prior_weight_ + elapsed_;
        return total > 0.0 ? 1.0 / total : 0.0;
    }

    // Appends (x, dt). With t0 = +inf the effective measure is unchanged.
    void push(const Vec& x, double dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("push_sample: dt must be positive");
        if (frozen()) return;
        elapsed_ += dt;
        ++pushes_;
        double r2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double off = x[i] - ref_[i];
            path_m1_[i] += dt * off;
            r2 += off * off;
        }
        path_m2_ += dt * r2;
        if (!store_atoms_) return;
        path_atoms_.push_back({x, dt});
        if (path_atoms_.size() > cap_) thin_to(cap_ - cap_ / 4);
    }

    // Merges time-adjacent path atoms into weight-preserving barycentres until at
    // most `cap` remain. Each round pairs (0,1), (2,3), ... and merges the pairs
    // whose merge loses the least second moment first.
    void thin_to(std::size_t cap) {
        if (cap < 16) throw std::invalid_argument("thin: cap must be >= 16");
        while (path_atoms_.size() > cap) {
            const std::size_t n = path_atoms_.size();
            const std::size_t pairs = n / 2;
            const std::size_t need = std::min(pairs, n - cap);
            std::vector<std::pair<double, std::size_t>> cost(pairs);
            for (std::size_t i = 0; i < pairs; ++i) {
                const Atom& p = path_atoms_[2 * i];
                const Atom& q = path_atoms_[2 * i + 1];
                cost[i] = {p.w * q.w / (p.w + q.w) * norm2(p.x - q.x), i};
            }
            if (need < pairs) std::nth_element(cost.begin(), cost.begin() + static_cast<std::ptrdiff_t>(need), cost.end());
            std::vector<char> merge(pairs, 0);
            for (std::size_t k = 0; k < need; ++k) merge[cost[k].second] = 1;
            std::vector<Atom> next;
            next.reserve(n - need);
            for (std::size_t i = 0; i < pairs; ++i) {
                const Atom& p = path_atoms_[2 * i];
                const Atom& q = path_atoms_[2 * i + 1];
                if (merge[i]) {
                    const double w = p.w + q.w;
                    next.push_back({(p.w / w) * p.x + (q.w / w) * q.x, w});
                } else {
                    next.push_back(p);
                    next.push_back(q);
                }
            }
            if (n % 2) next.push_back(path_atoms_.back());
            path_atoms_ = std::move(next);
        }
    }

    // Normalized atoms of both blocks.
    std::vector<Atom> atoms() const {
        require_atoms("atoms");
        std::vector<Atom> out;
        const double pf = prior_fraction();
        if (pf > 0.0)
            for (const Atom& a : prior_atoms_) out.push_back({a.x, a.w * pf});
        const double ps = path_scale();
        if (ps > 0.0)
            for (const Atom& a : path_atoms_) out.push_back({a.x, a.w * ps});
        return out;
    }

    double total_mass() const {
        if (empty()) return 0.0;
        double m = 0.0;
        const double pf = prior_fraction();
        if (pf > 0.0)
            for (const Atom& a : prior_atoms_) m += a.w * pf;
        const double ps = path_scale();
        if (store_atoms_)
            for (const Atom& a : path_atoms_) m += a.w * ps;
        else
            m += elapsed_ * ps;
        return m;
    }

    Vec mean() const {
        if (empty()) throw std::logic_error("mean of an empty occupation measure");
        Vec m = ref_;
        if (frozen()) return m += prior_m1_;
        const double inv = 1.0 / (prior_weight_ + elapsed_);
        const double pw = prior_atoms_.empty() ? 0.0 : prior_weight_;
        for (std::size_t i = 0; i < dim_; ++i) m[i] += (pw * prior_m1_[i] + path_m1_[i]) * inv;
        return m;
    }

    // grad F * mu (x). Before any mass exists the drift is grad F(0) = 0.
    Vec interaction_drift(const Landscape& land, const Vec& x) const {
        if (empty()) return Vec::zeros(dim_);
        if (const auto beta = land.linear_interaction_gradient()) {
            if (*beta == 0.0) return Vec::zeros(dim_);
            return *beta * (x - mean());
        }
        require_atoms("interaction_drift");
        Vec drift = Vec::zeros(dim_);
        const double pf = prior_fraction();
        if (pf > 0.0)
            for (const Atom& a : prior_atoms_) drift.axpy(a.w * pf, land.grad_f(x - a.x));
        const double ps = path_scale();
        if (ps > 0.0) {
            Vec acc = Vec::zeros(dim_);
            for (const Atom& a : path_atoms_) acc.axpy(a.w, land.grad_f(x - a.x));
            drift.axpy(ps, acc);
        }
        return drift;
    }

    // W2(mu, delta_a) = sqrt(int |z - a|^2 dmu): exact, from the running moments of
    // the full (unthinned) path measure.
    double w2_to_dirac(const Vec& a) const {
        if (empty()) throw std::logic_error("w2_to_dirac of an empty occupation measure");
        const Vec shift = a - ref_;
        const double s2 = norm2(shift);
        double m2 = 0.0;
        const double pf = prior_fraction();
        if (pf > 0.0) m2 += pf * (prior_m2_ - 2.0 * dot(shift, prior_m1_) + s2);
        const double ps = path_scale();
        if (ps > 0.0) m2 += ps * (path_m2_ - 2.0 * dot(shift, path_m1_) + elapsed_ * s2);
        return std::sqrt(std::max(0.0, m2));
    }

    // Same quantity computed from the stored atoms (reflects thinning).
    double w2_to_dirac_from_atoms(const Vec& a) const {
        double m2 = 0.0;
        for (const Atom& at : atoms()) m2 += at.w * norm2(at.x - a);
        return std::sqrt(m2);
    }

    // Freezes the current measure into an extended initial condition at point x.
    ExtendedInit as_init(const Vec& x) const {
        if (frozen()) return ExtendedInit::make(kInfiniteTime, prior_atoms_, x);
        if (empty()) return ExtendedInit::at(x);
        return ExtendedInit::make(prior_weight_ + elapsed_, atoms(), x);
    }

    // Rebuilds a measure from serialized parts (see io.hpp).
    // Exact path moments; atoms alone lose them once thinned.
    struct PathMoments {
        Vec ref;
        Vec m1;
        double m2 = 0.0;
        double elapsed = 0.0;
        std::size_t pushes = 0;
    };
    PathMoments path_moments() const { return {ref_, path_m1_, path_m2_, elapsed_, pushes_}; }

    // With `exact`, its moments replace the ones recomputed from the atoms and
    // its ref overrides `ref`.
    static OccupationMeasure restore(double prior_weight, std::vector<Atom> prior_atoms, std::vector<Atom> path_atoms,
                                     std::size_t cap, const Vec& ref,
                                     const std::optional<PathMoments>& exact = std::nullopt) {
        OccupationMeasure m(ExtendedInit::make(prior_weight, std::move(prior_atoms), exact ? exact->ref : ref), cap, true);
        for (const Atom& a : path_atoms) {
            if (!(a.w > 0.0)) throw std::invalid_argument("path atom with non-positive mass");
            m.elapsed_ += a.w;
            ++m.pushes_;
            const Vec off = a.x - m.ref_;
            m.path_m1_.axpy(a.w, off);
            m.path_m2_ += a.w * norm2(off);
            m.path_atoms_.push_back(a);
        }
        if (exact) {
            require_same_dim(exact->m1, m.dim_, "restore");
            m.path_m1_ = exact->m1;
            m.path_m2_ = exact->m2;
            m.elapsed_ = exact->elapsed;
            m.pushes_ = exact->pushes;
        }
        return m;
    }

private:
    void require_atoms(const char* what) const {
        if (!store_atoms_)
            throw std::logic_error(std::string(what) + ": occupation measure keeps moments only (linear interaction)");
    }

    std::size_t dim_ = 0;
    double prior_weight_ = 0.0;
    std::vector<Atom> prior_atoms_;
    std::vector<Atom> path_atoms_;
    double elapsed_ = 0.0;
    std::size_t pushes_ = 0;
    std::size_t cap_ = kDefaultCap;
    bool store_atoms_ = true;

    // Exact moments about ref_: prior ones normalized, path ones in raw time mass.
    Vec ref_;
    Vec prior_m1_;
    double prior_m2_ = 0.0;
    Vec path_m1_;
    double path_m2_ = 0.0;
};

inline OccupationMeasure thin(OccupationMeasure mu, std::size_t cap) {
    mu.thin_to(cap);
    return mu;
}

// Exact W2 between two one-dimensional discrete measures via the quantile coupling.
inline double w2_discrete_1d(std::vector<Atom> p, std::vector<Atom> q) {
    for (const auto* side : {&p, &q})
        for (const Atom& a : *side)
            if (a.x.dim() != 1) throw std::invalid_argument("w2_discrete_1d: atoms must be one-dimensional");
    auto total = [](const std::vector<Atom>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0, [](double s, const Atom& a) { return s + a.w; });
    };
    const double mp = total(p), mq = total(q);
    if (p.empty() || q.empty() || std::abs(mp - mq) > 1e-9 * std::max(mp, mq))
        throw std::invalid_argument("w2_discrete_1d: measures need equal, positive total mass");
    auto by_pos = [](const Atom& a, const Atom& b) { return a.x[0] < b.x[0]; };
    std::sort(p.begin(), p.end(), by_pos);
    std::sort(q.begin(), q.end(), by_pos);
    std::size_t i = 0, j = 0;
    double rp = p[0].w, rq = q[0].w, cost = 0.0;
    while (i < p.size() && j < q.size()) {
        const double m = std::min(rp, rq);
        const double gap = p[i].x[0] - q[j].x[0];
        cost += m * gap * gap;
        rp -= m;
        rq -= m;
        if (rp <= 1e-15 * mp) {
            if (++i < p.size()) rp = p[i].w;
        }
        if (rq <= 1e-15 * mq) {
            if (++j < q.size()) rq = q[j].w;
        }
    }
    return std::sqrt(cost / mp);
}

}  // namespace sidlab
