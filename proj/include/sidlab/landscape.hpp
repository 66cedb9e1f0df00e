#pragma once

// Potential pairs (V, F): confinement V on R^d and interaction F on R^d.
// F is always stored normalized so that F(0) = 0.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sidlab/vec.hpp"

namespace sidlab {

struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    // Optional; central differences of `gradient` are used when absent.
    std::function<Mat(const Vec&)> hessian;
};

// Where an assumption on the landscape is known to hold.
struct Validity {
    enum class Scope { kGlobal, kOnBall, kUnknown, kViolated };
    Scope scope = Scope::kUnknown;
    double constant = 0.0;  // the Lipschitz constant or gradient bound
    double radius = 0.0;    // for kOnBall
    std::string note;

    static Validity global(double c) { return {Scope::kGlobal, c, 0.0, {}}; }
    static Validity on_ball(double c, double r, std::string note = {}) {
        return {Scope::kOnBall, c, r, std::move(note)};
    }
    static Validity unknown(std::string note = {}) { return {Scope::kUnknown, 0.0, 0.0, std::move(note)}; }
    static Validity violated(std::string note = {}) { return {Scope::kViolated, 0.0, 0.0, std::move(note)}; }

    std::string describe() const {
        std::ostringstream os;
        switch (scope) {
            case Scope::kGlobal: os << "global, constant " << constant; break;
            case Scope::kOnBall: os << "on ball |x| <= " << radius << ", constant " << constant; break;
            case Scope::kUnknown: os << "unverified"; break;
            case Scope::kViolated: os << "violated"; break;
        }
        if (!note.empty()) os << " (" << note << ")";
        return os.str();
    }
};

// Which regularity assumptions a landscape satisfies.
struct AssumptionCatalog {
    bool c2 = true;
    Validity grad_v_lipschitz;
    Validity grad_f_lipschitz;
    Validity grad_f_bounded;
    // Growth at infinity (Delta V <= alpha V etc.) is recorded, not verified.
    std::string confinement_at_infinity = "unverified";
};

class Landscape {
public:
    Landscape(std::size_t dim, ScalarField confinement, ScalarField interaction, std::string name = "custom")
        : dim_(dim), confinement_(std::move(confinement)), interaction_(std::move(interaction)), name_(std::move(name)) {
        if (dim == 0 || dim > kMaxDim) throw std::invalid_argument("landscape dimension out of range");
        if (!confinement_.value || !confinement_.gradient || !interaction_.value || !interaction_.gradient)
            throw std::invalid_argument("landscape fields need value and gradient");
        // Additive constants in F do not change the dynamics; pin F(0) = 0.
        const double f0 = interaction_.value(Vec::zeros(dim));
        if (f0 != 0.0) {
            interaction_.value = [raw = interaction_.value, f0](const Vec& u) { return raw(u) - f0; };
        }
    }

    std::size_t dim() const { return dim_; }
    const std::string& name() const { return name_; }
    const ScalarField& confinement() const { return confinement_; }
    const ScalarField& interaction() const { return interaction_; }

    // (V(x), grad V(x))
    std::pair<double, Vec> potential_eval(const Vec& x) const {
        require_same_dim(x, dim_, "potential_eval");
        return {confinement_.value(x), confinement_.gradient(x)};
    }
    // (F(u), grad F(u))
    std::pair<double, Vec> interaction_eval(const Vec& u) const {
        require_same_dim(u, dim_, "interaction_eval");
        return {interaction_.value(u), interaction_.gradient(u)};
    }
    // W_a(x) = V(x) + F(x - a) - V(a) and its gradient.
    std::pair<double, Vec> effective_potential(const Vec& a, const Vec& x) const {
        require_same_dim(a, dim_, "effective_potential");
        require_same_dim(x, dim_, "effective_potential");
        const Vec u = x - a;
        return {confinement_.value(x) + interaction_.value(u) - confinement_.value(a),
                confinement_.gradient(x) + interaction_.gradient(u)};
    }

    double v(const Vec& x) const { return confinement_.value(x); }
    Vec grad_v(const Vec& x) const { return confinement_.gradient(x); }
    double f(const Vec& u) const { return interaction_.value(u); }
    Vec grad_f(const Vec& u) const { return interaction_.gradient(u); }

    Mat hess_v(const Vec& x) const { return confinement_.hessian ? confinement_.hessian(x) : fd_hessian(confinement_, x); }
    Mat hess_f(const Vec& u) const { return interaction_.hessian ? interaction_.hessian(u) : fd_hessian(interaction_, u); }

    // Set when grad F(u) = beta * u exactly (beta = 0 means F == 0). The occupation
    // measure convolution then depends only on the measure's mean.
    std::optional<double> linear_interaction_gradient() const { return linear_interaction_; }
    bool interaction_is_zero() const { return linear_interaction_ && *linear_interaction_ == 0.0; }
    // Set when grad V(x) = k * x exactly.
    std::optional<double> linear_confinement_gradient() const { return linear_confinement_; }

    const AssumptionCatalog& catalog() const { return catalog_; }
    std::optional<double> grad_v_lipschitz() const { return global_constant(catalog_.grad_v_lipschitz); }
    std::optional<double> grad_f_lipschitz() const { return global_constant(catalog_.grad_f_lipschitz); }
    std::optional<double> grad_f_bounded() const { return global_constant(catalog_.grad_f_bounded); }

    Landscape& set_catalog(AssumptionCatalog catalog) {
        catalog_ = std::move(catalog);
        return *this;
    }
    Landscape& set_linear_interaction_gradient(std::optional<double> beta) {
        linear_interaction_ = beta;
        return *this;
    }
    Landscape& set_linear_confinement_gradient(std::optional<double> k) {
        linear_confinement_ = k;
        return *this;
    }

    // Same landscape with V replaced by V + c.
    Landscape with_confinement_offset(double c) const {
        Landscape out = *this;
        out.confinement_.value = [raw = confinement_.value, c](const Vec& x) { return raw(x) + c; };
        return out;
    }

private:
    static std::optional<double> global_constant(const Validity& v) {
        if (v.scope == Validity::Scope::kGlobal) return v.constant;
        return std::nullopt;
    }

    static Mat fd_hessian(const ScalarField& field, const Vec& x) {
        const std::size_t d = x.dim();
        Mat h(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double step = 1e-5 * std::max(1.0, std::abs(x[j]));
            Vec xp = x, xm = x;
            xp[j] += step;
            xm[j] -= step;
            const Vec col = (field.gradient(xp) - field.gradient(xm)) / (2.0 * step);
            for (std::size_t i = 0; i < d; ++i) h(i, j) = col[i];
        }
        return h;
    }

    std::size_t dim_;
    ScalarField confinement_;
    ScalarField interaction_;
    std::string name_;
    std::optional<double> linear_interaction_;
    std::optional<double> linear_confinement_;
    AssumptionCatalog catalog_;
};

// ---------------------------------------------------------------------------
// Preset building blocks

namespace fields {

inline ScalarField zero(std::size_t dim) {
    return {[](const Vec&) { return 0.0; }, [dim](const Vec&) { return Vec::zeros(dim); },
            [dim](const Vec&) { return Mat(dim); }};
}

// k |x|^2 / 2
inline ScalarField quadratic(std::size_t dim, double k) {
    return {[k](const Vec& x) { return 0.5 * k * norm2(x); }, [k](const Vec& x) { return k * x; },
            [dim, k](const Vec&) { return Mat::identity(dim, k); }};
}

// (x^2 - 1)^2 / 4 in one dimension.
inline ScalarField double_well() {
    return {[](const Vec& x) {
                const double s = x[0] * x[0] - 1.0;
                return 0.25 * s * s;
            },
            [](const Vec& x) { return Vec{x[0] * x[0] * x[0] - x[0]}; },
            [](const Vec& x) {
                Mat h(1);
                h(0, 0) = 3.0 * x[0] * x[0] - 1.0;
                return h;
            }};
}

// sign * gamma * exp(-|u|^2 / 2), shifted so the value at 0 is 0.
// sign = -1 is attractive (well at 0), sign = +1 repulsive.
inline ScalarField gaussian(std::size_t dim, double gamma, double sign) {
    const double c = sign * gamma;
    return {[c](const Vec& u) { return c * (std::exp(-0.5 * norm2(u)) - 1.0); },
            [c](const Vec& u) { return (-c * std::exp(-0.5 * norm2(u))) * u; },
            [c, dim](const Vec& u) {
                const double e = std::exp(-0.5 * norm2(u));
                Mat h = Mat::identity(dim, -c * e);
                h += Mat::outer(u, u) * (c * e);
                return h;
            }};
}

}  // namespace fields

// Parses preset names such as "ou", "dw", "quad-attract(1)", "ou+gauss-repel(10)".
// Terms are joined with '+'. Confinement terms: ou, dw, flat. Interaction terms:
// quad-attract(b), gauss-attract(g), gauss-repel(g). Missing confinement defaults
// to "ou"; missing interaction defaults to F == 0.
inline Landscape make_preset(const std::string& spec, std::size_t dim = 1) {
    struct Term {
        std::string name;
        std::optional<double> param;
    };
    std::vector<Term> terms;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const std::size_t plus = spec.find('+', start);
        std::string tok = spec.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (tok.empty()) throw std::invalid_argument("empty term in landscape preset '" + spec + "'");
        Term t;
        const auto open = tok.find('(');
        if (open != std::string::npos) {
            const auto close = tok.find(')', open);
            if (close == std::string::npos || close != tok.size() - 1)
                throw std::invalid_argument("malformed preset term '" + tok + "'");
            t.name = tok.substr(0, open);
            try {
                t.param = std::stod(tok.substr(open + 1, close - open - 1));
            } catch (const std::exception&) {
                throw std::invalid_argument("bad parameter in preset term '" + tok + "'");
            }
        } else {
            t.name = tok;
        }
        terms.push_back(std::move(t));
        if (plus == std::string::npos) break;
        start = plus + 1;
    }

    std::optional<ScalarField> v;
    std::optional<ScalarField> f;
    AssumptionCatalog cat;
    std::optional<double> linear_beta = 0.0;
    std::optional<double> linear_k;
    cat.grad_f_lipschitz = Validity::global(0.0);
    cat.grad_f_bounded = Validity::global(0.0);

    auto set_v = [&](ScalarField field) {
        if (v) throw std::invalid_argument("preset '" + spec + "' has two confinement terms");
        v = std::move(field);
    };
    auto set_f = [&](ScalarField field) {
        if (f) throw std::invalid_argument("preset '" + spec + "' has two interaction terms");
        f = std::move(field);
    };
    auto need_param = [&](const Term& t) {
        if (!t.param) throw std::invalid_argument("preset term '" + t.name + "' needs a parameter");
        if (!(*t.param > 0.0) || !std::isfinite(*t.param))
            throw std::invalid_argument("preset term '" + t.name + "' needs a positive parameter");
        return *t.param;
    };

    for (const Term& t : terms) {
        if (t.name == "ou") {
            set_v(fields::quadratic(dim, 1.0));
            linear_k = 1.0;
            cat.grad_v_lipschitz = Validity::global(1.0);
            cat.confinement_at_infinity = "holds (quadratic)";
        } else if (t.name == "flat") {
            set_v(fields::zero(dim));
            linear_k = 0.0;
            cat.grad_v_lipschitz = Validity::global(0.0);
            cat.confinement_at_infinity = "violated (V constant)";
        } else if (t.name == "dw") {
            if (dim != 1) throw std::invalid_argument("preset 'dw' is one-dimensional");
            set_v(fields::double_well());
            // |V''| = |3x^2 - 1| is unbounded; on |x| <= 2 it is at most 11.
            cat.grad_v_lipschitz = Validity::on_ball(11.0, 2.0, "max |3x^2-1| on [-2,2]");
            cat.confinement_at_infinity = "holds (quartic), not verified by sampling";
        } else if (t.name == "quad-attract") {
            const double beta = need_param(t);
            set_f(fields::quadratic(dim, beta));
            linear_beta = beta;
            cat.grad_f_lipschitz = Validity::global(beta);
            cat.grad_f_bounded = Validity::on_ball(beta * 4.0, 4.0, "|grad F(u)| = beta |u|, unbounded globally");
        } else if (t.name == "gauss-attract" || t.name == "gauss-repel") {
            const double gamma = need_param(t);
            set_f(fields::gaussian(dim, gamma, t.name == "gauss-attract" ? -1.0 : 1.0));
            linear_beta.reset();
            cat.grad_f_lipschitz = Validity::global(gamma);
            cat.grad_f_bounded = Validity::global(gamma * std::exp(-0.5));
        } else {
            throw std::invalid_argument("unknown landscape preset term '" + t.name + "'");
        }
    }
    if (!v) {
        v = fields::quadratic(dim, 1.0);
        linear_k = 1.0;
        cat.grad_v_lipschitz = Validity::global(1.0);
        cat.confinement_at_infinity = "holds (quadratic)";
    }
    if (!f) f = fields::zero(dim);

    Landscape out(dim, std::move(*v), std::move(*f), spec);
    out.set_catalog(std::move(cat));
    out.set_linear_interaction_gradient(linear_beta);
    out.set_linear_confinement_gradient(linear_k);
    return out;
}

// ---------------------------------------------------------------------------
// Assumption checkers

struct Box {
    Vec lo;
    Vec hi;

    std::size_t dim() const { return lo.dim(); }
    bool degenerate() const {
        for (std::size_t i = 0; i < lo.dim(); ++i)
            if (!(hi[i] > lo[i])) return true;
        return false;
    }
    double diameter() const { return dist(lo, hi); }
};

// Sampled lower bound on the Lipschitz constant of `field` over `region`.
// Half of the pairs are short perturbation pairs (local slope), half are
// independent uniform pairs (secant slope).
inline double estimate_lipschitz(const std::function<Vec(const Vec&)>& field, const Box& region,
                                 std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("estimate_lipschitz: need at least 2 samples");
    if (region.lo.dim() != region.hi.dim() || region.degenerate())
        throw std::invalid_argument("estimate_lipschitz: degenerate region");
    const std::size_t d = region.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&] {
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = region.lo[i] + (region.hi[i] - region.lo[i]) * unif(rng);
        return x;
    };
    const double h = 1e-6 * region.diameter();
    double best = 0.0;
    Vec prev = draw();
    for (std::size_t k = 1; k < n_samples; ++k) {
        const Vec x = draw();
        Vec y;
        if (k % 2 == 0) {
            y = prev;
        } else {
            // Perturb inward along a random axis-aligned direction.
            y = x;
            const std::size_t axis = static_cast<std::size_t>(unif(rng) * static_cast<double>(d)) % d;
            const double mid = 0.5 * (region.lo[axis] + region.hi[axis]);
            y[axis] += (x[axis] > mid ? -h : h);
        }
        const double sep = dist(x, y);
        if (sep > 0.0) best = std::max(best, norm(field(x) - field(y)) / sep);
        prev = x;
    }
    return best;
}

struct StrongAttractionResult {
    double k_est = 0.0;
    bool pass = false;
    Vec worst_x;
    std::vector<std::pair<Vec, double>> worst_measure;
};

// Where test points x are drawn in the strong-attraction check.
enum class AttractionSampling {
    kBall,    // x uniform in B_dx(a) \ {a}, the literal quantifier
    kSphere,  // x on S_dx(a), the shell that controls invariance of the ball
};

// Samples the Rayleigh quotient <grad V(x) + grad F * mu(x), x - a> / |x - a|^2 over
// x and over Dirac / two-atom measures mu within W2 distance delta_mu of delta_a.
// Only a necessary-condition sampler: the W2 ball is not exhausted.
inline StrongAttractionResult check_strong_attraction(const Landscape& land, const Vec& a, double delta_x,
                                                      double delta_mu, std::size_t n_samples, std::uint64_t seed,
                                                      AttractionSampling mode = AttractionSampling::kBall) {
    if (!(delta_x > 0.0) || !(delta_mu > 0.0))
        throw std::invalid_argument("check_strong_attraction: radii must be positive");
    require_same_dim(a, land.dim(), "check_strong_attraction");
    const std::size_t d = land.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto direction = [&] {
        Vec u(d);
        double n = 0.0;
        while (n < 1e-12) {
            for (std::size_t i = 0; i < d; ++i) u[i] = gauss(rng);
            n = norm(u);
        }
        return u / n;
    };
    // radius of a uniform point in a d-ball
    auto ball_radius = [&](double r) { return r * std::pow(unif(rng), 1.0 / static_cast<double>(d)); };

    StrongAttractionResult res;
    res.k_est = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& x, const std::vector<std::pair<Vec, double>>& mu) {
        Vec drift = land.grad_v(x);
        for (const auto& [z, w] : mu) drift.axpy(w, land.grad_f(x - z));
        const Vec off = x - a;
        const double q = dot(drift, off) / norm2(off);
        if (q < res.k_est) {
            res.k_est = q;
            res.worst_x = x;
            res.worst_measure = mu;
        }
    };

    for (std::size_t k = 0; k < n_samples; ++k) {
        double r = mode == AttractionSampling::kSphere ? delta_x : ball_radius(delta_x);
        if (r <= 0.0) r = delta_x * 1e-6;
        const Vec x = a + r * direction();

        consider(x, {{a, 1.0}});
        // Dirac at distance <= delta_mu; include the extreme radius every other draw.
        const double ry = (k % 2 == 0) ? delta_mu : ball_radius(delta_mu);
        consider(x, {{a + ry * direction(), 1.0}});
        // Two-atom mixture with w r1^2 + (1-w) r2^2 <= delta_mu^2.
        const double w = unif(rng);
        const double budget = delta_mu * delta_mu * unif(rng);
        const double share = unif(rng);
        const double r1 = w > 0.0 ? std::sqrt(budget * share / w) : 0.0;
        const double r2 = w < 1.0 ? std::sqrt(budget * (1.0 - share) / (1.0 - w)) : 0.0;
        consider(x, {{a + r1 * direction(), w}, {a + r2 * direction(), 1.0 - w}});
    }
    res.pass = res.k_est > 0.0;
    return res;
}

// V-bar, F-bar: equal to the input on |x| <= r_mod, blended over the shell
// [r_mod, r_mod + shell] with a C^1 smoothstep into the quadratic cap k|x|^2/2.
// Outside r_mod + shell the gradient is exactly k x, so |grad| <= k |x|.
struct ClampOptions {
    double cap_stiffness_v = 1.0;
    double cap_stiffness_f = 1.0;
};

namespace detail {

inline ScalarField clamp_field(const ScalarField& in, double r_mod, double shell, double k) {
    // s(r) = 1 inside, 0 outside, 1 - (3t^2 - 2t^3) on the shell.
    auto weight = [r_mod, shell](double r, double& ds) {
        if (r <= r_mod) {
            ds = 0.0;
            return 1.0;
        }
        if (r >= r_mod + shell) {
            ds = 0.0;
            return 0.0;
        }
        const double t = (r - r_mod) / shell;
        ds = -(6.0 * t - 6.0 * t * t) / shell;
        return 1.0 - (3.0 * t * t - 2.0 * t * t * t);
    };
    ScalarField out;
    out.value = [in, weight, k](const Vec& x) {
        double ds = 0.0;
        const double s = weight(norm(x), ds);
        if (s == 1.0) return in.value(x);
        const double cap = 0.5 * k * norm2(x);
        if (s == 0.0) return cap;
        return s * in.value(x) + (1.0 - s) * cap;
    };
    out.gradient = [in, weight, k](const Vec& x) {
        const double r = norm(x);
        double ds = 0.0;
        const double s = weight(r, ds);
        if (s == 1.0) return in.gradient(x);
        if (s == 0.0) return k * x;
        const double diff = in.value(x) - 0.5 * k * norm2(x);
        Vec g = s * in.gradient(x) + (1.0 - s) * k * x;
        g.axpy(diff * ds / r, x);
        return g;
    };
    return out;
}

}  // namespace detail

inline Landscape clamp_landscape(const Landscape& land, double r_mod, double shell, ClampOptions opts = {}) {
    if (!(r_mod > 0.0) || !(shell > 0.0)) throw std::invalid_argument("clamp_landscape: radius and shell must be positive");
    const std::size_t d = land.dim();
    ScalarField v = detail::clamp_field(land.confinement(), r_mod, shell, opts.cap_stiffness_v);
    // F == 0 is already globally Lipschitz and stays zero.
    ScalarField f = land.interaction_is_zero() ? fields::zero(d)
                                               : detail::clamp_field(land.interaction(), r_mod, shell, opts.cap_stiffness_f);
    Landscape out(d, std::move(v), std::move(f), land.name() + "|clamp(" + std::to_string(r_mod) + ")");
    AssumptionCatalog cat = land.catalog();
    cat.c2 = false;  // C^1 blend
    cat.grad_v_lipschitz = Validity::unknown("globally Lipschitz by construction; constant not computed");
    if (!land.interaction_is_zero())
        cat.grad_f_lipschitz = Validity::unknown("globally Lipschitz by construction; constant not computed");
    if (!land.interaction_is_zero()) cat.grad_f_bounded = Validity::violated("cap gradient grows like k|u|");
    cat.confinement_at_infinity = "holds (quadratic cap)";
    out.set_catalog(std::move(cat));
    if (land.interaction_is_zero()) out.set_linear_interaction_gradient(0.0);
    return out;
}

}  // namespace sidlab
