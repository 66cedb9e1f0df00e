#pragma once

// Exit domains G, boundary operations and the level-set / stability checkers
// that probe the domain assumptions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sidlab/landscape.hpp"
#include "sidlab/path.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

struct IntervalDomain {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct BallDomain {
    Vec center;
    double radius = 1.0;
};

struct BoxDomain {
    Vec lo;
    Vec hi;
};

// {g < 0} intersected with an open bounding box. `interior` must be a point from
// which every boundary point is visible along a ray (star-shaped sampling).
struct ImplicitDomain {
    std::string name;
    std::function<double(const Vec&)> g;
    std::function<Vec(const Vec&)> grad_g;
    Box bounds;
    Vec interior;
};

// Built-in level functions for the implicit variant.
namespace level_functions {

// sum (x_i / s)^4 - 1
inline ImplicitDomain quartic(std::size_t dim, double scale = 1.0) {
    ImplicitDomain d;
    d.name = "quartic";
    d.g = [scale](const Vec& x) {
        double s = 0.0;
        for (double c : x) {
            const double q = c / scale;
            s += q * q * q * q;
        }
        return s - 1.0;
    };
    d.grad_g = [scale](const Vec& x) {
        Vec g(x.dim());
        for (std::size_t i = 0; i < x.dim(); ++i) {
            const double q = x[i] / scale;
            g[i] = 4.0 * q * q * q / scale;
        }
        return g;
    };
    d.bounds = Box{Vec(dim, -1.5 * scale), Vec(dim, 1.5 * scale)};
    d.interior = Vec::zeros(dim);
    return d;
}

// sum (x_i / r_i)^2 - 1
inline ImplicitDomain ellipsoid(const Vec& radii) {
    ImplicitDomain d;
    d.name = "ellipsoid";
    d.g = [radii](const Vec& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.dim(); ++i) s += (x[i] / radii[i]) * (x[i] / radii[i]);
        return s - 1.0;
    };
    d.grad_g = [radii](const Vec& x) {
        Vec g(x.dim());
        for (std::size_t i = 0; i < x.dim(); ++i) g[i] = 2.0 * x[i] / (radii[i] * radii[i]);
        return g;
    };
    Vec lo(radii.dim()), hi(radii.dim());
    for (std::size_t i = 0; i < radii.dim(); ++i) {
        lo[i] = -1.25 * radii[i];
        hi[i] = 1.25 * radii[i];
    }
    d.bounds = Box{lo, hi};
    d.interior = Vec::zeros(radii.dim());
    return d;
}

}  // namespace level_functions

struct Crossing {
    double lambda = 0.0;  // fraction of the segment p -> q
    Vec point;
};

class Domain {
public:
    using Variant = std::variant<IntervalDomain, BallDomain, BoxDomain, ImplicitDomain>;

    static Domain interval(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("interval domain needs lo < hi");
        if (std::isinf(lo) && std::isinf(hi)) throw std::invalid_argument("interval domain needs a finite endpoint");
        return Domain(IntervalDomain{lo, hi}, 1);
    }
    static Domain ball(const Vec& center, double radius) {
        if (!(radius > 0.0)) throw std::invalid_argument("ball domain needs a positive radius");
        return Domain(BallDomain{center, radius}, center.dim());
    }
    static Domain box(const Vec& lo, const Vec& hi) {
        if (lo.dim() != hi.dim()) throw std::invalid_argument("box corners differ in dimension");
        for (std::size_t i = 0; i < lo.dim(); ++i)
            if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                throw std::invalid_argument("box domain needs finite lo < hi");
        return Domain(BoxDomain{lo, hi}, lo.dim());
    }
    static Domain implicit(ImplicitDomain spec) {
        if (!spec.g || !spec.grad_g) throw std::invalid_argument("implicit domain needs g and grad g");
        const std::size_t d = spec.bounds.dim();
        if (spec.interior.dim() != d || !(spec.g(spec.interior) < 0.0))
            throw std::invalid_argument("implicit domain interior point must satisfy g < 0");
        // The bounding box must strictly contain {g <= 0}; probe its faces.
        Domain out(std::move(spec), d);
        out.check_implicit_bounds();
        return out;
    }

    std::size_t dim() const { return dim_; }
    const Variant& variant() const { return spec_; }
    bool is_interval() const { return std::holds_alternative<IntervalDomain>(spec_); }
    bool bounded() const {
        if (const auto* iv = std::get_if<IntervalDomain>(&spec_)) return std::isfinite(iv->lo) && std::isfinite(iv->hi);
        return true;
    }

    bool contains(const Vec& x) const {
        require_same_dim(x, dim_, "contains");
        return std::visit(
            [&](const auto& s) -> bool {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    return x[0] > s.lo && x[0] < s.hi;
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    return norm2(x - s.center) < s.radius * s.radius;
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    for (std::size_t i = 0; i < dim_; ++i)
                        if (!(x[i] > s.lo[i] && x[i] < s.hi[i])) return false;
                    return true;
                } else {
                    for (std::size_t i = 0; i < dim_; ++i)
                        if (!(x[i] > s.bounds.lo[i] && x[i] < s.bounds.hi[i])) return false;
                    return s.g(x) < 0.0;
                }
            },
            spec_);
    }

    // Boundary residual: signed distance for primitives, g for the implicit variant.
    double residual(const Vec& x) const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    double r = std::numeric_limits<double>::infinity();
                    if (std::isfinite(s.lo)) r = std::min(r, std::abs(x[0] - s.lo));
                    if (std::isfinite(s.hi)) r = std::min(r, std::abs(x[0] - s.hi));
                    return contains(x) ? -r : r;
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    return norm(x - s.center) - s.radius;
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    double inside = std::numeric_limits<double>::infinity();
                    double outside = 0.0;
                    for (std::size_t i = 0; i < dim_; ++i) {
                        inside = std::min({inside, x[i] - s.lo[i], s.hi[i] - x[i]});
                        const double e = std::max({s.lo[i] - x[i], x[i] - s.hi[i], 0.0});
                        outside += e * e;
                    }
                    return inside >= 0.0 ? -inside : std::sqrt(outside);
                } else {
                    return s.g(x);
                }
            },
            spec_);
    }

    // First boundary crossing along p -> q when q is outside G.
    std::optional<Crossing> detect_crossing(const Vec& p, const Vec& q) const {
        require_same_dim(q, dim_, "detect_crossing");
        if (!contains(p)) throw std::invalid_argument("detect_crossing: start point outside the domain");
        if (contains(q)) return std::nullopt;
        return std::visit(
            [&](const auto& s) -> std::optional<Crossing> {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    const double bound = q[0] <= s.lo ? s.lo : s.hi;
                    return Crossing{(bound - p[0]) / (q[0] - p[0]), Vec{bound}};
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    const Vec step = q - p;
                    const Vec off = p - s.center;
                    const double A = norm2(step);
                    const double B = 2.0 * dot(off, step);
                    const double C = norm2(off) - s.radius * s.radius;
                    const double disc = std::max(0.0, B * B - 4.0 * A * C);
                    // C < 0, so this is the positive root; the other form avoids cancellation.
                    const double lam = B >= 0.0 ? (-2.0 * C) / (B + std::sqrt(disc)) : (-B + std::sqrt(disc)) / (2.0 * A);
                    Vec z = p + std::clamp(lam, 0.0, 1.0) * step;
                    const Vec rel = z - s.center;
                    z = s.center + (s.radius / norm(rel)) * rel;
                    return Crossing{std::clamp(lam, 0.0, 1.0), z};
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    double lam = 1.0;
                    std::size_t axis = 0;
                    double face = 0.0;
                    for (std::size_t i = 0; i < dim_; ++i) {
                        const double dq = q[i] - p[i];
                        if (q[i] <= s.lo[i] && dq != 0.0) {
                            const double l = (s.lo[i] - p[i]) / dq;
                            if (l < lam || (l == lam && axis == 0)) lam = l, axis = i, face = s.lo[i];
                        } else if (q[i] >= s.hi[i] && dq != 0.0) {
                            const double l = (s.hi[i] - p[i]) / dq;
                            if (l < lam || (l == lam && axis == 0)) lam = l, axis = i, face = s.hi[i];
                        }
                    }
                    Vec z = p + lam * (q - p);
                    z[axis] = face;
                    return Crossing{lam, z};
                } else {
                    return implicit_crossing(s, p, q);
                }
            },
            spec_);
    }

    // n points on the boundary; for intervals exactly the finite endpoints.
    std::vector<Vec> sample_boundary(std::size_t n, std::uint64_t seed) const {
        if (n < 1) throw std::invalid_argument("sample_boundary: n must be >= 1");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        auto direction = [&] {
            Vec u(dim_);
            double len = 0.0;
            while (len < 1e-12) {
                for (std::size_t i = 0; i < dim_; ++i) u[i] = gauss(rng);
                len = norm(u);
            }
            return u / len;
        };
        std::vector<Vec> out;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    if (std::isfinite(s.lo)) out.push_back(Vec{s.lo});
                    if (std::isfinite(s.hi)) out.push_back(Vec{s.hi});
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    for (std::size_t k = 0; k < n; ++k) out.push_back(s.center + s.radius * direction());
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    // pick a face with probability proportional to its (d-1)-volume
                    std::vector<double> area(dim_, 1.0);
                    for (std::size_t i = 0; i < dim_; ++i)
                        for (std::size_t j = 0; j < dim_; ++j)
                            if (j != i) area[i] *= s.hi[j] - s.lo[j];
                    std::discrete_distribution<std::size_t> pick(area.begin(), area.end());
                    for (std::size_t k = 0; k < n; ++k) {
                        const std::size_t axis = pick(rng);
                        Vec z(dim_);
                        for (std::size_t j = 0; j < dim_; ++j) z[j] = s.lo[j] + (s.hi[j] - s.lo[j]) * unif(rng);
                        z[axis] = unif(rng) < 0.5 ? s.lo[axis] : s.hi[axis];
                        out.push_back(z);
                    }
                } else {
                    for (std::size_t k = 0; k < n; ++k) out.push_back(implicit_ray_hit(s, direction()));
                }
            },
            spec_);
        if (out.empty()) throw std::invalid_argument("sample_boundary: domain has no finite boundary");
        return out;
    }

    // Inner unit normal at a boundary point.
    Vec inner_normal(const Vec& z) const {
        require_same_dim(z, dim_, "inner_normal");
        return std::visit(
            [&](const auto& s) -> Vec {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    const double dlo = std::isfinite(s.lo) ? std::abs(z[0] - s.lo) : std::numeric_limits<double>::infinity();
                    const double dhi = std::isfinite(s.hi) ? std::abs(z[0] - s.hi) : std::numeric_limits<double>::infinity();
                    return Vec{dlo <= dhi ? 1.0 : -1.0};
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    const Vec rel = s.center - z;
                    return rel / norm(rel);
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    double best = std::numeric_limits<double>::infinity();
                    Vec n(dim_);
                    for (std::size_t i = 0; i < dim_; ++i) {
                        if (std::abs(z[i] - s.lo[i]) < best) best = std::abs(z[i] - s.lo[i]), n = Vec::unit(dim_, i);
                        if (std::abs(z[i] - s.hi[i]) < best) best = std::abs(z[i] - s.hi[i]), n = -Vec::unit(dim_, i);
                    }
                    return n;
                } else {
                    const Vec g = s.grad_g(z);
                    const double len = norm(g);
                    if (!(len > 1e-14)) throw std::domain_error("inner_normal: level-function gradient vanishes");
                    return -g / len;
                }
            },
            spec_);
    }

    // Closest boundary point (exact for primitives, Newton projection for implicit).
    Vec project_to_boundary(const Vec& x) const {
        return std::visit(
            [&](const auto& s) -> Vec {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    const double dlo = std::isfinite(s.lo) ? std::abs(x[0] - s.lo) : std::numeric_limits<double>::infinity();
                    const double dhi = std::isfinite(s.hi) ? std::abs(x[0] - s.hi) : std::numeric_limits<double>::infinity();
                    return Vec{dlo <= dhi ? s.lo : s.hi};
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    Vec rel = x - s.center;
                    const double len = norm(rel);
                    if (len == 0.0) rel = Vec::unit(dim_, 0), rel *= s.radius;
                    else rel *= s.radius / len;
                    return s.center + rel;
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    Vec z = x;
                    for (std::size_t i = 0; i < dim_; ++i) z[i] = std::clamp(z[i], s.lo[i], s.hi[i]);
                    double best = std::numeric_limits<double>::infinity();
                    std::size_t axis = 0;
                    double face = 0.0;
                    for (std::size_t i = 0; i < dim_; ++i) {
                        if (z[i] - s.lo[i] < best) best = z[i] - s.lo[i], axis = i, face = s.lo[i];
                        if (s.hi[i] - z[i] < best) best = s.hi[i] - z[i], axis = i, face = s.hi[i];
                    }
                    z[axis] = face;
                    return z;
                } else {
                    return newton_project(s, x);
                }
            },
            spec_);
    }

    // Axis box containing the closure; unbounded sides are infinite.
    Box bounding_box() const {
        return std::visit(
            [&](const auto& s) -> Box {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    return Box{Vec{s.lo}, Vec{s.hi}};
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    return Box{s.center - Vec(dim_, s.radius), s.center + Vec(dim_, s.radius)};
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    return Box{s.lo, s.hi};
                } else {
                    return s.bounds;
                }
            },
            spec_);
    }

    // Distance from an interior point to the boundary.
    double inradius(const Vec& a) const {
        if (!contains(a)) throw std::invalid_argument("inradius: point outside the domain");
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, IntervalDomain>) {
                    return std::min(a[0] - s.lo, s.hi - a[0]);
                } else if constexpr (std::is_same_v<T, BallDomain>) {
                    return s.radius - norm(a - s.center);
                } else if constexpr (std::is_same_v<T, BoxDomain>) {
                    double r = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < dim_; ++i) r = std::min({r, a[i] - s.lo[i], s.hi[i] - a[i]});
                    return r;
                } else {
                    double r = std::numeric_limits<double>::infinity();
                    for (const Vec& z : sample_boundary(512, 7)) r = std::min(r, dist(z, a));
                    return r;
                }
            },
            spec_);
    }

private:
    Domain(Variant spec, std::size_t dim) : spec_(std::move(spec)), dim_(dim) {}

    void check_implicit_bounds() const {
        // Sampled points on every face of the bounding box must satisfy g > 0.
        const auto& s = std::get<ImplicitDomain>(spec_);
        std::mt19937_64 rng(12345);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t axis = 0; axis < dim_; ++axis) {
            for (double side : {0.0, 1.0}) {
                for (int k = 0; k < 256; ++k) {
                    Vec z(dim_);
                    for (std::size_t i = 0; i < dim_; ++i) z[i] = s.bounds.lo[i] + (s.bounds.hi[i] - s.bounds.lo[i]) * unif(rng);
                    z[axis] = side == 0.0 ? s.bounds.lo[axis] : s.bounds.hi[axis];
                    if (!(s.g(z) > 0.0))
                        throw std::invalid_argument("implicit domain: bounding box does not strictly contain {g <= 0}");
                }
            }
        }
    }

    static Vec newton_project(const ImplicitDomain& s, Vec z) {
        for (int it = 0; it < 100; ++it) {
            const double gv = s.g(z);
            if (std::abs(gv) < 1e-13) break;
            const Vec gr = s.grad_g(z);
            const double n2 = norm2(gr);
            if (!(n2 > 0.0)) break;
            z.axpy(-gv / n2, gr);
        }
        return z;
    }

    static Crossing bisect(const ImplicitDomain& s, const Vec& p, const Vec& q, double lo, double hi) {
        // g(p + lo (q - p)) < 0 <= g(p + hi (q - p))
        Vec z = p + hi * (q - p);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vec zm = p + mid * (q - p);
            const double gm = s.g(zm);
            if (gm < 0.0) lo = mid;
            else hi = mid;
            z = zm;
            if (std::abs(gm) < 1e-12 || hi - lo < 1e-17) break;
        }
        return Crossing{0.5 * (lo + hi), z};
    }

    Crossing implicit_crossing(const ImplicitDomain& s, const Vec& p, const Vec& q) const {
        // Coarse scan for the first exit (g >= 0 or leaving the box), then bisection.
        constexpr int kScan = 16;
        double prev = 0.0;
        for (int k = 1; k <= kScan; ++k) {
            const double lam = static_cast<double>(k) / kScan;
            const Vec z = p + lam * (q - p);
            bool in_box = true;
            for (std::size_t i = 0; i < dim_; ++i) in_box = in_box && z[i] > s.bounds.lo[i] && z[i] < s.bounds.hi[i];
            if (!in_box || s.g(z) >= 0.0) return bisect(s, p, q, prev, lam);
            prev = lam;
        }
        return bisect(s, p, q, prev, 1.0);
    }

    Vec implicit_ray_hit(const ImplicitDomain& s, const Vec& dir) const {
        double reach = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) reach = std::max(reach, s.bounds.hi[i] - s.bounds.lo[i]);
        const Vec far = s.interior + (2.0 * reach) * dir;
        const Crossing c = implicit_crossing(s, s.interior, far);
        return newton_project(s, c.point);
    }

    Variant spec_;
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Level-set and stability checkers

struct SublevelReport {
    bool bounded = false;
    bool connected = false;
    std::size_t components = 0;
    std::vector<Vec> other_component_points;  // one representative per extra component
    std::vector<Vec> touch_set;
    double grid_resolution = 0.0;
    Vec region_lo;  // extent of a's component (cell centres)
    Vec region_hi;
    std::size_t region_cells = 0;
};

// Flood-fills the grid cells of the bounding box (truncated on unbounded sides by
// `truncation`) where W_a <= H inside G.
inline SublevelReport check_sublevel(const Landscape& land, const Vec& a, double H, const Domain& domain,
                                     double resolution, std::optional<Box> truncation = std::nullopt,
                                     std::size_t n_boundary = 256, std::uint64_t seed = 1) {
    if (!(resolution > 0.0)) throw std::invalid_argument("check_sublevel: resolution must be positive");
    if (!(H > 0.0)) throw std::invalid_argument("check_sublevel: H must be positive");
    if (!domain.contains(a)) throw std::invalid_argument("check_sublevel: a outside the domain");
    const std::size_t d = domain.dim();
    if (d > 3) throw std::invalid_argument("check_sublevel: grid flood fill supports d <= 3");

    Box box = domain.bounding_box();
    std::array<bool, 6> truncated{};
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(box.lo[i])) {
            if (!truncation) throw std::invalid_argument("check_sublevel: unbounded domain needs a truncation box");
            box.lo[i] = truncation->lo[i];
            truncated[2 * i] = true;
        }
        if (!std::isfinite(box.hi[i])) {
            if (!truncation) throw std::invalid_argument("check_sublevel: unbounded domain needs a truncation box");
            box.hi[i] = truncation->hi[i];
            truncated[2 * i + 1] = true;
        }
    }
    std::array<std::size_t, 3> n{1, 1, 1};
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) {
        n[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((box.hi[i] - box.lo[i]) / resolution)));
        total *= n[i];
    }
    if (total > 50'000'000) throw std::invalid_argument("check_sublevel: grid too fine");
    auto centre = [&](const std::array<std::size_t, 3>& idx) {
        Vec c(d);
        for (std::size_t i = 0; i < d; ++i)
            c[i] = box.lo[i] + (static_cast<double>(idx[i]) + 0.5) * (box.hi[i] - box.lo[i]) / static_cast<double>(n[i]);
        return c;
    };
    auto unflatten = [&](std::size_t f) {
        std::array<std::size_t, 3> idx{};
        for (std::size_t i = 0; i < d; ++i) idx[i] = f % n[i], f /= n[i];
        return idx;
    };
    auto flatten = [&](const std::array<std::size_t, 3>& idx) {
        std::size_t f = 0;
        for (std::size_t i = d; i-- > 0;) f = f * n[i] + idx[i];
        return f;
    };

    std::vector<char> valid(total, 0);
    for (std::size_t f = 0; f < total; ++f) {
        const Vec c = centre(unflatten(f));
        valid[f] = domain.contains(c) && land.effective_potential(a, c).first <= H;
    }
    std::array<std::size_t, 3> seed_idx{};
    for (std::size_t i = 0; i < d; ++i) {
        const double t = (a[i] - box.lo[i]) / (box.hi[i] - box.lo[i]) * static_cast<double>(n[i]);
        seed_idx[i] = std::min(n[i] - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t))));
    }
    const std::size_t seed_cell = flatten(seed_idx);
    valid[seed_cell] = 1;

    std::vector<int> label(total, -1);
    int next_label = 0;
    auto flood = [&](std::size_t start, int lab) {
        std::deque<std::size_t> queue{start};
        label[start] = lab;
        while (!queue.empty()) {
            const std::size_t f = queue.front();
            queue.pop_front();
            const auto idx = unflatten(f);
            for (std::size_t i = 0; i < d; ++i) {
                for (int s : {-1, 1}) {
                    if ((s < 0 && idx[i] == 0) || (s > 0 && idx[i] + 1 == n[i])) continue;
                    auto nb = idx;
                    nb[i] = static_cast<std::size_t>(static_cast<long long>(nb[i]) + s);
                    const std::size_t g = flatten(nb);
                    if (valid[g] && label[g] < 0) {
                        label[g] = lab;
                        queue.push_back(g);
                    }
                }
            }
        }
    };
    flood(seed_cell, next_label++);

    SublevelReport rep;
    rep.grid_resolution = resolution;
    rep.region_lo = Vec(d, std::numeric_limits<double>::infinity());
    rep.region_hi = Vec(d, -std::numeric_limits<double>::infinity());
    rep.bounded = true;
    for (std::size_t f = 0; f < total; ++f) {
        if (label[f] != 0) continue;
        const auto idx = unflatten(f);
        const Vec c = centre(idx);
        ++rep.region_cells;
        for (std::size_t i = 0; i < d; ++i) {
            rep.region_lo[i] = std::min(rep.region_lo[i], c[i]);
            rep.region_hi[i] = std::max(rep.region_hi[i], c[i]);
            if ((truncated[2 * i] && idx[i] == 0) || (truncated[2 * i + 1] && idx[i] + 1 == n[i])) rep.bounded = false;
        }
    }
    for (std::size_t f = 0; f < total; ++f) {
        if (valid[f] && label[f] < 0) {
            flood(f, next_label++);
            rep.other_component_points.push_back(centre(unflatten(f)));
        }
    }
    rep.components = static_cast<std::size_t>(next_label);
    rep.connected = rep.components == 1;

    for (const Vec& z : domain.sample_boundary(n_boundary, seed)) {
        const auto [w, g] = land.effective_potential(a, z);
        const double tol = 0.5 * resolution * std::max(1.0, norm(g));
        if (std::abs(w - H) < tol) rep.touch_set.push_back(z);
    }
    return rep;
}

// Minimum of |grad W_a| over sampled points of the level set {W_a = H} within
// the closure of G. Points are found along rays from a.
inline double level_set_min_gradient(const Landscape& land, const Vec& a, double H, const Domain& domain,
                                     std::size_t n, std::uint64_t seed) {
    if (!domain.contains(a)) throw std::invalid_argument("level_set_min_gradient: a outside the domain");
    const std::size_t d = domain.dim();
    Box box = domain.bounding_box();
    double reach = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double lo = std::isfinite(box.lo[i]) ? box.lo[i] : a[i] - 10.0;
        const double hi = std::isfinite(box.hi[i]) ? box.hi[i] : a[i] + 10.0;
        reach = std::max(reach, hi - lo);
    }
    const double step = reach / 2000.0;
    auto w = [&](const Vec& x) { return land.effective_potential(a, x).first - H; };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double best = std::numeric_limits<double>::infinity();
    std::size_t found = 0;
    for (std::size_t k = 0; k < n; ++k) {
        Vec u(d);
        double len = 0.0;
        while (len < 1e-12) {
            for (std::size_t i = 0; i < d; ++i) u[i] = gauss(rng);
            len = norm(u);
        }
        u /= len;
        Vec prev = a;
        std::optional<std::pair<Vec, Vec>> bracket;
        for (int s = 1; s <= 4000; ++s) {
            Vec next = a + (step * s) * u;
            if (auto c = domain.detect_crossing(prev, next)) {
                if (w(c->point) >= -1e-12) bracket = {{prev, c->point}};
                break;
            }
            if (w(next) >= 0.0) {
                bracket = {{prev, next}};
                break;
            }
            prev = next;
        }
        if (!bracket) continue;
        Vec lo = bracket->first, hi = bracket->second;
        for (int it = 0; it < 200 && dist(lo, hi) > 1e-14; ++it) {
            const Vec mid = 0.5 * (lo + hi);
            (w(mid) < 0.0 ? lo : hi) = mid;
        }
        best = std::min(best, norm(land.effective_potential(a, hi).second));
        ++found;
    }
    if (found == 0) throw std::runtime_error("level_set_min_gradient: could not locate the level set");
    return best;
}

struct FlowStabilityReport {
    bool pass = false;
    std::vector<Vec> failures;
    std::size_t starts = 0;
};

// Integrates phi' = -grad W_a(phi) from points of the closure of G.
inline FlowStabilityReport check_flow_stability(const Landscape& land, const Vec& a, const Domain& domain,
                                                std::size_t n_starts, double horizon, double dt, std::uint64_t seed) {
    if (!(dt > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("check_flow_stability: dt and T must be positive");
    const std::size_t d = domain.dim();
    std::vector<Vec> starts = domain.sample_boundary(std::max<std::size_t>(1, n_starts / 2), seed);
    Box box = domain.bounding_box();
    for (std::size_t i = 0; i < d; ++i) {
        if (!std::isfinite(box.lo[i])) box.lo[i] = a[i] - 10.0;
        if (!std::isfinite(box.hi[i])) box.hi[i] = a[i] + 10.0;
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t attempts = 0;
    while (starts.size() < n_starts && attempts < 1000 * n_starts) {
        ++attempts;
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unif(rng);
        if (domain.contains(x)) starts.push_back(x);
    }

    FlowStabilityReport rep;
    rep.starts = starts.size();
    for (const Vec& x0 : starts) {
        bool ok = true;
        try {
            const Path p = integrate_effective_flow(x0, a, land, dt, horizon);
            for (std::size_t k = 1; k < p.size() && ok; ++k) ok = domain.contains(p.points[k]);
            ok = ok && dist(p.back(), a) < 1e-3;
        } catch (const NumericalBlowUp&) {
            ok = false;
        }
        if (!ok) rep.failures.push_back(x0);
    }
    rep.pass = rep.failures.empty();
    return rep;
}

}  // namespace sidlab
