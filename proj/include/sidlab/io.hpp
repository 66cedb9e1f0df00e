#pragma once

// JSON shapes for points, measures, domains and initial conditions.
//
// Occupation measure:
//   {"dim": d, "prior_weight": t0 | "inf", "prior_atoms": [{"x": [...], "w": w}],
//    "atoms": [{"x": [...], "w": dt}], "elapsed": t, "cap": n}
// Path atoms carry raw time mass; normalized weights are w / (t0 + elapsed).
//
// Domain:
//   {"type": "interval", "lo": l, "hi": h}          (null for an infinite side)
//   {"type": "ball", "center": [...], "radius": r}
//   {"type": "box", "lo": [...], "hi": [...]}
//   {"type": "quartic", "dim": d, "scale": s}       (implicit sum (x_i/s)^4 < 1)
//   {"type": "ellipsoid", "radii": [...]}           (implicit)
//
// Initial condition:
//   {"x0": [...], "t0": t0 | "inf", "mu0": [{"x": [...], "w": w}]}

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sidlab/geometry.hpp"
#include "sidlab/measures.hpp"
#include "sidlab/vec.hpp"

namespace sidlab {

using json = nlohmann::json;

inline json vec_to_json(const Vec& v) {
    json out = json::array();
    for (double c : v) out.push_back(c);
    return out;
}

inline Vec vec_from_json(const json& j) {
    if (j.is_number()) return Vec{j.get<double>()};
    if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a point (number or non-empty array)");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

inline json time_to_json(double t) { return std::isinf(t) ? json("inf") : json(t); }

inline double time_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kInfiniteTime;
        throw std::invalid_argument("time must be a number or \"inf\"");
    }
    return j.get<double>();
}

inline json atoms_to_json(const std::vector<Atom>& atoms) {
    json out = json::array();
    for (const Atom& a : atoms) out.push_back({{"x", vec_to_json(a.x)}, {"w", a.w}});
    return out;
}

inline std::vector<Atom> atoms_from_json(const json& j) {
    std::vector<Atom> out;
    for (const json& e : j) out.push_back({vec_from_json(e.at("x")), e.at("w").get<double>()});
    return out;
}

inline json measure_to_json(const OccupationMeasure& mu) {
    json out{{"dim", mu.dim()},
             {"prior_weight", time_to_json(mu.prior_weight())},
             {"prior_atoms", atoms_to_json(mu.prior_atoms())},
             {"elapsed", mu.elapsed()},
             {"cap", mu.cap()}};
    out["atoms"] = mu.stores_atoms() ? atoms_to_json(mu.path_atoms()) : json(nullptr);
    const auto pm = mu.path_moments();
    out["moments"] = {{"ref", vec_to_json(pm.ref)}, {"m1", vec_to_json(pm.m1)}, {"m2", pm.m2}, {"pushes", pm.pushes}};
    return out;
}

// `ref` is the moment reference point; any point works, x0 keeps cancellation low.
inline OccupationMeasure measure_from_json(const json& j, const Vec& ref) {
    if (j.at("atoms").is_null()) throw std::invalid_argument("measure JSON holds moments only; atoms unavailable");
    std::optional<OccupationMeasure::PathMoments> exact;
    if (j.contains("moments")) {
        const json& m = j.at("moments");
        exact = OccupationMeasure::PathMoments{vec_from_json(m.at("ref")), vec_from_json(m.at("m1")),
                                               m.at("m2").get<double>(), j.at("elapsed").get<double>(),
                                               m.at("pushes").get<std::size_t>()};
    }
    return OccupationMeasure::restore(time_from_json(j.at("prior_weight")), atoms_from_json(j.at("prior_atoms")),
                                      atoms_from_json(j.at("atoms")), j.value("cap", OccupationMeasure::kDefaultCap), ref,
                                      exact);
}

inline Domain domain_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    auto side = [&](const char* key, double inf) {
        return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<double>() : inf;
    };
    if (type == "interval") {
        const double inf = std::numeric_limits<double>::infinity();
        return Domain::interval(side("lo", -inf), side("hi", inf));
    }
    if (type == "ball") return Domain::ball(vec_from_json(j.at("center")), j.at("radius").get<double>());
    if (type == "box") return Domain::box(vec_from_json(j.at("lo")), vec_from_json(j.at("hi")));
    if (type == "quartic")
        return Domain::implicit(level_functions::quartic(j.value("dim", std::size_t{1}), j.value("scale", 1.0)));
    if (type == "ellipsoid") return Domain::implicit(level_functions::ellipsoid(vec_from_json(j.at("radii"))));
    throw std::invalid_argument("unknown domain type '" + type + "'");
}

inline ExtendedInit init_from_json(const json& j) {
    const Vec x0 = vec_from_json(j.at("x0"));
    const double t0 = j.contains("t0") ? time_from_json(j.at("t0")) : 0.0;
    std::vector<Atom> mu0 = j.contains("mu0") ? atoms_from_json(j.at("mu0")) : std::vector<Atom>{};
    return make_init(t0, std::move(mu0), x0);
}

inline json init_to_json(const ExtendedInit& init) {
    return {{"x0", vec_to_json(init.point())}, {"t0", time_to_json(init.time())}, {"mu0", atoms_to_json(init.measure())}};
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sidlab
