#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sidlab/measures.hpp"
#include "sidlab/rng.hpp"

using namespace sidlab;

namespace {

double normalized_mass(const OccupationMeasure& mu) {
    double s = 0.0;
    for (const Atom& a : mu.atoms()) s += a.w;
    return s;
}

// Occupation measure of an Euler OU path (sigma = 0.5).
OccupationMeasure ou_path_measure(std::size_t n, std::size_t cap, std::uint64_t seed, double dt = 1e-3) {
    OccupationMeasure mu(ExtendedInit::at(Vec{0.0}), cap);
    NormalStream rng(seed);
    double x = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mu.push(Vec{x}, dt);
        x += -x * dt + 0.5 * std::sqrt(dt) * rng.next();
    }
    return mu;
}

}  // namespace

TEST(MakeInit, ZeroPriorTimeStartsAsDiracOnFirstPush) {
    const ExtendedInit init = make_init(0.0, {{Vec{5.0}, 1.0}}, Vec{1.0});
    OccupationMeasure mu(init);
    EXPECT_TRUE(mu.empty());
    mu.push(Vec{3.0}, 1e-3);
    const auto atoms = mu.atoms();
    double mass_at_3 = 0.0;
    for (const Atom& a : atoms)
        if (a.x[0] == 3.0) mass_at_3 += a.w;
    EXPECT_DOUBLE_EQ(mass_at_3, 1.0);
}

TEST(MakeInit, FrozenRegime) {
    const ExtendedInit init = make_init(kInfiniteTime, {{Vec{2.0}, 1.0}}, Vec{0.0});
    EXPECT_TRUE(init.frozen());
    OccupationMeasure mu(init);
    for (int k = 0; k < 100; ++k) mu.push(Vec{static_cast<double>(k)}, 0.1);
    const auto atoms = mu.atoms();
    ASSERT_EQ(atoms.size(), 1u);
    EXPECT_EQ(atoms[0].x[0], 2.0);
    EXPECT_EQ(atoms[0].w, 1.0);
    EXPECT_EQ(mu.mean()[0], 2.0);
}

TEST(MakeInit, AccessorsReturnInputs) {
    const ExtendedInit init = make_init(1.0, {{Vec{0.0}, 0.5}, {Vec{2.0}, 0.5}}, Vec{1.0});
    EXPECT_EQ(init.time(), 1.0);
    ASSERT_EQ(init.measure().size(), 2u);
    EXPECT_EQ(init.measure()[0].x[0], 0.0);
    EXPECT_EQ(init.measure()[0].w, 0.5);
    EXPECT_EQ(init.measure()[1].x[0], 2.0);
    EXPECT_EQ(init.point()[0], 1.0);
}

TEST(MakeInit, NormalizesAndValidates) {
    const ExtendedInit init = make_init(2.0, {{Vec{0.0}, 1.0}, {Vec{1.0}, 3.0}}, Vec{0.0});
    EXPECT_DOUBLE_EQ(init.measure()[0].w, 0.25);
    EXPECT_DOUBLE_EQ(init.measure()[1].w, 0.75);
    EXPECT_THROW(make_init(1.0, {}, Vec{0.0}), std::invalid_argument);
    EXPECT_THROW(make_init(1.0, {{Vec{0.0}, -1.0}}, Vec{0.0}), std::invalid_argument);
    EXPECT_THROW(make_init(-1.0, {{Vec{0.0}, 1.0}}, Vec{0.0}), std::invalid_argument);
    EXPECT_THROW(make_init(1.0, {{Vec{0.0, 1.0}, 1.0}}, Vec{0.0}), std::invalid_argument);
}

TEST(PushSample, PriorAndPathHalves) {
    OccupationMeasure mu(make_init(1.0, {{Vec{0.0}, 1.0}}, Vec{0.0}));
    for (int k = 0; k < 10; ++k) mu.push(Vec{1.0}, 0.1);
    EXPECT_NEAR(mu.elapsed(), 1.0, 1e-15);
    double at0 = 0.0, at1 = 0.0;
    for (const Atom& a : mu.atoms()) (a.x[0] == 0.0 ? at0 : at1) += a.w;
    EXPECT_NEAR(at0, 0.5, 1e-15);
    EXPECT_NEAR(at1, 0.5, 1e-15);
    EXPECT_NEAR(mu.prior_fraction(), 0.5, 1e-15);
}

TEST(PushSample, SingleAtom) {
    OccupationMeasure mu(ExtendedInit::at(Vec{0.0}));
    mu.push(Vec{3.0}, 0.01);
    ASSERT_EQ(mu.atoms().size(), 1u);
    EXPECT_EQ(mu.atoms()[0].x[0], 3.0);
    EXPECT_EQ(mu.atoms()[0].w, 1.0);
}

TEST(PushSample, NormalizationAndPriorFractionInvariant) {
    OccupationMeasure mu(make_init(0.7, {{Vec{0.3}, 0.2}, {Vec{-1.0}, 0.8}}, Vec{0.0}), 64);
    NormalStream rng(3);
    double t = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double dt = 1e-3 * (1 + k % 7);
        mu.push(Vec{rng.next()}, dt);
        t += dt;
        EXPECT_NEAR(normalized_mass(mu), 1.0, 1e-12);
        EXPECT_NEAR(mu.prior_fraction(), 0.7 / (0.7 + t), 1e-12);
        EXPECT_LE(mu.path_atoms().size(), 64u);
    }
}

TEST(InteractionDrift, SymmetricPairCancels) {
    const Landscape q = make_preset("quad-attract(1)");
    OccupationMeasure mu(make_init(1.0, {{Vec{0.0}, 0.5}, {Vec{2.0}, 0.5}}, Vec{0.0}));
    EXPECT_NEAR(mu.interaction_drift(q, Vec{1.0})[0], 0.0, 1e-15);
}

TEST(InteractionDrift, SingleAtomIsGradF) {
    for (const char* p : {"quad-attract(2)", "gauss-attract(1)", "gauss-repel(0.5)"}) {
        const Landscape land = make_preset(p);
        OccupationMeasure mu(make_init(1.0, {{Vec{0.4}, 1.0}}, Vec{0.0}));
        for (double x : {-1.0, 0.0, 0.4, 2.5}) EXPECT_DOUBLE_EQ(mu.interaction_drift(land, Vec{x})[0], land.grad_f(Vec{x - 0.4})[0]);
    }
}

TEST(InteractionDrift, EmptyMeasureIsZero) {
    OccupationMeasure mu(ExtendedInit::at(Vec{0.0, 0.0}));
    EXPECT_EQ(norm(mu.interaction_drift(make_preset("gauss-attract(1)", 2), Vec{1.0, 1.0})), 0.0);
}

TEST(InteractionDrift, ThinnedRandomMeasure) {
    // 1000 atoms of an OU path, thinned to 100, against full storage.
    const Landscape land = make_preset("gauss-attract(1)");
    const OccupationMeasure full = ou_path_measure(1000, 1u << 20, 5);
    const OccupationMeasure small = thin(full, 100);
    ASSERT_LE(small.path_atoms().size(), 100u);
    double max_diff = 0.0, max_drift = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vec probe{-2.0 + 4.0 * i / 99.0};
        const Vec exact = full.interaction_drift(land, probe);
        max_diff = std::max(max_diff, norm(small.interaction_drift(land, probe) - exact));
        max_drift = std::max(max_drift, norm(exact));
    }
    EXPECT_LT(max_diff / max_drift, 1e-3);
}

TEST(InteractionDrift, LinearFastPathMatchesAtomSum) {
    const Landscape q = make_preset("quad-attract(1.5)", 2);
    OccupationMeasure with_atoms(make_init(0.5, {{Vec{1.0, 0.0}, 1.0}}, Vec{0.0, 0.0}), 1u << 16, true);
    OccupationMeasure moments(make_init(0.5, {{Vec{1.0, 0.0}, 1.0}}, Vec{0.0, 0.0}), 1u << 16, false);
    NormalStream rng(9);
    for (int k = 0; k < 500; ++k) {
        const Vec x = rng.next_vec(2);
        with_atoms.push(x, 1e-2);
        moments.push(x, 1e-2);
    }
    const Vec probe{0.3, -0.7};
    Vec manual = Vec::zeros(2);
    for (const Atom& a : with_atoms.atoms()) manual.axpy(a.w, q.grad_f(probe - a.x));
    EXPECT_LT(norm(moments.interaction_drift(q, probe) - manual), 1e-12);
    EXPECT_LT(norm(with_atoms.interaction_drift(q, probe) - manual), 1e-12);
}

TEST(W2ToDirac, Examples) {
    OccupationMeasure dirac(make_init(1.0, {{Vec{0.7}, 1.0}}, Vec{0.0}));
    EXPECT_EQ(dirac.w2_to_dirac(Vec{0.7}), 0.0);
    OccupationMeasure pair(make_init(1.0, {{Vec{0.0}, 0.5}, {Vec{2.0}, 0.5}}, Vec{0.0}));
    EXPECT_NEAR(pair.w2_to_dirac(Vec{0.0}), std::sqrt(2.0), 1e-15);
    OccupationMeasure mixed(make_init(1.0, {{Vec{0.0}, 1.0}}, Vec{0.0}));
    mixed.push(Vec{1.0}, 1.0);
    EXPECT_NEAR(mixed.w2_to_dirac(Vec{0.0}), std::sqrt(0.5), 1e-15);
}

TEST(W2ToDirac, SecondMomentIdentity) {
    OccupationMeasure mu(make_init(2.0, {{Vec{0.5, 0.5}, 1.0}, {Vec{-1.0, 0.2}, 1.0}}, Vec{0.1, -0.1}), 1u << 20);
    NormalStream rng(21);
    for (int k = 0; k < 5000; ++k) mu.push(Vec{0.1, -0.1} + 0.3 * rng.next_vec(2), 1e-3);
    for (const Vec& a : {Vec{0.0, 0.0}, Vec{0.1, -0.1}, Vec{3.0, -2.0}}) {
        double m2 = 0.0;
        for (const Atom& at : mu.atoms()) m2 += at.w * norm2(at.x - a);
        EXPECT_NEAR(mu.w2_to_dirac(a) * mu.w2_to_dirac(a), m2, 1e-12);
        EXPECT_NEAR(mu.w2_to_dirac(a), mu.w2_to_dirac_from_atoms(a), 1e-12);
    }
}

TEST(W2Discrete1d, Examples) {
    EXPECT_NEAR(w2_discrete_1d({{Vec{0.0}, 0.5}, {Vec{1.0}, 0.5}}, {{Vec{1.0}, 0.5}, {Vec{2.0}, 0.5}}), 1.0, 1e-15);
    const std::vector<Atom> mu{{Vec{0.3}, 0.2}, {Vec{-1.0}, 0.5}, {Vec{2.0}, 0.3}};
    EXPECT_EQ(w2_discrete_1d(mu, mu), 0.0);
}

TEST(W2Discrete1d, MatchesBruteForceAssignment) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> p(5), q(5);
        for (double& v : p) v = n01(rng);
        for (double& v : q) v = n01(rng) + 0.5;
        std::vector<int> perm{0, 1, 2, 3, 4};
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (int i = 0; i < 5; ++i) c += (p[i] - q[perm[i]]) * (p[i] - q[perm[i]]) / 5.0;
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        std::vector<Atom> pa, qa;
        for (int i = 0; i < 5; ++i) {
            pa.push_back({Vec{p[i]}, 0.2});
            qa.push_back({Vec{q[i]}, 0.2});
        }
        EXPECT_NEAR(w2_discrete_1d(pa, qa), std::sqrt(best), 1e-12);
    }
}

TEST(W2Discrete1d, Errors) {
    EXPECT_THROW(w2_discrete_1d({{Vec{0.0, 1.0}, 1.0}}, {{Vec{0.0, 1.0}, 1.0}}), std::invalid_argument);
    EXPECT_THROW(w2_discrete_1d({{Vec{0.0}, 1.0}}, {{Vec{0.0}, 0.5}}), std::invalid_argument);
}

TEST(Thin, IdentityBelowCap) {
    const OccupationMeasure mu = ou_path_measure(100, 1u << 20, 2);
    const OccupationMeasure t = thin(mu, 200);
    ASSERT_EQ(t.path_atoms().size(), mu.path_atoms().size());
    for (std::size_t i = 0; i < mu.path_atoms().size(); ++i) {
        EXPECT_EQ(t.path_atoms()[i].x[0], mu.path_atoms()[i].x[0]);
        EXPECT_EQ(t.path_atoms()[i].w, mu.path_atoms()[i].w);
    }
}

TEST(Thin, PreservesMassElapsedAndPrior) {
    OccupationMeasure mu(make_init(0.5, {{Vec{1.0}, 1.0}}, Vec{0.0}), 1u << 20);
    NormalStream rng(4);
    for (int k = 0; k < 3000; ++k) mu.push(Vec{rng.next()}, 1e-3 * (1 + k % 3));
    const OccupationMeasure t = thin(mu, 128);
    EXPECT_LE(t.path_atoms().size(), 128u);
    double raw_before = 0.0, raw_after = 0.0;
    for (const Atom& a : mu.path_atoms()) raw_before += a.w;
    for (const Atom& a : t.path_atoms()) raw_after += a.w;
    EXPECT_NEAR(raw_after, raw_before, 1e-12 * raw_before);
    EXPECT_EQ(t.elapsed(), mu.elapsed());
    ASSERT_EQ(t.prior_atoms().size(), 1u);
    EXPECT_EQ(t.prior_atoms()[0].x[0], 1.0);
    EXPECT_EQ(t.prior_weight(), mu.prior_weight());
    EXPECT_NEAR(normalized_mass(t), 1.0, 1e-12);
    // The first moment is preserved by barycentre merges.
    EXPECT_NEAR(t.mean()[0], mu.mean()[0], 1e-12);
}

TEST(Thin, TrajectoryMeasureW2AndDrift) {
    const Landscape land = make_preset("gauss-attract(1)");
    const OccupationMeasure full = ou_path_measure(2000, 1u << 20, 8);
    const OccupationMeasure t = thin(full, 200);
    for (const Vec& a : {Vec{0.0}, Vec{0.5}, Vec{-1.0}}) {
        const double w_full = full.w2_to_dirac_from_atoms(a);
        // Moment-based value: untouched by merging.
        EXPECT_LT(std::abs(t.w2_to_dirac(a) - w_full) / w_full, 1e-12);
        // Atom-based value: merges only shrink the spread.
        const double w_atoms = t.w2_to_dirac_from_atoms(a);
        EXPECT_LE(w_atoms, w_full * (1 + 1e-12));
        EXPECT_LT((w_full - w_atoms) / w_full, 1e-2);
    }
    double max_diff = 0.0, max_drift = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const Vec probe{-2.0 + 0.04 * i};
        max_diff = std::max(max_diff, norm(t.interaction_drift(land, probe) - full.interaction_drift(land, probe)));
        max_drift = std::max(max_drift, norm(full.interaction_drift(land, probe)));
    }
    EXPECT_LT(max_diff / max_drift, 1e-3);
}

TEST(Thin, CapTooSmallThrows) {
    OccupationMeasure mu = ou_path_measure(100, 1u << 20, 1);
    EXPECT_THROW(thin(mu, 8), std::invalid_argument);
    EXPECT_THROW(OccupationMeasure(ExtendedInit::at(Vec{0.0}), 4), std::invalid_argument);
}

TEST(Thin, AutomaticThinningKeepsExactMoments) {
    // W2 to a Dirac comes from running moments, so it is unaffected by thinning.
    const OccupationMeasure capped = ou_path_measure(5000, 64, 12);
    const OccupationMeasure full = ou_path_measure(5000, 1u << 20, 12);
    EXPECT_LE(capped.path_atoms().size(), 64u);
    EXPECT_EQ(capped.path_pushes(), 5000u);
    EXPECT_NEAR(capped.w2_to_dirac(Vec{0.2}), full.w2_to_dirac_from_atoms(Vec{0.2}), 1e-12);
}

TEST(Restore, RoundTripsThroughAsInit) {
    OccupationMeasure mu(make_init(1.5, {{Vec{0.2}, 1.0}}, Vec{0.0}), 256);
    NormalStream rng(2);
    for (int k = 0; k < 300; ++k) mu.push(Vec{rng.next()}, 1e-2);
    const OccupationMeasure back =
        OccupationMeasure::restore(mu.prior_weight(), mu.prior_atoms(), mu.path_atoms(), mu.cap(), Vec{0.0});
    EXPECT_NEAR(back.elapsed(), mu.elapsed(), 1e-12);
    EXPECT_NEAR(back.w2_to_dirac(Vec{0.3}), mu.w2_to_dirac_from_atoms(Vec{0.3}), 1e-12);
    const ExtendedInit as = mu.as_init(Vec{0.5});
    EXPECT_NEAR(as.time(), 1.5 + mu.elapsed(), 1e-12);
    double s = 0.0;
    for (const Atom& a : as.measure()) s += a.w;
    EXPECT_NEAR(s, 1.0, 1e-12);
}
