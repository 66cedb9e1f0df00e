#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sidlab/landscape.hpp"

using namespace sidlab;

namespace {

const char* kPresets1d[] = {"ou",  "flat", "dw", "quad-attract(1)", "quad-attract(2.5)", "gauss-attract(1)", "gauss-repel(3)",
                            "dw+quad-attract(1)", "ou+gauss-attract(0.5)"};

Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) {
        Vec p = x, m = x;
        p[i] += h;
        m[i] -= h;
        g[i] = (f(p) - f(m)) / (2 * h);
    }
    return g;
}

}  // namespace

TEST(PotentialEval, OuQuadratic) {
    const auto [v, g] = make_preset("ou").potential_eval(Vec{2.0});
    EXPECT_DOUBLE_EQ(v, 2.0);
    EXPECT_DOUBLE_EQ(g[0], 2.0);
}

TEST(PotentialEval, DoubleWellBottomAndSaddle) {
    const Landscape dw = make_preset("dw");
    EXPECT_EQ(dw.potential_eval(Vec{1.0}).first, 0.0);
    EXPECT_EQ(dw.potential_eval(Vec{1.0}).second[0], 0.0);
    EXPECT_DOUBLE_EQ(dw.potential_eval(Vec{0.0}).first, 0.25);
    EXPECT_EQ(dw.potential_eval(Vec{0.0}).second[0], 0.0);
}

TEST(PotentialEval, DimensionMismatchThrows) {
    EXPECT_THROW(make_preset("ou", 2).potential_eval(Vec{1.0}), std::invalid_argument);
    EXPECT_THROW(make_preset("ou").interaction_eval(Vec{1.0, 2.0}), std::invalid_argument);
}

TEST(InteractionEval, QuadAttract) {
    const auto [f, g] = make_preset("quad-attract(1)").interaction_eval(Vec{3.0});
    EXPECT_DOUBLE_EQ(f, 4.5);
    EXPECT_DOUBLE_EQ(g[0], 3.0);
}

TEST(InteractionEval, GaussAttractFormula) {
    const auto [f, g] = make_preset("gauss-attract(1)").interaction_eval(Vec{1.0});
    EXPECT_NEAR(f, 1.0 - std::exp(-0.5), 1e-15);
    EXPECT_NEAR(g[0], std::exp(-0.5), 1e-15);
}

TEST(InteractionEval, ExactlyZeroAtOriginForEveryPreset) {
    for (const char* p : kPresets1d) {
        const auto [f, g] = make_preset(p).interaction_eval(Vec{0.0});
        EXPECT_EQ(f, 0.0) << p;
        EXPECT_EQ(g[0], 0.0) << p;
    }
    for (const char* p : {"ou", "quad-attract(2)", "gauss-repel(1)"}) {
        const auto [f, g] = make_preset(p, 3).interaction_eval(Vec::zeros(3));
        EXPECT_EQ(f, 0.0);
        EXPECT_EQ(norm(g), 0.0);
    }
}

TEST(EffectivePotential, Examples) {
    const auto [w, g] = make_preset("quad-attract(1)").effective_potential(Vec{0.0}, Vec{1.0});
    EXPECT_DOUBLE_EQ(w, 1.0);
    EXPECT_DOUBLE_EQ(g[0], 2.0);
    const auto [wd, gd] = make_preset("dw").effective_potential(Vec{-1.0}, Vec{0.0});
    EXPECT_DOUBLE_EQ(wd, 0.25);
    EXPECT_EQ(gd[0], 0.0);
    for (const char* p : kPresets1d) {
        const Landscape land = make_preset(p);
        const Vec a{0.37};
        const auto [wa, ga] = land.effective_potential(a, a);
        EXPECT_EQ(wa, 0.0) << p;
        EXPECT_DOUBLE_EQ(ga[0], land.grad_v(a)[0] + land.grad_f(Vec{0.0})[0]) << p;
    }
}

TEST(EffectivePotential, InvariantUnderConstantShiftOfV) {
    const Landscape land = make_preset("dw+gauss-attract(1)");
    const Landscape shifted = land.with_confinement_offset(17.25);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const Vec a{u(rng)}, x{u(rng)};
        const auto [w1, g1] = land.effective_potential(a, x);
        const auto [w2, g2] = shifted.effective_potential(a, x);
        EXPECT_NEAR(w1, w2, 1e-12);
        EXPECT_EQ(g1[0], g2[0]);
    }
}

TEST(Presets, AnalyticGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto check = [&](const Landscape& land) {
        for (int i = 0; i < 1000; ++i) {
            Vec x(land.dim());
            for (double& c : x) c = u(rng);
            for (int which = 0; which < 2; ++which) {
                const auto& field = which == 0 ? land.confinement() : land.interaction();
                const Vec g = field.gradient(x);
                const Vec fd = central_diff(field.value, x, 1e-5);
                const double scale = std::max(norm(g), 1e-2);
                EXPECT_LT(norm(g - fd) / scale, 1e-6) << land.name() << " at x[0]=" << x[0];
            }
        }
    };
    for (const char* p : kPresets1d) check(make_preset(p));
    for (const char* p : {"ou", "flat", "quad-attract(1)", "gauss-attract(2)", "gauss-repel(1)"}) check(make_preset(p, 2));
}

TEST(Presets, GradFBoundRespectedBySampling) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (const char* p : {"gauss-attract(1)", "gauss-repel(3)", "ou+gauss-attract(0.5)"}) {
        const Landscape land = make_preset(p);
        const auto bound = land.grad_f_bounded();
        ASSERT_TRUE(bound.has_value()) << p;
        for (int i = 0; i < 10000; ++i) EXPECT_LE(norm(land.grad_f(Vec{u(rng)})), *bound * (1 + 1e-12));
    }
}

TEST(Presets, CatalogRecordsScope) {
    EXPECT_EQ(make_preset("ou").catalog().grad_v_lipschitz.scope, Validity::Scope::kGlobal);
    const Validity dw = make_preset("dw").catalog().grad_v_lipschitz;
    EXPECT_EQ(dw.scope, Validity::Scope::kOnBall);
    EXPECT_DOUBLE_EQ(dw.constant, 11.0);
    EXPECT_EQ(make_preset("quad-attract(1)").catalog().grad_f_bounded.scope, Validity::Scope::kOnBall);
    EXPECT_FALSE(make_preset("quad-attract(1)").grad_f_bounded().has_value());
}

TEST(Presets, ParsingErrors) {
    EXPECT_THROW(make_preset("nope"), std::invalid_argument);
    EXPECT_THROW(make_preset("quad-attract"), std::invalid_argument);
    EXPECT_THROW(make_preset("quad-attract(-1)"), std::invalid_argument);
    EXPECT_THROW(make_preset("ou+dw"), std::invalid_argument);
    EXPECT_THROW(make_preset("dw", 2), std::invalid_argument);
    EXPECT_THROW(make_preset("ou+"), std::invalid_argument);
}

TEST(EstimateLipschitz, LinearFields) {
    const Landscape ou = make_preset("ou");
    const double k = estimate_lipschitz([&](const Vec& x) { return ou.grad_v(x); }, Box{Vec{-2.0}, Vec{2.0}}, 10000, 1);
    EXPECT_NEAR(k, 1.0, 1e-3);
    const Landscape q = make_preset("quad-attract(1)", 2);
    const double kf =
        estimate_lipschitz([&](const Vec& u) { return q.grad_f(u); }, Box{Vec{-2.0, -2.0}, Vec{2.0, 2.0}}, 10000, 1);
    EXPECT_NEAR(kf, 1.0, 1e-3);
}

TEST(EstimateLipschitz, DoubleWellMatchesAnalyticMaximum) {
    // max over [-2, 2] of |V''(x)| = |3x^2 - 1|, found by scanning the closed form.
    double analytic = 0.0;
    for (int i = 0; i <= 40000; ++i) {
        const double x = -2.0 + 4.0 * i / 40000.0;
        analytic = std::max(analytic, std::abs(3 * x * x - 1));
    }
    const Landscape dw = make_preset("dw");
    const double k = estimate_lipschitz([&](const Vec& x) { return dw.grad_v(x); }, Box{Vec{-2.0}, Vec{2.0}}, 100000, 9);
    EXPECT_LE(k, analytic * (1 + 1e-6));
    EXPECT_GT(k, 0.95 * analytic);
}

TEST(EstimateLipschitz, Errors) {
    auto id = [](const Vec& x) { return x; };
    EXPECT_THROW(estimate_lipschitz(id, Box{Vec{0.0}, Vec{0.0}}, 10, 1), std::invalid_argument);
    EXPECT_THROW(estimate_lipschitz(id, Box{Vec{0.0}, Vec{1.0}}, 1, 1), std::invalid_argument);
}

TEST(StrongAttraction, OuIsOne) {
    const auto r = check_strong_attraction(make_preset("ou"), Vec{0.0}, 0.5, 0.5, 2000, 1);
    EXPECT_NEAR(r.k_est, 1.0, 1e-9);
    EXPECT_TRUE(r.pass);
}

TEST(StrongAttraction, QuadAttractAgainstGridOracle) {
    // Oracle: min over x = +-0.1 and a grid of atoms |y| <= 0.1 of (x^2 + x(x - y)) / x^2.
    double oracle = std::numeric_limits<double>::infinity();
    for (double x : {-0.1, 0.1})
        for (int j = -200; j <= 200; ++j) {
            const double y = 0.1 * j / 200.0;
            oracle = std::min(oracle, (x * x + x * (x - y)) / (x * x));
        }
    const auto r = check_strong_attraction(make_preset("quad-attract(1)"), Vec{0.0}, 0.1, 0.1, 20000, 4,
                                           AttractionSampling::kSphere);
    EXPECT_TRUE(r.pass);
    EXPECT_GE(r.k_est, 1.0 - 1e-9);
    EXPECT_LE(r.k_est, 2.0);
    EXPECT_NEAR(r.k_est, oracle, 0.02);
}

TEST(StrongAttraction, LiteralBallSamplingCanFailForQuadAttract) {
    // With x drawn inside the ball, |x| << |y| makes the quotient unbounded below.
    const auto r = check_strong_attraction(make_preset("quad-attract(1)"), Vec{0.0}, 0.1, 0.1, 20000, 4,
                                           AttractionSampling::kBall);
    EXPECT_LT(r.k_est, 1.0);
}

TEST(StrongAttraction, StrongRepulsionFails) {
    const auto r = check_strong_attraction(make_preset("ou+gauss-repel(10)"), Vec{0.0}, 0.5, 0.5, 2000, 2);
    EXPECT_LT(r.k_est, 0.0);
    EXPECT_FALSE(r.pass);
}

TEST(StrongAttraction, DeterministicForSeed) {
    const Landscape land = make_preset("dw+gauss-attract(1)");
    const auto r1 = check_strong_attraction(land, Vec{-1.0}, 0.3, 0.3, 3000, 77);
    const auto r2 = check_strong_attraction(land, Vec{-1.0}, 0.3, 0.3, 3000, 77);
    EXPECT_EQ(r1.k_est, r2.k_est);
}

TEST(Clamp, IdenticalInsideBall) {
    const Landscape dw = make_preset("dw+gauss-attract(1)");
    const Landscape c = clamp_landscape(dw, 1.5, 0.5);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 1000; ++i) {
        const Vec x{u(rng)};
        EXPECT_EQ(c.v(x), dw.v(x));
        EXPECT_EQ(c.grad_v(x)[0], dw.grad_v(x)[0]);
        EXPECT_EQ(c.f(x), dw.f(x));
        EXPECT_EQ(c.grad_f(x)[0], dw.grad_f(x)[0]);
    }
}

TEST(Clamp, GradientCapOutsideShell) {
    ClampOptions opts;
    opts.cap_stiffness_v = 2.0;
    const Landscape c = clamp_landscape(make_preset("dw"), 1.5, 0.5, opts);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(2.0, 50.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double r = u(rng) * (i % 2 ? 1 : -1);
        worst = std::max(worst, std::abs(c.grad_v(Vec{r})[0]) / std::abs(r));
    }
    EXPECT_LE(worst, 2.0 * (1 + 1e-12));
}

TEST(Clamp, ContinuousAcrossShellEdges) {
    const Landscape dw = make_preset("dw");
    const Landscape c = clamp_landscape(dw, 1.5, 0.5);
    for (double edge : {1.5, 2.0, -1.5, -2.0}) {
        const double h = 1e-10;
        EXPECT_LT(std::abs(c.v(Vec{edge + h}) - c.v(Vec{edge - h})), 1e-8);
        EXPECT_LT(std::abs(c.grad_v(Vec{edge + h})[0] - c.grad_v(Vec{edge - h})[0]), 1e-6);
    }
    // Scan along the ray for jumps.
    double max_jump = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double x = 1.4 + 0.7 * i / 100000.0, y = x + 0.7 / 100000.0;
        max_jump = std::max(max_jump, std::abs(c.v(Vec{y}) - c.v(Vec{x})));
    }
    EXPECT_LT(max_jump, 1e-4);
}

TEST(Clamp, Errors) {
    EXPECT_THROW(clamp_landscape(make_preset("ou"), 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(clamp_landscape(make_preset("ou"), 1.0, -1.0), std::invalid_argument);
}
