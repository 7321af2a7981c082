#include "burgers/errors.hpp"
#include "burgers/hamiltonian.hpp"
#include "burgers/hjb.hpp"
#include "burgers/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace burgers;

namespace {

IntegratorConfig config(std::size_t m, double T, bool nonlinear = true) {
    IntegratorConfig c;
    c.modes = m;
    c.T = T;
    c.dt = 1e-3;
    c.nonlinear = nonlinear;
    return c;
}

NoiseModel test_noise(std::size_t m) {
    NoiseModel n;
    n.covariance = CovarianceOperator::power(0.75);
    n.levy = LevyModel({{1.0, 0.5}, {-1.0, 0.5}}, 0.3, SpectralField::basis(m, 1));
    return n;
}

ValueGrid grid_from(std::size_t m, double R, std::size_t n, double (*fn)(std::span<const double>)) {
    ValueGrid g(m, R, n);
    std::vector<double> v(g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) v[i] = fn(g.node(i));
    g.push_slice(0.0, v);
    return g;
}

double zero_cost(std::span<const double>) { return 0.0; }

} // namespace

// ---- Hamiltonian and feedback --------------------------------------------------------------

TEST(Hamiltonian, ClosedFormValues) {
    EXPECT_EQ(hamiltonian_F(SpectralField{0.0, 0.0}, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(hamiltonian_F(SpectralField{3.0, 4.0}, 2.0), -8.0);
    EXPECT_THROW(hamiltonian_F(SpectralField{1.0}, -0.1), DomainError);
}

TEST(Hamiltonian, ContinuousAtSwitchingSurface) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        SpectralField p{n(rng), n(rng), n(rng)};
        const double rho = 0.1 + std::abs(n(rng));
        p *= rho / p.norm();
        const double inner = -0.5 * p.squared_norm();
        const double outer = -rho * p.norm() + 0.5 * rho * rho;
        EXPECT_NEAR(inner, outer, 1e-12);
        EXPECT_NEAR(hamiltonian_F(p, rho), inner, 1e-12);
    }
}

TEST(Hamiltonian, ConcaveAlongRays) {
    const SpectralField p{0.6, -0.8};
    const double rho = 0.7, d = 1e-3;
    for (int i = 1; i < 3000; ++i) {
        const double a = i * 1e-3;
        const double second = hamiltonian_F(p * (a + d), rho) - 2.0 * hamiltonian_F(p * a, rho) +
                              hamiltonian_F(p * (a - d), rho);
        EXPECT_LE(second, 1e-12);
    }
}

TEST(Feedback, BranchesAndIdentity) {
    EXPECT_EQ(feedback_G(SpectralField{0.0, 0.0}, 1.0), (SpectralField{0.0, 0.0}));
    EXPECT_EQ(feedback_G(SpectralField{0.3, -0.4}, 1.0), (SpectralField{-0.3, 0.4}));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const SpectralField p{n(rng), n(rng), n(rng)};
        const double rho = std::abs(n(rng));
        const SpectralField g = feedback_G(p, rho);
        EXPECT_LE(g.norm(), rho * (1.0 + 1e-15));
        EXPECT_NEAR(hamiltonian_F(p, rho), g.dot(p) + 0.5 * g.squared_norm(), 1e-12);
    }
}

TEST(Feedback, SampledControlsNeverBeatHamiltonian) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const SpectralField p{n(rng), n(rng)};
        const double rho = 2.0 * u(rng);
        const double F = hamiltonian_F(p, rho);
        double best = 1e300;
        for (int s = 0; s < 10000; ++s) {
            const double r = rho * std::sqrt(u(rng)), a = 2.0 * kPi * u(rng);
            const SpectralField U{r * std::cos(a), r * std::sin(a)};
            const double v = U.dot(p) + 0.5 * U.squared_norm();
            EXPECT_GE(v, F - 1e-6);
            best = std::min(best, v);
        }
        EXPECT_LE(best - F, 0.05 * (1.0 + std::abs(F)));
    }
}

// ---- grids ----------------------------------------------------------------------------------

TEST(ValueGrid, CentralGradientOfQuadratic) {
    const ValueGrid g = grid_from(2, 2.0, 41, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; });
    for (const auto& x : {std::vector<double>{0.35, -0.72}, std::vector<double>{1.2, 0.05}}) {
        std::vector<double> grad(2);
        g.gradient_at_slice(0, x, grad);
        EXPECT_NEAR(grad[0], 2.0 * x[0], 1e-12);
        EXPECT_NEAR(grad[1], 2.0 * x[1], 1e-12);
    }
    const ValueGrid c = grid_from(1, 1.0, 11, [](std::span<const double>) { return 3.0; });
    std::vector<double> grad(1);
    c.gradient_at_slice(0, std::vector<double>{0.33}, grad);
    EXPECT_EQ(grad[0], 0.0);
}

TEST(ValueGrid, CsvRoundTrip) {
    ValueGrid g = grid_from(2, 1.5, 7, [](std::span<const double> x) { return std::sin(x[0]) + x[1]; });
    std::vector<double> v(g.nodes(), 0.25);
    g.push_slice(0.5, v);
    std::stringstream ss;
    ss << "# provenance line\n";
    write_value_grid_csv(g, ss);
    const ValueGrid back = read_value_grid_csv(ss);
    ASSERT_EQ(back.slices(), 2u);
    EXPECT_EQ(back.modes(), 2u);
    EXPECT_EQ(back.points_per_axis(), 7u);
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t i = 0; i < g.nodes(); ++i) EXPECT_NEAR(back.slice(s)[i], g.slice(s)[i], 1e-15);
    }
}

TEST(ValueGrid, RejectsLargeDimension) { EXPECT_THROW(ValueGrid(3, 1.0, 11), DomainError); }

TEST(IntegroOperator, ConstantFunctionIsAnnihilated) {
    const ValueGrid g = grid_from(2, 2.0, 21, [](std::span<const double>) { return 1.7; });
    const auto r = integro_operator_apply(g, 0, config(2, 1.0), test_noise(2));
    for (double v : r.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(IntegroOperator, LinearFunctionSeesOnlyTheDrift) {
    const ValueGrid g = grid_from(2, 2.0, 21, [](std::span<const double> x) { return x[0]; });
    const auto r = integro_operator_apply(g, 0, config(2, 1.0), NoiseModel{});
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        const auto x = g.node(i);
        const double drift = -eigenvalue(1) * x[0] + regularized_B_m(SpectralField{x[0], x[1]}, {2})[0];
        EXPECT_NEAR(r.values[i], drift, 1e-10);
    }
}

TEST(IntegroOperator, JumpTermOfQuadraticIsExact) {
    // Marks times sigma_J land on grid nodes, so interpolation is exact.
    const ValueGrid g = grid_from(1, 2.0, 41, [](std::span<const double> x) { return x[0] * x[0]; });
    NoiseModel with;
    with.levy = LevyModel({{1.0, 0.5}, {-2.0, 0.25}}, 0.3, SpectralField::basis(1, 1));
    const auto cfg = config(1, 1.0);
    const auto a = integro_operator_apply(g, 0, cfg, with);
    const auto b = integro_operator_apply(g, 0, cfg, NoiseModel{});
    const double expected = 0.5 * 0.09 + 0.25 * 0.36;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        if (std::abs(g.node(i)[0]) > 1.3) continue;
        EXPECT_NEAR(a.values[i] - b.values[i], expected, 1e-10);
    }
}

// ---- solvers --------------------------------------------------------------------------------

TEST(FdSolve, ZeroCostsGiveZeroValue) {
    FdGridSpec s;
    s.n_pts = 41;
    s.costs.terminal = zero_cost;
    s.costs.running = zero_cost;
    const ValueGrid g = fd_hjb_solve(config(1, 0.2), test_noise(1), 0.5, s);
    for (std::size_t sl = 0; sl < g.slices(); ++sl) {
        for (double v : g.slice(sl)) EXPECT_EQ(v, 0.0);
    }
}

TEST(FdSolve, InitialSliceIsTerminalCost) {
    FdGridSpec s;
    s.n_pts = 41;
    const ValueGrid g = fd_hjb_solve(config(1, 0.1), test_noise(1), 0.5, s);
    EXPECT_EQ(g.times().front(), 0.0);
    EXPECT_NEAR(g.times().back(), 0.1, 1e-12);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        EXPECT_NEAR(g.slice(0)[i], f_m(SpectralField(g.node(i)), {1}), 1e-15);
    }
}

TEST(FdSolve, UnstableStepIsRejectedBeforeCompute) {
    FdGridSpec s;
    s.n_pts = 201;
    s.dt_pde = 0.01;
    EXPECT_THROW(fd_stability(config(1, 0.5), test_noise(1), 0.5, s), ConfigError);
    EXPECT_THROW(fd_hjb_solve(config(1, 0.5), test_noise(1), 0.5, s), ConfigError);
}

TEST(FdSolve, OrnsteinUhlenbeckFeynmanKac) {
    // E X_T^2 for the linear flow; upwind drift makes the scheme first order in h.
    NoiseModel n;
    n.covariance = CovarianceOperator::power(0.75);
    const double T = 0.1;
    const double lam = eigenvalue(1), rho = n.covariance.eigenvalue(1);
    const double e = std::exp(-2 * lam * T);
    auto error = [&](std::size_t pts, double* sup) {
        FdGridSpec s;
        s.n_pts = pts;
        s.costs.terminal = [](std::span<const double> x) { return x[0] * x[0]; };
        s.costs.running = zero_cost;
        const ValueGrid g = fd_hjb_solve(config(1, T, false), n, 0.0, s);
        double err = 0.0;
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const double x = g.node(i)[0];
            if (std::abs(x) > 1.0) continue;
            const double exact = e * x * x + rho * (1 - e) / (2 * lam);
            *sup = std::max(*sup, exact);
            err = std::max(err, std::abs(g.slice(g.slices() - 1)[i] - exact));
        }
        return err;
    };
    double sup = 0.0;
    const double coarse = error(201, &sup), fine = error(401, &sup);
    EXPECT_LE(coarse, 0.03 * sup);
    EXPECT_LE(fine, 0.6 * coarse);
}

TEST(FdSolve, MoreControlNeverRaisesTheValue) {
    FdGridSpec s;
    s.n_pts = 101;
    const ValueGrid free = fd_hjb_solve(config(1, 0.3), test_noise(1), 0.0, s);
    const ValueGrid ctl = fd_hjb_solve(config(1, 0.3), test_noise(1), 0.5, s);
    const auto& a = free.slice(free.slices() - 1);
    const auto& b = ctl.slice(ctl.slices() - 1);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i], a[i] + 1e-6);
}

TEST(Picard, ZeroRadiusConvergesAtOnceAndMatchesFd) {
    PicardSpec ps;
    ps.n_pts = 21;
    ps.slices = 10;
    ps.n_paths = 400;
    ps.seed = 3;
    PicardReport rep;
    const auto cfg = config(1, 0.2);
    const ValueGrid p = mild_picard_solve(cfg, test_noise(1), 0.0, ps, &rep);
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.iterations, 1u);
    FdGridSpec s;
    const ValueGrid f = fd_hjb_solve(cfg, test_noise(1), 0.0, s);
    const auto cmp = compare_grids(p, f, 1.0);
    EXPECT_TRUE(cmp.pass) << cmp.sup_difference << " > " << cmp.tolerance;
}

TEST(Picard, ControlledProblemConvergesAndMatchesFd) {
    PicardSpec ps;
    ps.n_pts = 21;
    ps.slices = 10;
    ps.n_paths = 400;
    ps.seed = 4;
    PicardReport rep;
    const auto cfg = config(1, 0.2);
    const ValueGrid p = mild_picard_solve(cfg, test_noise(1), 0.5, ps, &rep);
    EXPECT_TRUE(rep.converged);
    for (std::size_t i = 1; i < rep.sup_changes.size(); ++i) {
        EXPECT_LT(rep.sup_changes[i], 0.8 * rep.sup_changes[i - 1]);
    }
    const ValueGrid f = fd_hjb_solve(cfg, test_noise(1), 0.5, FdGridSpec{});
    EXPECT_TRUE(compare_grids(p, f, 1.0).pass);
}

// ---- policy ---------------------------------------------------------------------------------

TEST(Policy, RadiusBoundSignAndTimeReversal) {
    const double rho = 0.5, T = 0.3;
    const ValueGrid g = fd_hjb_solve(config(1, T), test_noise(1), rho, FdGridSpec{});
    const FeedbackPolicy pol = extract_policy(g, rho);
    const FeedbackPolicy none = extract_policy(g, 0.0);
    for (std::size_t i = 1; i + 1 < g.nodes(); ++i) {
        const SpectralField x(g.node(i));
        for (double t : {0.0, 0.1, T}) {
            const SpectralField u = pol(t, x);
            EXPECT_LE(u.norm(), rho + 1e-15);
            EXPECT_EQ(none(t, x).norm(), 0.0);
            const SpectralField grad = value_gradient(g, T - t, x);
            if (std::abs(grad[0]) > 1e-12) {
                EXPECT_LT(u[0] * grad[0], 0.0);
            }
        }
        // At t = T the policy acts on the terminal-cost gradient.
        const SpectralField at_end = pol(T, x);
        const SpectralField expect = feedback_G(value_gradient(g, 0.0, x), rho);
        EXPECT_NEAR(at_end[0], expect[0], 1e-14);
        const SpectralField at_start = pol(0.0, x);
        EXPECT_NEAR(at_start[0], feedback_G(value_gradient(g, T, x), rho)[0], 1e-14);
    }
}

TEST(Policy, OutsideTheGridIsFlagged) {
    const ValueGrid g = fd_hjb_solve(config(1, 0.1), test_noise(1), 0.5, FdGridSpec{});
    bool outside = false;
    value_gradient(g, 0.05, SpectralField{5.0}, &outside);
    EXPECT_TRUE(outside);
    outside = false;
    value_gradient(g, 0.05, SpectralField{0.5}, &outside);
    EXPECT_FALSE(outside);
}

TEST(CompareGrids, IdenticalGridsAgree) {
    const ValueGrid g = fd_hjb_solve(config(1, 0.1), test_noise(1), 0.5, FdGridSpec{});
    const auto c = compare_grids(g, g, 1.0);
    EXPECT_LE(c.sup_difference, 1e-14);
    EXPECT_TRUE(c.pass);
}
