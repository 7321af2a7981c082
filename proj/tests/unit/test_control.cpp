#include "burgers/control.hpp"
#include "burgers/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

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

struct Solved {
    ValueGrid grid;
    double budget = 0.0;
};

// Shared m = 1 grid for the verification, DPP and ranking tests.
const Solved& solved_grid() {
    static const Solved s = [] {
        Solved out;
        FdGridSpec fine, half;
        half.n_pts = 101;
        out.grid = fd_hjb_solve(config(1, 0.5), test_noise(1), 0.5, fine);
        const ValueGrid coarse = fd_hjb_solve(config(1, 0.5), test_noise(1), 0.5, half);
        out.budget = compare_grids(coarse, out.grid, 1.0).sup_difference;
        return out;
    }();
    return s;
}

} // namespace

TEST(Chi, PositivePartSquared) {
    EXPECT_EQ(chi(-1.0), 0.0);
    EXPECT_EQ(chi(0.0), 0.0);
    EXPECT_EQ(chi(1.5), 2.25);
}

TEST(AdmissibleProjection, ClipsOnlyOutsideTheBall) {
    EXPECT_EQ(admissible_projection(SpectralField{0.3, 0.4}, 1.0), (SpectralField{0.3, 0.4}));
    const SpectralField p = admissible_projection(SpectralField{3.0, 4.0}, 2.0);
    EXPECT_NEAR(p[0], 1.2, 1e-15);
    EXPECT_NEAR(p[1], 1.6, 1e-15);
    std::vector<double> u{0.0, 2.0};
    EXPECT_TRUE(admissible_projection(std::span<double>(u), 1.0));
    EXPECT_FALSE(admissible_projection(std::span<double>(u), 1.0));
}

TEST(ControlSpec, RealizationClipsToTheBall) {
    const ControlSpec c = ControlSpec::constant_field(SpectralField{2.0}, 0.5);
    std::vector<double> x{0.0}, u(1);
    EXPECT_TRUE(c.realize(0.0, 0, x, u));
    EXPECT_DOUBLE_EQ(u[0], 0.5);
    const ControlSpec z = ControlSpec::zero(0.5);
    EXPECT_FALSE(z.realize(0.0, 0, x, u));
    EXPECT_EQ(u[0], 0.0);
}

TEST(ConstantFamily, StencilSizesAndRadius) {
    const auto f1 = constant_control_family(1, 0.5);
    EXPECT_EQ(f1.size(), 9u);
    const auto f2 = constant_control_family(2, 0.5);
    EXPECT_EQ(f2.size(), 9u);
    for (const auto& c : f2) EXPECT_LE(c.constant.norm(), 0.5 + 1e-15);
}

TEST(CostFunctional, ZeroProblemCostsNothing) {
    const auto r = cost_functional(SpectralField{0.0}, ControlSpec::zero(), config(1, 0.2, false),
                                   NoiseModel{}, McOptions{16, 1, 1, true});
    EXPECT_EQ(r.J, 0.0);
    EXPECT_EQ(r.std_error, 0.0);
}

TEST(CostFunctional, OrnsteinUhlenbeckDiscreteOracle) {
    // Exact OU steps: E X_n^2 = a^n x^2 + s (1 - a^n), a = exp(-2 lambda dt), s = rho / (2 lambda).
    const auto cfg = config(1, 0.2, false);
    NoiseModel n;
    n.covariance = CovarianceOperator::power(0.75);
    const double x = 0.7, lam = eigenvalue(1), rho = n.covariance.eigenvalue(1);
    const double dt = cfg.step(), a = std::exp(-2 * lam * dt), s = rho / (2 * lam);
    double running = 0.0, an = 1.0;
    for (std::size_t i = 0; i < cfg.steps(); ++i) {
        running += dt * lam * (an * x * x + s * (1 - an));
        an *= a;
    }
    const double terminal = an * x * x + s * (1 - an);
    const auto r = cost_functional(SpectralField{x}, ControlSpec::zero(), cfg, n,
                                   McOptions{20000, 5, 1, true});
    EXPECT_NEAR(r.J, running + terminal, 4 * r.std_error + 1e-12);
    EXPECT_NEAR(r.running + r.control + r.terminal, r.J, 1e-12);
    EXPECT_EQ(r.control, 0.0);
}

TEST(CostFunctional, PartsAreNonNegative) {
    const auto r = cost_functional(SpectralField{0.5}, ControlSpec::constant_field(SpectralField{0.3}, 0.5),
                                   config(1, 0.2), test_noise(1), McOptions{500, 2, 1, true},
                                   CostKind::Regularized);
    EXPECT_GE(r.running, 0.0);
    EXPECT_NEAR(r.control, 0.5 * 0.09 * 0.2, 1e-9);
    EXPECT_GE(r.terminal, 0.0);
    EXPECT_NEAR(r.running + r.control + r.terminal, r.J, 1e-12);
}

TEST(CostFunctional, ZeroConstantMatchesZeroControlOnSharedNoise) {
    const McOptions mc{400, 9, 1, true};
    const auto a = cost_functional(SpectralField{0.4}, ControlSpec::zero(0.5), config(1, 0.2),
                                   test_noise(1), mc);
    const auto b = cost_functional(SpectralField{0.4}, ControlSpec::constant_field(SpectralField{0.0}, 0.5),
                                   config(1, 0.2), test_noise(1), mc);
    EXPECT_EQ(a.J, b.J);
}

TEST(CostFunctional, WorkerCountDoesNotChangeTheEstimate) {
    const auto a = cost_functional(SpectralField{0.4}, ControlSpec::zero(), config(1, 0.1),
                                   test_noise(1), McOptions{300, 4, 1, true});
    const auto b = cost_functional(SpectralField{0.4}, ControlSpec::zero(), config(1, 0.1),
                                   test_noise(1), McOptions{300, 4, 3, true});
    EXPECT_EQ(a.J, b.J);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Verification, ConstantAndFeedbackControls) {
    const auto& s = solved_grid();
    const McOptions mc{4000, 11, 1, true};
    for (const auto& ctl : {ControlSpec::constant_field(SpectralField{0.25}, 0.5),
                            ControlSpec::constant_field(SpectralField{-0.5}, 0.5),
                            ControlSpec::feedback(s.grid, 0.5)}) {
        const auto r = verification_identity_check(SpectralField{0.7}, ctl, s.grid, config(1, 0.5),
                                                   test_noise(1), mc, s.budget);
        EXPECT_FALSE(r.unreliable) << ctl.label;
        EXPECT_TRUE(r.pass) << ctl.label << ": gap " << r.gap << " tol " << r.tolerance;
        EXPECT_GE(r.correction, -1e-12) << ctl.label;
    }
}

TEST(Verification, FeedbackCorrectionIsSmall) {
    const auto& s = solved_grid();
    const auto r = verification_identity_check(SpectralField{0.7}, ControlSpec::feedback(s.grid, 0.5),
                                               s.grid, config(1, 0.5), test_noise(1),
                                               McOptions{2000, 12, 1, true}, s.budget);
    const auto c = verification_identity_check(SpectralField{0.7},
                                               ControlSpec::constant_field(SpectralField{0.5}, 0.5),
                                               s.grid, config(1, 0.5), test_noise(1),
                                               McOptions{2000, 12, 1, true}, s.budget);
    EXPECT_LT(r.correction, c.correction);
}

TEST(Dpp, InequalityAndAttainment) {
    const auto& s = solved_grid();
    for (const auto& [t, tau] : {std::pair{0.0, 0.1}, std::pair{0.1, 0.3}}) {
        const auto r = dpp_check(SpectralField{0.7}, t, tau, s.grid, 0.5, config(1, 0.5),
                                 test_noise(1), 2000, 0, 21, 1, s.budget);
        EXPECT_TRUE(r.inequality_pass) << t << " " << tau;
        EXPECT_TRUE(r.attainment_pass) << t << " " << tau;
        EXPECT_EQ(r.family.size(), 9u);
    }
}

TEST(Dpp, RejectsBadInterval) {
    const auto& s = solved_grid();
    EXPECT_THROW(dpp_check(SpectralField{0.7}, 0.3, 0.1, s.grid, 0.5, config(1, 0.5), test_noise(1),
                           10, 0, 1),
                 DomainError);
}

TEST(Optimality, FeedbackIsNotBeaten) {
    const auto& s = solved_grid();
    auto cands = constant_control_family(1, 0.5);
    cands.push_back(cands.front());
    const auto r = optimality_comparison(SpectralField{0.7}, s.grid, 0.5, cands, config(1, 0.5),
                                         test_noise(1), McOptions{2000, 31, 1, true});
    EXPECT_TRUE(r.pass);
    ASSERT_EQ(r.rows.size(), cands.size());
    for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i - 1].J, r.rows[i].J);
    // A duplicated candidate sees the same noise and gets the same cost.
    int dup = 0;
    for (const auto& row : r.rows) dup += row.label == cands.front().label;
    EXPECT_EQ(dup, 2);
    double first = -1.0;
    for (const auto& row : r.rows) {
        if (row.label != cands.front().label) continue;
        if (first < 0.0) first = row.J;
        else EXPECT_EQ(row.J, first);
    }
}
