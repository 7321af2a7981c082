#include "burgers/errors.hpp"
#include "burgers/noise.hpp"
#include "burgers/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace burgers;

namespace {

LevyModel symmetric_atoms(double sigma_j, std::size_t modes = 1, double w = 0.5) {
    return LevyModel({{1.0, w}, {-1.0, w}}, sigma_j, SpectralField::basis(modes, 1));
}

} // namespace

TEST(Covariance, PartialTraceOfPowerLaw) {
    EXPECT_NEAR(trace(CovarianceOperator::power(0.75), 4), 0.3000907060923717, 1e-13);
    EXPECT_DOUBLE_EQ(trace(CovarianceOperator::diagonal({0.1}), 1), 0.1);
}

TEST(Covariance, TraceIsMonotoneInModes) {
    const auto q = CovarianceOperator::power(0.6);
    for (std::size_t m = 1; m < 40; ++m) EXPECT_LT(trace(q, m), trace(q, m + 1));
    EXPECT_TRUE(std::isfinite(trace(q)));
    EXPECT_GT(trace(q), trace(q, 1000));
}

TEST(Covariance, RejectsNonTraceClass) {
    EXPECT_THROW(CovarianceOperator::power(0.5), DomainError);
    EXPECT_THROW(CovarianceOperator::power(0.2), DomainError);
    EXPECT_THROW(CovarianceOperator::diagonal({0.1, -1.0}), DomainError);
}

TEST(Covariance, ZeroAndListedEigenvalues) {
    const auto q = CovarianceOperator::diagonal({0.2, 0.0});
    EXPECT_FALSE(q.invertible_on(2));
    EXPECT_TRUE(q.invertible_on(1));
    EXPECT_EQ(q.eigenvalue(5), 0.0);
    EXPECT_EQ(trace(CovarianceOperator::zero(), 10), 0.0);
}

TEST(WienerIncrement, ZeroStepGivesZero) {
    Rng rng(1);
    const auto w = sample_wiener_increment(CovarianceOperator::power(0.75), 4, 0.0, rng);
    for (double v : w.values()) EXPECT_EQ(v, 0.0);
}

TEST(WienerIncrement, VarianceAndIndependence) {
    const auto q = CovarianceOperator::power(0.75);
    const double dt = 0.01;
    const std::size_t n = 100000;
    Rng rng(2);
    std::vector<double> s0(n), s1(n), cross(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto w = sample_wiener_increment(q, 2, dt, rng);
        s0[i] = w[0] * w[0];
        s1[i] = w[1] * w[1];
        cross[i] = w[0] * w[1];
    }
    const auto v0 = sample_stats(s0), v1 = sample_stats(s1), c = sample_stats(cross);
    EXPECT_LE(std::abs(v0.mean - q.eigenvalue(1) * dt), 3.0 * v0.std_error);
    EXPECT_LE(std::abs(v1.mean - q.eigenvalue(2) * dt), 3.0 * v1.std_error);
    EXPECT_LE(std::abs(c.mean), 3.0 * c.std_error);
}

TEST(Jumps, NoAtomsNoJumps) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) EXPECT_TRUE(sample_jumps(LevyModel::none(), 0.0, 0.5, 2, rng).empty());
}

TEST(Jumps, PoissonCountsMarksAndTimes) {
    // total mass 2, dt = 0.5: one jump per step on average
    const LevyModel levy({{1.0, 1.5}, {-2.0, 0.5}}, 0.3, SpectralField::basis(2, 1));
    const std::size_t n = 100000;
    Rng rng(4);
    std::vector<double> counts(n), first(n);
    std::vector<double> bins(6, 0.0);
    std::size_t marks = 0, positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t0 = 0.5 * static_cast<double>(i);
        const auto ev = sample_jumps(levy, t0, 0.5, 2, rng);
        counts[i] = static_cast<double>(ev.size());
        bins[std::min<std::size_t>(ev.size(), 5)] += 1.0;
        for (const auto& e : ev) {
            ASSERT_GE(e.time, t0);
            ASSERT_LT(e.time, t0 + 0.5);
            ++marks;
            if (e.mark > 0) ++positive;
            EXPECT_NEAR(e.field[0], e.mark * 0.3, 1e-15);
        }
    }
    const auto c = sample_stats(counts);
    EXPECT_LE(std::abs(c.mean - 1.0), 3.0 * c.std_error);

    const double p = 0.75;
    const double frac = static_cast<double>(positive) / static_cast<double>(marks);
    EXPECT_LE(std::abs(frac - p), 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(marks)));

    // Chi-square goodness of fit against Poisson(1) on {0,..,4, >=5}; 20.515 is the
    // 0.999 quantile with 5 degrees of freedom.
    double chi2 = 0.0, cdf = 0.0;
    for (int k = 0; k < 6; ++k) {
        double pk;
        if (k < 5) {
            pk = std::exp(-1.0) / std::tgamma(k + 1.0);
            cdf += pk;
        } else {
            pk = 1.0 - cdf;
        }
        const double expected = pk * static_cast<double>(n);
        chi2 += (bins[k] - expected) * (bins[k] - expected) / expected;
    }
    EXPECT_LT(chi2, 20.515);
}

TEST(Jumps, SameSeedSameDraws) {
    const auto levy = symmetric_atoms(0.3);
    Rng a(77), b(77);
    for (int i = 0; i < 200; ++i) {
        const auto ea = sample_jumps(levy, 0.0, 0.1, 1, a);
        const auto eb = sample_jumps(levy, 0.0, 0.1, 1, b);
        ASSERT_EQ(ea.size(), eb.size());
        for (std::size_t j = 0; j < ea.size(); ++j) {
            EXPECT_EQ(ea[j].time, eb[j].time);
            EXPECT_EQ(ea[j].mark, eb[j].mark);
        }
    }
}

TEST(Compensator, SymmetricAtomsAndSingleAtom) {
    const auto sym = compensator_increment(LevyModel({{-1.0, 1.0}, {1.0, 1.0}}, 0.7, SpectralField::basis(2, 1)), 0.1, 2);
    EXPECT_NEAR(sym[0], 0.0, 1e-15);
    EXPECT_EQ(compensator_increment(LevyModel::none(), 0.1, 2)[0], 0.0);
    const auto one = compensator_increment(LevyModel({{1.0, 2.0}}, 0.5, SpectralField::basis(1, 1)), 0.1, 1);
    EXPECT_NEAR(one[0], -0.1, 1e-15);
}

TEST(Isometry, NoJumpsBothSidesZero) {
    const auto r = ito_isometry_check(LevyModel::none(), 1.0, 2, 1000, 1);
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_EQ(r.rhs, 0.0);
    EXPECT_TRUE(r.pass);
}

TEST(Isometry, AnalyticRightHandSide) {
    const auto r = ito_isometry_check(symmetric_atoms(1.0), 1.0, 1, 10000, 5);
    EXPECT_NEAR(r.rhs, 1.0, 1e-14);
    EXPECT_TRUE(r.pass) << r.lhs << " +- " << r.std_error;
    const auto r2 = ito_isometry_check(symmetric_atoms(2.0), 1.0, 1, 100, 5);
    EXPECT_NEAR(r2.rhs, 4.0 * r.rhs, 1e-13);
}

TEST(Isometry, SeveralParameterSets) {
    const LevyModel cases[] = {
        symmetric_atoms(0.3),
        LevyModel({{2.0, 0.2}}, 0.5, SpectralField::basis(3, 2)),
        LevyModel({{1.0, 1.0}, {-0.5, 3.0}}, 0.4, SpectralField{0.6, 0.8}),
        symmetric_atoms(1.5, 2, 2.0),
        LevyModel({{0.25, 4.0}}, 1.0, SpectralField::basis(1, 1)),
    };
    std::uint64_t seed = 10;
    for (const auto& levy : cases) {
        const auto r = ito_isometry_check(levy, 0.7, 3, 10000, seed++);
        EXPECT_TRUE(r.pass) << r.lhs << " vs " << r.rhs << " +- " << r.std_error;
    }
}

TEST(Assumptions, PowerCovarianceConstant) {
    const auto rep = verify_assumptions(CovarianceOperator::power(0.75), LevyModel::none(), 0.75, 1.0, 8);
    EXPECT_NEAR(rep.c_q, 1.0, 1e-12);
    EXPECT_TRUE(rep.a1);
    EXPECT_EQ(rep.a2_sup_energy, 0.0);
    for (const auto& [p, v] : rep.a2_sobolev) EXPECT_EQ(v, 0.0);
}

TEST(Assumptions, JumpGrowthConstant) {
    const LevyModel levy({{2.0, 0.5}, {-1.0, 0.5}}, 0.3, SpectralField::basis(4, 1));
    const auto rep = verify_assumptions(CovarianceOperator::power(0.75), levy, 0.75, 1.0, 4);
    EXPECT_NEAR(rep.a3_constant, 1.0 + 0.3 * 2.0, 1e-14);
    EXPECT_TRUE(rep.pass);
}

TEST(Assumptions, KappaOutsideRangeFails) {
    const auto rep = verify_assumptions(CovarianceOperator::power(0.75), LevyModel::none(), 0.4, 1.0, 4);
    EXPECT_FALSE(rep.a1);
}
