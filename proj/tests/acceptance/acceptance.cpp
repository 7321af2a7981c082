// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance lives in this file.
//
//   acceptance            run all criteria
//   acceptance 3 11       run a subset
//
// Exit status is 0 when every selected criterion passes.

#include "burgers/control.hpp"
#include "burgers/errors.hpp"
#include "burgers/hamiltonian.hpp"
#include "burgers/hjb.hpp"
#include "burgers/integrator.hpp"
#include "burgers/noise.hpp"
#include "burgers/random.hpp"
#include "burgers/semigroup.hpp"
#include "burgers/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

using namespace burgers;

namespace {

struct Outcome {
    bool pass = false;
    std::string summary;
};

std::string format(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Shared noise: Q = A^{-3/4}, atoms at +-1 with weight 1/2, sigma_J = 0.3 along e_1.
NoiseModel reference_noise(std::size_t m) {
    NoiseModel n;
    n.covariance = CovarianceOperator::power(0.75);
    n.levy = LevyModel({{1.0, 0.5}, {-1.0, 0.5}}, 0.3, SpectralField::basis(m, 1));
    return n;
}

IntegratorConfig make_config(std::size_t m, double T, bool nonlinear = true, double dt = 1e-3) {
    IntegratorConfig c;
    c.modes = m;
    c.T = T;
    c.dt = dt;
    c.nonlinear = nonlinear;
    return c;
}

// ---- 1. energy identity ---------------------------------------------------------------------

constexpr std::size_t kEnergyPaths = 10000;
constexpr std::size_t kDefectPaths = 2000;
constexpr double kMinDefectOrder = 0.8;

Outcome energy_identity() {
    const auto cfg = make_config(8, 0.5);
    const auto noise = reference_noise(8);
    const SpectralField x = SpectralField::basis(8, 1);
    const auto rep = energy_identity_report(cfg, noise, x, kEnergyPaths, 101, {0.1, 0.25, 0.5}, workers());
    bool pass = rep.pass;
    std::string s;
    for (const auto& r : rep.rows) {
        // |lhs - rhs| <= 0.02 rhs + 3 stderr, recomputed here rather than trusted.
        const bool ok = std::abs(r.lhs - r.rhs) <= 0.02 * r.rhs + 3.0 * r.std_error;
        pass = pass && ok;
        s += format("t=%.2f rel=%.4f; ", r.t, std::abs(r.lhs - r.rhs) / r.rhs);
    }
    const auto dc = energy_defect_convergence(cfg, noise, x, 0.5, {4e-3, 2e-3, 1e-3}, kDefectPaths, 102,
                                              workers());
    const bool order_ok = dc.order >= kMinDefectOrder;
    s += format("defect order %.2f (>= %.1f)", dc.order, kMinDefectOrder);
    return {pass && order_ok, s};
}

// ---- 2. Ito isometry ------------------------------------------------------------------------

Outcome ito_isometry() {
    struct Case {
        std::vector<JumpAtom> atoms;
        double sigma;
        SpectralField profile;
        double T;
    };
    const std::vector<Case> cases = {
        {{{1.0, 0.5}, {-1.0, 0.5}}, 0.3, SpectralField::basis(4, 1), 0.5},
        {{{2.0, 0.2}}, 0.5, SpectralField::basis(4, 2), 1.0},
        {{{1.0, 3.0}, {-0.5, 1.0}}, 0.1, SpectralField{1.0, 0.5, 0.25, 0.125}, 0.25},
        {{{0.3, 5.0}, {-1.5, 0.4}, {0.7, 1.0}}, 1.0, SpectralField{0.0, 1.0, 0.0, -1.0}, 0.5},
        {{{1.0, 0.05}}, 2.0, SpectralField::basis(4, 3), 2.0},
    };
    bool pass = true;
    std::string s;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto r = ito_isometry_check(LevyModel(c.atoms, c.sigma, c.profile), c.T, 4, 10000, 200 + i);
        const double z = std::abs(r.lhs - r.rhs) / r.std_error;
        pass = pass && std::abs(r.lhs - r.rhs) <= 3.0 * r.std_error;
        s += format("%.2f ", z);
    }
    return {pass, "|z| = " + s + "(<= 3)"};
}

// ---- 3. nonlinearity identities -------------------------------------------------------------

constexpr double kIdentityTol = 1e-10;

Outcome nonlinearity_identities() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_skew = 0.0, worst_swap = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = 1 + static_cast<std::size_t>(i % 16);
        const double scale = std::pow(10.0, (i % 5) - 2.0);
        SpectralField u(m), v(m);
        for (std::size_t k = 0; k < m; ++k) {
            u[k] = scale * n(rng) / (1.0 + k);
            v[k] = n(rng) / (1.0 + k);
        }
        const double u3 = std::pow(u.norm(), 3);
        const RegularizationLevel lvl{static_cast<int>(m)};
        worst_skew = std::max(worst_skew, std::abs(nonlinearity_B(u).dot(u)) / u3);
        worst_skew = std::max(worst_skew, std::abs(regularized_B_m(u, lvl).dot(u)) / u3);
        worst_skew = std::max(worst_skew, std::abs(trilinear_b(u, u, u)) / u3);
        const double lhs = trilinear_b(u, u, v), rhs = -0.5 * trilinear_b(u, v, u);
        worst_swap = std::max(worst_swap, std::abs(lhs - rhs) / (u.squared_norm() * v.norm()));
    }
    return {worst_skew <= kIdentityTol && worst_swap <= kIdentityTol,
            format("skew %.1e, swap %.1e (<= %.0e)", worst_skew, worst_swap, kIdentityTol)};
}

// ---- 4. BEL gradient ------------------------------------------------------------------------

constexpr std::size_t kLinearBelPaths = 100000;
constexpr std::size_t kNonlinearBelPaths = 20000;
constexpr double kBelRelative = 0.05;

Outcome bel_gradient_check() {
    const double t = 0.25;
    const Observable f = observables::squared_norm();
    bool pass = true;
    double worst_z = 0.0;
    {
        const auto cfg = make_config(4, t, false);
        const auto noise = reference_noise(4);
        const SpectralField x{0.8, -0.5, 0.3, 0.2};
        for (std::size_t k = 0; k < 4; ++k) {
            const auto g = bel_gradient(f, t, x, SpectralField::basis(4, static_cast<int>(k + 1)), cfg, noise,
                                        McOptions{kLinearBelPaths, 401, workers(), true});
            const double exact = 2.0 * std::exp(-2.0 * eigenvalue(static_cast<int>(k + 1)) * t) * x[k];
            const double z = std::abs(g.value - exact) / g.std_error;
            worst_z = std::max(worst_z, z);
            pass = pass && z <= 3.0;
        }
    }
    double worst_ratio = 0.0;
    {
        const auto cfg = make_config(4, t, true);
        const auto noise = reference_noise(4);
        std::mt19937_64 rng(404);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int i = 0; i < 10; ++i) {
            SpectralField x(4), h(4);
            for (std::size_t k = 0; k < 4; ++k) {
                x[k] = u(rng);
                h[k] = n(rng);
            }
            h *= 1.0 / h.norm();
            const McOptions mc{kNonlinearBelPaths, 410 + static_cast<std::uint64_t>(i), workers(), true};
            const auto bel = bel_gradient(f, t, x, h, cfg, noise, mc);
            const auto fd = gradient_fd_oracle(f, t, x, h, 1e-3, cfg, noise, mc);
            const double tol = std::max(3.0 * std::hypot(bel.std_error, fd.std_error),
                                        kBelRelative * std::abs(fd.value));
            worst_ratio = std::max(worst_ratio, std::abs(bel.value - fd.value) / tol);
            pass = pass && std::abs(bel.value - fd.value) <= tol;
        }
    }
    return {pass, format("linear max |z| %.2f (<= 3); nonlinear max |diff|/tol %.2f (<= 1)", worst_z,
                         worst_ratio)};
}

// ---- 5. BEL Hessian -------------------------------------------------------------------------

constexpr std::size_t kHessianPaths = 200000;

Outcome bel_hessian_check() {
    const double t = 0.25;
    const auto cfg = make_config(4, t, false);
    const auto noise = reference_noise(4);
    const SpectralField x{0.8, -0.5, 0.3, 0.2};
    bool pass = true;
    std::string s;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto hs = bel_hessian(observables::squared_norm(), t, x,
                                    SpectralField::basis(4, static_cast<int>(k + 1)), cfg, noise,
                                    McOptions{kHessianPaths, 501, workers(), true});
        const double exact = 2.0 * std::exp(-2.0 * eigenvalue(static_cast<int>(k + 1)) * t);
        const double z = std::abs(hs.value - exact) / hs.std_error;
        pass = pass && z <= 3.0;
        s += format("%.2f ", z);
    }
    return {pass, "|z| = " + s + "(<= 3)"};
}

// ---- grid problems (6-8) ---------------------------------------------------------------------

constexpr double kRho = 0.5;
constexpr double kHorizon = 0.5;

struct GridSetup {
    IntegratorConfig cfg = make_config(1, kHorizon);
    NoiseModel noise = reference_noise(1);
    ValueGrid grid;
    double budget = 0.0;
};

// FD grid at the default resolution; the budget is its sup distance to a half-resolution
// solve on |x| <= 1.
const GridSetup& grid_setup() {
    static const GridSetup s = [] {
        GridSetup g;
        FdGridSpec fine, half;
        half.n_pts = 101;
        g.grid = fd_hjb_solve(g.cfg, g.noise, kRho, fine);
        g.budget = compare_grids(fd_hjb_solve(g.cfg, g.noise, kRho, half), g.grid, 1.0).sup_difference;
        return g;
    }();
    return s;
}

Outcome hjb_cross_oracle() {
    const auto& g = grid_setup();
    PicardSpec ps;
    ps.slices = 40;
    ps.n_pts = 41;
    ps.n_paths = 1000;
    ps.seed = 601;
    ps.workers = workers();
    PicardReport rep;
    const ValueGrid picard = mild_picard_solve(g.cfg, g.noise, kRho, ps, &rep);
    const auto cmp = compare_grids(picard, g.grid, 1.0);
    // max(5% of sup |v|, 3 stderr), as computed by compare_grids.
    const double tol = std::max(0.05 * cmp.sup_reference, 3.0 * cmp.max_std_error);
    return {rep.converged && cmp.sup_difference <= tol,
            format("sup diff %.4f, tol %.4f, picard %zu iterations%s", cmp.sup_difference, tol,
                   rep.iterations, rep.converged ? "" : " (not converged)")};
}

Outcome verification_identity() {
    const auto& g = grid_setup();
    bool pass = true;
    std::string s;
    const SpectralField x{0.7};
    for (double u : {-0.5, -0.25, 0.0, 0.25, 0.5}) {
        const auto ctl = ControlSpec::constant_field(SpectralField{u}, kRho);
        const auto r = verification_identity_check(x, ctl, g.grid, g.cfg, g.noise,
                                                   McOptions{4000, 701, workers(), true}, g.budget);
        const double tol = std::max(0.05 * r.J, 3.0 * r.gap_std_error + g.budget);
        pass = pass && !r.unreliable && std::abs(r.gap) <= tol;
        s += format("%.2f ", std::abs(r.gap) / tol);
    }
    return {pass, "|gap|/tol = " + s + format("(<= 1), budget %.4f", g.budget)};
}

Outcome optimality() {
    const auto& g = grid_setup();
    auto candidates = constant_control_family(1, kRho);
    candidates.push_back(ControlSpec::zero(kRho));
    // An open-loop bang-bang control that switches sign halfway.
    std::vector<SpectralField> steps;
    for (std::size_t n = 0; n < g.cfg.steps(); ++n) steps.push_back(SpectralField{n < g.cfg.steps() / 2 ? -kRho : kRho});
    candidates.push_back(ControlSpec::open_loop_sequence(std::move(steps), kRho, "switching"));
    const SpectralField x{0.7};
    const auto tour = optimality_comparison(x, g.grid, kRho, candidates, g.cfg, g.noise,
                                            McOptions{4000, 801, workers(), true});
    bool tour_ok = true;
    for (const auto& row : tour.rows) tour_ok = tour_ok && tour.feedback.J <= row.J + 3.0 * row.combined_std_error;

    struct Triple {
        double x, t, tau;
    };
    const std::vector<Triple> triples = {
        {0.7, 0.0, 0.1}, {-0.4, 0.1, 0.3}, {0.0, 0.0, 0.25}, {1.0, 0.2, 0.4}, {0.3, 0.25, 0.5}};
    int ineq = 0, attained = 0;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& tr = triples[i];
        const auto r = dpp_check(SpectralField{tr.x}, tr.t, tr.tau, g.grid, kRho, g.cfg, g.noise, 2000, 0,
                                 810 + i, workers(), g.budget);
        ineq += r.inequality_pass && !r.unreliable;
        attained += r.attainment_pass;
    }
    return {tour_ok && ineq == 5,
            format("feedback J %.4f vs %zu candidates %s; DPP inequality %d/5, attainment %d/5",
                   tour.feedback.J, tour.rows.size(), tour_ok ? "not beaten" : "BEATEN", ineq, attained)};
}

// ---- 9. moments -----------------------------------------------------------------------------

Outcome moment_scaling() {
    const auto rep = moment_report(make_config(8, 0.5), reference_noise(8), SpectralField::basis(8, 1),
                                   {0.0, 0.5, 1.0, 2.0}, {2, 4}, 0.01, 2000, 901, workers());
    std::string s;
    for (std::size_t i = 0; i < rep.growth_exponent.size(); ++i) {
        s += format("p=%d C=%.3f s=%.2f; ", rep.fitted_constant[i].first, rep.fitted_constant[i].second,
                    rep.growth_exponent[i].second);
    }
    s += format("exp ratio %.4f vs %.4f + %.4f", rep.exp_top_ratio, rep.exp_reference_ratio, rep.exp_tolerance);
    return {rep.polynomial_pass && rep.exponential_pass, s};
}

// ---- 10. variation consistency --------------------------------------------------------------

constexpr double kMinVariationOrder = 0.8;

Outcome variation_consistency_check() {
    const auto r = variation_consistency(make_config(4, 0.1), reference_noise(4), SpectralField{2.0, 1.0, 0.0, 0.0},
                                         SpectralField{0.5, -0.5, 0.5, 0.5}, {1e-2, 1e-3, 1e-4}, 8, 1001);
    return {r.first_order >= kMinVariationOrder && r.second_order >= kMinVariationOrder,
            format("first order %.3f, second order %.3f (>= %.1f)", r.first_order, r.second_order,
                   kMinVariationOrder)};
}

// ---- 11. Hamiltonian ------------------------------------------------------------------------

constexpr double kHamiltonianIdentityTol = 1e-12;
constexpr double kBruteForceTol = 1e-6;

Outcome hamiltonian_exactness() {
    std::mt19937_64 rng(1101);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_identity = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t m = 1 + static_cast<std::size_t>(i % 8);
        SpectralField p(m);
        for (std::size_t k = 0; k < m; ++k) p[k] = 2.0 * n(rng);
        const double rho = 3.0 * u(rng);
        const SpectralField g = feedback_G(p, rho);
        const double err = std::abs(hamiltonian_F(p, rho) - (g.dot(p) + 0.5 * g.squared_norm()));
        worst_identity = std::max(worst_identity, err / (1.0 + p.squared_norm()));
    }
    double worst_beat = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = 1 + static_cast<std::size_t>(i % 3);
        SpectralField p(m);
        for (std::size_t k = 0; k < m; ++k) p[k] = 2.0 * n(rng);
        const double rho = 3.0 * u(rng);
        const double F = hamiltonian_F(p, rho);
        for (int s = 0; s < 10000; ++s) {
            SpectralField U(m);
            for (std::size_t k = 0; k < m; ++k) U[k] = n(rng);
            U *= rho * std::pow(u(rng), 1.0 / static_cast<double>(m)) / U.norm();
            worst_beat = std::max(worst_beat, F - (U.dot(p) + 0.5 * U.squared_norm()));
        }
    }
    return {worst_identity <= kHamiltonianIdentityTol && worst_beat <= kBruteForceTol,
            format("identity %.1e (<= %.0e), brute force beats F by %.1e (<= %.0e)", worst_identity,
                   kHamiltonianIdentityTol, worst_beat, kBruteForceTol)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "energy identity", 120, energy_identity},
    {2, "Ito isometry", 60, ito_isometry},
    {3, "nonlinearity identities", 10, nonlinearity_identities},
    {4, "BEL gradient", 300, bel_gradient_check},
    {5, "BEL Hessian", 300, bel_hessian_check},
    {6, "HJB cross-oracle", 600, hjb_cross_oracle},
    {7, "verification identity", 600, verification_identity},
    {8, "optimality and DPP", 600, optimality},
    {9, "moment scaling", 300, moment_scaling},
    {10, "variation consistency", 120, variation_consistency_check},
    {11, "Hamiltonian and feedback", 10, hamiltonian_exactness},
};

} // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        // The runtime budget is part of each criterion.
        const bool pass = o.pass && secs <= c.budget_seconds;
        std::printf("criterion %2d %-26s %s  %s  [%.1fs of %.0fs%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                    o.summary.c_str(), secs, c.budget_seconds, secs > c.budget_seconds ? ", over budget" : "");
        std::fflush(stdout);
        failures += !pass;
    }
    return failures == 0 ? 0 : 1;
}
