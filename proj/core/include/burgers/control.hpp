#pragma once

#include "burgers/hjb.hpp"
#include "burgers/integrator.hpp"
#include "burgers/noise.hpp"
#include "burgers/semigroup.hpp"
#include "burgers/spectral.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace burgers {

/// chi(a) = a^2 for a > 0, 0 otherwise.
double chi(double a);

/// U if ||U|| <= rho, else rho U / ||U||.
SpectralField admissible_projection(const SpectralField& u, double rho);
/// In place; returns true when U was clipped.
bool admissible_projection(std::span<double> u, double rho);

/// A control law in one of four forms. Realized values are clipped to the ball of
/// radius rho; clips are counted and logged by the experiments that use the spec.
struct ControlSpec {
    enum class Kind { Zero, Constant, OpenLoop, Feedback };

    Kind kind = Kind::Zero;
    double rho = 0.0;
    std::string label = "zero";
    SpectralField constant;
    std::vector<SpectralField> open_loop; // one field per step; the last one repeats
    std::shared_ptr<const FeedbackPolicy> policy;

    static ControlSpec zero(double rho = 0.0);
    static ControlSpec constant_field(SpectralField u, double rho, std::string label = "constant");
    static ControlSpec open_loop_sequence(std::vector<SpectralField> u, double rho,
                                          std::string label = "open_loop");
    static ControlSpec feedback(const ValueGrid& grid, double rho, std::string label = "feedback");

    /// Writes U(t, x) into u; returns true when clipping was needed.
    bool realize(double t, std::size_t step, std::span<const double> x, std::span<double> u) const;
};

/// Which cost is integrated: the enstrophy cost int ||D X||^2 + 1/2 ||U||^2 dt + ||X(T)||^2,
/// or its regularized Galerkin version with phi_m and f_m, the one the HJB grids solve.
enum class CostKind { Enstrophy, Regularized };

struct CostReport {
    double J = 0.0;
    double std_error = 0.0;
    double running = 0.0;
    double control = 0.0;
    double terminal = 0.0;
    std::size_t n_paths = 0;
    std::size_t clipped = 0;
};

/// Monte Carlo cost with left-endpoint quadrature. Paths use the same substreams as
/// simulate_paths, so two calls with one seed share their noise.
CostReport cost_functional(const SpectralField& x, const ControlSpec& control,
                           const IntegratorConfig& cfg, const NoiseModel& noise,
                           const McOptions& mc, CostKind kind = CostKind::Enstrophy);

struct VerificationReport {
    double J = 0.0; // regularized cost of the control
    double J_std_error = 0.0;
    double value = 0.0;      // v(T, x)
    double correction = 0.0; // 1/2 E int ||U + D v||^2 - chi(||D v|| - rho) dt
    double correction_std_error = 0.0;
    double rhs = 0.0;
    double gap = 0.0;        // J - rhs, paired per path
    double gap_std_error = 0.0;
    double grid_budget = 0.0;
    double tolerance = 0.0;  // max(0.05 J, 3 gap_std_error + grid_budget)
    double escape_fraction = 0.0;
    bool unreliable = false; // more than 10% of paths left the grid interior
    bool pass = false;
};

VerificationReport verification_identity_check(const SpectralField& x, const ControlSpec& control,
                                               const ValueGrid& grid, const IntegratorConfig& cfg,
                                               const NoiseModel& noise, const McOptions& mc,
                                               double grid_budget = 0.0);

/// Constant controls on a symmetric stencil of the rho-ball: 9 evenly spaced points of
/// [-rho, rho] for m = 1; the origin and 8 directions on the sphere for m = 2.
std::vector<ControlSpec> constant_control_family(std::size_t modes, double rho);

struct FamilyValue {
    std::string label;
    double value = 0.0;
    double std_error = 0.0;
};

struct DppReport {
    double t = 0.0;
    double tau = 0.0;
    double V = 0.0; // v(T - t, x)
    std::vector<FamilyValue> family;
    double family_min = 0.0;
    double family_min_std_error = 0.0;
    FamilyValue feedback;
    double grid_budget = 0.0;
    double escape_fraction = 0.0;
    bool inequality_pass = false; // V <= family min + 3 stderr + budget
    bool attainment_pass = false; // feedback <= every member + 3 combined stderr + budget
    bool unreliable = false;
    bool pass = false;
};

/// Bellman's principle on [t, tau]: E[int_t^tau (phi_m + 1/2 ||U||^2) ds + V(tau, X(tau))]
/// for each constant control of the family and for the grid feedback. V(tau, .) is read
/// from the grid (n_inner = 0) or estimated by nested Monte Carlo of the feedback cost
/// from (tau, X(tau)) with n_inner paths.
DppReport dpp_check(const SpectralField& x, double t, double tau, const ValueGrid& grid,
                    double rho, const IntegratorConfig& cfg, const NoiseModel& noise,
                    std::size_t n_outer, std::size_t n_inner, std::uint64_t seed,
                    unsigned workers = 1, double grid_budget = 0.0);

struct RankingRow {
    std::string label;
    double J = 0.0;
    double std_error = 0.0;
    double excess = 0.0;              // J_candidate - J_feedback
    double excess_paired_std_error = 0.0;
    double combined_std_error = 0.0;
    bool feedback_not_beaten = false; // J_feedback <= J + 3 combined stderr
};

struct OptimalityReport {
    RankingRow feedback;
    std::vector<RankingRow> rows; // candidates, sorted by J
    bool pass = false;
};

/// Tournament of the grid feedback against admissible candidates, all on common noise.
OptimalityReport optimality_comparison(const SpectralField& x, const ValueGrid& grid, double rho,
                                       const std::vector<ControlSpec>& candidates,
                                       const IntegratorConfig& cfg, const NoiseModel& noise,
                                       const McOptions& mc,
                                       CostKind kind = CostKind::Regularized);

} // namespace burgers
