#pragma once

#include "burgers/random.hpp"
#include "burgers/spectral.hpp"

#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace burgers {

/// Trace-class covariance Q, diagonal in the sine eigenbasis (Q e_k = rho_k e_k).
class CovarianceOperator {
public:
    enum class Kind { Zero, Power, Diagonal };

    CovarianceOperator() = default;

    /// Q = A^{-alpha}. Throws DomainError unless alpha > 1/2 (trace class).
    static CovarianceOperator power(double alpha);
    /// Explicit rho_1, rho_2, ...; modes beyond the list carry zero variance.
    static CovarianceOperator diagonal(std::vector<double> eigenvalues);
    static CovarianceOperator zero() { return {}; }

    Kind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    const std::vector<double>& listed_eigenvalues() const noexcept { return rho_; }

    /// rho_k, k >= 1
    double eigenvalue(int k) const;
    std::vector<double> eigenvalues(std::size_t modes) const;
    bool invertible_on(std::size_t modes) const;

private:
    Kind kind_ = Kind::Zero;
    double alpha_ = 0.0;
    std::vector<double> rho_;
};

/// Tr(Q_m) = sum_{k <= m} rho_k.
double trace(const CovarianceOperator& q, std::size_t modes);
/// Tr(Q) over all modes: partial sum plus an integral tail bound. +inf if the tail diverges.
double trace(const CovarianceOperator& q);

struct JumpAtom {
    double mark = 0.0;   // z_j
    double weight = 0.0; // mu({z_j}), jumps per unit time
};

/// Finite-activity Levy noise: mu = sum_j w_j delta_{z_j}, G(t, z) = z * sigma_J * profile.
class LevyModel {
public:
    LevyModel() = default;
    LevyModel(std::vector<JumpAtom> atoms, double sigma_j, SpectralField profile);

    static LevyModel none() { return {}; }

    const std::vector<JumpAtom>& atoms() const noexcept { return atoms_; }
    double sigma_j() const noexcept { return sigma_j_; }
    const SpectralField& profile() const noexcept { return profile_; }

    /// Lambda = mu(Z)
    double total_mass() const noexcept;
    bool active() const noexcept { return total_mass() > 0.0 && sigma_j_ != 0.0; }
    double max_abs_mark() const noexcept;

    /// G_m(t, z) = P_m (z sigma_J profile), padded with zeros up to `modes`.
    SpectralField jump_field(double t, double mark, std::size_t modes) const;
    /// int G_m(t, z) mu(dz)
    SpectralField mean_jump(double t, std::size_t modes) const;
    /// int ||G_m(t, z)||^2 mu(dz)
    double jump_energy(double t, std::size_t modes) const;

private:
    std::vector<JumpAtom> atoms_;
    double sigma_j_ = 0.0;
    SpectralField profile_;
};

struct NoiseModel {
    CovarianceOperator covariance;
    LevyModel levy;
};

struct JumpEvent {
    double time = 0.0;
    double mark = 0.0;
    SpectralField field;
};

/// One jump inside a time step: offset tau in [0, dt) and atom index.
struct JumpDraw {
    double tau = 0.0;
    std::size_t atom = 0;
};

/// Compound-Poisson sampler for a fixed step length.
class JumpSampler {
public:
    JumpSampler(const LevyModel& levy, double dt);

    /// Appends the jumps of one step to `out` in increasing tau.
    void sample(Rng& rng, std::vector<JumpDraw>& out) const;
    double dt() const noexcept { return dt_; }

private:
    double dt_;
    bool active_;
    mutable std::poisson_distribution<int> count_;
    mutable std::discrete_distribution<std::size_t> atom_;
};

/// N(0, rho_k dt) per mode.
SpectralField sample_wiener_increment(const CovarianceOperator& q, std::size_t modes, double dt,
                                      Rng& rng);
std::vector<JumpEvent> sample_jumps(const LevyModel& levy, double t0, double dt,
                                    std::size_t modes, Rng& rng);
/// -dt * int G_m mu(dz): the drift that compensates the jump integral over one step.
SpectralField compensator_increment(const LevyModel& levy, double dt, std::size_t modes);

struct IsometryReport {
    double lhs = 0.0;       // MC estimate of E|| int int G dN~ ||^2
    double std_error = 0.0;
    double rhs = 0.0;       // int_0^T int ||G||^2 mu(dz) dt
    std::size_t n_paths = 0;
    bool pass = false;      // |lhs - rhs| <= 3 std_error
};

IsometryReport ito_isometry_check(const LevyModel& levy, double T, std::size_t modes,
                                  std::size_t n_paths, std::uint64_t seed);

struct AssumptionReport {
    double kappa = 0.0;
    double c_q = std::numeric_limits<double>::infinity();          // sup_k lambda_k^{-kappa/2} rho_k^{-1/2}
    double c_q_galerkin = std::numeric_limits<double>::infinity(); // same sup over k <= m
    bool a1 = false;            // kappa in (1/2,1) and C(Q) finite on H
    bool a1_galerkin = false;   // kappa in (1/2,1) and C(Q) finite on P_m H
    double trace = 0.0;
    double a2_sup_energy = 0.0; // sup_t int ||G||^2 mu(dz)
    std::vector<std::pair<int, double>> a2_sobolev; // (p, int_0^T int ||G||_1^p mu dz dt)
    double a3_constant = 1.0;   // C in ||x + theta G|| <= C (1 + ||x||)
    bool pass = false;
    std::vector<std::string> notes;
};

AssumptionReport verify_assumptions(const CovarianceOperator& q, const LevyModel& levy,
                                    double kappa, double T, std::size_t modes);

} // namespace burgers
