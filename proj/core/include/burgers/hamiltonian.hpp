#pragma once

#include "burgers/spectral.hpp"

#include <span>

namespace burgers {

/// Control radius rho of the admissible ball ||U|| <= rho.
struct HamiltonianParams {
    double rho = 0.0;
};

/// F(p) = inf_{||U|| <= rho} (U, p) + 1/2 ||U||^2
///      = -1/2 ||p||^2          if ||p|| <= rho
///      = -rho ||p|| + rho^2/2  otherwise.
/// Throws DomainError for rho < 0.
double hamiltonian_F(std::span<const double> p, double rho);
double hamiltonian_F(const SpectralField& p, double rho);

/// The minimizer: -p inside the ball, -rho p / ||p|| outside (closed-ball tie-break).
void feedback_G(std::span<const double> p, double rho, std::span<double> u);
SpectralField feedback_G(const SpectralField& p, double rho);

} // namespace burgers
