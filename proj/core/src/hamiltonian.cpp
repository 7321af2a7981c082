#include "burgers/hamiltonian.hpp"

#include "burgers/errors.hpp"

#include <cmath>
#include <numeric>

namespace burgers {

namespace {

double norm_of(std::span<const double> p) {
    return std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
}

void check_rho(double rho) {
    if (!(rho >= 0.0)) throw DomainError("control radius rho must be >= 0");
}

} // namespace

double hamiltonian_F(std::span<const double> p, double rho) {
    check_rho(rho);
    const double n = norm_of(p);
    if (n <= rho) return -0.5 * n * n;
    return -rho * n + 0.5 * rho * rho;
}

double hamiltonian_F(const SpectralField& p, double rho) { return hamiltonian_F(p.coeffs(), rho); }

void feedback_G(std::span<const double> p, double rho, std::span<double> u) {
    check_rho(rho);
    const double n = norm_of(p);
    const double scale = n <= rho ? -1.0 : -rho / n;
    for (std::size_t k = 0; k < p.size(); ++k) u[k] = scale * p[k];
}

SpectralField feedback_G(const SpectralField& p, double rho) {
    SpectralField u(p.modes());
    feedback_G(p.coeffs(), rho, u.coeffs());
    return u;
}

} // namespace burgers
