#pragma once

#include "burgers/integrator.hpp"
#include "burgers/noise.hpp"
#include "burgers/spectral.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace burgers {

struct Observable {
    std::string label;
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient; // optional

    bool has_gradient() const noexcept { return static_cast<bool>(gradient); }
};

namespace observables {
Observable squared_norm(); // ||x||^2, the terminal cost
Observable constant(double c);
Observable f_m(RegularizationLevel lvl);
Observable phi_m(RegularizationLevel lvl);
Observable linear(SpectralField a); // (a, x)
} // namespace observables

/// Monte Carlo budget. With antithetic sampling, paths come in (xi, -xi) pairs sharing
/// their jumps and one sample is the pair average, so n_paths / 2 samples enter the stderr.
struct McOptions {
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    bool antithetic = true;
};

struct BelEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double t = 0.0;
    SpectralField h;
};

/// (S_t f)(x) = E f(Y(t, x)); t = 0 returns f(x) with zero error and no simulation.
/// cfg supplies dt, modes and the drift; its horizon is replaced by t.
BelEstimate semigroup_apply(const Observable& f, double t, const SpectralField& x,
                            const IntegratorConfig& cfg, const NoiseModel& noise,
                            const McOptions& mc);

/// (D_x S_t f(x), h) = (1/t) E[f(Y(t)) int_0^t (Q^{-1/2} eta^h, dW)].
///
/// The stochastic integral is taken over the Gaussian draws that drove the state, with
/// the weights of GalerkinStepper::bel_weights, which make the estimator unbiased for
/// the discrete chain. Throws DomainError for t <= 0 or a degenerate Q_m.
BelEstimate bel_gradient(const Observable& f, double t, const SpectralField& x,
                         const SpectralField& h, const IntegratorConfig& cfg,
                         const NoiseModel& noise, const McOptions& mc);

/// D_x^2 S_t f(x)[h, h] = E[f(Y) I(zeta^h) + (D f(Y), eta^h(t)) I(eta^h)] with I(.) the
/// weighted integral of bel_gradient. Needs f.gradient.
BelEstimate bel_hessian(const Observable& f, double t, const SpectralField& x,
                        const SpectralField& h, const IntegratorConfig& cfg,
                        const NoiseModel& noise, const McOptions& mc);

/// [S_t f(x + delta h) - S_t f(x - delta h)] / (2 delta), both sides on the same noise.
BelEstimate gradient_fd_oracle(const Observable& f, double t, const SpectralField& x,
                               const SpectralField& h, double delta, const IntegratorConfig& cfg,
                               const NoiseModel& noise, const McOptions& mc);

/// BEL estimate of every coordinate of D_x S_t f(x), all from the same paths.
std::vector<BelEstimate> bel_gradient_vector(const Observable& f, double t,
                                             const SpectralField& x, const IntegratorConfig& cfg,
                                             const NoiseModel& noise, const McOptions& mc);

struct SmoothingRow {
    double t = 0.0;
    double gradient_norm = 0.0;
    double gradient_norm_std_error = 0.0;
    double scaled = 0.0; // t^{(1+kappa)/2} ||D_x S_t f(x)||
};

struct SmoothingTable {
    double kappa = 0.0;
    std::vector<SmoothingRow> rows;
    bool non_increasing = false; // trend flag only
};

SmoothingTable smoothing_probe(const Observable& f, const SpectralField& x,
                               std::vector<double> times, double kappa,
                               const IntegratorConfig& cfg, const NoiseModel& noise,
                               const McOptions& mc);

struct SemigroupPropertyReport {
    double direct = 0.0; // S_{t+s} f(x)
    double direct_std_error = 0.0;
    double nested = 0.0; // S_t (S_s f)(x), inner expectation by n_inner paths
    double nested_std_error = 0.0;
    bool pass = false;   // within 3 combined stderr
};

SemigroupPropertyReport semigroup_property_check(const Observable& f, double t, double s,
                                                 const SpectralField& x,
                                                 const IntegratorConfig& cfg,
                                                 const NoiseModel& noise, std::size_t n_outer,
                                                 std::size_t n_inner, std::uint64_t seed,
                                                 unsigned workers = 1);

} // namespace burgers
