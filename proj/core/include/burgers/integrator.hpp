#pragma once

#include "burgers/noise.hpp"
#include "burgers/random.hpp"
#include "burgers/spectral.hpp"
#include "burgers/stats.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace burgers {

struct IntegratorConfig {
    double T = 1.0;
    double dt = 1e-3;
    std::size_t modes = 1;
    bool nonlinear = true;
    double viscosity = 1.0;
    int regularization = 0; // level of g_m; 0 means "equal to modes"
    bool record_noise = false;
    double blowup_threshold = 1e6;
    std::size_t quadrature_points = 0; // 0 picks dealiased_points(modes)

    /// Number of steps; dt is shrunk so that steps() * step() == T.
    std::size_t steps() const;
    double step() const;
    RegularizationLevel level() const;
    void validate() const;
};

/// Pre-drawn noise of one path: standard normals per step and mode, jump draws per step.
struct NoisePath {
    std::size_t modes = 0;
    std::size_t steps = 0;
    std::vector<double> xi;
    std::vector<JumpDraw> jumps;
    std::vector<std::size_t> offsets; // jumps of step n are [offsets[n], offsets[n+1])

    std::span<const double> normals(std::size_t n) const {
        return std::span<const double>(xi).subspan(n * modes, modes);
    }
    std::span<const JumpDraw> jumps_in(std::size_t n) const {
        return std::span<const JumpDraw>(jumps).subspan(offsets[n], offsets[n + 1] - offsets[n]);
    }
};

/// Exponential-Euler stepper for the Galerkin system
///   dY = (-nu A Y + P_m B_m(Y) + U) dt + Q_m^{1/2} dW_m + int G_m dN~.
///
/// Per mode k and step dt:
///   Y_k <- e^{-nu l_k dt} (Y_k + dt (B_m(Y)_k + U_k))       drift
///        + sqrt(rho_k (1 - e^{-2 nu l_k dt}) / (2 nu l_k)) xi_k  exact OU noise
///        + sum_jumps e^{-nu l_k (dt - tau)} G_k(z)             jumps at their times
///        - (1 - e^{-nu l_k dt}) / (nu l_k) (int G mu(dz))_k       integrated compensator
///
/// Not thread-safe (owns a workspace); use one instance per worker.
class GalerkinStepper {
public:
    GalerkinStepper(const IntegratorConfig& cfg, const NoiseModel& noise);

    const IntegratorConfig& config() const noexcept { return cfg_; }
    std::size_t modes() const noexcept { return cfg_.modes; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    const NoiseModel& noise() const noexcept { return noise_; }

    std::span<const double> decay() const noexcept { return decay_; }
    std::span<const double> ou_std() const noexcept { return ou_std_; }
    std::span<const double> covariance() const noexcept { return rho_; }

    /// Draws one step of noise: `modes` standard normals, then the jumps of the step.
    void draw_step(Rng& rng, std::span<double> xi, std::vector<JumpDraw>& jumps) const;
    /// Same draws as steps() consecutive draw_step calls.
    NoisePath draw_path(Rng& rng) const;

    /// Loads Y_n. Required before the variation updates of step n; advance_state
    /// loads on its own when prepare was not called for this step.
    void prepare(std::span<const double> y);

    /// Y_n -> Y_{n+1} in place. sign = -1 negates the Gaussian draws.
    /// Throws DivergenceError when ||Y|| exceeds the blow-up threshold or is not finite.
    void advance_state(std::span<double> y, std::span<const double> xi,
                       std::span<const JumpDraw> jumps, double sign = 1.0,
                       std::span<const double> control = {});

    /// eta_n -> eta_{n+1} along the prepared Y_n. If `pre` is non-empty it receives
    /// eta_n + dt DB_m(Y_n) eta_n, the quantity the BEL weights integrate.
    void advance_first_variation(std::span<double> eta, std::span<double> pre = {});
    /// zeta_n -> zeta_{n+1}; `eta` must still hold eta_n.
    void advance_second_variation(std::span<double> zeta, std::span<const double> eta,
                                  std::span<double> pre = {});

    /// Weight of xi_{n,k} in the discrete BEL integral: e^{-nu l_k dt} / ou_std_k.
    /// Exact integration by parts for this scheme.
    std::span<const double> bel_weights() const noexcept { return bel_weight_; }

private:
    void check(std::span<const double> v, const char* what) const;

    IntegratorConfig cfg_;
    NoiseModel noise_;
    std::size_t steps_;
    double dt_;
    std::vector<double> rate_; // nu lambda_k
    std::vector<double> decay_;
    std::vector<double> ou_std_;
    std::vector<double> rho_;
    std::vector<double> bel_weight_;
    std::vector<double> compensator_;
    std::vector<std::vector<double>> atom_fields_;
    JumpSampler jumps_;
    GalerkinNonlinearity nl_;
    std::vector<double> drift_;
    std::vector<double> tmp_;
    bool prepared_ = false;
};

/// Noise of the same path on the grid with twice the step: the Gaussian part of each
/// coarse step is the exact OU convolution of the two fine draws, jumps keep their times.
/// Running the coarse stepper on the result couples the two discretizations path by path.
NoisePath coarsen_noise(const NoisePath& fine, const GalerkinStepper& fine_stepper);

SpectralField step_uncontrolled(GalerkinStepper& stepper, const SpectralField& y,
                                std::span<const double> xi, std::span<const JumpDraw> jumps);
SpectralField step_controlled(GalerkinStepper& stepper, const SpectralField& x,
                              const SpectralField& u, std::span<const double> xi,
                              std::span<const JumpDraw> jumps);
SpectralField step_first_variation(GalerkinStepper& stepper, const SpectralField& eta,
                                   const SpectralField& y);
SpectralField step_second_variation(GalerkinStepper& stepper, const SpectralField& zeta,
                                    const SpectralField& eta, const SpectralField& y);

/// Control evaluated at the left end of each step: u = law(t_n, n, X_n).
using ControlLaw = std::function<void(double t, std::size_t step, std::span<const double> x,
                                      std::span<double> u)>;
/// Returns D_x v(T - t, x) for the closed loop.
using ValueGradientFn = std::function<void(double t, std::span<const double> x,
                                           std::span<double> grad)>;

struct Trajectory {
    std::size_t path_index = 0;
    std::vector<double> times;
    std::vector<SpectralField> states;
    std::vector<SpectralField> wiener_increments; // standardized, N(0, dt) per mode
    std::vector<JumpEvent> jump_log;
    std::vector<SpectralField> control_log;
};

Trajectory simulate_trajectory(const IntegratorConfig& cfg, const NoiseModel& noise,
                               const SpectralField& x, std::uint64_t seed,
                               std::size_t path_index, const ControlLaw& control = {});

/// Closed loop with U_n = G(grad(t_n, X_n), rho).
Trajectory simulate_closed_loop(const IntegratorConfig& cfg, const NoiseModel& noise,
                                const SpectralField& x, const ValueGradientFn& grad,
                                double rho, std::uint64_t seed, std::size_t path_index = 0);

struct EnsembleOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::vector<double> checkpoints;   // times in [0, T]; empty means {T}
    std::size_t keep_trajectories = 0; // first k paths are returned in full
    std::vector<double> moment_powers; // p for int ||Y||^{p-2} ||Y||_1^2
    ControlLaw control;
};

/// Per-path quantities at each checkpoint (integrals use the left-endpoint rule).
struct PathRecord {
    std::vector<double> norm2;              // ||Y(t)||^2
    std::vector<double> enstrophy_integral; // int_0^t ||Y||_1^2
    std::vector<double> sup_norm2;          // sup_{s <= t} ||Y(s)||^2
    std::vector<std::vector<double>> moment_integral; // [checkpoint][power]
};

struct CheckpointSummary {
    double t = 0.0;
    SampleStats norm2;
    SampleStats enstrophy_integral;
    SampleStats sup_norm2;
};

struct Ensemble {
    std::vector<double> times;
    std::vector<PathRecord> records;
    std::vector<CheckpointSummary> summary;
    std::vector<Trajectory> kept;
};

/// Independent paths on substreams of opts.seed; summaries are folded in path order.
Ensemble simulate_paths(const IntegratorConfig& cfg, const NoiseModel& noise,
                        const SpectralField& x, const EnsembleOptions& opts);

struct EnergyRow {
    double t = 0.0;
    double lhs = 0.0; // E[||Y(t)||^2 + 2 nu int_0^t ||Y||_1^2]
    double std_error = 0.0;
    double rhs = 0.0; // ||x||^2 + t Tr(Q_m) + t int ||G_m||^2 mu(dz)
    double relative_defect = 0.0;
    double tolerance = 0.0; // 0.02 rhs + 3 std_error
    bool pass = false;
};

struct EnergyIdentityReport {
    std::vector<EnergyRow> rows;
    double rhs_slope = 0.0; // Tr(Q_m) + int ||G_m||^2 mu(dz)
    std::size_t n_paths = 0;
    bool pass = false;
};

EnergyIdentityReport energy_identity_report(const IntegratorConfig& cfg, const NoiseModel& noise,
                                            const SpectralField& x, std::size_t n_paths,
                                            std::uint64_t seed,
                                            std::vector<double> checkpoints = {},
                                            unsigned workers = 1);

struct DefectConvergence {
    std::vector<double> dts;          // ascending, each twice the previous
    std::vector<double> defects;      // E[lhs] - rhs at time t
    std::vector<double> std_errors;
    std::vector<double> level_gaps;   // defect(dts[i+1]) - defect(dts[i]), paired per path
    std::vector<double> level_gap_std_errors;
    double order = 0.0;     // fitted on |level_gaps|; the common sampling error cancels
    double raw_order = 0.0; // fitted on |defects| directly
    bool pass = false;      // order >= 0.8
};

/// Energy-identity defect at time t for each dt. Every level runs the same paths:
/// the noise is drawn on the finest grid and coarsened with coarsen_noise.
DefectConvergence energy_defect_convergence(IntegratorConfig cfg, const NoiseModel& noise,
                                            const SpectralField& x, double t,
                                            std::vector<double> dts, std::size_t n_paths,
                                            std::uint64_t seed, unsigned workers = 1);

struct MomentRow {
    double x_norm = 0.0;
    int p = 2;
    SampleStats sup_moment;      // E sup_t ||Y||^p
    SampleStats integral_moment; // E int ||Y||^{p-2} ||Y||_1^2
    double ratio = 0.0;          // (sup + integral) / (1 + ||x||^p)
    double ratio_std_error = 0.0;
};

struct ExpMomentRow {
    double x_norm = 0.0;
    SampleStats terminal; // E exp(eps ||Y(T)||^2)
    SampleStats full;     // E exp(eps ||Y(T)||^2 + eps int ||Y||_1^2)
    double ratio = 0.0;   // terminal / exp(eps ||x||^2)
    double ratio_std_error = 0.0;
    double full_ratio = 0.0;
    bool saturated = false;
};

struct MomentReport {
    double epsilon = 0.01;
    std::vector<MomentRow> rows;
    std::vector<ExpMomentRow> exp_rows;
    std::vector<std::pair<int, double>> fitted_constant; // p -> max ratio over the grid
    std::vector<std::pair<int, double>> growth_exponent; // p -> local exponent at the top radius
    std::vector<std::pair<int, double>> growth_exponent_std_error;
    double exp_top_ratio = 0.0;       // exponential ratio at the largest unsaturated radius
    double exp_reference_ratio = 0.0; // largest ratio among the smaller radii
    double exp_tolerance = 0.0;       // 3 combined stderr of the two
    bool polynomial_pass = false;
    bool exponential_pass = false;
};

/// Moment diagnostics over starting points x = r * direction / ||direction||.
MomentReport moment_report(const IntegratorConfig& cfg, const NoiseModel& noise,
                           const SpectralField& direction, std::vector<double> radii,
                           std::vector<int> powers, double epsilon, std::size_t n_paths,
                           std::uint64_t seed, unsigned workers = 1);

struct VariationRow {
    double delta = 0.0;
    double first_error = 0.0;  // max over paths of |(Y(x+dh) - Y(x))/d - eta| / |eta|
    double second_error = 0.0; // same for (Y(x+2dh) - 2Y(x+dh) + Y(x))/d^2 against zeta
};

struct VariationConsistency {
    std::vector<VariationRow> rows; // deltas in the order given
    double eta_norm = 0.0;          // |eta^h(T)| on path 0
    double zeta_norm = 0.0;
    double first_order = 0.0;
    double second_order = 0.0;
    bool pass = false; // both orders >= 0.8
};

/// Difference quotients of the discrete flow under common noise against the first and
/// second variation along the same paths, at the horizon cfg.T.
VariationConsistency variation_consistency(const IntegratorConfig& cfg, const NoiseModel& noise,
                                           const SpectralField& x, const SpectralField& h,
                                           std::vector<double> deltas, std::size_t n_paths,
                                           std::uint64_t seed);

} // namespace burgers
