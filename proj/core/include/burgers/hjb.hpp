#pragma once

#include "burgers/integrator.hpp"
#include "burgers/noise.hpp"
#include "burgers/spectral.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace burgers {

/// v(t, .) on the box [-R, R]^m (m <= 2) at a sequence of time slices, in the
/// initial-value convention: slice 0 holds the terminal cost, the last slice v(T, .).
/// Node (i_0, ..., i_{m-1}) has coordinates -R + i_k h and flat index
/// i_0 + n i_1 (the first mode varies fastest).
class ValueGrid {
public:
    ValueGrid() = default;
    ValueGrid(std::size_t modes, double R, std::size_t n_pts);

    std::size_t modes() const noexcept { return m_; }
    double radius() const noexcept { return R_; }
    std::size_t points_per_axis() const noexcept { return n_; }
    std::size_t nodes() const noexcept { return nodes_; }
    double spacing() const noexcept { return h_; }

    double coordinate(std::size_t i) const noexcept { return -R_ + static_cast<double>(i) * h_; }
    /// Coordinates of a flat node index.
    std::vector<double> node(std::size_t flat) const;
    /// Per-axis indices of a flat node index.
    std::vector<std::size_t> unflatten(std::size_t flat) const;

    const std::vector<double>& times() const noexcept { return times_; }
    std::size_t slices() const noexcept { return times_.size(); }
    const std::vector<double>& slice(std::size_t s) const { return values_.at(s); }
    /// Appends a slice; gradients are computed on the spot (central differences,
    /// one-sided on the boundary). Throws DivergenceError on non-finite values.
    void push_slice(double t, std::vector<double> values);

    /// Per-node gradient of slice s: [flat * m + k].
    const std::vector<double>& slice_gradient(std::size_t s) const { return grads_.at(s); }
    /// Central-difference node gradients of arbitrary node values (one-sided, second
    /// order, on the boundary).
    std::vector<double> node_gradients(const std::vector<double>& v) const;
    /// Multilinear interpolation of arbitrary node values, clamped to the box.
    double interpolate(const std::vector<double>& v, std::span<const double> x,
                       bool* outside = nullptr) const;

    /// Monte Carlo standard errors per node and slice (Picard grids only).
    std::vector<std::vector<double>> std_errors;

    /// Multilinear interpolation in x, linear in t. Points outside the box are clamped;
    /// `outside` (if given) reports whether that happened.
    double value(double t, std::span<const double> x, bool* outside = nullptr) const;
    double value_at_slice(std::size_t s, std::span<const double> x, bool* outside = nullptr) const;
    /// Interpolated central-difference gradient. Points outside [-R+h, R-h]^m are moved to
    /// the nearest point of that box and flagged.
    void gradient(double t, std::span<const double> x, std::span<double> out,
                  bool* outside = nullptr) const;
    void gradient_at_slice(std::size_t s, std::span<const double> x, std::span<double> out,
                           bool* outside = nullptr) const;

private:
    struct Bracket {
        std::size_t lo[2] = {0, 0};
        double w[2] = {0.0, 0.0};
    };
    Bracket bracket(std::span<const double> x, double lo, double hi, bool* outside) const;
    template <typename Fn>
    void interpolate(const Bracket& b, Fn&& fn) const;
    void time_bracket(double t, std::size_t& s0, double& w) const;

    std::size_t m_ = 0;
    double R_ = 0.0;
    std::size_t n_ = 0;
    std::size_t nodes_ = 0;
    double h_ = 0.0;
    std::vector<double> times_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<double>> grads_;
};

/// Terminal and running cost of the grid problem. Empty functions select f_m and phi_m.
struct HjbCosts {
    std::function<double(std::span<const double>)> terminal;
    std::function<double(std::span<const double>)> running;
};

struct IntegroResult {
    std::vector<double> values;
    std::size_t clamped_jumps = 0; // jump targets outside the box
};

/// L v on the nodes of slice s:
///   sum_k 1/2 rho_k d_kk v + (-nu A x + B_m(x)) . D v + sum_j w_j [v(x + G_j) - v - G_j . D v].
/// Diffusion by central second differences (the neighbour's stencil on the boundary),
/// drift by upwind differences, jump targets by multilinear interpolation with clamping.
IntegroResult integro_operator_apply(const ValueGrid& grid, std::size_t slice,
                                     const IntegratorConfig& cfg, const NoiseModel& noise);

struct FdGridSpec {
    double R = 2.0;
    std::size_t n_pts = 0;        // 0: 201 for m = 1, 101 for m = 2
    double dt_pde = 0.0;          // 0: largest stable step times 0.8
    std::size_t max_snapshots = 100;
    HjbCosts costs;
};

struct FdSolveInfo {
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t clamped_jumps = 0;
    double stability_limit = 0.0; // 0.4 h^2 / max rho_k
    double cfl_limit = 0.0;       // explicit monotonicity bound
};

/// Step size and stability bounds of an FD solve, without solving. Throws
/// ConfigError("hjb.dt_pde") for a requested step above either bound.
FdSolveInfo fd_stability(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                         const FdGridSpec& spec);

/// Explicit marching of v_t = L v + F(D v) + phi_m, v(0) = f_m, up to cfg.T.
/// The control term is written as (U . D v + 1/2 ||U||^2) with U = G(D v) from central
/// differences and D v upwinded along U. Throws ConfigError("hjb.dt_pde") when the step
/// breaks the stability bounds, DomainError for m > 2.
ValueGrid fd_hjb_solve(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                       const FdGridSpec& spec, FdSolveInfo* info = nullptr);

struct PicardSpec {
    double R = 2.0;
    std::size_t n_pts = 41;
    std::size_t slices = 20;
    std::size_t n_paths = 1000;
    std::size_t max_iter = 20;
    double tol = 1e-4;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    HjbCosts costs;
};

struct PicardReport {
    std::vector<double> sup_changes;
    std::size_t iterations = 0;
    bool converged = false;
    bool stalled = false; // sup change failed to decrease for 3 consecutive iterations
    double max_std_error = 0.0;
    std::size_t clamped_gradients = 0;
};

/// Fixed-point iteration of the mild form
///   v(t) = S_t f_m + int_0^t S_{t-s}[F(D v(s)) + phi_m] ds
/// on slice times t_i = i T / slices. Every node uses the same path substreams (common
/// random numbers across nodes and iterations); the Duhamel integral is the trapezoid
/// rule on the slices. Gradients of the previous iterate are interpolated off-grid.
ValueGrid mild_picard_solve(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                            const PicardSpec& spec, PicardReport* report = nullptr);

/// D_x v(t, x) from the grid; see ValueGrid::gradient.
SpectralField value_gradient(const ValueGrid& grid, double t, const SpectralField& x,
                             bool* outside = nullptr);

/// U(t, x) = G(D_x v(T - t, x), rho) with T the last slice time.
class FeedbackPolicy {
public:
    FeedbackPolicy(const ValueGrid& grid, double rho);

    double rho() const noexcept { return rho_; }
    double horizon() const noexcept { return T_; }
    void operator()(double t, std::span<const double> x, std::span<double> u,
                    bool* outside = nullptr) const;
    SpectralField operator()(double t, const SpectralField& x) const;

private:
    const ValueGrid* grid_;
    double rho_;
    double T_;
};

FeedbackPolicy extract_policy(const ValueGrid& grid, double rho);

struct GridComparison {
    double sup_difference = 0.0; // over nodes of `coarse` with max |x_k| <= radius, final slice
    double sup_reference = 0.0;  // sup |fine| over the same nodes
    double max_std_error = 0.0;  // from coarse.std_errors when present
    double tolerance = 0.0;      // max(0.05 sup_reference, 3 max_std_error)
    bool pass = false;
};

/// Compares the last slices of two grids at the nodes of `coarse` inside the radius.
GridComparison compare_grids(const ValueGrid& coarse, const ValueGrid& fine, double radius);

/// Header "m,R,n_pts,slices", the geometry, a column line "t,v0,v1,...", then one row per
/// slice with nodes flattened as i0 + n_pts * i1. Leading '#' lines are skipped on read.
void write_value_grid_csv(const ValueGrid& grid, std::ostream& os);
ValueGrid read_value_grid_csv(std::istream& is);

} // namespace burgers
