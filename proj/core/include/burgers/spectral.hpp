#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace burgers {

inline constexpr double kPi = 3.14159265358979323846;

/// Coefficients (u, e_k), k = 1..m, of a field on (0,1) in the Dirichlet sine basis
/// e_k(xi) = sqrt(2) sin(k pi xi). Index i holds the coefficient of e_{i+1}.
class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(std::size_t modes) : c_(modes, 0.0) {}
    explicit SpectralField(std::vector<double> coeffs) : c_(std::move(coeffs)) {}
    SpectralField(std::initializer_list<double> coeffs) : c_(coeffs) {}

    /// amplitude * e_k embedded in `modes` modes (k is 1-based).
    static SpectralField basis(std::size_t modes, int k, double amplitude = 1.0);

    std::size_t modes() const noexcept { return c_.size(); }
    double operator[](std::size_t i) const { return c_[i]; }
    double& operator[](std::size_t i) { return c_[i]; }
    std::span<const double> coeffs() const noexcept { return c_; }
    std::span<double> coeffs() noexcept { return c_; }
    const std::vector<double>& values() const noexcept { return c_; }

    double squared_norm() const noexcept;
    double norm() const noexcept;
    double dot(const SpectralField& other) const;
    bool is_finite() const noexcept;

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double a) noexcept;

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
    friend SpectralField operator-(SpectralField a) { return a *= -1.0; }
    friend bool operator==(const SpectralField&, const SpectralField&) = default;

private:
    std::vector<double> c_;
};

/// Exponent s of A^s; the norm it induces is ||A^s u||.
struct FractionalExponent {
    double value = 0.0;
};

/// Level m of the regularized nonlinearity g_m(x) = m x^2 / (m + x^2).
struct RegularizationLevel {
    int m = 1;
};

struct EigenPair {
    int mode = 1;
    double eigenvalue = 0.0;
    double operator()(double xi) const;
};

/// lambda_k = k^2 pi^2 and e_k. Throws DomainError for k <= 0.
EigenPair eigen_pair(int k);
double eigenvalue(int k);

/// Number of interior quadrature points used for products of m-mode fields:
/// at least 2m+1, padded so that points + 1 is a power of two (minimum 128).
std::size_t dealiased_points(std::size_t modes);

/// Precomputed sine/cosine tables for `modes` modes on `points` interior nodes
/// xi_j = j / (points + 1). Quadrature is the trapezoid rule with zero boundary values.
class SineGrid {
public:
    SineGrid(std::size_t modes, std::size_t points);

    std::size_t modes() const noexcept { return modes_; }
    std::size_t points() const noexcept { return points_; }
    double node(std::size_t j) const noexcept;

    /// u(xi_j) = sum_k c_k e_k(xi_j)
    void synthesize(std::span<const double> coeffs, std::span<double> grid) const;
    /// u'(xi_j)
    void synthesize_derivative(std::span<const double> coeffs, std::span<double> grid) const;
    /// (u, e_k) by quadrature
    void analyze(std::span<const double> grid, std::span<double> coeffs) const;
    /// (1/2 D_xi g, e_k) = -1/2 (g, e_k'), for g vanishing at both ends.
    void half_derivative_weak(std::span<const double> grid, std::span<double> coeffs) const;

private:
    std::size_t modes_;
    std::size_t points_;
    std::vector<double> sin_;  // [j * modes + k] = e_{k+1}(xi_j)
    std::vector<double> dsin_; // [j * modes + k] = e_{k+1}'(xi_j)
};

/// Shared immutable tables from a process-wide cache.
std::shared_ptr<const SineGrid> shared_sine_grid(std::size_t modes, std::size_t points);

/// Grid samples at N interior points -> first m coefficients. Throws ResolutionError if N < m.
SpectralField transform_forward(std::span<const double> grid, std::size_t modes);
/// Coefficients -> samples at N interior points. Throws ResolutionError if N < m.
std::vector<double> transform_inverse(const SpectralField& u, std::size_t points);
/// Trapezoid approximation of the L2 norm squared from interior samples.
double quadrature_squared_norm(std::span<const double> grid);

double fractional_norm(const SpectralField& u, FractionalExponent s);
/// ||u||_1^2 = ||A^{1/2} u||^2 = sum lambda_k u_k^2
double enstrophy(const SpectralField& u);

double g_m_value(double x, RegularizationLevel lvl);
double g_m_prime(double x, RegularizationLevel lvl);
double g_m_second(double x, RegularizationLevel lvl);

/// P_m of B(u) = 1/2 D_xi(u^2). `dealias = false` uses the minimal m-point grid.
SpectralField nonlinearity_B(const SpectralField& u, bool dealias = true);
/// P_m of B_m(u) = 1/2 D_xi g_m(u).
SpectralField regularized_B_m(const SpectralField& u, RegularizationLevel lvl);

/// b(u, v, w) = int u v' w dxi
double trilinear_b(const SpectralField& u, const SpectralField& v, const SpectralField& w);

/// phi_m(u) = m ||u||_1^2 / (m + ||u||^2)
double phi_m(const SpectralField& u, RegularizationLevel lvl);
/// f_m(u) = m ||u||^2 / (m + ||u||^2)
double f_m(const SpectralField& u, RegularizationLevel lvl);
/// Gradient of f_m: 2 m^2 u / (m + ||u||^2)^2
SpectralField f_m_gradient(const SpectralField& u, RegularizationLevel lvl);

/// Truncation to the first `modes` coefficients. Asking for more modes than u has
/// returns u unchanged and logs a warning.
SpectralField project(const SpectralField& u, std::size_t modes);

/// Stateful evaluator of the Galerkin nonlinearity and its derivatives. Holds a
/// workspace, so one instance per thread.
///
/// Usage: load(y) once per time step, then any of the apply_* calls, which reuse
/// the grid samples of y. With the default point count, load picks a finer grid
/// when y is steep enough to spoil the quadrature of g_m.
class GalerkinNonlinearity {
public:
    GalerkinNonlinearity(std::size_t modes, RegularizationLevel lvl, std::size_t points = 0);

    std::size_t modes() const noexcept { return grid_->modes(); }
    RegularizationLevel level() const noexcept { return lvl_; }

    void load(std::span<const double> y);
    /// P_m B_m(y)
    void apply(std::span<double> out);
    /// 1/2 P_m D(g_m'(y) eta)
    void apply_first_variation(std::span<const double> eta, std::span<double> out);
    /// 1/2 P_m D(g_m''(y) eta^2) + 1/2 P_m D(g_m'(y) zeta)
    void apply_second_variation(std::span<const double> eta, std::span<const double> zeta,
                                std::span<double> out);

private:
    std::shared_ptr<const SineGrid> grid_;
    RegularizationLevel lvl_;
    std::vector<double> y_;
    std::vector<double> a_;
    std::vector<double> b_;
    std::shared_ptr<const SineGrid> base_;
    bool adaptive_ = true; // refine the grid for steep fields unless points were fixed
};

} // namespace burgers
