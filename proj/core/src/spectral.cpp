#include "burgers/spectral.hpp"

#include "burgers/errors.hpp"
#include "burgers/log.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>

namespace burgers {

namespace {

constexpr std::size_t kMinQuadratureIntervals = 128;
constexpr std::size_t kMaxQuadratureIntervals = std::size_t{1} << 16;
const double kSqrt2 = std::sqrt(2.0);

void require_same_modes(const SpectralField& a, const SpectralField& b) {
    if (a.modes() != b.modes()) {
        throw std::invalid_argument("SpectralField mode count mismatch: " +
                                    std::to_string(a.modes()) + " vs " +
                                    std::to_string(b.modes()));
    }
}

} // namespace

SpectralField SpectralField::basis(std::size_t modes, int k, double amplitude) {
    if (k <= 0) throw DomainError("mode index must be >= 1");
    SpectralField f(modes);
    if (static_cast<std::size_t>(k) <= modes) f[static_cast<std::size_t>(k - 1)] = amplitude;
    return f;
}

double SpectralField::squared_norm() const noexcept {
    return std::inner_product(c_.begin(), c_.end(), c_.begin(), 0.0);
}

double SpectralField::norm() const noexcept { return std::sqrt(squared_norm()); }

double SpectralField::dot(const SpectralField& other) const {
    require_same_modes(*this, other);
    return std::inner_product(c_.begin(), c_.end(), other.c_.begin(), 0.0);
}

bool SpectralField::is_finite() const noexcept {
    return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    require_same_modes(*this, o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    require_same_modes(*this, o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double a) noexcept {
    for (double& v : c_) v *= a;
    return *this;
}

double EigenPair::operator()(double xi) const {
    return kSqrt2 * std::sin(static_cast<double>(mode) * kPi * xi);
}

double eigenvalue(int k) {
    if (k <= 0) throw DomainError("eigen_pair: mode index must be >= 1, got " + std::to_string(k));
    const double kk = static_cast<double>(k);
    return kk * kk * kPi * kPi;
}

EigenPair eigen_pair(int k) { return EigenPair{k, eigenvalue(k)}; }

std::size_t dealiased_points(std::size_t modes) {
    const std::size_t intervals = std::max(std::bit_ceil(2 * modes + 2), kMinQuadratureIntervals);
    return intervals - 1;
}

SineGrid::SineGrid(std::size_t modes, std::size_t points)
    : modes_(modes), points_(points), sin_(modes * points), dsin_(modes * points) {
    if (modes == 0) throw ResolutionError("SineGrid needs at least one mode");
    if (points < modes) {
        throw ResolutionError("SineGrid: " + std::to_string(points) +
                              " points cannot resolve " + std::to_string(modes) + " modes");
    }
    for (std::size_t j = 0; j < points; ++j) {
        const double xi = node(j);
        for (std::size_t k = 0; k < modes; ++k) {
            const double w = static_cast<double>(k + 1) * kPi;
            sin_[j * modes + k] = kSqrt2 * std::sin(w * xi);
            dsin_[j * modes + k] = kSqrt2 * w * std::cos(w * xi);
        }
    }
}

double SineGrid::node(std::size_t j) const noexcept {
    return static_cast<double>(j + 1) / static_cast<double>(points_ + 1);
}

void SineGrid::synthesize(std::span<const double> coeffs, std::span<double> grid) const {
    const std::size_t mk = std::min(coeffs.size(), modes_);
    for (std::size_t j = 0; j < points_; ++j) {
        const double* row = &sin_[j * modes_];
        double acc = 0.0;
        for (std::size_t k = 0; k < mk; ++k) acc += coeffs[k] * row[k];
        grid[j] = acc;
    }
}

void SineGrid::synthesize_derivative(std::span<const double> coeffs, std::span<double> grid) const {
    const std::size_t mk = std::min(coeffs.size(), modes_);
    for (std::size_t j = 0; j < points_; ++j) {
        const double* row = &dsin_[j * modes_];
        double acc = 0.0;
        for (std::size_t k = 0; k < mk; ++k) acc += coeffs[k] * row[k];
        grid[j] = acc;
    }
}

void SineGrid::analyze(std::span<const double> grid, std::span<double> coeffs) const {
    const std::size_t mk = std::min(coeffs.size(), modes_);
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    for (std::size_t j = 0; j < points_; ++j) {
        const double* row = &sin_[j * modes_];
        const double g = grid[j];
        for (std::size_t k = 0; k < mk; ++k) coeffs[k] += g * row[k];
    }
    const double w = 1.0 / static_cast<double>(points_ + 1);
    for (std::size_t k = 0; k < mk; ++k) coeffs[k] *= w;
}

void SineGrid::half_derivative_weak(std::span<const double> grid, std::span<double> coeffs) const {
    const std::size_t mk = std::min(coeffs.size(), modes_);
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    for (std::size_t j = 0; j < points_; ++j) {
        const double* row = &dsin_[j * modes_];
        const double g = grid[j];
        for (std::size_t k = 0; k < mk; ++k) coeffs[k] += g * row[k];
    }
    const double w = -0.5 / static_cast<double>(points_ + 1);
    for (std::size_t k = 0; k < mk; ++k) coeffs[k] *= w;
}

std::shared_ptr<const SineGrid> shared_sine_grid(std::size_t modes, std::size_t points) {
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const SineGrid>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{modes, points}];
    if (!slot) slot = std::make_shared<const SineGrid>(modes, points);
    return slot;
}

SpectralField transform_forward(std::span<const double> grid, std::size_t modes) {
    if (grid.size() < modes) {
        throw ResolutionError("transform_forward: " + std::to_string(grid.size()) +
                              " samples cannot resolve " + std::to_string(modes) + " modes");
    }
    SpectralField u(modes);
    shared_sine_grid(modes, grid.size())->analyze(grid, u.coeffs());
    return u;
}

std::vector<double> transform_inverse(const SpectralField& u, std::size_t points) {
    if (points < u.modes()) {
        throw ResolutionError("transform_inverse: " + std::to_string(points) +
                              " samples cannot resolve " + std::to_string(u.modes()) + " modes");
    }
    std::vector<double> grid(points);
    shared_sine_grid(u.modes(), points)->synthesize(u.coeffs(), grid);
    return grid;
}

double quadrature_squared_norm(std::span<const double> grid) {
    const double s = std::inner_product(grid.begin(), grid.end(), grid.begin(), 0.0);
    return s / static_cast<double>(grid.size() + 1);
}

double fractional_norm(const SpectralField& u, FractionalExponent s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < u.modes(); ++k) {
        const double lam = eigenvalue(static_cast<int>(k + 1));
        acc += std::pow(lam, 2.0 * s.value) * u[k] * u[k];
    }
    return std::sqrt(acc);
}

double enstrophy(const SpectralField& u) {
    double acc = 0.0;
    for (std::size_t k = 0; k < u.modes(); ++k) {
        acc += eigenvalue(static_cast<int>(k + 1)) * u[k] * u[k];
    }
    return acc;
}

double g_m_value(double x, RegularizationLevel lvl) {
    const double m = lvl.m;
    return m * x * x / (m + x * x);
}

double g_m_prime(double x, RegularizationLevel lvl) {
    const double m = lvl.m;
    const double d = m + x * x;
    return 2.0 * m * m * x / (d * d);
}

double g_m_second(double x, RegularizationLevel lvl) {
    const double m = lvl.m;
    const double d = m + x * x;
    return 2.0 * m * m * (m - 3.0 * x * x) / (d * d * d);
}

SpectralField nonlinearity_B(const SpectralField& u, bool dealias) {
    const std::size_t m = u.modes();
    SpectralField out(m);
    if (m == 0) return out;
    const auto grid = shared_sine_grid(m, dealias ? dealiased_points(m) : m);
    std::vector<double> v(grid->points());
    grid->synthesize(u.coeffs(), v);
    for (double& x : v) x = x * x;
    grid->half_derivative_weak(v, out.coeffs());
    return out;
}

SpectralField regularized_B_m(const SpectralField& u, RegularizationLevel lvl) {
    SpectralField out(u.modes());
    if (u.modes() == 0) return out;
    GalerkinNonlinearity nl(u.modes(), lvl);
    nl.load(u.coeffs());
    nl.apply(out.coeffs());
    return out;
}

double trilinear_b(const SpectralField& u, const SpectralField& v, const SpectralField& w) {
    const std::size_t m = std::max({u.modes(), v.modes(), w.modes()});
    if (m == 0) return 0.0;
    const auto grid = shared_sine_grid(m, dealiased_points(m));
    const std::size_t n = grid->points();
    std::vector<double> ug(n), dvg(n), wg(n);
    grid->synthesize(u.coeffs(), ug);
    grid->synthesize_derivative(v.coeffs(), dvg);
    grid->synthesize(w.coeffs(), wg);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += ug[j] * dvg[j] * wg[j];
    return acc / static_cast<double>(n + 1);
}

double phi_m(const SpectralField& u, RegularizationLevel lvl) {
    const double m = lvl.m;
    return m * enstrophy(u) / (m + u.squared_norm());
}

double f_m(const SpectralField& u, RegularizationLevel lvl) {
    const double m = lvl.m;
    const double n2 = u.squared_norm();
    return m * n2 / (m + n2);
}

SpectralField f_m_gradient(const SpectralField& u, RegularizationLevel lvl) {
    const double m = lvl.m;
    const double d = m + u.squared_norm();
    return u * (2.0 * m * m / (d * d));
}

SpectralField project(const SpectralField& u, std::size_t modes) {
    if (modes > u.modes()) {
        log_warning("project: requested " + std::to_string(modes) + " modes of a " +
                    std::to_string(u.modes()) + "-mode field; returning it unchanged");
        return u;
    }
    return SpectralField(std::vector<double>(u.values().begin(),
                                             u.values().begin() + static_cast<long>(modes)));
}

GalerkinNonlinearity::GalerkinNonlinearity(std::size_t modes, RegularizationLevel lvl,
                                           std::size_t points)
    : grid_(shared_sine_grid(modes, points == 0 ? dealiased_points(modes) : points)),
      lvl_(lvl),
      y_(grid_->points()),
      a_(grid_->points()),
      b_(grid_->points()),
      base_(grid_),
      adaptive_(points == 0) {
    if (lvl.m <= 0) throw DomainError("regularization level must be positive");
}

void GalerkinNonlinearity::load(std::span<const double> y) {
    if (adaptive_) {
        // 1/(m + y^2) has complex poles about sqrt(m)/|y'| off the real axis; the sine
        // quadrature error decays like exp(-2 pi dist / spacing), so large fields need
        // a finer grid. |y'| is bounded by sqrt(2) pi sum k |y_k|.
        double slope = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) slope += static_cast<double>(k + 1) * std::abs(y[k]);
        slope *= std::sqrt(2.0) * kPi;
        const double want = std::min(8.0 * slope / std::sqrt(static_cast<double>(lvl_.m)),
                                     static_cast<double>(kMaxQuadratureIntervals));
        std::size_t intervals = base_->points() + 1;
        if (want > static_cast<double>(intervals)) {
            intervals = std::bit_ceil(static_cast<std::size_t>(std::ceil(want)));
        }
        if (intervals != grid_->points() + 1) {
            grid_ = intervals == base_->points() + 1 ? base_ : shared_sine_grid(base_->modes(), intervals - 1);
            y_.resize(grid_->points());
            a_.resize(grid_->points());
            b_.resize(grid_->points());
        }
    }
    grid_->synthesize(y, y_);
}

void GalerkinNonlinearity::apply(std::span<double> out) {
    for (std::size_t j = 0; j < y_.size(); ++j) a_[j] = g_m_value(y_[j], lvl_);
    grid_->half_derivative_weak(a_, out);
}

void GalerkinNonlinearity::apply_first_variation(std::span<const double> eta,
                                                 std::span<double> out) {
    grid_->synthesize(eta, a_);
    for (std::size_t j = 0; j < y_.size(); ++j) a_[j] *= g_m_prime(y_[j], lvl_);
    grid_->half_derivative_weak(a_, out);
}

void GalerkinNonlinearity::apply_second_variation(std::span<const double> eta,
                                                  std::span<const double> zeta,
                                                  std::span<double> out) {
    grid_->synthesize(eta, a_);
    grid_->synthesize(zeta, b_);
    for (std::size_t j = 0; j < y_.size(); ++j) {
        const double y = y_[j];
        a_[j] = g_m_second(y, lvl_) * a_[j] * a_[j] + g_m_prime(y, lvl_) * b_[j];
    }
    grid_->half_derivative_weak(a_, out);
}

} // namespace burgers
