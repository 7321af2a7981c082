#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace burgers {

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;
    std::size_t n = 0;
};

/// Mean, unbiased variance and standard error of the mean, accumulated in index order.
inline SampleStats sample_stats(std::span<const double> xs) {
    SampleStats s;
    s.n = xs.size();
    if (s.n == 0) return s;
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double x : xs) {
        ++k;
        const double d = x - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (x - mean);
    }
    s.mean = mean;
    s.variance = s.n > 1 ? m2 / static_cast<double>(s.n - 1) : 0.0;
    s.std_error = std::sqrt(s.variance / static_cast<double>(s.n));
    return s;
}

/// Least-squares slope of log(err) against log(step): the observed convergence order.
inline double observed_order(std::span<const double> steps, std::span<const double> errs) {
    const std::size_t n = steps.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(steps[i]);
        const double y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

} // namespace burgers
