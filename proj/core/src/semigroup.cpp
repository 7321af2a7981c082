#include "burgers/semigroup.hpp"

#include "burgers/errors.hpp"
#include "burgers/parallel.hpp"
#include "burgers/stats.hpp"

#include <algorithm>
#include <cmath>

namespace burgers {

namespace observables {

Observable squared_norm() {
    return {"squared_norm",
            [](std::span<const double> x) {
                double s = 0.0;
                for (double a : x) s += a * a;
                return s;
            },
            [](std::span<const double> x, std::span<double> g) {
                for (std::size_t k = 0; k < x.size(); ++k) g[k] = 2.0 * x[k];
            }};
}

Observable constant(double c) {
    return {"constant", [c](std::span<const double>) { return c; },
            [](std::span<const double>, std::span<double> g) {
                std::fill(g.begin(), g.end(), 0.0);
            }};
}

Observable f_m(RegularizationLevel lvl) {
    return {"f_m",
            [lvl](std::span<const double> x) {
                return burgers::f_m(SpectralField(std::vector<double>(x.begin(), x.end())), lvl);
            },
            [lvl](std::span<const double> x, std::span<double> g) {
                const SpectralField d =
                    f_m_gradient(SpectralField(std::vector<double>(x.begin(), x.end())), lvl);
                std::copy(d.coeffs().begin(), d.coeffs().end(), g.begin());
            }};
}

Observable phi_m(RegularizationLevel lvl) {
    const double m = lvl.m;
    return {"phi_m",
            [lvl](std::span<const double> x) {
                return burgers::phi_m(SpectralField(std::vector<double>(x.begin(), x.end())), lvl);
            },
            [m](std::span<const double> x, std::span<double> g) {
                double n2 = 0.0, e = 0.0;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    n2 += x[k] * x[k];
                    e += eigenvalue(static_cast<int>(k + 1)) * x[k] * x[k];
                }
                const double d = m + n2;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double l = eigenvalue(static_cast<int>(k + 1));
                    g[k] = 2.0 * m * x[k] * (l / d - e / (d * d));
                }
            }};
}

Observable linear(SpectralField a) {
    return {"linear",
            [a](std::span<const double> x) {
                double s = 0.0;
                for (std::size_t k = 0; k < std::min(x.size(), a.modes()); ++k) s += a[k] * x[k];
                return s;
            },
            [a](std::span<const double> x, std::span<double> g) {
                for (std::size_t k = 0; k < x.size(); ++k) g[k] = k < a.modes() ? a[k] : 0.0;
            }};
}

} // namespace observables

namespace {

IntegratorConfig with_horizon(IntegratorConfig cfg, double t) {
    cfg.T = t;
    cfg.dt = std::min(cfg.dt, t);
    return cfg;
}

std::vector<double> fitted(const SpectralField& x, std::size_t m) {
    std::vector<double> y(m, 0.0);
    for (std::size_t k = 0; k < std::min(m, x.modes()); ++k) y[k] = x[k];
    return y;
}

std::size_t sample_count(const McOptions& mc) {
    return mc.antithetic ? std::max<std::size_t>(1, mc.n_paths / 2) : std::max<std::size_t>(1, mc.n_paths);
}

/// Runs fn(stepper, path, sign) -> R over the budget and folds the per-sample results.
/// Each sample is one path or the average over an antithetic pair.
template <typename Fn>
std::vector<std::vector<double>> run_samples(const IntegratorConfig& cfg, const NoiseModel& noise,
                                             const McOptions& mc, std::size_t width, Fn&& fn) {
    const std::size_t n = sample_count(mc);
    return parallel_map(n, mc.workers, [&](std::size_t i) {
        GalerkinStepper st(cfg, noise);
        Rng rng = substream(mc.seed, i, stream_tag::paths);
        const NoisePath path = st.draw_path(rng);
        std::vector<double> out = fn(st, path, 1.0);
        if (mc.antithetic) {
            const std::vector<double> b = fn(st, path, -1.0);
            for (std::size_t j = 0; j < width; ++j) out[j] = 0.5 * (out[j] + b[j]);
        }
        return out;
    });
}

SampleStats column(const std::vector<std::vector<double>>& rows, std::size_t j) {
    std::vector<double> c(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) c[i] = rows[i][j];
    return sample_stats(c);
}

BelEstimate make_estimate(const SampleStats& s, const McOptions& mc, double t,
                          const SpectralField& h) {
    BelEstimate e;
    e.value = s.mean;
    e.std_error = s.std_error;
    e.n_paths = mc.antithetic ? 2 * s.n : s.n;
    e.t = t;
    e.h = h;
    return e;
}

void check_bel(double t, const IntegratorConfig& cfg, const NoiseModel& noise) {
    if (!(t > 0.0)) {
        throw DomainError("BEL estimators need t > 0; at t = 0 use the observable's own gradient");
    }
    if (!noise.covariance.invertible_on(cfg.modes)) {
        throw DomainError("BEL estimators need rho_k > 0 on every Galerkin mode");
    }
}

/// One path of state, first variations along `dirs`, and optionally the second variation
/// along dirs[0]. Returns the weighted integrals divided by the number of steps.
struct BelPath {
    std::vector<double> y;
    std::vector<std::vector<double>> eta;
    std::vector<double> zeta;
    std::vector<double> i_eta;
    double i_zeta = 0.0;
};

BelPath run_bel(GalerkinStepper& st, const NoisePath& path, double sign,
                const std::vector<double>& x0, const std::vector<std::vector<double>>& dirs,
                bool second) {
    const std::size_t m = st.modes();
    const auto w = st.bel_weights();
    BelPath r;
    r.y = x0;
    r.eta = dirs;
    r.i_eta.assign(dirs.size(), 0.0);
    if (second) r.zeta.assign(m, 0.0);
    std::vector<double> pre(m);
    for (std::size_t n = 0; n < path.steps; ++n) {
        const auto xi = path.normals(n);
        st.prepare(r.y);
        if (second) {
            st.advance_second_variation(r.zeta, r.eta[0], pre);
            for (std::size_t k = 0; k < m; ++k) r.i_zeta += w[k] * pre[k] * sign * xi[k];
        }
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            st.advance_first_variation(r.eta[d], pre);
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += w[k] * pre[k] * xi[k];
            r.i_eta[d] += sign * acc;
        }
        st.advance_state(r.y, xi, path.jumps_in(n), sign);
    }
    const double inv = 1.0 / static_cast<double>(path.steps);
    for (auto& v : r.i_eta) v *= inv;
    r.i_zeta *= inv;
    return r;
}

std::vector<double> run_state(GalerkinStepper& st, const NoisePath& path, double sign,
                              std::vector<double> y) {
    for (std::size_t n = 0; n < path.steps; ++n) {
        st.prepare(y);
        st.advance_state(y, path.normals(n), path.jumps_in(n), sign);
    }
    return y;
}

} // namespace

BelEstimate semigroup_apply(const Observable& f, double t, const SpectralField& x,
                            const IntegratorConfig& cfg, const NoiseModel& noise,
                            const McOptions& mc) {
    const std::vector<double> x0 = fitted(x, cfg.modes);
    if (t == 0.0) {
        BelEstimate e;
        e.value = f.value(x0);
        return e;
    }
    if (!(t > 0.0)) throw DomainError("semigroup time must be >= 0");
    const IntegratorConfig c = with_horizon(cfg, t);
    auto rows = run_samples(c, noise, mc, 1, [&](GalerkinStepper& st, const NoisePath& p, double s) {
        return std::vector<double>{f.value(run_state(st, p, s, x0))};
    });
    return make_estimate(column(rows, 0), mc, t, SpectralField(cfg.modes));
}

BelEstimate bel_gradient(const Observable& f, double t, const SpectralField& x,
                         const SpectralField& h, const IntegratorConfig& cfg,
                         const NoiseModel& noise, const McOptions& mc) {
    check_bel(t, cfg, noise);
    const IntegratorConfig c = with_horizon(cfg, t);
    const std::vector<double> x0 = fitted(x, cfg.modes);
    const std::vector<std::vector<double>> dirs{fitted(h, cfg.modes)};
    auto rows = run_samples(c, noise, mc, 1, [&](GalerkinStepper& st, const NoisePath& p, double s) {
        const BelPath r = run_bel(st, p, s, x0, dirs, false);
        return std::vector<double>{f.value(r.y) * r.i_eta[0]};
    });
    return make_estimate(column(rows, 0), mc, t, SpectralField(dirs[0]));
}

BelEstimate bel_hessian(const Observable& f, double t, const SpectralField& x,
                        const SpectralField& h, const IntegratorConfig& cfg,
                        const NoiseModel& noise, const McOptions& mc) {
    check_bel(t, cfg, noise);
    if (!f.has_gradient()) throw DomainError("bel_hessian needs an observable with a gradient");
    const IntegratorConfig c = with_horizon(cfg, t);
    const std::size_t m = cfg.modes;
    const std::vector<double> x0 = fitted(x, m);
    const std::vector<std::vector<double>> dirs{fitted(h, m)};
    auto rows = run_samples(c, noise, mc, 1, [&](GalerkinStepper& st, const NoisePath& p, double s) {
        const BelPath r = run_bel(st, p, s, x0, dirs, true);
        std::vector<double> g(m);
        f.gradient(r.y, g);
        double dot = 0.0;
        for (std::size_t k = 0; k < m; ++k) dot += g[k] * r.eta[0][k];
        return std::vector<double>{f.value(r.y) * r.i_zeta + dot * r.i_eta[0]};
    });
    return make_estimate(column(rows, 0), mc, t, SpectralField(dirs[0]));
}

BelEstimate gradient_fd_oracle(const Observable& f, double t, const SpectralField& x,
                               const SpectralField& h, double delta, const IntegratorConfig& cfg,
                               const NoiseModel& noise, const McOptions& mc) {
    if (!(delta > 0.0)) throw DomainError("finite-difference delta must be positive");
    const std::size_t m = cfg.modes;
    const std::vector<double> hh = fitted(h, m);
    std::vector<double> xp = fitted(x, m), xm = xp;
    for (std::size_t k = 0; k < m; ++k) {
        xp[k] += delta * hh[k];
        xm[k] -= delta * hh[k];
    }
    if (t == 0.0) {
        BelEstimate e;
        e.value = (f.value(xp) - f.value(xm)) / (2.0 * delta);
        e.h = SpectralField(hh);
        return e;
    }
    const IntegratorConfig c = with_horizon(cfg, t);
    auto rows = run_samples(c, noise, mc, 1, [&](GalerkinStepper& st, const NoisePath& p, double s) {
        const double a = f.value(run_state(st, p, s, xp));
        const double b = f.value(run_state(st, p, s, xm));
        return std::vector<double>{(a - b) / (2.0 * delta)};
    });
    return make_estimate(column(rows, 0), mc, t, SpectralField(hh));
}

std::vector<BelEstimate> bel_gradient_vector(const Observable& f, double t,
                                             const SpectralField& x, const IntegratorConfig& cfg,
                                             const NoiseModel& noise, const McOptions& mc) {
    check_bel(t, cfg, noise);
    const std::size_t m = cfg.modes;
    const IntegratorConfig c = with_horizon(cfg, t);
    const std::vector<double> x0 = fitted(x, m);
    std::vector<std::vector<double>> dirs(m, std::vector<double>(m, 0.0));
    for (std::size_t k = 0; k < m; ++k) dirs[k][k] = 1.0;
    auto rows = run_samples(c, noise, mc, m, [&](GalerkinStepper& st, const NoisePath& p, double s) {
        const BelPath r = run_bel(st, p, s, x0, dirs, false);
        const double fy = f.value(r.y);
        std::vector<double> out(m);
        for (std::size_t k = 0; k < m; ++k) out[k] = fy * r.i_eta[k];
        return out;
    });
    std::vector<BelEstimate> out;
    for (std::size_t k = 0; k < m; ++k) {
        out.push_back(make_estimate(column(rows, k), mc, t, SpectralField(dirs[k])));
    }
    return out;
}

SmoothingTable smoothing_probe(const Observable& f, const SpectralField& x,
                               std::vector<double> times, double kappa,
                               const IntegratorConfig& cfg, const NoiseModel& noise,
                               const McOptions& mc) {
    std::sort(times.begin(), times.end());
    SmoothingTable tab;
    tab.kappa = kappa;
    for (double t : times) {
        const auto g = bel_gradient_vector(f, t, x, cfg, noise, mc);
        double n2 = 0.0, v = 0.0;
        for (const auto& e : g) {
            n2 += e.value * e.value;
            v += e.value * e.value * e.std_error * e.std_error;
        }
        SmoothingRow row;
        row.t = t;
        row.gradient_norm = std::sqrt(n2);
        row.gradient_norm_std_error = n2 > 0.0 ? std::sqrt(v / n2) : 0.0;
        row.scaled = std::pow(t, 0.5 * (1.0 + kappa)) * row.gradient_norm;
        tab.rows.push_back(row);
    }
    tab.non_increasing = true;
    for (std::size_t i = 1; i < tab.rows.size(); ++i) {
        // Read from small to large t: the scaled product should not decrease as t grows
        // toward the horizon, i.e. it is non-increasing as t -> 0.
        if (tab.rows[i].scaled < tab.rows[i - 1].scaled) tab.non_increasing = false;
    }
    return tab;
}

SemigroupPropertyReport semigroup_property_check(const Observable& f, double t, double s,
                                                 const SpectralField& x,
                                                 const IntegratorConfig& cfg,
                                                 const NoiseModel& noise, std::size_t n_outer,
                                                 std::size_t n_inner, std::uint64_t seed,
                                                 unsigned workers) {
    SemigroupPropertyReport rep;
    McOptions direct;
    direct.n_paths = n_outer;
    direct.seed = seed;
    direct.workers = workers;
    const BelEstimate d = semigroup_apply(f, t + s, x, cfg, noise, direct);
    rep.direct = d.value;
    rep.direct_std_error = d.std_error;

    const IntegratorConfig c = with_horizon(cfg, t);
    const std::vector<double> x0 = fitted(x, cfg.modes);
    const std::uint64_t outer_seed = substream(seed, 1, stream_tag::paths)();
    std::vector<double> samples = parallel_map(n_outer, workers, [&](std::size_t i) {
        GalerkinStepper st(c, noise);
        Rng rng = substream(outer_seed, i, stream_tag::paths);
        const NoisePath p = st.draw_path(rng);
        const std::vector<double> y = run_state(st, p, 1.0, x0);
        McOptions inner;
        inner.n_paths = n_inner;
        inner.seed = rng();
        return semigroup_apply(f, s, SpectralField(y), cfg, noise, inner).value;
    });
    const SampleStats n = sample_stats(samples);
    rep.nested = n.mean;
    rep.nested_std_error = n.std_error;
    rep.pass = std::abs(rep.direct - rep.nested) <=
               3.0 * std::hypot(rep.direct_std_error, rep.nested_std_error) + 1e-14;
    return rep;
}

} // namespace burgers
