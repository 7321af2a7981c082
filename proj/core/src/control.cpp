#include "burgers/control.hpp"

#include "burgers/errors.hpp"
#include "burgers/hamiltonian.hpp"
#include "burgers/log.hpp"
#include "burgers/parallel.hpp"
#include "burgers/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace burgers {

double chi(double a) { return a > 0.0 ? a * a : 0.0; }

bool admissible_projection(std::span<double> u, double rho) {
    double n2 = 0.0;
    for (double a : u) n2 += a * a;
    const double n = std::sqrt(n2);
    // Rounding in rho p / ||p|| can land a hair outside the ball; that is not a clip.
    if (n <= rho * (1.0 + 1e-12)) return false;
    const double s = rho / n;
    for (auto& a : u) a *= s;
    return true;
}

SpectralField admissible_projection(const SpectralField& u, double rho) {
    SpectralField out = u;
    admissible_projection(out.coeffs(), rho);
    return out;
}

ControlSpec ControlSpec::zero(double rho) {
    ControlSpec c;
    c.rho = rho;
    return c;
}

ControlSpec ControlSpec::constant_field(SpectralField u, double rho, std::string label) {
    ControlSpec c;
    c.kind = Kind::Constant;
    c.rho = rho;
    c.label = std::move(label);
    c.constant = std::move(u);
    return c;
}

ControlSpec ControlSpec::open_loop_sequence(std::vector<SpectralField> u, double rho,
                                            std::string label) {
    ControlSpec c;
    c.kind = Kind::OpenLoop;
    c.rho = rho;
    c.label = std::move(label);
    c.open_loop = std::move(u);
    return c;
}

ControlSpec ControlSpec::feedback(const ValueGrid& grid, double rho, std::string label) {
    ControlSpec c;
    c.kind = Kind::Feedback;
    c.rho = rho;
    c.label = std::move(label);
    c.policy = std::make_shared<FeedbackPolicy>(grid, rho);
    return c;
}

bool ControlSpec::realize(double t, std::size_t step, std::span<const double> x,
                          std::span<double> u) const {
    std::fill(u.begin(), u.end(), 0.0);
    auto copy_field = [&](const SpectralField& f) {
        for (std::size_t k = 0; k < std::min(u.size(), f.modes()); ++k) u[k] = f[k];
    };
    switch (kind) {
    case Kind::Zero:
        return false;
    case Kind::Constant:
        copy_field(constant);
        break;
    case Kind::OpenLoop:
        if (!open_loop.empty()) copy_field(open_loop[std::min(step, open_loop.size() - 1)]);
        break;
    case Kind::Feedback:
        (*policy)(t, x, u);
        break;
    }
    return admissible_projection(u, rho);
}

namespace {

struct CostPath {
    double running = 0.0;
    double control = 0.0;
    double terminal = 0.0;
    double correction = 0.0;
    bool escaped = false;
    std::size_t clipped = 0;
    std::vector<double> y;

    double total() const { return running + control + terminal; }
};

double running_cost(std::span<const double> y, CostKind kind, RegularizationLevel lvl) {
    double n2 = 0.0, e = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        n2 += y[k] * y[k];
        e += eigenvalue(static_cast<int>(k + 1)) * y[k] * y[k];
    }
    if (kind == CostKind::Enstrophy) return e;
    const double m = lvl.m;
    return m * e / (m + n2);
}

double terminal_cost(std::span<const double> y, CostKind kind, RegularizationLevel lvl) {
    double n2 = 0.0;
    for (double a : y) n2 += a * a;
    if (kind == CostKind::Enstrophy) return n2;
    const double m = lvl.m;
    return m * n2 / (m + n2);
}

/// One controlled path from (t0, x) over cfg.T. With a grid, accumulates the verification
/// correction 1/2 int ||U + D v(T_grid - t)||^2 - chi(||D v|| - rho) dt.
CostPath cost_path(const IntegratorConfig& cfg, const NoiseModel& noise, std::vector<double> y,
                   double t0, const ControlSpec& control, CostKind kind, Rng& rng,
                   const ValueGrid* grid, bool with_terminal) {
    GalerkinStepper st(cfg, noise);
    const std::size_t m = cfg.modes;
    const double dt = st.dt();
    const RegularizationLevel lvl = cfg.level();
    const double t_grid = grid ? grid->times().back() : 0.0;
    std::vector<double> xi(m), u(m), p(m);
    std::vector<JumpDraw> jumps;
    CostPath r;
    for (std::size_t n = 0; n < st.steps(); ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        st.draw_step(rng, xi, jumps);
        if (control.realize(t, n, y, u)) ++r.clipped;
        r.running += dt * running_cost(y, kind, lvl);
        double u2 = 0.0;
        for (double a : u) u2 += a * a;
        r.control += dt * 0.5 * u2;
        if (grid) {
            bool out = false;
            grid->gradient(t_grid - t, y, p, &out);
            r.escaped = r.escaped || out;
            double s2 = 0.0, p2 = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                s2 += (u[k] + p[k]) * (u[k] + p[k]);
                p2 += p[k] * p[k];
            }
            r.correction += dt * 0.5 * (s2 - chi(std::sqrt(p2) - control.rho));
        }
        st.prepare(y);
        st.advance_state(y, xi, jumps, 1.0, u);
    }
    if (with_terminal) r.terminal = terminal_cost(y, kind, lvl);
    r.y = std::move(y);
    return r;
}

std::vector<double> fitted(const SpectralField& x, std::size_t m) {
    std::vector<double> y(m, 0.0);
    for (std::size_t k = 0; k < std::min(m, x.modes()); ++k) y[k] = x[k];
    return y;
}

std::vector<CostPath> cost_paths(const SpectralField& x, const ControlSpec& control,
                                 const IntegratorConfig& cfg, const NoiseModel& noise,
                                 const McOptions& mc, CostKind kind, const ValueGrid* grid) {
    cfg.validate();
    const std::vector<double> x0 = fitted(x, cfg.modes);
    return parallel_map(mc.n_paths, mc.workers, [&](std::size_t p) {
        Rng rng = substream(mc.seed, p, stream_tag::paths);
        try {
            return cost_path(cfg, noise, x0, 0.0, control, kind, rng, grid, true);
        } catch (const DivergenceError& e) {
            std::ostringstream os;
            os << e.what() << " (replay with seed " << mc.seed << ", path " << p << ")";
            throw DivergenceError(os.str(), p);
        }
    });
}

CostReport summarize(const std::vector<CostPath>& paths, const ControlSpec& control) {
    CostReport r;
    r.n_paths = paths.size();
    std::vector<double> a(paths.size()), b(paths.size()), c(paths.size()), j(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        a[i] = paths[i].running;
        b[i] = paths[i].control;
        c[i] = paths[i].terminal;
        j[i] = paths[i].total();
        r.clipped += paths[i].clipped;
    }
    r.running = sample_stats(a).mean;
    r.control = sample_stats(b).mean;
    r.terminal = sample_stats(c).mean;
    r.J = r.running + r.control + r.terminal;
    r.std_error = sample_stats(j).std_error;
    if (r.clipped > 0) {
        std::ostringstream os;
        os << "control '" << control.label << "': " << r.clipped
           << " realized values clipped to the admissible ball";
        log_warning(os.str());
    }
    return r;
}

} // namespace

CostReport cost_functional(const SpectralField& x, const ControlSpec& control,
                           const IntegratorConfig& cfg, const NoiseModel& noise,
                           const McOptions& mc, CostKind kind) {
    return summarize(cost_paths(x, control, cfg, noise, mc, kind, nullptr), control);
}

VerificationReport verification_identity_check(const SpectralField& x, const ControlSpec& control,
                                               const ValueGrid& grid, const IntegratorConfig& cfg,
                                               const NoiseModel& noise, const McOptions& mc,
                                               double grid_budget) {
    if (grid.modes() != cfg.modes) throw DomainError("grid and integrator use different m");
    if (std::abs(grid.times().back() - cfg.T) > 1e-9 * std::max(1.0, cfg.T)) {
        throw DomainError("grid horizon differs from the integrator horizon");
    }
    const auto paths = cost_paths(x, control, cfg, noise, mc, CostKind::Regularized, &grid);
    VerificationReport r;
    const std::vector<double> x0 = fitted(x, cfg.modes);
    bool outside = false;
    r.value = grid.value(cfg.T, x0, &outside);
    std::vector<double> j(paths.size()), c(paths.size()), g(paths.size());
    std::size_t escaped = outside ? paths.size() : 0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        j[i] = paths[i].total();
        c[i] = paths[i].correction;
        g[i] = j[i] - r.value - c[i];
        if (!outside && paths[i].escaped) ++escaped;
    }
    const SampleStats sj = sample_stats(j), sc = sample_stats(c), sg = sample_stats(g);
    r.J = sj.mean;
    r.J_std_error = sj.std_error;
    r.correction = sc.mean;
    r.correction_std_error = sc.std_error;
    r.rhs = r.value + r.correction;
    r.gap = sg.mean;
    r.gap_std_error = sg.std_error;
    r.grid_budget = grid_budget;
    r.tolerance = std::max(0.05 * std::abs(r.J), 3.0 * r.gap_std_error + grid_budget);
    r.escape_fraction = paths.empty() ? 0.0 : static_cast<double>(escaped) / static_cast<double>(paths.size());
    r.unreliable = r.escape_fraction > 0.1;
    r.pass = std::abs(r.gap) <= r.tolerance && !r.unreliable;
    if (r.unreliable) log_warning("verification identity: more than 10% of paths left the grid");
    return r;
}

std::vector<ControlSpec> constant_control_family(std::size_t modes, double rho) {
    std::vector<ControlSpec> out;
    if (rho == 0.0) {
        out.push_back(ControlSpec::zero(0.0));
        return out;
    }
    if (modes == 1) {
        for (int i = 0; i < 9; ++i) {
            const double a = -rho + 2.0 * rho * i / 8.0;
            std::ostringstream os;
            os << "const(" << a << ")";
            out.push_back(ControlSpec::constant_field(SpectralField{a}, rho, os.str()));
        }
        return out;
    }
    SpectralField zero(modes);
    out.push_back(ControlSpec::constant_field(zero, rho, "const(0)"));
    for (int i = 0; i < 8; ++i) {
        const double th = 2.0 * kPi * i / 8.0;
        SpectralField u(modes);
        u[0] = rho * std::cos(th);
        u[1] = rho * std::sin(th);
        std::ostringstream os;
        os << "const(rho, " << 45 * i << "deg)";
        out.push_back(ControlSpec::constant_field(u, rho, os.str()));
    }
    return out;
}

DppReport dpp_check(const SpectralField& x, double t, double tau, const ValueGrid& grid,
                    double rho, const IntegratorConfig& cfg, const NoiseModel& noise,
                    std::size_t n_outer, std::size_t n_inner, std::uint64_t seed,
                    unsigned workers, double grid_budget) {
    const double T = grid.times().back();
    if (!(t >= 0.0 && t < tau && tau < T + 1e-12)) {
        throw DomainError("dpp_check needs 0 <= t < tau <= T");
    }
    DppReport r;
    r.t = t;
    r.tau = tau;
    r.grid_budget = grid_budget;
    const std::vector<double> x0 = fitted(x, cfg.modes);
    r.V = grid.value(T - t, x0);

    IntegratorConfig seg = cfg;
    seg.T = tau - t;
    seg.dt = std::min(cfg.dt, seg.T);
    IntegratorConfig tail = cfg;
    tail.T = T - tau;
    tail.dt = std::min(cfg.dt, std::max(tail.T, 1e-300));
    const ControlSpec fb = ControlSpec::feedback(grid, rho);

    std::size_t escapes = 0, lookups = 0;
    auto evaluate = [&](const ControlSpec& c) {
        struct Out {
            double v;
            bool escaped;
        };
        auto vals = parallel_map(n_outer, workers, [&](std::size_t p) {
            Rng rng = substream(seed, p, stream_tag::paths);
            const CostPath cp = cost_path(seg, noise, x0, t, c, CostKind::Regularized, rng, nullptr, false);
            double v_tau;
            bool out = false;
            if (n_inner == 0 || tail.T <= 0.0) {
                v_tau = grid.value(T - tau, cp.y, &out);
            } else {
                const std::uint64_t inner_seed = rng();
                double acc = 0.0;
                for (std::size_t q = 0; q < n_inner; ++q) {
                    Rng r2 = substream(inner_seed, q, stream_tag::paths);
                    acc += cost_path(tail, noise, cp.y, tau, fb, CostKind::Regularized, r2, nullptr, true)
                               .total();
                }
                v_tau = acc / static_cast<double>(n_inner);
            }
            return Out{cp.total() + v_tau, out};
        });
        std::vector<double> v(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            v[i] = vals[i].v;
            if (vals[i].escaped) ++escapes;
            ++lookups;
        }
        return sample_stats(v);
    };

    const auto family = constant_control_family(cfg.modes, rho);
    r.family_min = std::numeric_limits<double>::infinity();
    for (const auto& c : family) {
        const SampleStats s = evaluate(c);
        r.family.push_back({c.label, s.mean, s.std_error});
        if (s.mean < r.family_min) {
            r.family_min = s.mean;
            r.family_min_std_error = s.std_error;
        }
    }
    const SampleStats sf = evaluate(fb);
    r.feedback = {fb.label, sf.mean, sf.std_error};
    r.escape_fraction = lookups ? static_cast<double>(escapes) / static_cast<double>(lookups) : 0.0;
    r.unreliable = r.escape_fraction > 0.1;

    r.inequality_pass = r.V <= r.family_min + 3.0 * r.family_min_std_error + grid_budget;
    r.attainment_pass = true;
    for (const auto& f : r.family) {
        if (!(r.feedback.value <= f.value + 3.0 * std::hypot(f.std_error, r.feedback.std_error) + grid_budget)) {
            r.attainment_pass = false;
        }
    }
    r.pass = r.inequality_pass && r.attainment_pass && !r.unreliable;
    return r;
}

OptimalityReport optimality_comparison(const SpectralField& x, const ValueGrid& grid, double rho,
                                       const std::vector<ControlSpec>& candidates,
                                       const IntegratorConfig& cfg, const NoiseModel& noise,
                                       const McOptions& mc, CostKind kind) {
    const ControlSpec fb = ControlSpec::feedback(grid, rho);
    const auto fpaths = cost_paths(x, fb, cfg, noise, mc, kind, nullptr);
    OptimalityReport rep;
    const CostReport fr = summarize(fpaths, fb);
    rep.feedback = {fb.label, fr.J, fr.std_error, 0.0, 0.0, 0.0, true};
    rep.pass = true;
    for (const auto& c : candidates) {
        const auto paths = cost_paths(x, c, cfg, noise, mc, kind, nullptr);
        const CostReport cr = summarize(paths, c);
        std::vector<double> d(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) d[i] = paths[i].total() - fpaths[i].total();
        const SampleStats sd = sample_stats(d);
        RankingRow row;
        row.label = c.label;
        row.J = cr.J;
        row.std_error = cr.std_error;
        row.excess = cr.J - fr.J;
        row.excess_paired_std_error = sd.std_error;
        row.combined_std_error = std::hypot(cr.std_error, fr.std_error);
        row.feedback_not_beaten = fr.J <= cr.J + 3.0 * row.combined_std_error;
        rep.pass = rep.pass && row.feedback_not_beaten;
        rep.rows.push_back(row);
    }
    std::stable_sort(rep.rows.begin(), rep.rows.end(),
                     [](const RankingRow& a, const RankingRow& b) { return a.J < b.J; });
    return rep;
}

} // namespace burgers
