#include "burgers/integrator.hpp"

#include "burgers/errors.hpp"
#include "burgers/hamiltonian.hpp"
#include "burgers/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace burgers {

namespace {

SpectralField fit_modes(const SpectralField& x, std::size_t modes) {
    SpectralField y(modes);
    const std::size_t n = std::min(modes, x.modes());
    for (std::size_t k = 0; k < n; ++k) y[k] = x[k];
    return y;
}

double sq(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return s;
}

double enstrophy_of(std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += eigenvalue(static_cast<int>(k + 1)) * v[k] * v[k];
    return s;
}

std::vector<std::size_t> checkpoint_steps(const std::vector<double>& times, double dt,
                                          std::size_t steps) {
    std::vector<std::size_t> idx;
    idx.reserve(times.size());
    for (double t : times) {
        if (!(t >= 0.0)) throw DomainError("checkpoint times must be >= 0");
        const auto n = static_cast<std::size_t>(std::llround(t / dt));
        if (n > steps) throw DomainError("checkpoint beyond the horizon");
        idx.push_back(n);
    }
    return idx;
}

[[noreturn]] void rethrow_divergence(const DivergenceError& e, std::uint64_t seed,
                                     std::size_t path) {
    std::ostringstream os;
    os << e.what() << " (replay with seed " << seed << ", path " << path << ")";
    throw DivergenceError(os.str(), path);
}

} // namespace

std::size_t IntegratorConfig::steps() const {
    validate();
    return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

double IntegratorConfig::step() const { return T / static_cast<double>(steps()); }

RegularizationLevel IntegratorConfig::level() const {
    return RegularizationLevel{regularization > 0 ? regularization : static_cast<int>(modes)};
}

void IntegratorConfig::validate() const {
    if (modes == 0) throw DomainError("integrator needs at least one mode");
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("horizon T must be positive");
    if (!(dt > 0.0) || dt > T * (1.0 + 1e-12)) throw DomainError("step dt must satisfy 0 < dt <= T");
    if (!(viscosity > 0.0)) throw DomainError("viscosity must be positive");
    if (!(blowup_threshold > 0.0)) throw DomainError("blow-up threshold must be positive");
}

GalerkinStepper::GalerkinStepper(const IntegratorConfig& cfg, const NoiseModel& noise)
    : cfg_(cfg),
      noise_(noise),
      steps_(cfg.steps()),
      dt_(cfg.step()),
      jumps_(noise.levy, dt_),
      nl_(cfg.modes, cfg.level(), cfg.quadrature_points) {
    const std::size_t m = cfg_.modes;
    rate_.resize(m);
    decay_.resize(m);
    ou_std_.resize(m);
    rho_ = noise_.covariance.eigenvalues(m);
    bel_weight_.resize(m);
    compensator_.resize(m);
    drift_.assign(m, 0.0);
    tmp_.assign(m, 0.0);
    const SpectralField mean_jump = noise_.levy.mean_jump(0.0, m);
    for (std::size_t k = 0; k < m; ++k) {
        const double r = cfg_.viscosity * eigenvalue(static_cast<int>(k + 1));
        rate_[k] = r;
        decay_[k] = std::exp(-r * dt_);
        ou_std_[k] = std::sqrt(rho_[k] * -std::expm1(-2.0 * r * dt_) / (2.0 * r));
        bel_weight_[k] = ou_std_[k] > 0.0 ? decay_[k] / ou_std_[k] : 0.0;
        compensator_[k] = -mean_jump[k] * -std::expm1(-r * dt_) / r;
    }
    for (const auto& a : noise_.levy.atoms()) {
        atom_fields_.push_back(noise_.levy.jump_field(0.0, a.mark, m).values());
    }
}

void GalerkinStepper::draw_step(Rng& rng, std::span<double> xi,
                                std::vector<JumpDraw>& jumps) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : xi) v = normal(rng);
    jumps.clear();
    jumps_.sample(rng, jumps);
}

NoisePath GalerkinStepper::draw_path(Rng& rng) const {
    NoisePath path;
    path.modes = cfg_.modes;
    path.steps = steps_;
    path.xi.resize(steps_ * cfg_.modes);
    path.offsets.reserve(steps_ + 1);
    path.offsets.push_back(0);
    std::vector<JumpDraw> step_jumps;
    for (std::size_t n = 0; n < steps_; ++n) {
        draw_step(rng, std::span<double>(path.xi).subspan(n * cfg_.modes, cfg_.modes), step_jumps);
        path.jumps.insert(path.jumps.end(), step_jumps.begin(), step_jumps.end());
        path.offsets.push_back(path.jumps.size());
    }
    return path;
}

void GalerkinStepper::prepare(std::span<const double> y) {
    if (cfg_.nonlinear) {
        nl_.load(y);
        nl_.apply(drift_);
    } else {
        std::fill(drift_.begin(), drift_.end(), 0.0);
    }
    prepared_ = true;
}

void GalerkinStepper::check(std::span<const double> v, const char* what) const {
    const double n2 = sq(v);
    if (!std::isfinite(n2) || n2 > cfg_.blowup_threshold * cfg_.blowup_threshold) {
        std::ostringstream os;
        os << what << " left the ball of radius " << cfg_.blowup_threshold
           << " (norm " << std::sqrt(n2) << ")";
        throw DivergenceError(os.str());
    }
}

void GalerkinStepper::advance_state(std::span<double> y, std::span<const double> xi,
                                    std::span<const JumpDraw> jumps, double sign,
                                    std::span<const double> control) {
    if (!prepared_) prepare(y);
    const std::size_t m = cfg_.modes;
    for (std::size_t k = 0; k < m; ++k) {
        const double u = control.empty() ? 0.0 : control[k];
        y[k] = decay_[k] * (y[k] + dt_ * (drift_[k] + u)) + sign * ou_std_[k] * xi[k] +
               compensator_[k];
    }
    for (const auto& j : jumps) {
        const auto& g = atom_fields_[j.atom];
        for (std::size_t k = 0; k < m; ++k) y[k] += std::exp(-rate_[k] * (dt_ - j.tau)) * g[k];
    }
    prepared_ = false;
    check(y, "state");
}

void GalerkinStepper::advance_first_variation(std::span<double> eta, std::span<double> pre) {
    if (!prepared_) throw std::logic_error("advance_first_variation before prepare");
    const std::size_t m = cfg_.modes;
    if (cfg_.nonlinear) {
        nl_.apply_first_variation(eta, tmp_);
    } else {
        std::fill(tmp_.begin(), tmp_.end(), 0.0);
    }
    for (std::size_t k = 0; k < m; ++k) {
        const double t = eta[k] + dt_ * tmp_[k];
        if (!pre.empty()) pre[k] = t;
        eta[k] = decay_[k] * t;
    }
    check(eta, "first variation");
}

void GalerkinStepper::advance_second_variation(std::span<double> zeta, std::span<const double> eta,
                                               std::span<double> pre) {
    if (!prepared_) throw std::logic_error("advance_second_variation before prepare");
    const std::size_t m = cfg_.modes;
    if (cfg_.nonlinear) {
        nl_.apply_second_variation(eta, zeta, tmp_);
    } else {
        std::fill(tmp_.begin(), tmp_.end(), 0.0);
    }
    for (std::size_t k = 0; k < m; ++k) {
        const double t = zeta[k] + dt_ * tmp_[k];
        if (!pre.empty()) pre[k] = t;
        zeta[k] = decay_[k] * t;
    }
    check(zeta, "second variation");
}

NoisePath coarsen_noise(const NoisePath& fine, const GalerkinStepper& fine_stepper) {
    if (fine.steps % 2 != 0) throw DomainError("coarsening needs an even number of steps");
    const std::size_t m = fine.modes;
    const double dt = fine_stepper.dt();
    const auto decay = fine_stepper.decay();
    NoisePath coarse;
    coarse.modes = m;
    coarse.steps = fine.steps / 2;
    coarse.xi.resize(coarse.steps * m);
    coarse.offsets.push_back(0);
    for (std::size_t n = 0; n < coarse.steps; ++n) {
        const auto a = fine.normals(2 * n);
        const auto b = fine.normals(2 * n + 1);
        for (std::size_t k = 0; k < m; ++k) {
            // e^{-l dt} s xi_a + s xi_b has variance s^2 (1 + e^{-2 l dt}), the coarse OU variance
            coarse.xi[n * m + k] = (decay[k] * a[k] + b[k]) / std::sqrt(1.0 + decay[k] * decay[k]);
        }
        for (const auto& j : fine.jumps_in(2 * n)) coarse.jumps.push_back(j);
        for (const auto& j : fine.jumps_in(2 * n + 1)) coarse.jumps.push_back({j.tau + dt, j.atom});
        coarse.offsets.push_back(coarse.jumps.size());
    }
    return coarse;
}

SpectralField step_uncontrolled(GalerkinStepper& stepper, const SpectralField& y,
                                std::span<const double> xi, std::span<const JumpDraw> jumps) {
    SpectralField out = fit_modes(y, stepper.modes());
    stepper.prepare(out.coeffs());
    stepper.advance_state(out.coeffs(), xi, jumps);
    return out;
}

SpectralField step_controlled(GalerkinStepper& stepper, const SpectralField& x,
                              const SpectralField& u, std::span<const double> xi,
                              std::span<const JumpDraw> jumps) {
    SpectralField out = fit_modes(x, stepper.modes());
    const SpectralField uu = fit_modes(u, stepper.modes());
    stepper.prepare(out.coeffs());
    stepper.advance_state(out.coeffs(), xi, jumps, 1.0, uu.coeffs());
    return out;
}

SpectralField step_first_variation(GalerkinStepper& stepper, const SpectralField& eta,
                                   const SpectralField& y) {
    SpectralField out = fit_modes(eta, stepper.modes());
    const SpectralField yy = fit_modes(y, stepper.modes());
    stepper.prepare(yy.coeffs());
    stepper.advance_first_variation(out.coeffs());
    return out;
}

SpectralField step_second_variation(GalerkinStepper& stepper, const SpectralField& zeta,
                                    const SpectralField& eta, const SpectralField& y) {
    SpectralField out = fit_modes(zeta, stepper.modes());
    const SpectralField ee = fit_modes(eta, stepper.modes());
    const SpectralField yy = fit_modes(y, stepper.modes());
    stepper.prepare(yy.coeffs());
    stepper.advance_second_variation(out.coeffs(), ee.coeffs());
    return out;
}

Trajectory simulate_trajectory(const IntegratorConfig& cfg, const NoiseModel& noise,
                               const SpectralField& x, std::uint64_t seed,
                               std::size_t path_index, const ControlLaw& control) {
    GalerkinStepper stepper(cfg, noise);
    const std::size_t m = cfg.modes;
    const std::size_t steps = stepper.steps();
    const double dt = stepper.dt();
    Rng rng = substream(seed, path_index, stream_tag::paths);

    Trajectory tr;
    tr.path_index = path_index;
    tr.times.reserve(steps + 1);
    tr.states.reserve(steps + 1);
    SpectralField y = fit_modes(x, m);
    tr.times.push_back(0.0);
    tr.states.push_back(y);

    std::vector<double> xi(m);
    std::vector<JumpDraw> jumps;
    SpectralField u(m);
    try {
        for (std::size_t n = 0; n < steps; ++n) {
            const double t = static_cast<double>(n) * dt;
            stepper.draw_step(rng, xi, jumps);
            if (control) {
                control(t, n, y.coeffs(), u.coeffs());
                tr.control_log.push_back(u);
            }
            stepper.prepare(y.coeffs());
            stepper.advance_state(y.coeffs(), xi, jumps, 1.0,
                                  control ? std::span<const double>(u.coeffs())
                                          : std::span<const double>{});
            if (cfg.record_noise) {
                SpectralField dw(m);
                for (std::size_t k = 0; k < m; ++k) dw[k] = std::sqrt(dt) * xi[k];
                tr.wiener_increments.push_back(std::move(dw));
            }
            for (const auto& j : jumps) {
                const double z = noise.levy.atoms()[j.atom].mark;
                tr.jump_log.push_back({t + j.tau, z, noise.levy.jump_field(t + j.tau, z, m)});
            }
            tr.times.push_back(static_cast<double>(n + 1) * dt);
            tr.states.push_back(y);
        }
    } catch (const DivergenceError& e) {
        rethrow_divergence(e, seed, path_index);
    }
    return tr;
}

Trajectory simulate_closed_loop(const IntegratorConfig& cfg, const NoiseModel& noise,
                                const SpectralField& x, const ValueGradientFn& grad,
                                double rho, std::uint64_t seed, std::size_t path_index) {
    std::vector<double> p(cfg.modes);
    ControlLaw law = [&](double t, std::size_t, std::span<const double> y, std::span<double> u) {
        grad(t, y, p);
        feedback_G(p, rho, u);
    };
    return simulate_trajectory(cfg, noise, x, seed, path_index, law);
}

namespace {

struct PathResult {
    PathRecord record;
    Trajectory trajectory;
};

PathResult run_path(const IntegratorConfig& cfg, const NoiseModel& noise, const SpectralField& x0,
                    const EnsembleOptions& opts, const std::vector<std::size_t>& marks,
                    std::size_t path) {
    const bool keep = path < opts.keep_trajectories;
    GalerkinStepper stepper(cfg, noise);
    const std::size_t m = cfg.modes;
    const std::size_t steps = stepper.steps();
    const double dt = stepper.dt();
    const std::size_t np = opts.moment_powers.size();
    Rng rng = substream(opts.seed, path, stream_tag::paths);

    PathResult r;
    auto& rec = r.record;
    auto& tr = r.trajectory;
    tr.path_index = path;
    rec.norm2.assign(marks.size(), 0.0);
    rec.enstrophy_integral.assign(marks.size(), 0.0);
    rec.sup_norm2.assign(marks.size(), 0.0);
    rec.moment_integral.assign(marks.size(), std::vector<double>(np, 0.0));

    std::vector<double> y = fit_modes(x0, m).values();
    std::vector<double> xi(m), u(m);
    std::vector<JumpDraw> jumps;
    double integral = 0.0, sup = 0.0;
    std::vector<double> mom(np, 0.0);
    for (std::size_t n = 0;; ++n) {
        if (keep) {
            tr.times.push_back(static_cast<double>(n) * dt);
            tr.states.emplace_back(y);
        }
        const double n2 = sq(y);
        sup = std::max(sup, n2);
        for (std::size_t i = 0; i < marks.size(); ++i) {
            if (marks[i] == n) {
                rec.norm2[i] = n2;
                rec.enstrophy_integral[i] = integral;
                rec.sup_norm2[i] = sup;
                rec.moment_integral[i] = mom;
            }
        }
        if (n == steps) break;
        const double e = enstrophy_of(y);
        integral += dt * e;
        for (std::size_t ip = 0; ip < np; ++ip) {
            mom[ip] += dt * std::pow(n2, 0.5 * opts.moment_powers[ip] - 1.0) * e;
        }
        stepper.draw_step(rng, xi, jumps);
        if (opts.control) {
            opts.control(static_cast<double>(n) * dt, n, y, u);
            if (keep) tr.control_log.emplace_back(u);
        }
        if (keep) {
            if (cfg.record_noise) {
                SpectralField dw(m);
                for (std::size_t k = 0; k < m; ++k) dw[k] = std::sqrt(dt) * xi[k];
                tr.wiener_increments.push_back(std::move(dw));
            }
            for (const auto& j : jumps) {
                const double z = noise.levy.atoms()[j.atom].mark;
                const double tj = static_cast<double>(n) * dt + j.tau;
                tr.jump_log.push_back({tj, z, noise.levy.jump_field(tj, z, m)});
            }
        }
        stepper.prepare(y);
        try {
            stepper.advance_state(y, xi, jumps, 1.0,
                                  opts.control ? std::span<const double>(u)
                                               : std::span<const double>{});
        } catch (const DivergenceError& e) {
            rethrow_divergence(e, opts.seed, path);
        }
    }
    return r;
}

} // namespace

Ensemble simulate_paths(const IntegratorConfig& cfg, const NoiseModel& noise,
                        const SpectralField& x, const EnsembleOptions& opts) {
    cfg.validate();
    const double dt = cfg.step();
    const std::size_t steps = cfg.steps();
    Ensemble ens;
    ens.times = opts.checkpoints.empty() ? std::vector<double>{cfg.T} : opts.checkpoints;
    const auto marks = checkpoint_steps(ens.times, dt, steps);

    auto results = parallel_map(opts.n_paths, opts.workers, [&](std::size_t p) {
        return run_path(cfg, noise, x, opts, marks, p);
    });

    ens.records.reserve(results.size());
    for (auto& r : results) {
        ens.records.push_back(std::move(r.record));
        if (!r.trajectory.states.empty()) ens.kept.push_back(std::move(r.trajectory));
    }
    std::vector<double> a(opts.n_paths), b(opts.n_paths), c(opts.n_paths);
    for (std::size_t i = 0; i < marks.size(); ++i) {
        for (std::size_t p = 0; p < opts.n_paths; ++p) {
            a[p] = ens.records[p].norm2[i];
            b[p] = ens.records[p].enstrophy_integral[i];
            c[p] = ens.records[p].sup_norm2[i];
        }
        ens.summary.push_back({ens.times[i], sample_stats(a), sample_stats(b), sample_stats(c)});
    }
    return ens;
}

EnergyIdentityReport energy_identity_report(const IntegratorConfig& cfg, const NoiseModel& noise,
                                            const SpectralField& x, std::size_t n_paths,
                                            std::uint64_t seed, std::vector<double> checkpoints,
                                            unsigned workers) {
    EnsembleOptions opts;
    opts.n_paths = n_paths;
    opts.seed = seed;
    opts.workers = workers;
    opts.checkpoints = checkpoints.empty() ? std::vector<double>{cfg.T} : std::move(checkpoints);
    const Ensemble ens = simulate_paths(cfg, noise, x, opts);

    EnergyIdentityReport rep;
    rep.n_paths = n_paths;
    const std::size_t m = cfg.modes;
    rep.rhs_slope = trace(noise.covariance, m) + noise.levy.jump_energy(0.0, m);
    const double x2 = fit_modes(x, m).squared_norm();
    rep.pass = true;
    std::vector<double> lhs(n_paths);
    for (std::size_t i = 0; i < ens.times.size(); ++i) {
        for (std::size_t p = 0; p < n_paths; ++p) {
            lhs[p] = ens.records[p].norm2[i] +
                     2.0 * cfg.viscosity * ens.records[p].enstrophy_integral[i];
        }
        const SampleStats s = sample_stats(lhs);
        EnergyRow row;
        row.t = ens.times[i];
        row.lhs = s.mean;
        row.std_error = s.std_error;
        row.rhs = x2 + row.t * rep.rhs_slope;
        row.relative_defect = row.rhs > 0.0 ? (row.lhs - row.rhs) / row.rhs : row.lhs - row.rhs;
        row.tolerance = 0.02 * row.rhs + 3.0 * row.std_error + 1e-14;
        row.pass = std::abs(row.lhs - row.rhs) <= row.tolerance;
        rep.pass = rep.pass && row.pass;
        rep.rows.push_back(row);
    }
    return rep;
}

DefectConvergence energy_defect_convergence(IntegratorConfig cfg, const NoiseModel& noise,
                                            const SpectralField& x, double t,
                                            std::vector<double> dts, std::size_t n_paths,
                                            std::uint64_t seed, unsigned workers) {
    if (dts.size() < 2) throw DomainError("defect convergence needs at least two step sizes");
    std::sort(dts.begin(), dts.end());
    for (std::size_t i = 1; i < dts.size(); ++i) {
        if (std::abs(dts[i] - 2.0 * dts[i - 1]) > 1e-12 * dts[i]) {
            throw DomainError("defect convergence needs step sizes that double from level to level");
        }
    }
    cfg.T = t;
    const std::size_t levels = dts.size();
    std::vector<IntegratorConfig> cfgs(levels, cfg);
    for (std::size_t l = 0; l < levels; ++l) cfgs[l].dt = dts[l];
    const std::size_t m = cfg.modes;
    const double rhs = fit_modes(x, m).squared_norm() +
                       t * (trace(noise.covariance, m) + noise.levy.jump_energy(0.0, m));
    if (cfgs[0].steps() % (std::size_t{1} << (levels - 1)) != 0) {
        throw DomainError("finest step count must be divisible by 2^(levels-1)");
    }

    auto per_path = parallel_map(n_paths, workers, [&](std::size_t p) {
        std::vector<double> lhs(levels);
        Rng rng = substream(seed, p, stream_tag::paths);
        std::vector<GalerkinStepper> steppers;
        steppers.reserve(levels);
        for (const auto& c : cfgs) steppers.emplace_back(c, noise);
        NoisePath path = steppers[0].draw_path(rng);
        for (std::size_t l = 0; l < levels; ++l) {
            if (l > 0) path = coarsen_noise(path, steppers[l - 1]);
            auto& st = steppers[l];
            std::vector<double> y = fit_modes(x, m).values();
            double integral = 0.0;
            try {
                for (std::size_t n = 0; n < st.steps(); ++n) {
                    integral += st.dt() * enstrophy_of(y);
                    st.prepare(y);
                    st.advance_state(y, path.normals(n), path.jumps_in(n));
                }
            } catch (const DivergenceError& e) {
                rethrow_divergence(e, seed, p);
            }
            lhs[l] = sq(y) + 2.0 * cfg.viscosity * integral;
        }
        return lhs;
    });

    DefectConvergence out;
    out.dts = dts;
    std::vector<double> col(n_paths);
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t p = 0; p < n_paths; ++p) col[p] = per_path[p][l];
        const SampleStats s = sample_stats(col);
        out.defects.push_back(s.mean - rhs);
        out.std_errors.push_back(s.std_error);
    }
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        for (std::size_t p = 0; p < n_paths; ++p) col[p] = per_path[p][l + 1] - per_path[p][l];
        const SampleStats s = sample_stats(col);
        out.level_gaps.push_back(s.mean);
        out.level_gap_std_errors.push_back(s.std_error);
    }
    std::vector<double> abs_defects, abs_gaps;
    for (double d : out.defects) abs_defects.push_back(std::max(std::abs(d), 1e-300));
    for (double g : out.level_gaps) abs_gaps.push_back(std::max(std::abs(g), 1e-300));
    out.raw_order = observed_order(dts, abs_defects);
    if (abs_gaps.size() == 1) {
        // one gap: compare it with the finest defect, d(2h) - d(h) = d(h) (2^q - 1)
        out.order = std::log2(1.0 + abs_gaps[0] / abs_defects[0]);
    } else {
        out.order = observed_order(std::span<const double>(dts).first(abs_gaps.size()), abs_gaps);
    }
    out.pass = out.order >= 0.8;
    return out;
}

MomentReport moment_report(const IntegratorConfig& cfg, const NoiseModel& noise,
                           const SpectralField& direction, std::vector<double> radii,
                           std::vector<int> powers, double epsilon, std::size_t n_paths,
                           std::uint64_t seed, unsigned workers) {
    for (int p : powers) {
        if (p < 2) throw DomainError("moment powers must be >= 2");
    }
    if (!(epsilon > 0.0)) throw DomainError("exponential-moment epsilon must be positive");
    std::sort(radii.begin(), radii.end());
    const SpectralField dir = fit_modes(direction, cfg.modes);
    if (!(dir.norm() > 0.0)) throw DomainError("moment direction must be non-zero");

    MomentReport rep;
    rep.epsilon = epsilon;
    EnsembleOptions opts;
    opts.n_paths = n_paths;
    opts.seed = seed;
    opts.workers = workers;
    opts.checkpoints = {cfg.T};
    for (int p : powers) opts.moment_powers.push_back(static_cast<double>(p));

    std::vector<std::vector<MomentRow>> by_power(powers.size());
    for (double r : radii) {
        const SpectralField x = dir * (r / dir.norm());
        const Ensemble ens = simulate_paths(cfg, noise, x, opts);
        std::vector<double> a(n_paths), b(n_paths), c(n_paths);
        for (std::size_t ip = 0; ip < powers.size(); ++ip) {
            const double p = static_cast<double>(powers[ip]);
            for (std::size_t i = 0; i < n_paths; ++i) {
                const auto& rec = ens.records[i];
                a[i] = std::pow(rec.sup_norm2[0], 0.5 * p);
                b[i] = rec.moment_integral[0][ip];
                c[i] = a[i] + b[i];
            }
            MomentRow row;
            row.x_norm = r;
            row.p = powers[ip];
            row.sup_moment = sample_stats(a);
            row.integral_moment = sample_stats(b);
            const SampleStats sum = sample_stats(c);
            const double scale = 1.0 + std::pow(r, p);
            row.ratio = sum.mean / scale;
            row.ratio_std_error = sum.std_error / scale;
            rep.rows.push_back(row);
            by_power[ip].push_back(row);
        }
        ExpMomentRow er;
        er.x_norm = r;
        bool finite = true;
        for (std::size_t i = 0; i < n_paths; ++i) {
            const auto& rec = ens.records[i];
            a[i] = std::exp(epsilon * rec.norm2[0]);
            b[i] = std::exp(epsilon * (rec.norm2[0] + rec.enstrophy_integral[0]));
            finite = finite && std::isfinite(a[i]) && std::isfinite(b[i]);
        }
        er.terminal = sample_stats(a);
        er.full = sample_stats(b);
        const double base = std::exp(epsilon * r * r);
        er.saturated = !finite || !std::isfinite(base) || !std::isfinite(er.terminal.mean);
        if (!er.saturated) {
            er.ratio = er.terminal.mean / base;
            er.ratio_std_error = er.terminal.std_error / base;
            er.full_ratio = er.full.mean / base;
        }
        rep.exp_rows.push_back(er);
    }

    rep.polynomial_pass = true;
    for (std::size_t ip = 0; ip < powers.size(); ++ip) {
        const auto& rows = by_power[ip];
        double cmax = 0.0;
        for (const auto& r : rows) {
            if (!std::isfinite(r.ratio)) rep.polynomial_pass = false;
            cmax = std::max(cmax, r.ratio);
        }
        rep.fitted_constant.emplace_back(powers[ip], cmax);
        // Local growth exponent between the two largest radii with a non-zero moment.
        double s = 0.0, se_s = 0.0;
        std::vector<const MomentRow*> pos;
        for (const auto& r : rows) {
            if (r.x_norm > 0.0 && r.sup_moment.mean + r.integral_moment.mean > 0.0) pos.push_back(&r);
        }
        if (pos.size() >= 2) {
            const MomentRow& lo = *pos[pos.size() - 2];
            const MomentRow& hi = *pos[pos.size() - 1];
            const double m_lo = lo.ratio * (1.0 + std::pow(lo.x_norm, lo.p));
            const double m_hi = hi.ratio * (1.0 + std::pow(hi.x_norm, hi.p));
            const double se_lo = lo.ratio_std_error * (1.0 + std::pow(lo.x_norm, lo.p));
            const double se_hi = hi.ratio_std_error * (1.0 + std::pow(hi.x_norm, hi.p));
            const double lr = std::log(hi.x_norm / lo.x_norm);
            s = std::log(m_hi / m_lo) / lr;
            se_s = std::hypot(se_hi / m_hi, se_lo / m_lo) / lr;
            if (!(s <= powers[ip] + 3.0 * se_s)) rep.polynomial_pass = false;
        }
        rep.growth_exponent.emplace_back(powers[ip], s);
        rep.growth_exponent_std_error.emplace_back(powers[ip], se_s);
    }

    // The ratio at the largest radius may not exceed the smaller radii's ratios beyond noise.
    rep.exponential_pass = true;
    std::vector<const ExpMomentRow*> live;
    for (const auto& e : rep.exp_rows) {
        if (!e.saturated) live.push_back(&e);
    }
    if (live.size() >= 2) {
        const ExpMomentRow& top = *live.back();
        const ExpMomentRow* best = live.front();
        for (std::size_t i = 0; i + 1 < live.size(); ++i) {
            if (live[i]->ratio > best->ratio) best = live[i];
        }
        rep.exp_top_ratio = top.ratio;
        rep.exp_reference_ratio = best->ratio;
        rep.exp_tolerance = 3.0 * std::hypot(top.ratio_std_error, best->ratio_std_error);
        rep.exponential_pass = top.ratio <= best->ratio + rep.exp_tolerance;
    }
    return rep;
}

VariationConsistency variation_consistency(const IntegratorConfig& cfg, const NoiseModel& noise,
                                           const SpectralField& x, const SpectralField& h,
                                           std::vector<double> deltas, std::size_t n_paths,
                                           std::uint64_t seed) {
    cfg.validate();
    if (deltas.size() < 2) throw DomainError("variation_consistency needs at least two deltas");
    for (double d : deltas) {
        if (!(d > 0.0)) throw DomainError("variation_consistency: deltas must be positive");
    }
    const std::size_t m = cfg.modes;
    const SpectralField x0 = fit_modes(x, m);
    const SpectralField h0 = fit_modes(h, m);

    VariationConsistency rep;
    rep.rows.resize(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) rep.rows[i].delta = deltas[i];

    GalerkinStepper stepper(cfg, noise);
    auto flow = [&](const NoisePath& path, const SpectralField& start) {
        std::vector<double> y(start.values());
        for (std::size_t n = 0; n < path.steps; ++n) {
            stepper.prepare(y);
            stepper.advance_state(y, path.normals(n), path.jumps_in(n));
        }
        return y;
    };
    auto rel = [](const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            num += (a[k] - b[k]) * (a[k] - b[k]);
            den += b[k] * b[k];
        }
        return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    };

    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = substream(seed, p, stream_tag::paths);
        const NoisePath path = stepper.draw_path(rng);

        std::vector<double> y(x0.values()), eta(h0.values()), zeta(m, 0.0);
        for (std::size_t n = 0; n < path.steps; ++n) {
            stepper.prepare(y);
            stepper.advance_second_variation(zeta, eta);
            stepper.advance_first_variation(eta);
            stepper.advance_state(y, path.normals(n), path.jumps_in(n));
        }
        if (p == 0) {
            rep.eta_norm = std::sqrt(sq(eta));
            rep.zeta_norm = std::sqrt(sq(zeta));
        }

        for (std::size_t i = 0; i < deltas.size(); ++i) {
            const double d = deltas[i];
            const auto y1 = flow(path, x0 + d * h0);
            const auto y2 = flow(path, x0 + 2.0 * d * h0);
            std::vector<double> q1(m), q2(m);
            for (std::size_t k = 0; k < m; ++k) {
                q1[k] = (y1[k] - y[k]) / d;
                q2[k] = (y2[k] - 2.0 * y1[k] + y[k]) / (d * d);
            }
            rep.rows[i].first_error = std::max(rep.rows[i].first_error, rel(q1, eta));
            rep.rows[i].second_error = std::max(rep.rows[i].second_error, rel(q2, zeta));
        }
    }

    std::vector<double> ds, e1, e2;
    for (const auto& r : rep.rows) {
        ds.push_back(r.delta);
        e1.push_back(std::max(r.first_error, 1e-300));
        e2.push_back(std::max(r.second_error, 1e-300));
    }
    rep.first_order = observed_order(ds, e1);
    rep.second_order = observed_order(ds, e2);
    rep.pass = rep.first_order >= 0.8 && rep.second_order >= 0.8;
    return rep;
}

} // namespace burgers
