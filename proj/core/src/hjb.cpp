#include "burgers/hjb.hpp"

#include "burgers/errors.hpp"
#include "burgers/hamiltonian.hpp"
#include "burgers/log.hpp"
#include "burgers/parallel.hpp"
#include "burgers/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace burgers {

ValueGrid::ValueGrid(std::size_t modes, double R, std::size_t n_pts)
    : m_(modes), R_(R), n_(n_pts) {
    if (modes == 0 || modes > 2) throw DomainError("value grids support m = 1 or m = 2");
    if (!(R > 0.0)) throw DomainError("grid radius R must be positive");
    if (n_pts < 3) throw DomainError("grid needs at least 3 points per axis");
    nodes_ = modes == 1 ? n_ : n_ * n_;
    h_ = 2.0 * R_ / static_cast<double>(n_ - 1);
}

std::vector<std::size_t> ValueGrid::unflatten(std::size_t flat) const {
    if (m_ == 1) return {flat};
    return {flat % n_, flat / n_};
}

std::vector<double> ValueGrid::node(std::size_t flat) const {
    std::vector<double> x;
    for (std::size_t i : unflatten(flat)) x.push_back(coordinate(i));
    return x;
}

std::vector<double> ValueGrid::node_gradients(const std::vector<double>& v) const {
    std::vector<double> g(nodes_ * m_);
    for (std::size_t f = 0; f < nodes_; ++f) {
        const auto idx = unflatten(f);
        for (std::size_t k = 0; k < m_; ++k) {
            const std::size_t stride = k == 0 ? 1 : n_;
            const std::size_t i = idx[k];
            double d;
            if (i == 0) {
                d = (-3.0 * v[f] + 4.0 * v[f + stride] - v[f + 2 * stride]) / (2.0 * h_);
            } else if (i == n_ - 1) {
                d = (3.0 * v[f] - 4.0 * v[f - stride] + v[f - 2 * stride]) / (2.0 * h_);
            } else {
                d = (v[f + stride] - v[f - stride]) / (2.0 * h_);
            }
            g[f * m_ + k] = d;
        }
    }
    return g;
}

void ValueGrid::push_slice(double t, std::vector<double> values) {
    if (values.size() != nodes_) throw DomainError("slice size does not match the grid");
    if (!times_.empty() && !(t > times_.back())) throw DomainError("slice times must increase");
    for (std::size_t f = 0; f < nodes_; ++f) {
        if (!std::isfinite(values[f])) {
            std::ostringstream os;
            os << "non-finite value at t = " << t << ", node " << f;
            throw DivergenceError(os.str());
        }
    }
    grads_.push_back(node_gradients(values));
    values_.push_back(std::move(values));
    times_.push_back(t);
}

ValueGrid::Bracket ValueGrid::bracket(std::span<const double> x, double lo, double hi,
                                      bool* outside) const {
    Bracket b;
    bool out = false;
    for (std::size_t k = 0; k < m_; ++k) {
        double xc = k < x.size() ? x[k] : 0.0;
        if (xc < lo || xc > hi || !std::isfinite(xc)) {
            out = true;
            xc = std::isfinite(xc) ? std::clamp(xc, lo, hi) : 0.0;
        }
        const double pos = (xc + R_) / h_;
        auto i = static_cast<long>(std::floor(pos));
        i = std::clamp<long>(i, 0, static_cast<long>(n_) - 2);
        b.lo[k] = static_cast<std::size_t>(i);
        b.w[k] = pos - static_cast<double>(i);
    }
    if (outside) *outside = out;
    return b;
}

template <typename Fn>
void ValueGrid::interpolate(const Bracket& b, Fn&& fn) const {
    if (m_ == 1) {
        fn(b.lo[0], 1.0 - b.w[0]);
        fn(b.lo[0] + 1, b.w[0]);
        return;
    }
    const std::size_t base = b.lo[0] + n_ * b.lo[1];
    fn(base, (1.0 - b.w[0]) * (1.0 - b.w[1]));
    fn(base + 1, b.w[0] * (1.0 - b.w[1]));
    fn(base + n_, (1.0 - b.w[0]) * b.w[1]);
    fn(base + n_ + 1, b.w[0] * b.w[1]);
}

double ValueGrid::interpolate(const std::vector<double>& v, std::span<const double> x,
                              bool* outside) const {
    double acc = 0.0;
    interpolate(bracket(x, -R_, R_, outside), [&](std::size_t f, double w) { acc += w * v[f]; });
    return acc;
}

void ValueGrid::time_bracket(double t, std::size_t& s0, double& w) const {
    if (times_.empty()) throw DomainError("value grid has no slices");
    if (times_.size() == 1 || t <= times_.front()) {
        s0 = 0;
        w = 0.0;
        return;
    }
    if (t >= times_.back()) {
        s0 = times_.size() - 2;
        w = 1.0;
        return;
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    s0 = static_cast<std::size_t>(it - times_.begin()) - 1;
    w = (t - times_[s0]) / (times_[s0 + 1] - times_[s0]);
}

double ValueGrid::value_at_slice(std::size_t s, std::span<const double> x, bool* outside) const {
    return interpolate(values_.at(s), x, outside);
}

double ValueGrid::value(double t, std::span<const double> x, bool* outside) const {
    std::size_t s0;
    double w;
    time_bracket(t, s0, w);
    const double a = value_at_slice(s0, x, outside);
    if (w == 0.0) return a;
    return (1.0 - w) * a + w * value_at_slice(s0 + 1, x);
}

void ValueGrid::gradient_at_slice(std::size_t s, std::span<const double> x, std::span<double> out,
                                  bool* outside) const {
    const auto& g = grads_.at(s);
    for (std::size_t k = 0; k < m_; ++k) out[k] = 0.0;
    interpolate(bracket(x, -R_ + h_, R_ - h_, outside), [&](std::size_t f, double w) {
        for (std::size_t k = 0; k < m_; ++k) out[k] += w * g[f * m_ + k];
    });
    for (std::size_t k = m_; k < out.size(); ++k) out[k] = 0.0;
}

void ValueGrid::gradient(double t, std::span<const double> x, std::span<double> out,
                         bool* outside) const {
    std::size_t s0;
    double w;
    time_bracket(t, s0, w);
    gradient_at_slice(s0, x, out, outside);
    if (w == 0.0) return;
    double tmp[2] = {0.0, 0.0};
    gradient_at_slice(s0 + 1, x, std::span<double>(tmp, m_));
    for (std::size_t k = 0; k < m_; ++k) out[k] = (1.0 - w) * out[k] + w * tmp[k];
}

namespace {

/// -nu lambda_k x_k + B_m(x)_k at every node: [flat * m + k].
std::vector<double> node_drift(const ValueGrid& grid, const IntegratorConfig& cfg) {
    const std::size_t m = grid.modes();
    std::vector<double> b(grid.nodes() * m);
    GalerkinNonlinearity nl(m, cfg.level(), cfg.quadrature_points);
    std::vector<double> bm(m, 0.0);
    for (std::size_t f = 0; f < grid.nodes(); ++f) {
        const auto x = grid.node(f);
        if (cfg.nonlinear) {
            nl.load(x);
            nl.apply(bm);
        }
        for (std::size_t k = 0; k < m; ++k) {
            b[f * m + k] = -cfg.viscosity * eigenvalue(static_cast<int>(k + 1)) * x[k] + bm[k];
        }
    }
    return b;
}

/// First difference of v at node f along axis k, upwinded for velocity c.
double upwind(const ValueGrid& g, const std::vector<double>& v, std::size_t f, std::size_t i,
              std::size_t k, double c) {
    const std::size_t stride = k == 0 ? 1 : g.points_per_axis();
    const std::size_t last = g.points_per_axis() - 1;
    const bool forward = (c > 0.0 && i < last) || i == 0;
    if (forward) return (v[f + stride] - v[f]) / g.spacing();
    return (v[f] - v[f - stride]) / g.spacing();
}

/// L v at every node; the jump term uses the central gradient `grad`.
IntegroResult apply_L(const ValueGrid& g, const std::vector<double>& v,
                      const std::vector<double>& grad, const std::vector<double>& drift,
                      const std::vector<double>& rho, const NoiseModel& noise) {
    const std::size_t m = g.modes();
    const std::size_t n = g.points_per_axis();
    const double h2 = g.spacing() * g.spacing();
    std::vector<std::vector<double>> jumps;
    std::vector<double> weights;
    for (const auto& a : noise.levy.atoms()) {
        if (a.weight <= 0.0) continue;
        jumps.push_back(noise.levy.jump_field(0.0, a.mark, m).values());
        weights.push_back(a.weight);
    }
    IntegroResult r;
    r.values.assign(g.nodes(), 0.0);
    std::vector<double> target(m);
    for (std::size_t f = 0; f < g.nodes(); ++f) {
        const auto idx = g.unflatten(f);
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t stride = k == 0 ? 1 : n;
            const std::size_t i = idx[k];
            if (rho[k] > 0.0) {
                const std::size_t ic = std::clamp<std::size_t>(i, 1, n - 2);
                const std::size_t c = f - i * stride + ic * stride;
                acc += 0.5 * rho[k] * (v[c + stride] - 2.0 * v[c] + v[c - stride]) / h2;
            }
            const double b = drift[f * m + k];
            if (b != 0.0) acc += b * upwind(g, v, f, i, k, b);
        }
        const auto x = g.node(f);
        for (std::size_t j = 0; j < jumps.size(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                target[k] = x[k] + jumps[j][k];
                dot += jumps[j][k] * grad[f * m + k];
            }
            bool out = false;
            const double vt = g.interpolate(v, target, &out);
            if (out) ++r.clamped_jumps;
            acc += weights[j] * (vt - v[f] - dot);
        }
        r.values[f] = acc;
    }
    return r;
}

std::function<double(std::span<const double>)> terminal_cost(const HjbCosts& c,
                                                             RegularizationLevel lvl) {
    if (c.terminal) return c.terminal;
    return [lvl](std::span<const double> x) {
        return f_m(SpectralField(std::vector<double>(x.begin(), x.end())), lvl);
    };
}

std::function<double(std::span<const double>)> running_cost(const HjbCosts& c,
                                                            RegularizationLevel lvl) {
    if (c.running) return c.running;
    return [lvl](std::span<const double> x) {
        return phi_m(SpectralField(std::vector<double>(x.begin(), x.end())), lvl);
    };
}

} // namespace

IntegroResult integro_operator_apply(const ValueGrid& grid, std::size_t slice,
                                     const IntegratorConfig& cfg, const NoiseModel& noise) {
    return apply_L(grid, grid.slice(slice), grid.slice_gradient(slice), node_drift(grid, cfg),
                   noise.covariance.eigenvalues(grid.modes()), noise);
}

FdSolveInfo fd_stability(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                         const FdGridSpec& spec) {
    cfg.validate();
    if (cfg.modes > 2) throw DomainError("grid HJB solves support m <= 2");
    if (!(rho >= 0.0)) throw DomainError("control radius rho must be >= 0");
    const std::size_t m = cfg.modes;
    const std::size_t n_pts = spec.n_pts > 0 ? spec.n_pts : (m == 1 ? 201 : 101);
    const ValueGrid grid(m, spec.R, n_pts);
    const double h = grid.spacing();
    const auto rho_k = noise.covariance.eigenvalues(m);
    const auto drift = node_drift(grid, cfg);

    FdSolveInfo inf;
    const double rho_max = *std::max_element(rho_k.begin(), rho_k.end());
    inf.stability_limit =
        rho_max > 0.0 ? 0.4 * h * h / rho_max : std::numeric_limits<double>::infinity();
    double rate = noise.levy.total_mass();
    for (std::size_t k = 0; k < m; ++k) {
        double bmax = 0.0;
        for (std::size_t f = 0; f < grid.nodes(); ++f) bmax = std::max(bmax, std::abs(drift[f * m + k]));
        rate += (bmax + rho) / h + rho_k[k] / (h * h);
    }
    inf.cfl_limit = rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();

    double dt = spec.dt_pde;
    if (dt > 0.0) {
        if (dt > inf.stability_limit) {
            std::ostringstream os;
            os << "dt_pde = " << dt << " exceeds the explicit stability bound 0.4 h^2 / max rho_k = "
               << inf.stability_limit;
            throw ConfigError("hjb.dt_pde", os.str());
        }
        if (dt > inf.cfl_limit) {
            std::ostringstream os;
            os << "dt_pde = " << dt << " exceeds the upwind CFL bound " << inf.cfl_limit;
            throw ConfigError("hjb.dt_pde", os.str());
        }
    } else {
        dt = 0.8 * std::min({inf.stability_limit, inf.cfl_limit, cfg.T});
    }
    inf.steps = static_cast<std::size_t>(std::ceil(cfg.T / dt - 1e-9));
    inf.dt = cfg.T / static_cast<double>(inf.steps);
    return inf;
}

ValueGrid fd_hjb_solve(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                       const FdGridSpec& spec, FdSolveInfo* info) {
    FdSolveInfo local;
    FdSolveInfo& inf = info ? *info : local;
    inf = fd_stability(cfg, noise, rho, spec);
    const std::size_t m = cfg.modes;
    const std::size_t n_pts = spec.n_pts > 0 ? spec.n_pts : (m == 1 ? 201 : 101);
    ValueGrid grid(m, spec.R, n_pts);
    const double h = grid.spacing();
    const auto rho_k = noise.covariance.eigenvalues(m);
    const auto drift = node_drift(grid, cfg);
    const double dt = inf.dt;
    const std::size_t steps = inf.steps;

    const auto term = terminal_cost(spec.costs, cfg.level());
    const auto run = running_cost(spec.costs, cfg.level());
    std::vector<double> v(grid.nodes()), phi(grid.nodes());
    for (std::size_t f = 0; f < grid.nodes(); ++f) {
        const auto x = grid.node(f);
        v[f] = term(x);
        phi[f] = run(x);
    }
    grid.push_slice(0.0, v);

    const std::size_t every =
        std::max<std::size_t>(1, (steps + spec.max_snapshots - 1) / std::max<std::size_t>(1, spec.max_snapshots));
    std::vector<double> next(grid.nodes()), p(m), u(m);
    for (std::size_t n = 0; n < steps; ++n) {
        const auto grad = grid.node_gradients(v);
        const IntegroResult L = apply_L(grid, v, grad, drift, rho_k, noise);
        inf.clamped_jumps += L.clamped_jumps;
        for (std::size_t f = 0; f < grid.nodes(); ++f) {
            double control = 0.0;
            if (rho > 0.0) {
                for (std::size_t k = 0; k < m; ++k) p[k] = grad[f * m + k];
                feedback_G(p, rho, u);
                const auto idx = grid.unflatten(f);
                for (std::size_t k = 0; k < m; ++k) {
                    control += u[k] * upwind(grid, v, f, idx[k], k, u[k]) + 0.5 * u[k] * u[k];
                }
            }
            next[f] = v[f] + dt * (L.values[f] + control + phi[f]);
            if (!std::isfinite(next[f])) {
                std::ostringstream os;
                os << "FD HJB produced a non-finite value at step " << n << ", node " << f
                   << " (dt = " << dt << ", h = " << h << ")";
                throw DivergenceError(os.str());
            }
        }
        v.swap(next);
        if ((n + 1) % every == 0 || n + 1 == steps) {
            grid.push_slice(static_cast<double>(n + 1) * dt, v);
        }
    }
    if (inf.clamped_jumps > 0) {
        std::ostringstream os;
        os << "FD HJB: " << inf.clamped_jumps << " jump targets clamped to the grid boundary";
        log_warning(os.str());
    }
    return grid;
}

ValueGrid mild_picard_solve(const IntegratorConfig& cfg, const NoiseModel& noise, double rho,
                            const PicardSpec& spec, PicardReport* report) {
    cfg.validate();
    if (cfg.modes > 2) throw DomainError("grid HJB solves support m <= 2");
    if (spec.slices == 0) throw DomainError("Picard needs at least one time slice");
    if (!(rho >= 0.0)) throw DomainError("control radius rho must be >= 0");
    const std::size_t m = cfg.modes;
    const std::size_t S = spec.slices;
    const ValueGrid geom(m, spec.R, spec.n_pts);
    const std::size_t nodes = geom.nodes();
    const double ds = cfg.T / static_cast<double>(S);
    IntegratorConfig c = cfg;
    const auto per_slice =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ds / cfg.dt)));
    c.dt = ds / static_cast<double>(per_slice);

    const auto term = terminal_cost(spec.costs, cfg.level());
    const auto run = running_cost(spec.costs, cfg.level());
    const std::size_t pairs = std::max<std::size_t>(1, spec.n_paths / 2);
    const std::size_t npath = 2 * pairs;

    // states[node][(path * (S + 1) + l) * m + k] = Y_k(t_l) started at the node
    auto states = parallel_map(nodes, spec.workers, [&](std::size_t f) {
        std::vector<double> out(npath * (S + 1) * m);
        GalerkinStepper st(c, noise);
        const auto x0 = geom.node(f);
        for (std::size_t q = 0; q < pairs; ++q) {
            Rng rng = substream(spec.seed, q, stream_tag::picard);
            const NoisePath path = st.draw_path(rng);
            for (int side = 0; side < 2; ++side) {
                const double sign = side == 0 ? 1.0 : -1.0;
                const std::size_t p = 2 * q + static_cast<std::size_t>(side);
                std::vector<double> y = x0;
                std::copy(y.begin(), y.end(), out.begin() + static_cast<long>(p * (S + 1) * m));
                for (std::size_t n = 0; n < path.steps; ++n) {
                    st.prepare(y);
                    st.advance_state(y, path.normals(n), path.jumps_in(n), sign);
                    if ((n + 1) % per_slice == 0) {
                        const std::size_t l = (n + 1) / per_slice;
                        std::copy(y.begin(), y.end(),
                                  out.begin() + static_cast<long>((p * (S + 1) + l) * m));
                    }
                }
            }
        }
        return out;
    });

    auto trap = [&](std::size_t i, std::size_t j) {
        return (j == 0 || j == i) ? 0.5 * ds : ds;
    };

    // Per node and path: f(Y_i) + sum_j w_ij phi(Y_{i-j}), the part that never changes.
    auto base = parallel_map(nodes, spec.workers, [&](std::size_t f) {
        const auto& st = states[f];
        std::vector<double> b(npath * (S + 1), 0.0);
        std::vector<double> phi(S + 1);
        for (std::size_t p = 0; p < npath; ++p) {
            for (std::size_t l = 0; l <= S; ++l) {
                phi[l] = run(std::span<const double>(st).subspan((p * (S + 1) + l) * m, m));
            }
            for (std::size_t i = 0; i <= S; ++i) {
                double acc = term(std::span<const double>(st).subspan((p * (S + 1) + i) * m, m));
                for (std::size_t j = 0; i > 0 && j <= i; ++j) acc += trap(i, j) * phi[i - j];
                b[p * (S + 1) + i] = acc;
            }
        }
        return b;
    });

    PicardReport local;
    PicardReport& rep = report ? *report : local;
    rep = PicardReport{};

    struct NodeResult {
        std::vector<double> mean;
        std::vector<double> se;
        std::size_t clamped = 0;
    };
    auto evaluate = [&](const ValueGrid* prev) {
        return parallel_map(nodes, spec.workers, [&](std::size_t f) {
            const auto& st = states[f];
            NodeResult r;
            r.mean.assign(S + 1, 0.0);
            r.se.assign(S + 1, 0.0);
            std::vector<double> total(npath * (S + 1));
            std::vector<double> Fv((S + 1) * (S + 1), 0.0);
            std::vector<double> p(m);
            for (std::size_t q = 0; q < npath; ++q) {
                if (prev && rho > 0.0) {
                    // F(D v(s_j, Y_l)) for j + l <= S
                    for (std::size_t j = 0; j <= S; ++j) {
                        for (std::size_t l = 0; j + l <= S; ++l) {
                            bool out = false;
                            prev->gradient_at_slice(
                                j, std::span<const double>(st).subspan((q * (S + 1) + l) * m, m), p,
                                &out);
                            if (out) ++r.clamped;
                            Fv[j * (S + 1) + l] = hamiltonian_F(p, rho);
                        }
                    }
                }
                for (std::size_t i = 0; i <= S; ++i) {
                    double acc = base[f][q * (S + 1) + i];
                    if (prev && rho > 0.0) {
                        for (std::size_t j = 0; i > 0 && j <= i; ++j) {
                            acc += trap(i, j) * Fv[j * (S + 1) + (i - j)];
                        }
                    }
                    total[q * (S + 1) + i] = acc;
                }
            }
            std::vector<double> pair(pairs);
            for (std::size_t i = 0; i <= S; ++i) {
                for (std::size_t q = 0; q < pairs; ++q) {
                    pair[q] = 0.5 * (total[(2 * q) * (S + 1) + i] + total[(2 * q + 1) * (S + 1) + i]);
                }
                const SampleStats s = sample_stats(pair);
                r.mean[i] = s.mean;
                r.se[i] = s.std_error;
            }
            return r;
        });
    };

    auto assemble = [&](const std::vector<NodeResult>& res) {
        ValueGrid g(m, spec.R, spec.n_pts);
        g.std_errors.assign(S + 1, std::vector<double>(nodes, 0.0));
        for (std::size_t i = 0; i <= S; ++i) {
            std::vector<double> v(nodes);
            for (std::size_t f = 0; f < nodes; ++f) {
                v[f] = res[f].mean[i];
                g.std_errors[i][f] = res[f].se[i];
            }
            g.push_slice(static_cast<double>(i) * ds, std::move(v));
        }
        return g;
    };

    ValueGrid current = assemble(evaluate(nullptr));
    for (std::size_t it = 0; it < spec.max_iter; ++it) {
        const auto res = evaluate(&current);
        ValueGrid next = assemble(res);
        double change = 0.0;
        for (std::size_t i = 0; i <= S; ++i) {
            for (std::size_t f = 0; f < nodes; ++f) {
                change = std::max(change, std::abs(next.slice(i)[f] - current.slice(i)[f]));
            }
        }
        rep.clamped_gradients = 0;
        for (const auto& r : res) rep.clamped_gradients += r.clamped;
        rep.sup_changes.push_back(change);
        rep.iterations = it + 1;
        current = std::move(next);
        {
            std::ostringstream os;
            os << "Picard iteration " << rep.iterations << ": sup change " << change;
            log_info(os.str());
        }
        if (change < spec.tol) {
            rep.converged = true;
            break;
        }
        const auto& sc = rep.sup_changes;
        if (sc.size() >= 4 && sc[sc.size() - 1] >= sc[sc.size() - 2] &&
            sc[sc.size() - 2] >= sc[sc.size() - 3] && sc[sc.size() - 3] >= sc[sc.size() - 4]) {
            rep.stalled = true;
            log_warning("Picard iteration stopped: sup change did not decrease for 3 iterations");
            break;
        }
    }
    for (const auto& row : current.std_errors) {
        for (double s : row) rep.max_std_error = std::max(rep.max_std_error, s);
    }
    return current;
}

SpectralField value_gradient(const ValueGrid& grid, double t, const SpectralField& x,
                             bool* outside) {
    SpectralField g(grid.modes());
    grid.gradient(t, x.coeffs(), g.coeffs(), outside);
    return g;
}

FeedbackPolicy::FeedbackPolicy(const ValueGrid& grid, double rho)
    : grid_(&grid), rho_(rho), T_(grid.times().empty() ? 0.0 : grid.times().back()) {
    if (!(rho >= 0.0)) throw DomainError("control radius rho must be >= 0");
}

void FeedbackPolicy::operator()(double t, std::span<const double> x, std::span<double> u,
                                bool* outside) const {
    double p[2] = {0.0, 0.0};
    const std::size_t m = grid_->modes();
    grid_->gradient(T_ - t, x, std::span<double>(p, m), outside);
    feedback_G(std::span<const double>(p, m), rho_, u.first(m));
    for (std::size_t k = m; k < u.size(); ++k) u[k] = 0.0;
}

SpectralField FeedbackPolicy::operator()(double t, const SpectralField& x) const {
    SpectralField u(grid_->modes());
    (*this)(t, x.coeffs(), u.coeffs());
    return u;
}

FeedbackPolicy extract_policy(const ValueGrid& grid, double rho) { return FeedbackPolicy(grid, rho); }

GridComparison compare_grids(const ValueGrid& coarse, const ValueGrid& fine, double radius) {
    GridComparison c;
    const std::size_t sc = coarse.slices() - 1;
    const std::size_t sf = fine.slices() - 1;
    for (std::size_t f = 0; f < coarse.nodes(); ++f) {
        const auto x = coarse.node(f);
        bool inside = true;
        for (double a : x) inside = inside && std::abs(a) <= radius + 1e-12;
        if (!inside) continue;
        const double vf = fine.value_at_slice(sf, x);
        c.sup_difference = std::max(c.sup_difference, std::abs(coarse.slice(sc)[f] - vf));
        c.sup_reference = std::max(c.sup_reference, std::abs(vf));
        if (!coarse.std_errors.empty()) {
            c.max_std_error = std::max(c.max_std_error, coarse.std_errors.back()[f]);
        }
    }
    c.tolerance = std::max(0.05 * c.sup_reference, 3.0 * c.max_std_error);
    c.pass = c.sup_difference <= c.tolerance;
    return c;
}

void write_value_grid_csv(const ValueGrid& grid, std::ostream& os) {
    os << "m,R,n_pts,slices\n";
    os << std::setprecision(17) << grid.modes() << ',' << grid.radius() << ','
       << grid.points_per_axis() << ',' << grid.slices() << '\n';
    os << 't';
    for (std::size_t f = 0; f < grid.nodes(); ++f) os << ",v" << f;
    os << '\n';
    for (std::size_t s = 0; s < grid.slices(); ++s) {
        os << grid.times()[s];
        for (double v : grid.slice(s)) os << ',' << v;
        os << '\n';
    }
}

ValueGrid read_value_grid_csv(std::istream& is) {
    std::string line;
    auto fail = [](const char* what) { throw ConfigError("value_grid", what); };
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
    }
    if (line != "m,R,n_pts,slices") fail("missing header");
    if (!std::getline(is, line)) fail("missing geometry line");
    std::size_t m = 0, n = 0, slices = 0;
    double R = 0.0;
    {
        std::istringstream ls(line);
        char c1, c2, c3;
        if (!(ls >> m >> c1 >> R >> c2 >> n >> c3 >> slices)) fail("bad geometry line");
    }
    ValueGrid grid(m, R, n);
    if (!std::getline(is, line)) fail("missing column line");
    for (std::size_t s = 0; s < slices; ++s) {
        if (!std::getline(is, line)) fail("truncated slice data");
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        const double t = std::stod(cell);
        std::vector<double> v;
        v.reserve(grid.nodes());
        while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
        grid.push_slice(t, std::move(v));
    }
    return grid;
}

} // namespace burgers
