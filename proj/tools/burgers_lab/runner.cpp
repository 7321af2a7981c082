#include "runner.hpp"

#include "burgers/control.hpp"
#include "burgers/errors.hpp"
#include "burgers/hjb.hpp"
#include "burgers/integrator.hpp"
#include "burgers/log.hpp"
#include "burgers/noise.hpp"
#include "burgers/random.hpp"
#include "burgers/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#ifndef BURGERS_LAB_VERSION
#define BURGERS_LAB_VERSION "0.0.0-unknown"
#endif

namespace burgers::lab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact_version() { return BURGERS_LAB_VERSION; }

bool known_command(const std::string& c) {
    return c == "simulate" || c == "hjb" || c == "verify" || c == "diagnose";
}

namespace {

constexpr std::uint64_t kBelPairTag = 0x42454c50ULL;
constexpr std::uint64_t kControlTag = 0x4354524cULL;

struct Context {
    const ExperimentConfig& cfg;
    IntegratorConfig ic;
    NoiseModel noise;
    SpectralField x;
    unsigned workers;
    fs::path dir;
    std::string hash;
    std::string preamble; // leading comment line of every CSV
};

json claim(const std::string& name, double value, bool pass) {
    return json{{"name", name}, {"value", value}, {"pass", pass}};
}

json new_check(const std::string& name) {
    return json{{"name", name}, {"pass", true}, {"skipped", false},
                {"claims", json::array()}, {"details", json::object()}};
}

void add_claim(json& check, json c) {
    if (!c.at("pass").get<bool>()) check["pass"] = false;
    check["claims"].push_back(std::move(c));
}

json skipped_check(const std::string& name, const std::string& reason) {
    json c = new_check(name);
    c["skipped"] = true;
    c["reason"] = reason;
    return c;
}

json stats_json(const SampleStats& s) {
    return json{{"mean", s.mean}, {"stderr", s.std_error}, {"n", s.n}};
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

json field_json(const SpectralField& f) { return json(f.values()); }

SpectralField random_unit(Rng& rng, std::size_t m) {
    std::normal_distribution<double> n(0.0, 1.0);
    SpectralField h(m);
    do {
        for (std::size_t k = 0; k < m; ++k) h[k] = n(rng);
    } while (h.norm() == 0.0);
    return h * (1.0 / h.norm());
}

// ---- energy -----------------------------------------------------------------------------

json energy_check(const Context& c, bool with_defect) {
    json check = new_check("energy_identity");
    const auto rep = energy_identity_report(c.ic, c.noise, c.x, c.cfg.mc.n_paths, c.cfg.seed,
                                            c.cfg.mc.checkpoints, c.workers);
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json cl = claim("t=" + num(r.t), r.lhs, r.pass);
        cl["reference"] = r.rhs;
        cl["stderr"] = r.std_error;
        cl["tolerance"] = r.tolerance;
        add_claim(check, cl);
        rows.push_back({{"t", r.t}, {"lhs", r.lhs}, {"stderr", r.std_error}, {"rhs", r.rhs},
                        {"relative_defect", r.relative_defect}});
    }
    check["details"]["rows"] = rows;
    check["details"]["rhs_slope"] = rep.rhs_slope;
    check["details"]["n_paths"] = rep.n_paths;

    if (with_defect) {
        const auto d = energy_defect_convergence(c.ic, c.noise, c.x, c.ic.T, c.cfg.verify.defect_dts,
                                                 c.cfg.verify.defect_paths, c.cfg.seed, c.workers);
        json cl = claim("defect_order", d.order, d.pass);
        cl["reference"] = 1.0;
        cl["tolerance"] = 0.2;
        add_claim(check, cl);
        check["details"]["defect"] = {{"dts", d.dts},
                                      {"defects", d.defects},
                                      {"stderr", d.std_errors},
                                      {"level_gaps", d.level_gaps},
                                      {"level_gap_stderr", d.level_gap_std_errors},
                                      {"raw_order", d.raw_order}};
    }
    return check;
}

// ---- simulate ---------------------------------------------------------------------------

json cmd_simulate(const Context& c) {
    EnsembleOptions o;
    o.n_paths = c.cfg.mc.n_paths;
    o.seed = c.cfg.seed;
    o.workers = c.workers;
    o.checkpoints = c.cfg.mc.checkpoints;
    o.keep_trajectories = std::min(c.cfg.mc.keep_trajectories, c.cfg.mc.n_paths);
    const Ensemble e = simulate_paths(c.ic, c.noise, c.x, o);

    std::ostringstream traj, jumps;
    traj << c.preamble << "path_id,t,k,coeff\n";
    jumps << c.preamble << "path_id,t,z\n";
    for (const auto& tr : e.kept) {
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            for (std::size_t k = 0; k < tr.states[i].modes(); ++k) {
                traj << tr.path_index << ',' << num(tr.times[i]) << ',' << k + 1 << ','
                     << num(tr.states[i][k]) << '\n';
            }
        }
        for (const auto& j : tr.jump_log) {
            jumps << tr.path_index << ',' << num(j.time) << ',' << num(j.mark) << '\n';
        }
    }
    write_file(c.dir / "trajectories.csv", traj.str());
    write_file(c.dir / "jumps.csv", jumps.str());

    json summary = json::array();
    for (const auto& s : e.summary) {
        summary.push_back({{"t", s.t},
                           {"norm2", stats_json(s.norm2)},
                           {"enstrophy_integral", stats_json(s.enstrophy_integral)},
                           {"sup_norm2", stats_json(s.sup_norm2)}});
    }
    json summary_doc = {{"config_hash", c.hash}, {"seed", c.cfg.seed},
                        {"version", artifact_version()}, {"n_paths", o.n_paths},
                        {"checkpoints", summary}};
    write_file(c.dir / "summary.json", summary_doc.dump(2) + "\n");

    json checks = json::array();
    checks.push_back(energy_check(c, false));
    return checks;
}

// ---- hjb --------------------------------------------------------------------------------

FdGridSpec fd_spec(const ExperimentConfig& cfg) {
    FdGridSpec s;
    s.R = cfg.hjb.R;
    s.n_pts = cfg.hjb.n_pts;
    s.dt_pde = cfg.hjb.dt_pde;
    return s;
}

std::size_t fd_points(const ExperimentConfig& cfg) {
    if (cfg.hjb.n_pts) return cfg.hjb.n_pts;
    return cfg.problem.m == 1 ? 201 : 101;
}

void write_grid(const Context& c, const ValueGrid& g, const std::string& name) {
    std::ostringstream os;
    os << c.preamble;
    write_value_grid_csv(g, os);
    write_file(c.dir / name, os.str());
}

json cmd_hjb(const Context& c) {
    json checks = json::array();
    const auto& h = c.cfg.hjb;
    const bool fd = h.solver != "picard";
    const bool picard = h.solver != "fd";
    std::optional<ValueGrid> g_fd, g_picard;

    if (fd) {
        json check = new_check("fd_solve");
        FdSolveInfo info;
        g_fd = fd_hjb_solve(c.ic, c.noise, c.cfg.rho, fd_spec(c.cfg), &info);
        write_grid(c, *g_fd, "value_grid_fd.csv");
        const double limit = std::min(info.stability_limit, info.cfl_limit);
        json cl = claim("dt_pde", info.dt, info.dt <= limit);
        cl["tolerance"] = limit;
        add_claim(check, cl);
        check["details"] = {{"steps", info.steps},
                            {"clamped_jumps", info.clamped_jumps},
                            {"stability_limit", info.stability_limit},
                            {"cfl_limit", info.cfl_limit},
                            {"n_pts", g_fd->points_per_axis()},
                            {"R", g_fd->radius()}};
        checks.push_back(check);
    }
    if (picard) {
        json check = new_check("picard_convergence");
        PicardSpec ps;
        ps.R = h.R;
        ps.n_pts = h.picard.n_pts;
        ps.slices = h.picard.slices;
        ps.n_paths = h.picard.n_paths;
        ps.max_iter = h.picard.max_iter;
        ps.tol = h.picard.tol;
        ps.seed = c.cfg.seed;
        ps.workers = c.workers;
        PicardReport pr;
        g_picard = mild_picard_solve(c.ic, c.noise, c.cfg.rho, ps, &pr);
        write_grid(c, *g_picard, "value_grid_picard.csv");
        const double last = pr.sup_changes.empty() ? 0.0 : pr.sup_changes.back();
        json cl = claim("final_sup_change", last, pr.converged);
        cl["tolerance"] = h.picard.tol;
        add_claim(check, cl);
        check["details"] = {{"iterations", pr.iterations},
                            {"sup_changes", pr.sup_changes},
                            {"stalled", pr.stalled},
                            {"max_stderr", pr.max_std_error},
                            {"clamped_gradients", pr.clamped_gradients}};
        checks.push_back(check);
    }
    if (g_fd && g_picard) {
        json check = new_check("cross_oracle");
        const double radius = std::min(1.0, h.R);
        const auto cmp = compare_grids(*g_picard, *g_fd, radius);
        json cl = claim("sup_difference", cmp.sup_difference, cmp.pass);
        cl["reference"] = 0.0;
        cl["stderr"] = cmp.max_std_error;
        cl["tolerance"] = cmp.tolerance;
        add_claim(check, cl);
        check["details"] = {{"radius", radius}, {"sup_reference", cmp.sup_reference}};
        checks.push_back(check);
    }
    return checks;
}

// ---- verify -----------------------------------------------------------------------------

json isometry_check(const Context& c) {
    json check = new_check("ito_isometry");
    const auto r = ito_isometry_check(c.noise.levy, c.ic.T, c.ic.modes, c.cfg.verify.isometry_paths,
                                      c.cfg.seed);
    json cl = claim("second_moment", r.lhs, r.pass);
    cl["reference"] = r.rhs;
    cl["stderr"] = r.std_error;
    cl["tolerance"] = 3.0 * r.std_error;
    add_claim(check, cl);
    check["details"] = {{"n_paths", r.n_paths}, {"levy_active", c.noise.levy.active()}};
    return check;
}

json bel_record(const std::string& kind, const BelEstimate& e, const SpectralField& x,
                std::uint64_t seed) {
    return json{{"observable", "squared_norm"}, {"kind", kind},       {"t", e.t},
                {"x", field_json(x)},           {"h", field_json(e.h)}, {"value", e.value},
                {"stderr", e.std_error},        {"n_paths", e.n_paths}, {"seed", seed}};
}

json bel_check(const Context& c) {
    if (!c.noise.covariance.invertible_on(c.ic.modes)) {
        return skipped_check("bel_gradient", "covariance is not invertible on the Galerkin space");
    }
    json check = new_check("bel_gradient");
    const auto& v = c.cfg.verify;
    const double t = std::min(v.bel_t, c.ic.T);
    const Observable f = observables::squared_norm();
    json records = json::array();

    if (!c.cfg.problem.nonlinear) {
        // Linear flow: E||Y(t)||^2 has gradient 2 e^{-2 nu lambda_k t} x_k and Hessian
        // 2 e^{-2 nu lambda_k t} along e_k, whatever the additive noise.
        McOptions mg{c.cfg.mc.gradient_paths, c.cfg.seed, c.workers, true};
        McOptions mh = mg;
        mh.n_paths = c.cfg.mc.hessian_paths;
        for (std::size_t k = 0; k < c.ic.modes; ++k) {
            const SpectralField e = SpectralField::basis(c.ic.modes, static_cast<int>(k + 1));
            const double w = 2.0 * std::exp(-2.0 * c.ic.viscosity * eigenvalue(static_cast<int>(k + 1)) * t);
            const auto g = bel_gradient(f, t, c.x, e, c.ic, c.noise, mg);
            const auto hs = bel_hessian(f, t, c.x, e, c.ic, c.noise, mh);
            json cg = claim("gradient_k" + std::to_string(k + 1), g.value,
                            std::abs(g.value - w * c.x[k]) <= 3.0 * g.std_error);
            cg["reference"] = w * c.x[k];
            cg["stderr"] = g.std_error;
            cg["tolerance"] = 3.0 * g.std_error;
            add_claim(check, cg);
            json ch = claim("hessian_k" + std::to_string(k + 1), hs.value,
                            std::abs(hs.value - w) <= 3.0 * hs.std_error);
            ch["reference"] = w;
            ch["stderr"] = hs.std_error;
            ch["tolerance"] = 3.0 * hs.std_error;
            add_claim(check, ch);
            records.push_back(bel_record("gradient", g, c.x, c.cfg.seed));
            records.push_back(bel_record("hessian", hs, c.x, c.cfg.seed));
        }
    } else {
        Rng rng = substream(c.cfg.seed, 0, kBelPairTag);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        McOptions mc{c.cfg.mc.gradient_paths, c.cfg.seed, c.workers, true};
        for (std::size_t i = 0; i < v.bel_pairs; ++i) {
            SpectralField x(c.ic.modes);
            for (std::size_t k = 0; k < c.ic.modes; ++k) x[k] = u(rng);
            const SpectralField h = random_unit(rng, c.ic.modes);
            mc.seed = c.cfg.seed + 1000 * (i + 1);
            const auto bel = bel_gradient(f, t, x, h, c.ic, c.noise, mc);
            const auto fd = gradient_fd_oracle(f, t, x, h, v.bel_delta, c.ic, c.noise, mc);
            const double se = std::hypot(bel.std_error, fd.std_error);
            const double tol = std::max(3.0 * se, 0.05 * std::abs(fd.value));
            json cl = claim("pair_" + std::to_string(i), bel.value,
                            std::abs(bel.value - fd.value) <= tol);
            cl["reference"] = fd.value;
            cl["stderr"] = se;
            cl["tolerance"] = tol;
            add_claim(check, cl);
            records.push_back(bel_record("gradient", bel, x, mc.seed));
            records.push_back(bel_record("fd_oracle", fd, x, mc.seed));
        }
    }
    json doc = {{"config_hash", c.hash}, {"seed", c.cfg.seed}, {"version", artifact_version()},
                {"estimates", records}};
    write_file(c.dir / "bel_estimates.json", doc.dump(2) + "\n");
    check["details"] = {{"t", t}, {"estimates_file", "bel_estimates.json"}};
    return check;
}

struct GridBundle {
    ValueGrid grid;
    double budget = 0.0;
};

GridBundle solve_for_checks(const Context& c) {
    GridBundle b;
    FdGridSpec fine = fd_spec(c.cfg);
    fine.n_pts = fd_points(c.cfg);
    b.grid = fd_hjb_solve(c.ic, c.noise, c.cfg.rho, fine);
    FdGridSpec coarse = fine;
    coarse.n_pts = (fine.n_pts - 1) / 2 + 1;
    const ValueGrid g2 = fd_hjb_solve(c.ic, c.noise, c.cfg.rho, coarse);
    b.budget = compare_grids(g2, b.grid, std::min(1.0, c.cfg.hjb.R)).sup_difference;
    write_grid(c, b.grid, "value_grid_fd.csv");
    return b;
}

json verification_check(const Context& c, const GridBundle& g) {
    json check = new_check("verification_identity");
    const double rho = c.cfg.rho;
    std::vector<ControlSpec> controls{ControlSpec::zero(rho)};
    Rng rng = substream(c.cfg.seed, 1, kControlTag);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < c.cfg.verify.verification_controls; ++i) {
        const SpectralField dir = random_unit(rng, c.ic.modes);
        const double r = rho * u(rng);
        controls.push_back(ControlSpec::constant_field(dir * r, rho, "constant_" + std::to_string(i)));
    }
    controls.push_back(ControlSpec::feedback(g.grid, rho));
    McOptions mc{c.cfg.verify.cost_paths, c.cfg.seed, c.workers, false};
    json rows = json::array();
    for (const auto& ctl : controls) {
        const auto r = verification_identity_check(c.x, ctl, g.grid, c.ic, c.noise, mc, g.budget);
        json cl = claim(ctl.label, r.gap, r.pass && !r.unreliable);
        cl["reference"] = 0.0;
        cl["stderr"] = r.gap_std_error;
        cl["tolerance"] = r.tolerance;
        if (r.unreliable) cl["unreliable"] = true;
        add_claim(check, cl);
        json row = {{"label", ctl.label}, {"J", r.J}, {"J_stderr", r.J_std_error},
                    {"value", r.value}, {"correction", r.correction}, {"rhs", r.rhs},
                    {"escape_fraction", r.escape_fraction}};
        if (ctl.kind == ControlSpec::Kind::Constant) row["u"] = field_json(ctl.constant);
        rows.push_back(row);
    }
    check["details"] = {{"grid_budget", g.budget}, {"controls", rows}};
    return check;
}

json dpp_checks(const Context& c, const GridBundle& g) {
    json check = new_check("dpp");
    json rows = json::array();
    for (const auto& tt : c.cfg.verify.dpp_times) {
        const auto r = dpp_check(c.x, tt[0], tt[1], g.grid, c.cfg.rho, c.ic, c.noise,
                                 c.cfg.verify.dpp_outer, c.cfg.verify.dpp_inner, c.cfg.seed,
                                 c.workers, g.budget);
        const std::string tag = "t=" + num(tt[0]) + ",tau=" + num(tt[1]);
        json ci = claim("inequality " + tag, r.V, r.inequality_pass && !r.unreliable);
        ci["reference"] = r.family_min;
        ci["stderr"] = r.family_min_std_error;
        ci["tolerance"] = 3.0 * r.family_min_std_error + r.grid_budget;
        add_claim(check, ci);
        json ca = claim("attainment " + tag, r.feedback.value, r.attainment_pass && !r.unreliable);
        ca["reference"] = r.family_min;
        ca["stderr"] = std::hypot(r.feedback.std_error, r.family_min_std_error);
        ca["tolerance"] = 3.0 * std::hypot(r.feedback.std_error, r.family_min_std_error) + r.grid_budget;
        add_claim(check, ca);
        json fam = json::array();
        for (const auto& f : r.family) {
            fam.push_back({{"label", f.label}, {"value", f.value}, {"stderr", f.std_error}});
        }
        rows.push_back({{"t", tt[0]}, {"tau", tt[1]}, {"family", fam},
                        {"escape_fraction", r.escape_fraction}, {"unreliable", r.unreliable}});
    }
    check["details"] = {{"grid_budget", g.budget}, {"triples", rows}};
    return check;
}

json optimality_check(const Context& c, const GridBundle& g) {
    json check = new_check("optimality");
    auto candidates = constant_control_family(c.ic.modes, c.cfg.rho);
    for (std::size_t i = 0; i < c.cfg.candidates.size(); ++i) {
        SpectralField u(c.ic.modes);
        for (std::size_t k = 0; k < c.cfg.candidates[i].size(); ++k) u[k] = c.cfg.candidates[i][k];
        candidates.push_back(ControlSpec::constant_field(u, c.cfg.rho, "candidate_" + std::to_string(i)));
    }
    McOptions mc{c.cfg.verify.cost_paths, c.cfg.seed, c.workers, false};
    const auto r = optimality_comparison(c.x, g.grid, c.cfg.rho, candidates, c.ic, c.noise, mc);
    json ranking = json::array();
    for (const auto& row : r.rows) {
        json cl = claim(row.label, row.J, row.feedback_not_beaten);
        cl["reference"] = r.feedback.J;
        cl["stderr"] = row.combined_std_error;
        cl["tolerance"] = 3.0 * row.combined_std_error;
        add_claim(check, cl);
        ranking.push_back({{"label", row.label}, {"J", row.J}, {"stderr", row.std_error},
                           {"excess", row.excess}, {"excess_paired_stderr", row.excess_paired_std_error}});
    }
    check["details"] = {{"feedback_J", r.feedback.J}, {"feedback_stderr", r.feedback.std_error},
                        {"ranking", ranking}};
    return check;
}

json cmd_verify(const Context& c) {
    json checks = json::array();
    std::optional<GridBundle> grid;
    const bool grid_ok = c.ic.modes <= 2;
    auto need_grid = [&]() -> const GridBundle& {
        if (!grid) grid = solve_for_checks(c);
        return *grid;
    };
    for (const auto& name : c.cfg.verify.checks) {
        if (name == "energy") checks.push_back(energy_check(c, true));
        if (name == "isometry") checks.push_back(isometry_check(c));
        if (name == "bel") checks.push_back(bel_check(c));
        const bool grid_check = name == "verification" || name == "dpp" || name == "optimality";
        if (grid_check && !grid_ok) {
            checks.push_back(skipped_check(name, "grid solves are limited to m <= 2"));
            continue;
        }
        if (name == "verification") checks.push_back(verification_check(c, need_grid()));
        if (name == "dpp") checks.push_back(dpp_checks(c, need_grid()));
        if (name == "optimality") checks.push_back(optimality_check(c, need_grid()));
    }
    return checks;
}

// ---- diagnose ---------------------------------------------------------------------------

json cmd_diagnose(const Context& c) {
    json checks = json::array();
    const auto& d = c.cfg.diagnose;
    const SpectralField dir = c.x.norm() > 0.0 ? c.x * (1.0 / c.x.norm())
                                                : SpectralField::basis(c.ic.modes, 1);
    const auto mr = moment_report(c.ic, c.noise, dir, d.radii, d.powers, d.epsilon, d.n_paths,
                                  c.cfg.seed, c.workers);
    {
        std::ostringstream os;
        os << c.preamble << "x_norm,p,sup_mean,sup_stderr,integral_mean,integral_stderr,ratio,ratio_stderr\n";
        for (const auto& r : mr.rows) {
            os << num(r.x_norm) << ',' << r.p << ',' << num(r.sup_moment.mean) << ','
               << num(r.sup_moment.std_error) << ',' << num(r.integral_moment.mean) << ','
               << num(r.integral_moment.std_error) << ',' << num(r.ratio) << ','
               << num(r.ratio_std_error) << '\n';
        }
        write_file(c.dir / "moments.csv", os.str());
        std::ostringstream ex;
        ex << c.preamble
           << "x_norm,terminal_mean,terminal_stderr,full_mean,full_stderr,ratio,ratio_stderr,full_ratio,saturated\n";
        for (const auto& r : mr.exp_rows) {
            ex << num(r.x_norm) << ',' << num(r.terminal.mean) << ',' << num(r.terminal.std_error)
               << ',' << num(r.full.mean) << ',' << num(r.full.std_error) << ',' << num(r.ratio)
               << ',' << num(r.ratio_std_error) << ',' << num(r.full_ratio) << ','
               << (r.saturated ? 1 : 0) << '\n';
        }
        write_file(c.dir / "exp_moments.csv", ex.str());
    }
    json poly = new_check("moment_scaling");
    for (std::size_t i = 0; i < mr.growth_exponent.size(); ++i) {
        const auto [p, s] = mr.growth_exponent[i];
        const double se = mr.growth_exponent_std_error[i].second;
        json cl = claim("growth_exponent_p" + std::to_string(p), s, s <= p + 3.0 * se);
        cl["reference"] = static_cast<double>(p);
        cl["stderr"] = se;
        cl["tolerance"] = 3.0 * se;
        add_claim(poly, cl);
    }
    if (!mr.polynomial_pass) poly["pass"] = false;
    json consts = json::array();
    for (const auto& [p, cst] : mr.fitted_constant) consts.push_back({{"p", p}, {"constant", cst}});
    poly["details"] = {{"fitted_constant", consts}, {"table", "moments.csv"}};
    checks.push_back(poly);

    json ex = new_check("exponential_moment");
    json cl = claim("top_radius_ratio", mr.exp_top_ratio, mr.exponential_pass);
    cl["reference"] = mr.exp_reference_ratio;
    cl["tolerance"] = mr.exp_tolerance;
    add_claim(ex, cl);
    ex["details"] = {{"epsilon", mr.epsilon}, {"table", "exp_moments.csv"}};
    checks.push_back(ex);

    if (!c.noise.covariance.invertible_on(c.ic.modes)) {
        checks.push_back(skipped_check("smoothing", "covariance is not invertible on the Galerkin space"));
        return checks;
    }
    double kappa = d.kappa;
    if (kappa == 0.0) {
        kappa = c.noise.covariance.kind() == CovarianceOperator::Kind::Power ? c.noise.covariance.alpha()
                                                                             : 0.75;
    }
    McOptions mc{d.smoothing_paths, c.cfg.seed, c.workers, true};
    const auto tab = smoothing_probe(observables::squared_norm(), c.x, d.smoothing_times, kappa,
                                     c.ic, c.noise, mc);
    std::ostringstream os;
    os << c.preamble << "t,gradient_norm,gradient_norm_stderr,scaled\n";
    json sm = new_check("smoothing");
    sm["informational"] = true;
    for (const auto& r : tab.rows) {
        os << num(r.t) << ',' << num(r.gradient_norm) << ',' << num(r.gradient_norm_std_error) << ','
           << num(r.scaled) << '\n';
        json s = claim("scaled_t=" + num(r.t), r.scaled, std::isfinite(r.scaled));
        s["stderr"] = r.gradient_norm_std_error * (r.gradient_norm > 0.0 ? r.scaled / r.gradient_norm : 0.0);
        add_claim(sm, s);
    }
    write_file(c.dir / "smoothing.csv", os.str());
    sm["details"] = {{"kappa", kappa}, {"non_increasing", tab.non_increasing}, {"table", "smoothing.csv"}};
    checks.push_back(sm);
    return checks;
}

std::string utc_stamp(std::time_t now) {
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

} // namespace

fs::path output_root(const RunOptions& opts, const ExperimentConfig& cfg) {
    if (opts.out && !opts.out->empty()) return *opts.out;
    if (const char* env = std::getenv("BURGERS_LAB_OUT"); env && *env) return env;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    return "runs";
}

fs::path fresh_run_directory(const fs::path& root, const std::string& command,
                             const std::string& hash, std::time_t now) {
    fs::create_directories(root);
    const std::string base = command + "-" + utc_stamp(now) + "-" + hash.substr(0, 8);
    for (int i = 1;; ++i) {
        const fs::path p = root / (i == 1 ? base : base + "-" + std::to_string(i));
        if (fs::create_directory(p)) return p;
    }
}

void preflight(const std::string& command, const ExperimentConfig& cfg) {
    const bool grid_cmd = command == "hjb";
    const bool grid_checks =
        command == "verify" &&
        std::any_of(cfg.verify.checks.begin(), cfg.verify.checks.end(), [](const std::string& s) {
            return s == "verification" || s == "dpp" || s == "optimality";
        });
    if (grid_cmd && cfg.problem.m > 2) {
        throw ConfigError("problem.m", "the hjb command supports m <= 2 only");
    }
    const bool fd_used = (grid_cmd && cfg.hjb.solver != "picard") || (grid_checks && cfg.problem.m <= 2);
    if (fd_used) {
        FdGridSpec s = fd_spec(cfg);
        (void)fd_stability(cfg.integrator(), cfg.noise_model(), cfg.rho, s);
    }
    // Construction validates the integrator setup without running anything.
    GalerkinStepper probe(cfg.integrator(), cfg.noise_model());
    (void)probe;
}

RunResult execute(const std::string& command, const ExperimentConfig& cfg, unsigned workers,
                  const fs::path& dir) {
    const std::string hash = config_hash(cfg);
    Context c{cfg, cfg.integrator(), cfg.noise_model(), cfg.x0(), std::max(1u, workers), dir, hash,
              "# config_hash=" + hash + " seed=" + std::to_string(cfg.seed) +
                  " version=" + artifact_version() + "\n"};
    write_file(dir / "config.resolved.toml", resolved_toml(cfg));

    RunResult res;
    res.directory = dir;
    json report = {{"schema_version", 1},
                   {"command", command},
                   {"version", artifact_version()},
                   {"config_hash", hash},
                   {"seed", cfg.seed}};
    json checks = json::array();
    try {
        if (command == "simulate") checks = cmd_simulate(c);
        if (command == "hjb") checks = cmd_hjb(c);
        if (command == "verify") checks = cmd_verify(c);
        if (command == "diagnose") checks = cmd_diagnose(c);
    } catch (const DivergenceError& e) {
        report["checks"] = checks;
        report["pass"] = false;
        report["error"] = {{"kind", "divergence"}, {"message", e.what()}, {"path_index", e.path_index()}};
        write_file(dir / "report.json", report.dump(2) + "\n");
        res.exit_code = kExitDivergence;
        res.report = report;
        return res;
    }
    bool pass = true;
    for (const auto& ch : checks) {
        if (!ch.value("skipped", false) && !ch.at("pass").get<bool>()) pass = false;
    }
    report["checks"] = checks;
    report["pass"] = pass;
    write_file(dir / "report.json", report.dump(2) + "\n");
    res.exit_code = pass ? kExitPass : kExitToleranceFailure;
    res.report = report;
    return res;
}

RunResult run(const RunOptions& opts, std::ostream& err) {
    RunResult res;
    if (!known_command(opts.command)) {
        err << "unknown command '" << opts.command << "'\n";
        res.exit_code = kExitConfigError;
        return res;
    }
    ExperimentConfig cfg;
    try {
        cfg = load_config(opts.config_path);
        if (opts.seed) cfg.seed = *opts.seed;
        preflight(opts.command, cfg);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        res.exit_code = kExitConfigError;
        return res;
    } catch (const DomainError& e) {
        err << "configuration error: " << e.what() << "\n";
        res.exit_code = kExitConfigError;
        return res;
    } catch (const ResolutionError& e) {
        err << "configuration error: " << e.what() << "\n";
        res.exit_code = kExitConfigError;
        return res;
    }
    const fs::path dir = fresh_run_directory(output_root(opts, cfg), opts.command, config_hash(cfg),
                                             std::time(nullptr));
    try {
        res = execute(opts.command, cfg, opts.workers, dir);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        res.exit_code = kExitConfigError;
        res.directory = dir;
    } catch (const DomainError& e) {
        err << "configuration error: " << e.what() << "\n";
        res.exit_code = kExitConfigError;
        res.directory = dir;
    }
    return res;
}

} // namespace burgers::lab
