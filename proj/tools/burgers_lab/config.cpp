#include "config.hpp"

#include "burgers/errors.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace burgers::lab {

namespace {

/// Typed access to one TOML table; remembers which keys were read so leftovers can be
/// reported as unknown.
class Section {
public:
    Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

    std::string key_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const toml::node* find(const std::string& key) {
        seen_.insert(key);
        return t_ ? t_->get(key) : nullptr;
    }

    double number(const std::string& key, double def) {
        const toml::node* n = find(key);
        if (!n) return def;
        if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
        throw ConfigError(key_path(key), "expected a number");
    }

    std::int64_t integer(const std::string& key, std::int64_t def) {
        const toml::node* n = find(key);
        if (!n) return def;
        if (n->is_integer()) return *n->value<std::int64_t>();
        throw ConfigError(key_path(key), "expected an integer");
    }

    std::size_t count(const std::string& key, std::size_t def, std::size_t min = 0) {
        const std::int64_t v = integer(key, static_cast<std::int64_t>(def));
        if (v < static_cast<std::int64_t>(min)) {
            throw ConfigError(key_path(key), "must be >= " + std::to_string(min));
        }
        return static_cast<std::size_t>(v);
    }

    bool boolean(const std::string& key, bool def) {
        const toml::node* n = find(key);
        if (!n) return def;
        if (n->is_boolean()) return *n->value<bool>();
        throw ConfigError(key_path(key), "expected true or false");
    }

    std::string string(const std::string& key, const std::string& def) {
        const toml::node* n = find(key);
        if (!n) return def;
        if (n->is_string()) return *n->value<std::string>();
        throw ConfigError(key_path(key), "expected a string");
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> def) {
        const toml::node* n = find(key);
        if (!n) return def;
        const toml::array* a = n->as_array();
        if (!a) throw ConfigError(key_path(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < a->size(); ++i) {
            const toml::node& e = *a->get(i);
            if (!(e.is_floating_point() || e.is_integer())) {
                throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
            }
            out.push_back(*e.value<double>());
        }
        return out;
    }

    std::vector<std::vector<double>> rows(const std::string& key,
                                          std::vector<std::vector<double>> def) {
        const toml::node* n = find(key);
        if (!n) return def;
        const toml::array* a = n->as_array();
        if (!a) throw ConfigError(key_path(key), "expected an array of arrays");
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < a->size(); ++i) {
            const std::string p = key_path(key) + "[" + std::to_string(i) + "]";
            const toml::array* r = a->get(i)->as_array();
            if (!r) throw ConfigError(p, "expected an array of numbers");
            std::vector<double> row;
            for (std::size_t j = 0; j < r->size(); ++j) {
                const toml::node& e = *r->get(j);
                if (!(e.is_floating_point() || e.is_integer())) {
                    throw ConfigError(p + "[" + std::to_string(j) + "]", "expected a number");
                }
                row.push_back(*e.value<double>());
            }
            out.push_back(std::move(row));
        }
        return out;
    }

    Section child(const std::string& key) {
        const toml::node* n = find(key);
        if (n && !n->is_table()) throw ConfigError(key_path(key), "expected a table");
        return Section(n ? n->as_table() : nullptr, key_path(key));
    }

    void finish() const {
        if (!t_) return;
        for (auto&& [k, v] : *t_) {
            const std::string key(k.str());
            if (!seen_.count(key)) throw ConfigError(key_path(key), "unknown key");
        }
    }

private:
    const toml::table* t_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
}

std::vector<std::array<double, 2>> pairs(const std::vector<std::vector<double>>& rows,
                                         const std::string& field) {
    std::vector<std::array<double, 2>> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == 2, field + "[" + std::to_string(i) + "]", "expected two numbers");
        out.push_back({rows[i][0], rows[i][1]});
    }
    return out;
}

void read_x0(Section& problem, ExperimentConfig& c) {
    const toml::node* n = problem.find("x0");
    if (!n) return;
    const std::string path = problem.key_path("x0");
    if (n->is_array()) {
        c.problem.x0.clear();
        const toml::array& a = *n->as_array();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const toml::node& e = *a.get(i);
            if (!(e.is_floating_point() || e.is_integer())) {
                throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
            }
            c.problem.x0.push_back(*e.value<double>());
        }
        return;
    }
    if (n->is_table()) {
        Section s(n->as_table(), path);
        const auto mode = s.count("mode", 1, 1);
        const double amp = s.number("amplitude", 1.0);
        s.finish();
        c.problem.x0.assign(mode, 0.0);
        c.problem.x0[mode - 1] = amp;
        return;
    }
    throw ConfigError(path, "expected an array of coefficients or {mode, amplitude}");
}

void validate(const ExperimentConfig& c) {
    const auto& p = c.problem;
    require(p.m >= 1 && p.m <= 64, "problem.m", "must be in [1, 64]");
    require(p.T > 0.0 && std::isfinite(p.T), "problem.T", "must be positive");
    require(p.dt > 0.0 && p.dt <= p.T, "problem.dt", "must satisfy 0 < dt <= T");
    require(p.viscosity > 0.0, "problem.viscosity", "must be positive");
    require(p.regularization >= 0, "problem.regularization", "must be >= 0");
    require(p.blowup_threshold > 0.0, "problem.blowup_threshold", "must be positive");
    require(p.x0.size() <= p.m, "problem.x0", "has more coefficients than problem.m");
    for (double v : p.x0) require(std::isfinite(v), "problem.x0", "must be finite");

    const auto& n = c.noise;
    require(n.kind == "power" || n.kind == "diagonal" || n.kind == "zero",
            "noise.covariance.kind", "must be one of power, diagonal, zero");
    if (n.kind == "power") {
        require(n.alpha > 0.5, "noise.covariance.alpha",
                "must be > 1/2 so that A^{-alpha} is trace class");
    }
    if (n.kind == "diagonal") {
        for (double r : n.eigenvalues) {
            require(r >= 0.0 && std::isfinite(r), "noise.covariance.eigenvalues",
                    "must be finite and non-negative");
        }
    }
    for (std::size_t i = 0; i < n.atoms.size(); ++i) {
        require(std::isfinite(n.atoms[i][0]) && n.atoms[i][1] >= 0.0,
                "noise.levy.atoms[" + std::to_string(i) + "]",
                "mark must be finite and weight non-negative");
    }
    require(std::isfinite(n.sigma_j), "noise.levy.sigma_j", "must be finite");
    require(n.profile_mode >= 1, "noise.levy.profile_mode", "must be >= 1");

    require(c.rho >= 0.0, "control.rho", "must be >= 0");
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
        require(c.candidates[i].size() <= p.m, "control.candidates[" + std::to_string(i) + "]",
                "has more coefficients than problem.m");
    }

    const auto& h = c.hjb;
    require(h.R > 0.0, "hjb.R", "must be positive");
    require(h.n_pts == 0 || h.n_pts >= 3, "hjb.n_pts", "must be 0 (default) or >= 3");
    require(h.dt_pde >= 0.0, "hjb.dt_pde", "must be >= 0 (0 selects a stable step)");
    require(h.solver == "fd" || h.solver == "picard" || h.solver == "both", "hjb.solver",
            "must be one of fd, picard, both");
    require(h.picard.n_pts >= 3, "hjb.picard.n_pts", "must be >= 3");
    require(h.picard.tol > 0.0, "hjb.picard.tol", "must be positive");

    const auto& m = c.mc;
    for (double t : m.checkpoints) {
        require(t >= 0.0 && t <= p.T * (1.0 + 1e-12), "mc.checkpoints", "must lie in [0, T]");
    }

    const std::set<std::string> known{"energy", "isometry", "bel", "verification", "dpp", "optimality"};
    for (const auto& s : c.verify.checks) {
        require(known.count(s) > 0, "verify.checks", "unknown check '" + s + "'");
    }
    require(c.verify.bel_t > 0.0, "verify.bel_t", "must be positive");
    require(c.verify.bel_delta > 0.0, "verify.bel_delta", "must be positive");
    require(c.verify.defect_dts.size() >= 2, "verify.defect_dts", "needs at least two step sizes");
    {
        auto d = c.verify.defect_dts;
        std::sort(d.begin(), d.end());
        for (std::size_t i = 1; i < d.size(); ++i) {
            require(std::abs(d[i] - 2.0 * d[i - 1]) <= 1e-12 * d[i], "verify.defect_dts",
                    "step sizes must double from one level to the next");
        }
        require(d[0] > 0.0, "verify.defect_dts", "must be positive");
        // Coarser levels reuse the finest noise, so the finest step count must split evenly.
        IntegratorConfig fine;
        fine.T = p.T;
        fine.dt = d[0];
        require(fine.steps() % (std::size_t{1} << (d.size() - 1)) == 0, "verify.defect_dts",
                "T / (finest step) must be divisible by 2^(levels - 1)");
    }
    for (std::size_t i = 0; i < c.verify.dpp_times.size(); ++i) {
        const auto& tt = c.verify.dpp_times[i];
        require(tt[0] >= 0.0 && tt[0] < tt[1] && tt[1] <= p.T * (1.0 + 1e-12),
                "verify.dpp_times[" + std::to_string(i) + "]", "needs 0 <= t < tau <= T");
    }

    const auto& d = c.diagnose;
    require(!d.radii.empty(), "diagnose.radii", "must not be empty");
    for (double r : d.radii) require(r >= 0.0, "diagnose.radii", "must be >= 0");
    for (int q : d.powers) require(q >= 2, "diagnose.powers", "must be >= 2");
    require(d.epsilon > 0.0, "diagnose.epsilon", "must be positive");
    for (double t : d.smoothing_times) {
        require(t > 0.0 && t <= p.T * (1.0 + 1e-12), "diagnose.smoothing_times", "must lie in (0, T]");
    }
    require(d.kappa >= 0.0, "diagnose.kappa", "must be >= 0");
}

} // namespace

IntegratorConfig ExperimentConfig::integrator() const {
    IntegratorConfig c;
    c.T = problem.T;
    c.dt = problem.dt;
    c.modes = problem.m;
    c.nonlinear = problem.nonlinear;
    c.viscosity = problem.viscosity;
    c.regularization = problem.regularization;
    c.blowup_threshold = problem.blowup_threshold;
    return c;
}

NoiseModel ExperimentConfig::noise_model() const {
    NoiseModel nm;
    if (noise.kind == "power") nm.covariance = CovarianceOperator::power(noise.alpha);
    if (noise.kind == "diagonal") nm.covariance = CovarianceOperator::diagonal(noise.eigenvalues);
    std::vector<JumpAtom> atoms;
    for (const auto& a : noise.atoms) atoms.push_back({a[0], a[1]});
    if (!atoms.empty()) {
        nm.levy = LevyModel(std::move(atoms), noise.sigma_j,
                            SpectralField::basis(std::max<std::size_t>(problem.m,
                                                                       static_cast<std::size_t>(noise.profile_mode)),
                                                 noise.profile_mode));
    }
    return nm;
}

SpectralField ExperimentConfig::x0() const {
    SpectralField x(problem.m);
    for (std::size_t k = 0; k < problem.x0.size(); ++k) x[k] = problem.x0[k];
    return x;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " (line " << e.source().begin.line << ", column "
           << e.source().begin.column << ")";
        throw ConfigError(source, os.str());
    }

    ExperimentConfig c;
    Section top(&root, "");
    c.seed = static_cast<std::uint64_t>(top.integer("seed", 1));
    c.output_dir = top.string("output_dir", c.output_dir);

    Section problem = top.child("problem");
    c.problem.m = problem.count("m", c.problem.m, 1);
    c.problem.T = problem.number("T", c.problem.T);
    c.problem.dt = problem.number("dt", c.problem.dt);
    c.problem.viscosity = problem.number("viscosity", c.problem.viscosity);
    c.problem.nonlinear = problem.boolean("nonlinear", c.problem.nonlinear);
    c.problem.regularization = static_cast<int>(problem.integer("regularization", 0));
    c.problem.blowup_threshold = problem.number("blowup_threshold", c.problem.blowup_threshold);
    read_x0(problem, c);
    problem.finish();

    Section noise = top.child("noise");
    Section cov = noise.child("covariance");
    c.noise.kind = cov.string("kind", c.noise.kind);
    c.noise.alpha = cov.number("alpha", c.noise.alpha);
    c.noise.eigenvalues = cov.numbers("eigenvalues", {});
    cov.finish();
    Section levy = noise.child("levy");
    c.noise.atoms = pairs(levy.rows("atoms", {}), "noise.levy.atoms");
    c.noise.sigma_j = levy.number("sigma_j", c.noise.sigma_j);
    c.noise.profile_mode = static_cast<int>(levy.integer("profile_mode", 1));
    levy.finish();
    noise.finish();

    Section control = top.child("control");
    c.rho = control.number("rho", c.rho);
    c.candidates = control.rows("candidates", {});
    control.finish();

    Section hjb = top.child("hjb");
    c.hjb.R = hjb.number("R", c.hjb.R);
    c.hjb.n_pts = hjb.count("n_pts", c.hjb.n_pts);
    c.hjb.dt_pde = hjb.number("dt_pde", c.hjb.dt_pde);
    c.hjb.solver = hjb.string("solver", c.hjb.solver);
    Section picard = hjb.child("picard");
    c.hjb.picard.slices = picard.count("slices", c.hjb.picard.slices, 1);
    c.hjb.picard.max_iter = picard.count("max_iter", c.hjb.picard.max_iter);
    c.hjb.picard.tol = picard.number("tol", c.hjb.picard.tol);
    c.hjb.picard.n_pts = picard.count("n_pts", c.hjb.picard.n_pts);
    c.hjb.picard.n_paths = picard.count("n_paths", c.hjb.picard.n_paths, 2);
    picard.finish();
    hjb.finish();

    Section mc = top.child("mc");
    c.mc.n_paths = mc.count("n_paths", c.mc.n_paths, 2);
    c.mc.value_paths = mc.count("value_paths", c.mc.value_paths, 2);
    c.mc.gradient_paths = mc.count("gradient_paths", c.mc.gradient_paths, 2);
    c.mc.hessian_paths = mc.count("hessian_paths", c.mc.hessian_paths, 2);
    c.mc.keep_trajectories = mc.count("keep_trajectories", c.mc.keep_trajectories);
    c.mc.checkpoints = mc.numbers("checkpoints", {});
    mc.finish();

    Section verify = top.child("verify");
    if (const toml::node* n = verify.find("checks")) {
        const toml::array* a = n->as_array();
        if (!a) throw ConfigError("verify.checks", "expected an array of strings");
        c.verify.checks.clear();
        for (std::size_t i = 0; i < a->size(); ++i) {
            if (!a->get(i)->is_string()) {
                throw ConfigError("verify.checks[" + std::to_string(i) + "]", "expected a string");
            }
            c.verify.checks.push_back(*a->get(i)->value<std::string>());
        }
    }
    c.verify.bel_t = verify.number("bel_t", c.verify.bel_t);
    c.verify.bel_delta = verify.number("bel_delta", c.verify.bel_delta);
    c.verify.bel_pairs = verify.count("bel_pairs", c.verify.bel_pairs);
    c.verify.isometry_paths = verify.count("isometry_paths", c.verify.isometry_paths, 2);
    c.verify.defect_dts = verify.numbers("defect_dts", c.verify.defect_dts);
    c.verify.defect_paths = verify.count("defect_paths", c.verify.defect_paths, 2);
    c.verify.verification_controls = verify.count("verification_controls", c.verify.verification_controls);
    c.verify.cost_paths = verify.count("cost_paths", c.verify.cost_paths, 2);
    {
        const double T = c.problem.T;
        std::vector<std::vector<double>> def{{0.0, T / 5.0}, {T / 5.0, 3.0 * T / 5.0}};
        c.verify.dpp_times = pairs(verify.rows("dpp_times", def), "verify.dpp_times");
    }
    c.verify.dpp_outer = verify.count("dpp_outer", c.verify.dpp_outer, 2);
    c.verify.dpp_inner = verify.count("dpp_inner", c.verify.dpp_inner);
    verify.finish();

    Section diag = top.child("diagnose");
    c.diagnose.radii = diag.numbers("radii", c.diagnose.radii);
    {
        std::vector<double> def(c.diagnose.powers.begin(), c.diagnose.powers.end());
        const auto p = diag.numbers("powers", def);
        c.diagnose.powers.clear();
        for (double v : p) {
            if (v != std::floor(v)) throw ConfigError("diagnose.powers", "expected integers");
            c.diagnose.powers.push_back(static_cast<int>(v));
        }
    }
    c.diagnose.epsilon = diag.number("epsilon", c.diagnose.epsilon);
    c.diagnose.n_paths = diag.count("n_paths", c.diagnose.n_paths, 2);
    c.diagnose.smoothing_times = diag.numbers(
        "smoothing_times", {c.problem.T / 50.0, c.problem.T / 25.0, c.problem.T / 10.0, c.problem.T / 5.0});
    c.diagnose.kappa = diag.number("kappa", c.diagnose.kappa);
    c.diagnose.smoothing_paths = diag.count("smoothing_paths", c.diagnose.smoothing_paths, 2);
    diag.finish();

    top.finish();
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

template <typename T, typename F>
std::string list(const std::vector<T>& v, F&& f) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += f(v[i]);
    }
    return s + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

} // namespace

std::string resolved_toml(const ExperimentConfig& c) {
    std::ostringstream os;
    auto num = [](double v) { return fmt(v); };
    auto pair = [](const std::array<double, 2>& a) { return "[" + fmt(a[0]) + ", " + fmt(a[1]) + "]"; };
    os << "seed = " << c.seed << "\n";
    os << "output_dir = " << quoted(c.output_dir) << "\n\n";
    os << "[problem]\n";
    os << "m = " << c.problem.m << "\n";
    os << "T = " << fmt(c.problem.T) << "\n";
    os << "dt = " << fmt(c.problem.dt) << "\n";
    os << "viscosity = " << fmt(c.problem.viscosity) << "\n";
    os << "nonlinear = " << (c.problem.nonlinear ? "true" : "false") << "\n";
    os << "regularization = " << c.problem.regularization << "\n";
    os << "blowup_threshold = " << fmt(c.problem.blowup_threshold) << "\n";
    os << "x0 = " << list(c.x0().values(), num) << "\n\n";
    os << "[noise.covariance]\n";
    os << "kind = " << quoted(c.noise.kind) << "\n";
    os << "alpha = " << fmt(c.noise.alpha) << "\n";
    os << "eigenvalues = " << list(c.noise.eigenvalues, num) << "\n\n";
    os << "[noise.levy]\n";
    os << "atoms = " << list(c.noise.atoms, pair) << "\n";
    os << "sigma_j = " << fmt(c.noise.sigma_j) << "\n";
    os << "profile_mode = " << c.noise.profile_mode << "\n\n";
    os << "[control]\n";
    os << "rho = " << fmt(c.rho) << "\n";
    os << "candidates = " << list(c.candidates, [&](const std::vector<double>& r) { return list(r, num); })
       << "\n\n";
    os << "[hjb]\n";
    os << "R = " << fmt(c.hjb.R) << "\n";
    os << "n_pts = " << c.hjb.n_pts << "\n";
    os << "dt_pde = " << fmt(c.hjb.dt_pde) << "\n";
    os << "solver = " << quoted(c.hjb.solver) << "\n\n";
    os << "[hjb.picard]\n";
    os << "slices = " << c.hjb.picard.slices << "\n";
    os << "max_iter = " << c.hjb.picard.max_iter << "\n";
    os << "tol = " << fmt(c.hjb.picard.tol) << "\n";
    os << "n_pts = " << c.hjb.picard.n_pts << "\n";
    os << "n_paths = " << c.hjb.picard.n_paths << "\n\n";
    os << "[mc]\n";
    os << "n_paths = " << c.mc.n_paths << "\n";
    os << "value_paths = " << c.mc.value_paths << "\n";
    os << "gradient_paths = " << c.mc.gradient_paths << "\n";
    os << "hessian_paths = " << c.mc.hessian_paths << "\n";
    os << "keep_trajectories = " << c.mc.keep_trajectories << "\n";
    os << "checkpoints = " << list(c.mc.checkpoints, num) << "\n\n";
    os << "[verify]\n";
    os << "checks = " << list(c.verify.checks, quoted) << "\n";
    os << "bel_t = " << fmt(c.verify.bel_t) << "\n";
    os << "bel_delta = " << fmt(c.verify.bel_delta) << "\n";
    os << "bel_pairs = " << c.verify.bel_pairs << "\n";
    os << "isometry_paths = " << c.verify.isometry_paths << "\n";
    os << "defect_dts = " << list(c.verify.defect_dts, num) << "\n";
    os << "defect_paths = " << c.verify.defect_paths << "\n";
    os << "verification_controls = " << c.verify.verification_controls << "\n";
    os << "cost_paths = " << c.verify.cost_paths << "\n";
    os << "dpp_times = " << list(c.verify.dpp_times, pair) << "\n";
    os << "dpp_outer = " << c.verify.dpp_outer << "\n";
    os << "dpp_inner = " << c.verify.dpp_inner << "\n\n";
    os << "[diagnose]\n";
    os << "radii = " << list(c.diagnose.radii, num) << "\n";
    os << "powers = " << list(c.diagnose.powers, [](int p) { return std::to_string(p); }) << "\n";
    os << "epsilon = " << fmt(c.diagnose.epsilon) << "\n";
    os << "n_paths = " << c.diagnose.n_paths << "\n";
    os << "smoothing_times = " << list(c.diagnose.smoothing_times, num) << "\n";
    os << "kappa = " << fmt(c.diagnose.kappa) << "\n";
    os << "smoothing_paths = " << c.diagnose.smoothing_paths << "\n";
    return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = resolved_toml(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace burgers::lab
