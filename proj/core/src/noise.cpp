#include "burgers/noise.hpp"

#include "burgers/errors.hpp"
#include "burgers/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace burgers {

namespace {

constexpr std::size_t kTracePartialTerms = 100000;

} // namespace

CovarianceOperator CovarianceOperator::power(double alpha) {
    if (!(alpha > 0.5)) {
        std::ostringstream os;
        os << "Q = A^{-alpha} with alpha = " << alpha
           << " is not trace class (sum of k^{-2 alpha} diverges for alpha <= 1/2)";
        throw DomainError(os.str());
    }
    CovarianceOperator q;
    q.kind_ = Kind::Power;
    q.alpha_ = alpha;
    return q;
}

CovarianceOperator CovarianceOperator::diagonal(std::vector<double> eigenvalues) {
    for (double r : eigenvalues) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw DomainError("covariance eigenvalues must be finite and non-negative");
        }
    }
    CovarianceOperator q;
    q.kind_ = Kind::Diagonal;
    q.rho_ = std::move(eigenvalues);
    return q;
}

double CovarianceOperator::eigenvalue(int k) const {
    if (k <= 0) throw DomainError("covariance mode index must be >= 1");
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::Power:
        return std::pow(burgers::eigenvalue(k), -alpha_);
    case Kind::Diagonal:
        return static_cast<std::size_t>(k) <= rho_.size() ? rho_[static_cast<std::size_t>(k - 1)]
                                                          : 0.0;
    }
    return 0.0;
}

std::vector<double> CovarianceOperator::eigenvalues(std::size_t modes) const {
    std::vector<double> out(modes);
    for (std::size_t k = 0; k < modes; ++k) out[k] = eigenvalue(static_cast<int>(k + 1));
    return out;
}

bool CovarianceOperator::invertible_on(std::size_t modes) const {
    for (std::size_t k = 1; k <= modes; ++k) {
        if (!(eigenvalue(static_cast<int>(k)) > 0.0)) return false;
    }
    return true;
}

double trace(const CovarianceOperator& q, std::size_t modes) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= modes; ++k) acc += q.eigenvalue(static_cast<int>(k));
    return acc;
}

double trace(const CovarianceOperator& q) {
    switch (q.kind()) {
    case CovarianceOperator::Kind::Zero:
        return 0.0;
    case CovarianceOperator::Kind::Diagonal:
        return trace(q, q.listed_eigenvalues().size());
    case CovarianceOperator::Kind::Power: {
        // sum_{k > K} (k pi)^{-2a} ~ pi^{-2a} (K + 1/2)^{1-2a} / (2a - 1)
        const double a = q.alpha();
        const double partial = trace(q, kTracePartialTerms);
        const double K = static_cast<double>(kTracePartialTerms) + 0.5;
        const double tail = std::pow(kPi, -2.0 * a) * std::pow(K, 1.0 - 2.0 * a) / (2.0 * a - 1.0);
        return partial + tail;
    }
    }
    return 0.0;
}

LevyModel::LevyModel(std::vector<JumpAtom> atoms, double sigma_j, SpectralField profile)
    : atoms_(std::move(atoms)), sigma_j_(sigma_j), profile_(std::move(profile)) {
    for (const auto& a : atoms_) {
        if (!std::isfinite(a.mark) || !(a.weight >= 0.0) || !std::isfinite(a.weight)) {
            throw DomainError("jump atoms need finite marks and finite non-negative weights");
        }
    }
    if (!std::isfinite(sigma_j_)) throw DomainError("sigma_j must be finite");
    if (!profile_.is_finite()) throw DomainError("jump profile must be finite");
}

double LevyModel::total_mass() const noexcept {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
}

double LevyModel::max_abs_mark() const noexcept {
    double s = 0.0;
    for (const auto& a : atoms_) s = std::max(s, std::abs(a.mark));
    return s;
}

SpectralField LevyModel::jump_field(double /*t*/, double mark, std::size_t modes) const {
    SpectralField g(modes);
    const std::size_t n = std::min(modes, profile_.modes());
    for (std::size_t k = 0; k < n; ++k) g[k] = mark * sigma_j_ * profile_[k];
    return g;
}

SpectralField LevyModel::mean_jump(double t, std::size_t modes) const {
    SpectralField g(modes);
    for (const auto& a : atoms_) g += jump_field(t, a.mark, modes) * a.weight;
    return g;
}

double LevyModel::jump_energy(double t, std::size_t modes) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * jump_field(t, a.mark, modes).squared_norm();
    return s;
}

JumpSampler::JumpSampler(const LevyModel& levy, double dt)
    : dt_(dt), active_(levy.total_mass() > 0.0 && dt > 0.0) {
    if (active_) {
        count_ = std::poisson_distribution<int>(levy.total_mass() * dt);
        std::vector<double> w;
        w.reserve(levy.atoms().size());
        for (const auto& a : levy.atoms()) w.push_back(a.weight);
        atom_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }
}

void JumpSampler::sample(Rng& rng, std::vector<JumpDraw>& out) const {
    if (!active_) return;
    const int n = count_(rng);
    if (n == 0) return;
    std::uniform_real_distribution<double> when(0.0, dt_);
    const std::size_t first = out.size();
    for (int i = 0; i < n; ++i) {
        JumpDraw d;
        d.tau = when(rng);
        d.atom = atom_(rng);
        out.push_back(d);
    }
    std::sort(out.begin() + static_cast<long>(first), out.end(),
              [](const JumpDraw& a, const JumpDraw& b) { return a.tau < b.tau; });
}

SpectralField sample_wiener_increment(const CovarianceOperator& q, std::size_t modes, double dt,
                                      Rng& rng) {
    SpectralField w(modes);
    if (dt <= 0.0) return w;
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < modes; ++k) {
        w[k] = std::sqrt(q.eigenvalue(static_cast<int>(k + 1)) * dt) * normal(rng);
    }
    return w;
}

std::vector<JumpEvent> sample_jumps(const LevyModel& levy, double t0, double dt,
                                    std::size_t modes, Rng& rng) {
    std::vector<JumpEvent> events;
    if (dt <= 0.0) return events;
    JumpSampler sampler(levy, dt);
    std::vector<JumpDraw> draws;
    sampler.sample(rng, draws);
    events.reserve(draws.size());
    for (const auto& d : draws) {
        const double z = levy.atoms()[d.atom].mark;
        events.push_back(JumpEvent{t0 + d.tau, z, levy.jump_field(t0 + d.tau, z, modes)});
    }
    return events;
}

SpectralField compensator_increment(const LevyModel& levy, double dt, std::size_t modes) {
    return levy.mean_jump(0.0, modes) * (-dt);
}

IsometryReport ito_isometry_check(const LevyModel& levy, double T, std::size_t modes,
                                  std::size_t n_paths, std::uint64_t seed) {
    IsometryReport r;
    r.n_paths = n_paths;
    r.rhs = T * levy.jump_energy(0.0, modes);
    const SpectralField drift = compensator_increment(levy, T, modes);
    std::vector<double> samples(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = substream(seed, p, stream_tag::isometry);
        SpectralField m = drift;
        for (const auto& e : sample_jumps(levy, 0.0, T, modes, rng)) m += e.field;
        samples[p] = m.squared_norm();
    }
    const SampleStats s = sample_stats(samples);
    r.lhs = s.mean;
    r.std_error = s.std_error;
    r.pass = std::abs(r.lhs - r.rhs) <= 3.0 * r.std_error + 1e-14 * std::max(1.0, r.rhs);
    return r;
}

AssumptionReport verify_assumptions(const CovarianceOperator& q, const LevyModel& levy,
                                    double kappa, double T, std::size_t modes) {
    AssumptionReport r;
    r.kappa = kappa;
    const bool kappa_ok = kappa > 0.5 && kappa < 1.0;
    if (!kappa_ok) r.notes.push_back("kappa must lie in (1/2, 1)");

    auto c_term = [&](int k) {
        const double rho = q.eigenvalue(k);
        if (!(rho > 0.0)) return std::numeric_limits<double>::infinity();
        return std::pow(eigenvalue(k), -kappa / 2.0) / std::sqrt(rho);
    };
    double cg = 0.0;
    for (std::size_t k = 1; k <= modes; ++k) cg = std::max(cg, c_term(static_cast<int>(k)));
    r.c_q_galerkin = cg;

    switch (q.kind()) {
    case CovarianceOperator::Kind::Power:
        // lambda_k^{(alpha - kappa)/2} is bounded iff kappa >= alpha; the sup sits at k = 1.
        r.c_q = kappa >= q.alpha() ? std::pow(eigenvalue(1), (q.alpha() - kappa) / 2.0)
                                   : std::numeric_limits<double>::infinity();
        break;
    default:
        r.c_q = std::numeric_limits<double>::infinity();
        r.notes.push_back("finite-rank covariance: Q^{-1/2} is unbounded on H");
        break;
    }
    r.a1 = kappa_ok && std::isfinite(r.c_q);
    r.a1_galerkin = kappa_ok && std::isfinite(r.c_q_galerkin);
    r.trace = trace(q);

    r.a2_sup_energy = levy.jump_energy(0.0, levy.profile().modes());
    const double prof1 = std::sqrt(enstrophy(levy.profile()));
    for (int p : {2, 4, 8}) {
        double s = 0.0;
        for (const auto& a : levy.atoms()) {
            s += a.weight * std::pow(std::abs(a.mark * levy.sigma_j()) * prof1, p);
        }
        r.a2_sobolev.emplace_back(p, T * s);
    }
    r.a3_constant = 1.0 + std::abs(levy.sigma_j()) * levy.max_abs_mark() * levy.profile().norm();

    bool a2_ok = std::isfinite(r.a2_sup_energy);
    for (const auto& [p, v] : r.a2_sobolev) a2_ok = a2_ok && std::isfinite(v);
    r.pass = r.a1_galerkin && a2_ok && std::isfinite(r.a3_constant) && std::isfinite(r.trace);
    return r;
}

} // namespace burgers
