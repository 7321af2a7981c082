#pragma once

#include "burgers/integrator.hpp"
#include "burgers/noise.hpp"
#include "burgers/spectral.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace burgers::lab {

struct ProblemConfig {
    std::size_t m = 1;
    double T = 0.5;
    double dt = 1e-3;
    double viscosity = 1.0;
    bool nonlinear = true;
    int regularization = 0;
    double blowup_threshold = 1e6;
    std::vector<double> x0; // coefficients, padded with zeros to m
};

struct NoiseConfig {
    std::string kind = "power"; // power | diagonal | zero
    double alpha = 0.75;
    std::vector<double> eigenvalues;
    std::vector<std::array<double, 2>> atoms; // (mark, weight)
    double sigma_j = 0.0;
    int profile_mode = 1;
};

struct PicardConfig {
    std::size_t slices = 20;
    std::size_t max_iter = 20;
    double tol = 1e-4;
    std::size_t n_pts = 41;
    std::size_t n_paths = 1000;
};

struct HjbConfig {
    double R = 2.0;
    std::size_t n_pts = 0;
    double dt_pde = 0.0;
    std::string solver = "both"; // fd | picard | both
    PicardConfig picard;
};

struct McConfig {
    std::size_t n_paths = 10000;
    std::size_t value_paths = 10000;
    std::size_t gradient_paths = 100000;
    std::size_t hessian_paths = 200000;
    std::size_t keep_trajectories = 4;
    std::vector<double> checkpoints;
};

struct VerifyConfig {
    std::vector<std::string> checks{"energy", "isometry", "bel", "verification", "dpp", "optimality"};
    double bel_t = 0.25;
    double bel_delta = 1e-3;
    std::size_t bel_pairs = 3;
    std::size_t isometry_paths = 10000;
    std::vector<double> defect_dts{4e-3, 2e-3, 1e-3};
    std::size_t defect_paths = 2000;
    std::size_t verification_controls = 5;
    std::size_t cost_paths = 4000;
    std::vector<std::array<double, 2>> dpp_times; // default (0, T/5) and (T/5, 3T/5)
    std::size_t dpp_outer = 2000;
    std::size_t dpp_inner = 0;
};

struct DiagnoseConfig {
    std::vector<double> radii{0.0, 0.5, 1.0, 2.0};
    std::vector<int> powers{2, 4};
    double epsilon = 0.01;
    std::size_t n_paths = 2000;
    std::vector<double> smoothing_times; // default T/50, T/25, T/10, T/5
    double kappa = 0.0; // 0 picks alpha for power covariances, 0.75 otherwise
    std::size_t smoothing_paths = 20000;
};

struct ExperimentConfig {
    ProblemConfig problem;
    NoiseConfig noise;
    double rho = 0.0;
    std::vector<std::vector<double>> candidates; // extra constant controls for the tournament
    HjbConfig hjb;
    McConfig mc;
    VerifyConfig verify;
    DiagnoseConfig diagnose;
    std::uint64_t seed = 1;
    std::string output_dir = "runs";

    IntegratorConfig integrator() const;
    NoiseModel noise_model() const;
    SpectralField x0() const;
};

/// Parses and validates TOML text. Errors are ConfigError with the dotted key path.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Every field after defaults and overrides, as TOML. Deterministic.
std::string resolved_toml(const ExperimentConfig& cfg);
/// FNV-1a of resolved_toml, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace burgers::lab
