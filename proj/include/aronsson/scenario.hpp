#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aronsson/coefficients.hpp"
#include "aronsson/estimates.hpp"
#include "aronsson/grid.hpp"
#include "aronsson/solver.hpp"

namespace aronsson {

/// One fully specified experiment: domain, resolution, coefficient and
/// boundary-data presets, eps schedule, and the estimate suites to run.
struct Scenario {
    double ax = 0.0, ay = 0.0, bx = 1.0, by = 1.0;
    int resolution = 65;

    std::string coeff_preset = "identity";
    std::vector<double> coeff_params;

    std::string data_preset = "constant";  // constant | affine | aronsson | flat
    std::vector<double> data_params;

    EpsSchedule schedule{1e-1, 0.5, 4};
    double grad_tol = 1e-8;
    int max_newton_iters = 100;
    double armijo_slope_frac = 1e-4;
    double armijo_backtrack = 0.5;

    std::vector<std::string> suites;  // default filled by parse_config
    BarrierSpec barrier{};
    bool barrier_given = false;

    std::uint64_t seed = 0;
    std::string output_dir = "out";

    std::string canonical_json() const;  // sorted-key dump used for hashing
    std::string hash() const;

    Grid2D make_grid() const;
    CoefficientField make_coefficients() const;
    ScalarField make_boundary_data(const Grid2D& grid) const;
    SolveConfig make_solve_config() const;
};

/// Strict JSON config parser: unknown keys, bad presets, and malformed
/// numbers are all fatal with the offending field named.
Scenario parse_config(const std::string& json_text);
Scenario parse_config_file(const std::string& path);

/// Boundary-data presets, evaluated at every node (solver uses the boundary
/// rows; full fields are convenient for comparisons).
ScalarField data_constant(const Grid2D& grid, double c);
ScalarField data_affine(const Grid2D& grid, double bx, double by, double c);
/// x^{4/3} - y^{4/3} with t^{4/3} = |t|^{4/3}; infinity harmonic away from
/// the axes.
ScalarField data_aronsson(const Grid2D& grid);
/// x_n + lambda * smooth perturbation with seeded phases, amplitude <= lambda/2.
ScalarField data_flat(const Grid2D& grid, double lambda, std::uint64_t seed);

struct RunResult {
    int exit_code = 1;  // 0 pass, 2 hypothesis-flag-only, 1 failure or error
    std::string summary_json;
};

/// Runs the pipeline, writes per-eps solution CSVs, per-check JSON reports,
/// and summary.json into out_dir.
RunResult run_scenario(const Scenario& scenario, const std::string& out_dir);

/// CLI entry helpers: parse + run a config file; on error writes a
/// machine-readable error.json and returns exit code 1.
int run_config_file(const std::string& config_path, const std::string& out_dir_override,
                    const std::vector<std::string>& suite_override);
int check_config_file(const std::string& config_path);

}  // namespace aronsson
