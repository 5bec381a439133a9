#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biplanar/field.hpp"
#include "biplanar/pattern.hpp"

namespace biplanar {

struct SymmetryOptions {
    bool lattice_point_group = false;  // mirrors (and the x/y swap) that map the pixel grid onto itself
    bool mirror_z = false;             // tie top to bottom; bilayer with h = H/2 only
};

struct OptimizationProblem {
    UnitCell cell;
    double h = 0.0;
    GeometryMode mode = GeometryMode::bilayer;
    double H = 0.0;        // 0 selects 2h (covered and bilayer); ignored in open mode
    int resolution = 128;  // pixels along x; y uses res * 2^round(log2(ly/lx))
    SymmetryOptions symmetry;
    int random_seeds = 3;
    std::uint64_t rng_seed = 20240229;
    int max_iterations = 200;
    double rel_tol = 1e-6;

    double plane_separation() const;
    int pixels_x() const { return resolution; }
    int pixels_y() const;
    void validate() const;
};

struct OptimizationResult {
    BilayerGeometry geometry;
    double kappa = 0.0;              // mean over designed sites, h^2 |det H|^(1/3) at unit drive
    std::vector<double> site_kappa;  // per designed site
    bool converged = false;
    bool damped = false;
    int iterations = 0;
    int seed_index = -1;             // 0 is the axial seed, then random seeds, then the warm start
    std::vector<double> history;     // kappa per iteration of the winning seed
    double max_gradient = 0.0;       // max |grad phi| over sites, times d
    double max_hxy = 0.0;            // max |H_xy| over sites, times d^2
    double fractional_share = 0.0;   // pixels with weight in (1e-6, 1 - 1e-6)
    Mat3 final_weight = Mat3::Zero();  // A of the last linearization, site 0
};

// Per-pixel sensitivity s(p) = tr(A H_p) - mu . grad_p - nu (H_p)_xy at one
// site; maps are row-major nx x ny per plane, top empty unless bilayer.
struct SensitivityMap {
    int nx = 0, ny = 0;
    std::vector<double> bottom;
    std::vector<double> top;
};

SensitivityMap curvature_kernel(const OptimizationProblem& problem, std::size_t site, const Mat3& A,
                                const Vec3& mu, double nu);

// Seeds run concurrently; the result is independent of the worker count.
// `warm_start`, if given, adds a seed linearized at that pattern.
OptimizationResult optimize_pattern(const OptimizationProblem& problem,
                                    const std::optional<BilayerGeometry>& warm_start = std::nullopt);

// Exact single-pixel flip test at an optimized pattern: flips a pixel, then
// restores the site constraints with the least-norm change of the fractional
// pixels and recomputes kappa. Returns the largest relative kappa gain seen.
struct FlipCertificate {
    int tested = 0;
    int skipped_boundary = 0;      // pixels on the decision boundary
    double max_relative_gain = 0.0;
    double max_correction = 0.0;   // largest weight change needed to restore constraints
};
FlipCertificate flip_certificate(const OptimizationProblem& problem, const OptimizationResult& result, int pixels,
                                 std::uint64_t seed);

struct SweepRow {
    double h_over_d = 0.0;
    double kappa = 0.0;
    double eta = 0.0;
    bool converged = false;
    std::string error;  // non-empty when the point failed
    std::optional<OptimizationResult> result;
};

// Optimizes every h/d in turn (H scales with h as in the template), warm
// starting from the previous pattern, and adds the depth of site 0.
std::vector<SweepRow> sweep_lattice(const OptimizationProblem& problem_template, const std::vector<double>& h_over_d,
                                    bool keep_results = false);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// kappa = 0.1 crossing by log-linear interpolation; throws if not bracketed.
double kappa_crossing(const std::vector<SweepRow>& rows, double level = 0.1);

}  // namespace biplanar
