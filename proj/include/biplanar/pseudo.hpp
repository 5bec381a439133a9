#pragma once

#include <vector>

#include "biplanar/field.hpp"
#include "biplanar/units.hpp"

namespace biplanar {

struct TrapSite {
    Vec3 position = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();          // per volt, 1/length^2
    Mat3 principal_axes = Mat3::Identity();  // columns, ordered like eigenvalues
    Vec3 eigenvalues = Vec3::Zero();      // ascending, signed
    double grad_norm = 0.0;
    bool is_spurious = false;
    bool degenerate = false;  // smallest |eigenvalue| below 1e-6 of the largest
    int designed_index = -1;  // nearest designed lattice site (main sites only)
};

// Newton iteration on grad phi = 0 with the analytic Hessian. Throws
// NoNullFound on divergence, a singular Hessian or exit from the slab.
TrapSite find_rf_null(const FieldEngine& engine, const Vec3& guess);

// geometric-mean curvature h^2 |det H|^(1/3)
double site_kappa(const TrapSite& site, double h);

// omega_i = e U |lambda_i| / (sqrt(2) M omega_rf); lengths of the geometry are
// converted with metres_per_unit. Throws DegenerateTrap if any lambda is zero.
Vec3 secular_frequencies(const TrapSite& site, const units::IonSpecies& ion, const units::DriveParams& drive,
                         double metres_per_unit = 1.0);
double mean_secular_frequency(const Vec3& omegas);

// U_rf giving the target geometric-mean secular frequency.
double solve_urf(const TrapSite& site, const units::IonSpecies& ion, double omega_rf, double target_omega_tilde,
                 double metres_per_unit = 1.0);

struct DepthOptions {
    int nx = 64;
    int ny = 64;
    int nz = 33;
    double margin_pixels = 2.0;  // evaluation margin from each plane
    int bisections = 40;
    double open_escape_heights = 5.0;  // open mode escapes above this many h
    bool polish = true;
};

enum class EscapeRoute { none, neighbor_site, own_image, plane_margin, open_top };

struct DepthReport {
    double depth = 0.0;  // |grad phi|^2 per U_rf^2, escape level minus site value
    double eta = 0.0;    // h^2 * depth
    Vec3 saddle = Vec3::Zero();
    bool polished = false;
    EscapeRoute route = EscapeRoute::none;
    bool margin_below_saddle = false;  // some margin point lies below the escape level
};

// Pseudopotential |grad phi|^2 on the depth grid; index (k * ny + j) * nx + i.
struct PseudoGrid {
    int nx = 0, ny = 0, nz = 0;
    double lx = 0, ly = 0, z0 = 0, z1 = 0;
    std::vector<double> P;
    double z(int k) const { return nz == 1 ? z0 : z0 + (z1 - z0) * k / (nz - 1); }
    double at(int i, int j, int k) const { return P[(static_cast<std::size_t>(k) * ny + j) * nx + i]; }
};

PseudoGrid sample_pseudo(const FieldEngine& engine, double h, const DepthOptions& opt);

// Depth by flood fill with threshold bisection. `others` are the other main
// sites in the cell, whose basins count as escape. h is the trap height used
// for eta and the open-mode escape height.
DepthReport trap_depth(const FieldEngine& engine, const TrapSite& site, double h, const std::vector<Vec3>& others,
                       const DepthOptions& opt = {});
DepthReport trap_depth(const FieldEngine& engine, const PseudoGrid& grid, const TrapSite& site, double h,
                       const std::vector<Vec3>& others, const DepthOptions& opt = {});

struct MinimaReport {
    std::vector<TrapSite> sites;  // sorted by position; main sites flagged by designed_index
    double max_curvature_ratio = 0.0;  // spurious / main, |det H|^(1/3)
    double max_depth_ratio = 0.0;      // spurious / main
    std::vector<double> depth_ratio;   // per site (1 for main sites)
};

// All RF nulls found from the local minima of |grad phi|^2 on the depth grid.
// Main sites are the nulls nearest to each designed lattice site at height h.
MinimaReport find_all_minima(const FieldEngine& engine, double h, const DepthOptions& opt = {},
                             bool with_depths = true);

struct Anharmonicity {
    double c3_z = 0.0;
    double c4_z = 0.0;
    double c4_inplane = 0.0;
    double span = 0.0;        // fit half-width actually used
    bool span_reduced = false;
};

// Degree-6 least-squares fits of |grad phi|^2 along principal axes over +-0.1h;
// c_n = a_n h^(n-2) / a_2.
Anharmonicity anharmonic_coefficients(const FieldEngine& engine, const TrapSite& site, double h);

struct TrapCharacterization {
    TrapSite site;
    double kappa = 0.0;
    double eta = 0.0;
    DepthReport depth;
    double depth_psi_dimensionless = 0.0;  // same as depth.depth
    Vec3 secular_freqs_per_volt = Vec3::Zero();  // rad/s per volt for the ion and drive given
    Anharmonicity anharm;
};

struct CharacterizeOptions {
    units::IonSpecies ion = units::IonSpecies::beryllium9();
    double omega_rf = 2.0 * 3.14159265358979323846 * 50e6;
    double metres_per_unit = 1.0;
    DepthOptions depth;
    bool anharmonic = true;
};

// Finds the null near designed site `index` at height h and characterizes it.
TrapCharacterization characterize(const FieldEngine& engine, std::size_t index, double h,
                                  const CharacterizeOptions& opt = {});

// Engine options suited to characterization: spectrum accurate down to the
// evaluation margin.
EngineOptions characterization_engine_options(const BilayerGeometry& g, double margin_pixels = 2.0);

}  // namespace biplanar
