#pragma once

#include <string>
#include <vector>

#include "biplanar/pattern.hpp"
#include "biplanar/pseudo.hpp"

namespace biplanar {

struct ShiftResult {
    double kappa_ratio = 0.0;
    double eta_ratio = 0.0;
    bool destroyed = false;  // null lost or basin unconfined
    Vec3 site = Vec3::Zero();
    double kappa = 0.0;
    double eta = 0.0;
};

// Reference values of an aligned geometry at designed site 0; kappa keeps
// the nominal h in its h^2 prefactor.
struct NominalTrap {
    double h = 0.0;
    Vec3 site = Vec3::Zero();
    double kappa = 0.0;
    double eta = 0.0;
};

NominalTrap nominal_trap(const BilayerGeometry& geom, double h, const DepthOptions& depth = {});

// Displaces the top plane by delta (lengths), re-finds the null near the
// nominal site and returns kappa and eta relative to the nominal trap.
ShiftResult shifted_characterization(const BilayerGeometry& geom, const NominalTrap& nominal, const Vec2& delta,
                                     const DepthOptions& depth = {});

// Square cells: translations and the point group map any shift into
// 0 <= y <= x <= half a cell. Other cells: translations only.
Vec2 fold_to_fundamental(const Vec2& delta, const UnitCell& cell);

struct MisalignmentScan {
    double h_over_d = 0.0;
    std::vector<double> magnitudes;  // cells
    std::vector<Vec2> directions;    // unit vectors, 0 to 45 degrees
    std::vector<std::vector<ShiftResult>> points;  // [magnitude][direction]
    std::vector<double> kappa_min, kappa_max, eta_min, eta_max;
    int destroyed = 0;
};

// Directions span the fundamental triangle of the square lattice, both edges
// included; shifts are folded first. Destroyed points count as ratio 0 in the envelopes.
MisalignmentScan scan(const BilayerGeometry& geom, double h, const std::vector<double>& magnitudes, int n_directions = 9,
                      const DepthOptions& depth = {});

// CSV columns h_over_d,delta_cells,ratio_kind,min,max
std::string misalignment_csv(const std::vector<MisalignmentScan>& scans);

}  // namespace biplanar
