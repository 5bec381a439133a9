#pragma once

#include <array>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/pattern.hpp"

// Single axisymmetric traps: concentric ring electrodes at unit RF potential on
// an otherwise grounded plane (open), under a grounded cover, or mirrored on
// two planes. The trap axis is rho = 0.
namespace biplanar::axisym {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct RingElectrode {
    double r1 = 0.0;        // 0 for a disc
    double r2 = kInfinity;  // infinity for a plane with a hole of radius r1
    Plane plane = Plane::bottom;

    void validate() const;
};

using Electrodes = std::vector<RingElectrode>;

// phi and its first four z-derivatives on the axis.
using AxisDerivatives = std::array<double, 5>;

// H is ignored in open mode. Bounded modes use an adaptive Hankel quadrature
// for the cover correction. Throws NumericalError if the quadrature does not
// reach its tolerance.
AxisDerivatives axis_potential(const Electrodes& e, double z, double H, GeometryMode mode);

struct OffAxisGradient {
    double phi_rho = 0.0;
    double phi_z = 0.0;
    double pseudo() const { return phi_rho * phi_rho + phi_z * phi_z; }
};

OffAxisGradient offaxis_gradient(const Electrodes& e, double rho, double z, double H, GeometryMode mode);

// Dimensionless pseudopotential |grad phi|^2 per unit drive voltage squared.
double offaxis_pseudopotential(const Electrodes& e, double rho, double z, double H, GeometryMode mode);

// kappa of an on-axis RF null at height h, from phi_zz alone (phi_xx = phi_yy = -phi_zz/2).
double on_axis_kappa(const Electrodes& e, double h, double H, GeometryMode mode);

// |grad phi|^2 sampled on an n x n grid over rho in [0, 6h] and z in
// [margin, H - margin] (open: [margin, 6h]); P stored at i * n + j for rho_i, z_j.
struct PseudoMap {
    std::vector<double> rho;
    std::vector<double> z;
    std::vector<double> P;
    double at(std::size_t i, std::size_t j) const { return P[i * z.size() + j]; }
};

PseudoMap pseudopotential_map(const Electrodes& e, double h, double H, GeometryMode mode, int n = 201,
                              double margin = 0.02);

std::string map_csv(const PseudoMap& m);

enum class EscapeKind { saddle, plane, far_field };

struct DepthResult {
    double depth = 0.0;  // lowest escape level of |grad phi|^2 minus its value at the trap
    double saddle_rho = 0.0;
    double saddle_z = 0.0;
    EscapeKind escape = EscapeKind::saddle;
};

// Minimax flood from the trap at (0, h) to the escape set: grid edge rho = 6h,
// the plane margins, and (open mode) z >= 5h. Interior saddles are refined by a
// local quadratic fit.
DepthResult trap_depth(const PseudoMap& m, double h, double H, GeometryMode mode);
DepthResult trap_depth(const Electrodes& e, double h, double H, GeometryMode mode, int n = 201);

enum class SingleTrapKind { open_ring, bilayer_double_disc, covered_ring };

std::string to_string(SingleTrapKind kind);
// Accepts the enum names and the CLI spellings open-ring, double-disc, covered-ring.
SingleTrapKind parse_single_trap(std::string_view name);

struct SingleTrapResult {
    SingleTrapKind kind = SingleTrapKind::open_ring;
    GeometryMode mode = GeometryMode::open_single_layer;
    double h = 1.0;
    double kappa = 0.0;
    double eta = 0.0;
    double r1 = 0.0;
    double r2 = kInfinity;
    // Covered ring: kappa keeps creeping up with r2; the search value is kept
    // here and r2 is the smallest radius within 1e-6 of the best kappa.
    double r2_search = kInfinity;
    double H = kInfinity;
    DepthResult depth;
    bool converged = false;
    int evaluations = 0;
    Electrodes electrodes;
};

// Maximizes kappa at h = 1 with the RF null constraint solved exactly
// (open ring: r2 from r1; covered ring: H from r1, r2; double disc: H = 2h by mirror symmetry).
SingleTrapResult optimize_single_trap(SingleTrapKind kind);

// Electrodes of a single-trap kind for the given radii.
Electrodes single_trap_electrodes(SingleTrapKind kind, double r1, double r2);

// Open ring: the outer radius that puts the RF null at height h for inner radius r1 (< sqrt(2) h).
double open_ring_outer_radius(double r1, double h = 1.0);
// Covered ring: the cover height that puts the null at h.
double covered_ring_height(double r1, double r2, double h = 1.0);

std::string report(const SingleTrapResult& r);

}  // namespace biplanar::axisym
