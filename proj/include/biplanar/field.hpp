#pragma once

#include <array>
#include <complex>
#include <vector>

#include "biplanar/linalg.hpp"
#include "biplanar/pattern.hpp"

namespace biplanar {

// z-profile of one Fourier mode of a unit surface potential on the bottom
// plane, with its first two z-derivatives.
struct GreenProfile {
    double g = 0.0;
    double dg = 0.0;
    double d2g = 0.0;
};

// Bottom-plane source. Covered/bilayer: sinh(k(H-z))/sinh(kH), with the
// parallel-plate limit (H-z)/H at k = 0. Open: exp(-kz). Evaluated in a form
// that cannot overflow for large kH.
GreenProfile surface_green_fourier(double k, double z, double H, GeometryMode mode);

// Top-plane source at z = H (bottom plane grounded): the bottom profile mirrored by z -> H - z.
GreenProfile top_plane_green(double k, double z, double H);

// Fourier coefficients of a piecewise-constant pixel pattern, normalized so a
// uniform pattern of weight 1 has coefficient 1 at (0,0). Coefficients use the
// exact transform of each rectangular pixel (sinc factors) and are available
// for any |m| <= n_modes; modes beyond the pixel Nyquist index reuse the DFT
// of the weights. Hermitian symmetry c(-m) = conj(c(m)) holds exactly.
class SpectralField {
public:
    SpectralField() = default;

    int n_modes() const { return n_modes_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }

    std::complex<double> at(int mx, int my) const;

    // Multiplies every coefficient by exp(-i k . shift), i.e. translates the
    // pattern by +shift.
    SpectralField translated(const Vec2& shift, double lx, double ly) const;

    friend SpectralField pattern_spectrum(const ElectrodePattern& p, int n_modes);

private:
    int n_modes_ = 0;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<std::complex<double>> dft_;  // ny * nx, Hermitian-exact
    std::vector<std::complex<double>> fx_;   // 2N+1 per-axis pixel factors
    std::vector<std::complex<double>> fy_;
};

SpectralField pattern_spectrum(const ElectrodePattern& p, int n_modes);

struct FieldEval {
    double phi = 0.0;
    Vec3 grad = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();
    bool truncated = false;  // spectrum shorter than the tolerance asks for at this point
};

// Smallest N >= 1 with exp(-2 pi N z_min / max(L_x, L_y)) <= tol.
int required_modes(const BilayerGeometry& geom, double z_min, double tol);
int required_modes(double max_period, double z_min, double tol);

enum Component : int { kPhi = 0, kGx, kGy, kGz, kHxx, kHyy, kHzz, kHxy, kHxz, kHyz, kComponentCount };

// Field contributions of each pixel at unit weight, evaluated at one point.
struct PixelKernels {
    int nx = 0;
    int ny = 0;
    std::array<std::vector<double>, kComponentCount> bottom;
    std::array<std::vector<double>, kComponentCount> top;  // empty unless the top plane is patterned
    bool has_top() const { return !top[0].empty(); }
};

struct EngineOptions {
    double tol = 1e-10;
    // Lowest height (distance to either plane) at which the spectrum must meet
    // tol. Zero selects 0.1 H for bounded geometries and 0.1 min(L_x, L_y) for open ones.
    double z_min = 0.0;
};

// Evaluates the potential of a geometry per unit drive voltage. Immutable after
// construction; all methods are safe to call concurrently.
class FieldEngine {
public:
    explicit FieldEngine(BilayerGeometry geom, EngineOptions options = {});

    const BilayerGeometry& geometry() const { return geom_; }
    int n_modes() const { return n_modes_; }
    double tolerance() const { return tol_; }
    // Closest approach to an electrode plane accepted by evaluate().
    double margin() const { return geom_.pixel_width(); }
    double z_upper() const;  // H for bounded geometries, +inf for open

    FieldEval evaluate(const Vec3& r) const;

    // Gradient on the lateral grid x_i = i L_x/gx, y_j = j L_y/gy at height z,
    // stored at j * gx + i.
    std::vector<Vec3> gradient_layer(double z, int gx, int gy) const;

    PixelKernels pixel_kernels(const Vec3& r, double tol = 1e-12) const;

    const SpectralField& bottom_spectrum() const { return bottom_; }
    const SpectralField& top_spectrum() const { return top_; }

private:
    int plane_modes(double distance, bool& truncated) const;

    BilayerGeometry geom_;
    double tol_;
    int n_modes_;
    SpectralField bottom_;
    SpectralField top_;  // includes the offset phase
};

}  // namespace biplanar
