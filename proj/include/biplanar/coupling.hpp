#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "biplanar/units.hpp"

namespace biplanar {

enum class CouplingKind { free_space, single_plane, bilayer };

std::string to_string(CouplingKind kind);
CouplingKind parse_coupling_kind(std::string_view name);

// Grounded-conductor Green's function for the ion-ion interaction. Lengths in
// any consistent unit; the ions sit at height h (and H is the plane
// separation for the bilayer kind).
struct CouplingSpec {
    CouplingKind kind = CouplingKind::free_space;
    double h = 0.0;
    double H = 0.0;
    double d = 0.0;
    int mu_max = 64;

    void validate() const;
};

struct GreenValue {
    double value = 0.0;
    double d2_drho2 = 0.0;
    double tail = 0.0;     // analytic tail estimate already included in value
    double tail_d2 = 0.0;  // same for the second derivative
    bool truncated = false;  // tail above 1e-8 of the sum
};

GreenValue green(const CouplingSpec& spec, double rho);

struct ExchangeResult {
    double d2G_drho2 = 0.0;  // 1/length^3
    double omega_ex = 0.0;   // rad/s
    double ratio_to_free_space = 0.0;
    bool truncated = false;
};

// Omega_ex = e^2/(4 pi eps0) * 1/(2 M omega) * G''(d). Lengths in metres.
ExchangeResult exchange_rate(const CouplingSpec& spec, const units::IonSpecies& ion, double omega);

enum class SweepVariable { h, d };

struct CouplingRow {
    double sweep_value = 0.0;  // metres
    double omega_fs = 0.0;
    double omega_se = 0.0;
    double omega_bl = 0.0;
};

// Sweeps h at the fixed d of `fixed` (or d at fixed h). The bilayer column
// places the ions midway, H = 2h.
std::vector<CouplingRow> coupling_curves(const CouplingSpec& fixed, SweepVariable var,
                                         const std::vector<double>& values, const units::IonSpecies& ion,
                                         double omega);

// Columns sweep_value_um, omega_ex_{fs,se,bl} in rad/s, and the same in Hz.
std::string coupling_csv(const std::vector<CouplingRow>& rows);

// (h^4/d^3) / (h0^4/d0^3).
double figure_of_merit(double h, double d, double h0, double d0);

}  // namespace biplanar
