#pragma once

#include <string>
#include <string_view>

// Physical constants and conversions between the geometry-only trap figures of
// merit (curvature kappa, depth eta) and SI drive parameters.
//
// Geometry quantities are carried per unit drive voltage: the potential phi is
// dimensionless, its Hessian has units 1/length^2 and the pseudopotential is
// tracked as |grad phi|^2. Energies in joules appear only at this boundary.
namespace biplanar::units {

// CODATA 2018.
inline constexpr double kElementaryCharge = 1.602176634e-19;   // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;     // kg
inline constexpr double kBerylliumMassU = 9.0122;

struct IonSpecies {
    double mass = 0.0;    // kg
    double charge = 0.0;  // C

    void validate() const;

    static IonSpecies beryllium9();
};

// Accepts "Be9", "9Be+", "beryllium" and "mass_u:charge_e" (for example "40:1").
IonSpecies parse_ion(std::string_view name);

struct DriveParams {
    double u_rf = 0.0;                // V, amplitude
    double omega_rf = 0.0;            // rad/s
    double target_omega_tilde = 0.0;  // rad/s

    // Throws DomainError unless all fields are positive and omega_rf > omega_tilde.
    void validate() const;
    // True when omega_rf / omega_tilde < 5, where the pseudopotential picture gets shaky.
    bool stability_warning() const;
};

double kappa_from_physical(double mass, double omega_tilde, double omega_rf, double h,
                           double u_rf, double charge);

double eta_from_physical(double mass, double omega_rf, double h, double depth_psi, double u_rf,
                         double charge);

// Second algebraic form, 2 kappa^2 Psi / (M omega_tilde^2 h^2).
double eta_from_kappa(double kappa, double depth_psi, double mass, double omega_tilde, double h);

// Inverses of the two definitions.
double urf_from_kappa(double kappa, double mass, double omega_tilde, double omega_rf, double h,
                      double charge);
double omega_tilde_from_kappa(double kappa, double mass, double omega_rf, double h, double u_rf,
                              double charge);
double depth_from_eta(double eta, double mass, double omega_rf, double h, double u_rf,
                      double charge);

// Pseudopotential energy e^2 U^2 |grad phi|^2 / (4 M omega_rf^2) in joules for a
// per-volt squared gradient in 1/m^2.
double pseudo_energy_joules(double grad_sq_per_volt2, double u_rf, double mass, double omega_rf,
                            double charge);

inline double joules_to_mev(double joules) { return joules / kElementaryCharge * 1e3; }

}  // namespace biplanar::units
