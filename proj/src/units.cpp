#include "biplanar/units.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "biplanar/errors.hpp"

namespace biplanar::units {

namespace {

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw DomainError(std::string(name) + " must be positive and finite");
}

}  // namespace

void IonSpecies::validate() const {
    require_positive(mass, "ion mass");
    if (charge == 0.0 || !std::isfinite(charge)) throw DomainError("ion charge must be nonzero");
}

IonSpecies IonSpecies::beryllium9() {
    return {kBerylliumMassU * kAtomicMassUnit, kElementaryCharge};
}

IonSpecies parse_ion(std::string_view name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "be9" || lower == "9be+" || lower == "9be" || lower == "be" || lower == "beryllium")
        return IonSpecies::beryllium9();
    const auto colon = lower.find(':');
    if (colon != std::string::npos) {
        try {
            const double mass_u = std::stod(lower.substr(0, colon));
            const double charge_e = std::stod(lower.substr(colon + 1));
            IonSpecies ion{mass_u * kAtomicMassUnit, charge_e * kElementaryCharge};
            ion.validate();
            return ion;
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
        }
    }
    throw DomainError("unknown ion species '" + std::string(name) + "'");
}

void DriveParams::validate() const {
    require_positive(u_rf, "U_rf");
    require_positive(omega_rf, "omega_rf");
    require_positive(target_omega_tilde, "target omega_tilde");
    if (!(omega_rf > target_omega_tilde))
        throw DomainError("drive frequency must exceed the secular frequency");
}

bool DriveParams::stability_warning() const { return omega_rf / target_omega_tilde < 5.0; }

double kappa_from_physical(double mass, double omega_tilde, double omega_rf, double h, double u_rf,
                           double charge) {
    require_positive(mass, "mass");
    require_positive(omega_tilde, "omega_tilde");
    require_positive(omega_rf, "omega_rf");
    require_positive(h, "h");
    require_positive(u_rf, "U_rf");
    require_positive(std::abs(charge), "charge");
    return std::sqrt(2.0) * mass * omega_tilde * omega_rf * h * h / (std::abs(charge) * u_rf);
}

double eta_from_physical(double mass, double omega_rf, double h, double depth_psi, double u_rf,
                         double charge) {
    require_positive(mass, "mass");
    require_positive(omega_rf, "omega_rf");
    require_positive(h, "h");
    require_positive(u_rf, "U_rf");
    require_positive(std::abs(charge), "charge");
    if (!(depth_psi >= 0.0)) throw DomainError("trap depth must be non-negative");
    return 4.0 * mass * omega_rf * omega_rf * h * h * depth_psi / (charge * charge * u_rf * u_rf);
}

double eta_from_kappa(double kappa, double depth_psi, double mass, double omega_tilde, double h) {
    require_positive(mass, "mass");
    require_positive(omega_tilde, "omega_tilde");
    require_positive(h, "h");
    if (!(depth_psi >= 0.0)) throw DomainError("trap depth must be non-negative");
    return 2.0 * kappa * kappa * depth_psi / (mass * omega_tilde * omega_tilde * h * h);
}

double urf_from_kappa(double kappa, double mass, double omega_tilde, double omega_rf, double h,
                      double charge) {
    require_positive(kappa, "kappa");
    require_positive(mass, "mass");
    require_positive(omega_tilde, "omega_tilde");
    require_positive(omega_rf, "omega_rf");
    require_positive(h, "h");
    require_positive(std::abs(charge), "charge");
    return std::sqrt(2.0) * mass * omega_tilde * omega_rf * h * h / (std::abs(charge) * kappa);
}

double omega_tilde_from_kappa(double kappa, double mass, double omega_rf, double h, double u_rf,
                              double charge) {
    require_positive(kappa, "kappa");
    require_positive(mass, "mass");
    require_positive(omega_rf, "omega_rf");
    require_positive(h, "h");
    require_positive(u_rf, "U_rf");
    return kappa * std::abs(charge) * u_rf / (std::sqrt(2.0) * mass * omega_rf * h * h);
}

double depth_from_eta(double eta, double mass, double omega_rf, double h, double u_rf,
                      double charge) {
    require_positive(mass, "mass");
    require_positive(omega_rf, "omega_rf");
    require_positive(h, "h");
    require_positive(u_rf, "U_rf");
    if (!(eta >= 0.0)) throw DomainError("eta must be non-negative");
    return eta * charge * charge * u_rf * u_rf / (4.0 * mass * omega_rf * omega_rf * h * h);
}

double pseudo_energy_joules(double grad_sq_per_volt2, double u_rf, double mass, double omega_rf,
                            double charge) {
    require_positive(mass, "mass");
    require_positive(omega_rf, "omega_rf");
    return charge * charge * u_rf * u_rf * grad_sq_per_volt2 / (4.0 * mass * omega_rf * omega_rf);
}

}  // namespace biplanar::units
