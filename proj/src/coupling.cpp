#include "biplanar/coupling.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "biplanar/errors.hpp"
#include "biplanar/parallel.hpp"

namespace biplanar {

std::string to_string(CouplingKind kind) {
    switch (kind) {
        case CouplingKind::free_space: return "free_space";
        case CouplingKind::single_plane: return "single_plane";
        case CouplingKind::bilayer: return "bilayer";
    }
    return "?";
}

CouplingKind parse_coupling_kind(std::string_view name) {
    if (name == "free_space" || name == "free" || name == "fs") return CouplingKind::free_space;
    if (name == "single_plane" || name == "single" || name == "se") return CouplingKind::single_plane;
    if (name == "bilayer" || name == "bl") return CouplingKind::bilayer;
    throw DomainError("unknown coupling kind '" + std::string(name) + "'");
}

void CouplingSpec::validate() const {
    if (!(d > 0.0)) throw DomainError("coupling: d must be positive");
    if (kind == CouplingKind::free_space) return;
    if (!(h > 0.0)) throw DomainError("coupling: h must be positive");
    if (kind == CouplingKind::bilayer) {
        if (!(H > h)) throw DomainError("coupling: bilayer needs 0 < h < H");
        if (mu_max < 8) throw DomainError("coupling: image truncation must be >= 8");
    }
}

namespace {

// f = (rho^2 + c^2)^(-1/2) and its second rho-derivative.
inline double inv(double rho, double c) { return 1.0 / std::sqrt(rho * rho + c * c); }
inline double inv_d2(double rho, double c) {
    const double s = rho * rho + c * c;
    return (2.0 * rho * rho - c * c) / (s * s * std::sqrt(s));
}

}  // namespace

GreenValue green(const CouplingSpec& spec, double rho) {
    spec.validate();
    if (!(rho > 0.0)) throw DomainError("green: rho must be positive");
    GreenValue out;
    switch (spec.kind) {
        case CouplingKind::free_space:
            out.value = 1.0 / rho;
            out.d2_drho2 = 2.0 / (rho * rho * rho);
            return out;
        case CouplingKind::single_plane:
            out.value = 1.0 / rho - inv(rho, 2.0 * spec.h);
            out.d2_drho2 = 2.0 / (rho * rho * rho) - inv_d2(rho, 2.0 * spec.h);
            return out;
        case CouplingKind::bilayer: break;
    }
    const double h = spec.h, H = spec.H;
    // Smallest terms first.
    double v = 0.0, v2 = 0.0;
    for (int mu = spec.mu_max; mu >= 1; --mu) {
        for (int s : {1, -1}) {
            const double c = 2.0 * s * mu * H;
            v += inv(rho, c) - inv(rho, c + 2.0 * h);
            v2 += inv_d2(rho, c) - inv_d2(rho, c + 2.0 * h);
        }
    }
    v += 1.0 / rho - inv(rho, 2.0 * h);
    v2 += 2.0 / (rho * rho * rho) - inv_d2(rho, 2.0 * h);
    // Paired far images u > mu_max act as second differences
    // g(u) = 2f(c) - f(c+2h) - f(c-2h), c = 2uH. Midpoint Euler-Maclaurin:
    // sum = integral from mu_max + 1/2 plus g'/24 there.
    const double c = 2.0 * (spec.mu_max + 0.5) * H;
    auto second_diff = [&](auto fn) { return 2.0 * fn(c) - fn(c + 2.0 * h) - fn(c - 2.0 * h); };
    const double r2 = rho * rho;
    auto anti = [&](double x) { return std::asinh(x / rho); };
    auto anti_d2 = [&](double x) {
        const double q = r2 + x * x;
        return x * (2.0 * r2 + x * x) / (r2 * q * std::sqrt(q));
    };
    auto df = [&](double x) {
        const double q = r2 + x * x;
        return -x / (q * std::sqrt(q));
    };
    auto df_d2 = [&](double x) {
        const double q = r2 + x * x;
        return 3.0 * x * (x * x - 4.0 * r2) / (q * q * q * std::sqrt(q));
    };
    out.tail = -second_diff(anti) / (2.0 * H) + 2.0 * H * second_diff(df) / 24.0;
    out.tail_d2 = -second_diff(anti_d2) / (2.0 * H) + 2.0 * H * second_diff(df_d2) / 24.0;
    out.value = v + out.tail;
    out.d2_drho2 = v2 + out.tail_d2;
    out.truncated = std::abs(out.tail) > 1e-8 * std::abs(out.value) ||
                    std::abs(out.tail_d2) > 1e-8 * std::abs(out.d2_drho2);
    return out;
}

ExchangeResult exchange_rate(const CouplingSpec& spec, const units::IonSpecies& ion, double omega) {
    ion.validate();
    if (!(omega > 0.0)) throw DomainError("exchange_rate: omega must be positive");
    const GreenValue g = green(spec, spec.d);
    const double pref = ion.charge * ion.charge / (4.0 * std::numbers::pi * units::kVacuumPermittivity) /
                        (2.0 * ion.mass * omega);
    ExchangeResult r;
    r.d2G_drho2 = g.d2_drho2;
    r.omega_ex = pref * g.d2_drho2;
    r.ratio_to_free_space = g.d2_drho2 / (2.0 / (spec.d * spec.d * spec.d));
    r.truncated = g.truncated;
    return r;
}

std::vector<CouplingRow> coupling_curves(const CouplingSpec& fixed, SweepVariable var,
                                         const std::vector<double>& values, const units::IonSpecies& ion,
                                         double omega) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw DomainError("coupling_curves: sweep values must be positive");
        if (i > 0 && !(values[i] > values[i - 1])) throw DomainError("coupling_curves: sweep must be increasing");
    }
    std::vector<CouplingRow> rows(values.size());
    parallel_for(values.size(), [&](std::size_t i) {
        const double h = var == SweepVariable::h ? values[i] : fixed.h;
        const double d = var == SweepVariable::d ? values[i] : fixed.d;
        CouplingSpec s;
        s.mu_max = fixed.mu_max;
        s.d = d;
        s.h = h;
        CouplingRow& r = rows[i];
        r.sweep_value = values[i];
        s.kind = CouplingKind::free_space;
        r.omega_fs = exchange_rate(s, ion, omega).omega_ex;
        s.kind = CouplingKind::single_plane;
        r.omega_se = exchange_rate(s, ion, omega).omega_ex;
        s.kind = CouplingKind::bilayer;
        s.H = 2.0 * h;
        r.omega_bl = exchange_rate(s, ion, omega).omega_ex;
    });
    return rows;
}

std::string coupling_csv(const std::vector<CouplingRow>& rows) {
    std::string out = "sweep_value_um,omega_ex_fs,omega_ex_se,omega_ex_bl,omega_ex_fs_hz,omega_ex_se_hz,omega_ex_bl_hz\n";
    char buf[256];
    const double tau = 2.0 * std::numbers::pi;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.sweep_value * 1e6, r.omega_fs,
                      r.omega_se, r.omega_bl, r.omega_fs / tau, r.omega_se / tau, r.omega_bl / tau);
        out += buf;
    }
    return out;
}

double figure_of_merit(double h, double d, double h0, double d0) {
    if (!(h > 0.0 && d > 0.0 && h0 > 0.0 && d0 > 0.0)) throw DomainError("figure_of_merit: lengths must be positive");
    return (h / h0) * (h / h0) * (h / h0) * (h / h0) / ((d / d0) * (d / d0) * (d / d0));
}

}  // namespace biplanar
