#include "biplanar/misalign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "biplanar/errors.hpp"
#include "biplanar/parallel.hpp"

namespace biplanar {

namespace {

struct Eval {
    TrapSite site;
    double kappa, eta;
};

Eval evaluate_trap(const BilayerGeometry& g, double h, const Vec3& guess, const DepthOptions& depth) {
    const FieldEngine eng(g, characterization_engine_options(g, depth.margin_pixels));
    Eval e{find_rf_null(eng, guess), 0.0, 0.0};
    e.kappa = site_kappa(e.site, h);
    std::vector<Vec3> others;
    const Vec2 shift = guess.head<2>() - g.cell.site_position(0);
    for (std::size_t s = 1; s < g.cell.site_count(); ++s) {
        const Vec2 p = g.cell.site_position(s) + shift;
        try {
            others.push_back(find_rf_null(eng, Vec3(p.x(), p.y(), guess.z())).position);
        } catch (const NoNullFound&) {
            others.emplace_back(p.x(), p.y(), guess.z());
        }
    }
    e.eta = h * h * trap_depth(eng, e.site, h, others, depth).depth;
    return e;
}

}  // namespace

Vec2 fold_to_fundamental(const Vec2& delta, const UnitCell& cell) {
    double x = delta.x() / cell.lx, y = delta.y() / cell.ly;
    x -= std::round(x);
    y -= std::round(y);
    if (cell.kind != LatticeKind::square) return {x * cell.lx, y * cell.ly};
    // assumes the pattern carries the square point group
    x = std::abs(x);
    y = std::abs(y);
    if (y > x) std::swap(x, y);
    return {x * cell.lx, y * cell.ly};
}

NominalTrap nominal_trap(const BilayerGeometry& geom, double h, const DepthOptions& depth) {
    if (geom.mode != GeometryMode::bilayer) throw DomainError("misalignment needs a bilayer geometry");
    BilayerGeometry g = geom;
    g.offset = Vec2::Zero();
    const Vec2 p = g.cell.site_position(0);
    const Eval e = evaluate_trap(g, h, Vec3(p.x(), p.y(), h), depth);
    return {h, e.site.position, e.kappa, e.eta};
}

ShiftResult shifted_characterization(const BilayerGeometry& geom, const NominalTrap& nominal, const Vec2& delta,
                                     const DepthOptions& depth) {
    if (!(nominal.kappa > 0.0) || !(nominal.eta > 0.0)) throw DomainError("nominal trap must have positive kappa and eta");
    BilayerGeometry g = geom;
    g.offset = delta;
    g.normalize();
    ShiftResult r;
    try {
        // the new null sits near the midpoint of the two plane sites
        const double rx = delta.x() - g.cell.lx * std::round(delta.x() / g.cell.lx);
        const double ry = delta.y() - g.cell.ly * std::round(delta.y() / g.cell.ly);
        const Vec3 guess = nominal.site + Vec3(0.5 * rx, 0.5 * ry, 0.0);
        const Eval e = evaluate_trap(g, nominal.h, guess, depth);
        r.site = e.site.position;
        r.kappa = e.kappa;
        r.eta = e.eta;
        r.kappa_ratio = e.kappa / nominal.kappa;
        r.eta_ratio = e.eta / nominal.eta;
    } catch (const NumericalError&) {
        // NoNullFound and DegenerateTrap
        r.destroyed = true;
    }
    return r;
}

MisalignmentScan scan(const BilayerGeometry& geom, double h, const std::vector<double>& magnitudes, int n_directions,
                      const DepthOptions& depth) {
    if (n_directions < 2) throw DomainError("scan: need at least two directions");
    if (magnitudes.empty()) throw DomainError("scan: empty magnitude list");
    MisalignmentScan s;
    s.h_over_d = h / geom.cell.d;
    s.magnitudes = magnitudes;
    const double kPi = std::acos(-1.0);
    for (int k = 0; k < n_directions; ++k) {
        const double a = 0.25 * kPi * k / (n_directions - 1);
        s.directions.emplace_back(std::cos(a), std::sin(a));
    }
    // exact edges so mirrored shifts hit mirrored pixels
    s.directions.front() = Vec2(1.0, 0.0);
    s.directions.back() = Vec2(std::sqrt(0.5), std::sqrt(0.5));
    {
    }
    const NominalTrap nom = nominal_trap(geom, h, depth);
    const std::size_t nm = magnitudes.size(), nd = s.directions.size();
    s.points.assign(nm, std::vector<ShiftResult>(nd));
    parallel_for(nm * nd, [&](std::size_t q) {
        const std::size_t i = q / nd, j = q % nd;
        const Vec2 delta(magnitudes[i] * geom.cell.lx * s.directions[j].x(), magnitudes[i] * geom.cell.ly * s.directions[j].y());
        s.points[i][j] = shifted_characterization(geom, nom, fold_to_fundamental(delta, geom.cell), depth);
    });
    for (std::size_t i = 0; i < nm; ++i) {
        double kmin = 1e300, kmax = -1e300, emin = 1e300, emax = -1e300;
        for (const auto& p : s.points[i]) {
            if (p.destroyed) ++s.destroyed;
            kmin = std::min(kmin, p.kappa_ratio);
            kmax = std::max(kmax, p.kappa_ratio);
            emin = std::min(emin, p.eta_ratio);
            emax = std::max(emax, p.eta_ratio);
        }
        s.kappa_min.push_back(kmin);
        s.kappa_max.push_back(kmax);
        s.eta_min.push_back(emin);
        s.eta_max.push_back(emax);
    }
    return s;
}

std::string misalignment_csv(const std::vector<MisalignmentScan>& scans) {
    std::ostringstream os;
    os << "h_over_d,delta_cells,ratio_kind,min,max\n";
    char buf[160];
    for (const auto& s : scans)
        for (std::size_t i = 0; i < s.magnitudes.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.6g,%.6g,kappa,%.10g,%.10g\n", s.h_over_d, s.magnitudes[i], s.kappa_min[i],
                          s.kappa_max[i]);
            os << buf;
            std::snprintf(buf, sizeof buf, "%.6g,%.6g,eta,%.10g,%.10g\n", s.h_over_d, s.magnitudes[i], s.eta_min[i],
                          s.eta_max[i]);
            os << buf;
        }
    return os.str();
}

}  // namespace biplanar
