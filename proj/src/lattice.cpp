#include "biplanar/lattice.hpp"

#include <cmath>
#include <numbers>

#include "biplanar/errors.hpp"

namespace biplanar {

std::string to_string(LatticeKind kind) {
    switch (kind) {
        case LatticeKind::square: return "square";
        case LatticeKind::triangular: return "triangular";
        case LatticeKind::honeycomb: return "honeycomb";
        case LatticeKind::kagome: return "kagome";
    }
    return "unknown";
}

LatticeKind parse_lattice(std::string_view name) {
    if (name == "square") return LatticeKind::square;
    if (name == "triangular") return LatticeKind::triangular;
    if (name == "honeycomb") return LatticeKind::honeycomb;
    if (name == "kagome") return LatticeKind::kagome;
    throw DomainError("unknown lattice '" + std::string(name) + "'");
}

std::size_t UnitCell::sites_per_primitive(LatticeKind kind) {
    switch (kind) {
        case LatticeKind::square:
        case LatticeKind::triangular: return 1;
        case LatticeKind::honeycomb: return 2;
        case LatticeKind::kagome: return 3;
    }
    return 0;
}

UnitCell UnitCell::make(LatticeKind kind, double d) {
    if (!(d > 0.0)) throw DomainError("lattice spacing must be positive");
    const double s3 = std::numbers::sqrt3;
    UnitCell cell;
    cell.kind = kind;
    cell.d = d;
    switch (kind) {
        case LatticeKind::square:
            cell.lx = d;
            cell.ly = d;
            cell.sites = {{0.5, 0.5}};
            break;
        case LatticeKind::triangular:
            // a1 = (d, 0), a2 = (d/2, sqrt3 d/2); two primitive cells per rectangle.
            cell.lx = d;
            cell.ly = s3 * d;
            cell.sites = {{0.25, 0.25}, {0.75, 0.75}};
            break;
        case LatticeKind::honeycomb:
            // Vertical bonds; triangular Bravais lattice with constant sqrt3 d.
            cell.lx = s3 * d;
            cell.ly = 3.0 * d;
            cell.sites = {{0.25, 1.0 / 12.0}, {0.25, 5.0 / 12.0}, {0.75, 7.0 / 12.0},
                          {0.75, 11.0 / 12.0}};
            break;
        case LatticeKind::kagome:
            // Bravais constant 2d, basis {0, a1/2, a2/2}, shifted off the cell edges.
            cell.lx = 2.0 * d;
            cell.ly = 2.0 * s3 * d;
            cell.sites = {{0.125, 0.125}, {0.625, 0.125}, {0.375, 0.375},
                          {0.625, 0.625}, {0.125, 0.625}, {0.875, 0.875}};
            break;
    }
    cell.validate();
    return cell;
}

Vec2 wrap_into_cell(const Vec2& v, double lx, double ly) {
    Vec2 out{v.x() - lx * std::floor(v.x() / lx), v.y() - ly * std::floor(v.y() / ly)};
    if (out.x() >= lx) out.x() -= lx;
    if (out.y() >= ly) out.y() -= ly;
    return out;
}

double periodic_distance(const Vec2& a, const Vec2& b, double lx, double ly) {
    double dx = a.x() - b.x();
    double dy = a.y() - b.y();
    dx -= lx * std::round(dx / lx);
    dy -= ly * std::round(dy / ly);
    return std::hypot(dx, dy);
}

void UnitCell::validate() const {
    if (!(lx > 0.0) || !(ly > 0.0) || !(d > 0.0))
        throw DomainError("unit cell periods and spacing must be positive");
    if (sites.empty()) throw DomainError("unit cell has no sites");
    for (const auto& s : sites)
        if (s.x() < 0.0 || s.x() >= 1.0 || s.y() < 0.0 || s.y() >= 1.0)
            throw DomainError("site fractional coordinates must lie in [0,1)");
    // The rectangle must hold an integer number of primitive cells.
    const double s3 = std::numbers::sqrt3;
    double primitive_area = d * d;
    switch (kind) {
        case LatticeKind::square: primitive_area = d * d; break;
        case LatticeKind::triangular: primitive_area = s3 / 2.0 * d * d; break;
        case LatticeKind::honeycomb: primitive_area = 3.0 * s3 / 2.0 * d * d; break;
        case LatticeKind::kagome: primitive_area = 2.0 * s3 * d * d; break;
    }
    const double cells = lx * ly / primitive_area;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * cells ||
        sites.size() != static_cast<std::size_t>(rounded) * sites_per_primitive(kind))
        throw DomainError("site count inconsistent with lattice kind and cell size");
}

}  // namespace biplanar
