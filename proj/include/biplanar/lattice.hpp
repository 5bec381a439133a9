#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/linalg.hpp"

namespace biplanar {

enum class LatticeKind { square, triangular, honeycomb, kagome };

std::string to_string(LatticeKind kind);
LatticeKind parse_lattice(std::string_view name);

// Rectangular periodicity cell of a 2-D trap lattice with nearest-neighbour
// spacing d. Site positions are fractional coordinates in [0, 1)^2.
struct UnitCell {
    LatticeKind kind = LatticeKind::square;
    double d = 1.0;
    double lx = 1.0;
    double ly = 1.0;
    std::vector<Vec2> sites;

    static UnitCell make(LatticeKind kind, double d);

    std::size_t site_count() const { return sites.size(); }
    Vec2 site_position(std::size_t i) const { return {sites[i].x() * lx, sites[i].y() * ly}; }
    double min_period() const { return lx < ly ? lx : ly; }
    double max_period() const { return lx > ly ? lx : ly; }

    // Number of sites per primitive cell of the Bravais lattice.
    static std::size_t sites_per_primitive(LatticeKind kind);

    void validate() const;
};

// Wraps a lateral vector into [0, lx) x [0, ly).
Vec2 wrap_into_cell(const Vec2& v, double lx, double ly);

// Minimum-image lateral distance between two points of the periodic cell.
double periodic_distance(const Vec2& a, const Vec2& b, double lx, double ly);

}  // namespace biplanar
