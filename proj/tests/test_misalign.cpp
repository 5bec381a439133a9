#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "biplanar/errors.hpp"
#include "biplanar/misalign.hpp"
#include "biplanar/optimizer.hpp"

using namespace biplanar;

namespace {

const BilayerGeometry& square_bilayer() {
    static const BilayerGeometry g = [] {
        OptimizationProblem p;
        p.cell = UnitCell::make(LatticeKind::square, 1.0);
        p.mode = GeometryMode::bilayer;
        p.h = 0.5;
        p.resolution = 64;
        p.symmetry.lattice_point_group = true;
        p.symmetry.mirror_z = true;
        return optimize_pattern(p).geometry;
    }();
    return g;
}

const NominalTrap& nominal() {
    static const NominalTrap n = nominal_trap(square_bilayer(), 0.5);
    return n;
}

}  // namespace

TEST_CASE("fold into the fundamental triangle") {
    const UnitCell c = UnitCell::make(LatticeKind::square, 2.0);
    auto f = fold_to_fundamental(Vec2(-0.3, 1.9), c);
    CHECK(f.x() == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(f.y() == doctest::Approx(0.1).epsilon(1e-12));
    f = fold_to_fundamental(Vec2(4.0, -2.0), c);
    CHECK(f.norm() < 1e-14);
    f = fold_to_fundamental(Vec2(1.2, 0.0), c);
    CHECK(f.x() == doctest::Approx(0.8).epsilon(1e-14));
    const UnitCell t = UnitCell::make(LatticeKind::triangular, 1.0);
    f = fold_to_fundamental(Vec2(0.9, 0.1), t);
    CHECK(f.x() == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("zero shift and full lattice vectors give unit ratios") {
    const auto& g = square_bilayer();
    const auto& n = nominal();
    CHECK(n.kappa > 0.3);
    CHECK(n.eta > 0.0);
    const auto r0 = shifted_characterization(g, n, Vec2::Zero());
    CHECK_FALSE(r0.destroyed);
    CHECK(r0.kappa_ratio == 1.0);
    CHECK(r0.eta_ratio == 1.0);
    for (const Vec2 v : {Vec2(1.0, 0.0), Vec2(0.0, -1.0), Vec2(1.0, 1.0), Vec2(-2.0, 3.0)}) {
        const auto r = shifted_characterization(g, n, v);
        CHECK(std::abs(r.kappa_ratio - 1.0) < 1e-8);
        CHECK(std::abs(r.eta_ratio - 1.0) < 1e-8);
    }
}

TEST_CASE("point-group images of a shift agree") {
    const auto& g = square_bilayer();
    const auto& n = nominal();
    const double a = 0.13, b = 0.05;
    const auto ref = shifted_characterization(g, n, Vec2(a, b));
    CHECK(ref.kappa_ratio < 1.0);
    for (const Vec2 v : {Vec2(-a, b), Vec2(a, -b), Vec2(-a, -b), Vec2(b, a), Vec2(-b, a), Vec2(b, -a), Vec2(-b, -a)}) {
        const auto r = shifted_characterization(g, n, v);
        CHECK(std::abs(r.kappa_ratio - ref.kappa_ratio) < 1e-8);
        CHECK(std::abs(r.eta_ratio - ref.eta_ratio) < 1e-8);
    }
}

TEST_CASE("scan envelopes, small shifts and the half-cell kink") {
    const auto& g = square_bilayer();
    const std::vector<double> mags{0.0, 0.05, 0.1, 0.46, 0.48, 0.5, 0.52, 0.54};
    const auto s = scan(g, 0.5, mags, 9);
    REQUIRE(s.directions.size() == 9);
    CHECK(s.directions.front().y() == 0.0);
    CHECK(s.directions.back().x() == s.directions.back().y());
    CHECK(s.destroyed == 0);
    for (std::size_t i = 0; i < mags.size(); ++i) {
        CHECK(s.kappa_min[i] <= s.kappa_max[i]);
        CHECK(s.eta_min[i] <= s.eta_max[i]);
        if (mags[i] <= 0.1) {
            CHECK(s.kappa_min[i] > 0.9);
            CHECK(s.eta_min[i] > 0.9);
            CHECK(s.kappa_max[i] <= 1.0 + 1e-12);
        }
    }
    CHECK(s.kappa_min[0] == 1.0);
    // x edge is symmetric about half a cell
    const auto& px = s.points;
    CHECK(std::abs(px[4][0].kappa_ratio - px[6][0].kappa_ratio) < 1e-8);
    CHECK(std::abs(px[3][0].eta_ratio - px[7][0].eta_ratio) < 1e-8);
    const double before = s.kappa_max[5] - s.kappa_max[4], after = s.kappa_max[6] - s.kappa_max[5];
    CHECK(before * after < 0.0);
    // continuity away from the kink
    for (std::size_t i = 4; i < mags.size(); ++i)
        CHECK(std::abs(s.eta_min[i] - s.eta_min[i - 1]) < 0.2 * s.eta_min[i - 1]);
    const std::string csv = misalignment_csv({s});
    CHECK(csv.rfind("h_over_d,delta_cells,ratio_kind,min,max\n", 0) == 0);
    CHECK(csv.find("0.5,0.1,kappa,") != std::string::npos);
    CHECK(csv.find(",eta,") != std::string::npos);
}

TEST_CASE("errors") {
    BilayerGeometry g = square_bilayer();
    g.mode = GeometryMode::open_single_layer;
    g.top.reset();
    g.H = 0.0;
    CHECK_THROWS_AS(nominal_trap(g, 0.5), DomainError);
    CHECK_THROWS_AS(scan(square_bilayer(), 0.5, {0.1}, 1), DomainError);
    CHECK_THROWS_AS(scan(square_bilayer(), 0.5, {}, 9), DomainError);
    NominalTrap bad;
    CHECK_THROWS_AS(shifted_characterization(square_bilayer(), bad, Vec2::Zero()), DomainError);
}
