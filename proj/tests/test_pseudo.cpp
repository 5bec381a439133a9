#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "biplanar/errors.hpp"
#include "biplanar/pseudo.hpp"

using namespace biplanar;

namespace {

// RF everywhere except a grounded disc under the site; the top plane shrinks
// the disc by `top_scale` (1 gives a mirror-symmetric bilayer).
BilayerGeometry hole_geom(int n, double radius, double top_scale = 1.0) {
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::square, 1.0);
    g.mode = GeometryMode::bilayer;
    g.H = 1.0;
    auto mk = [&](Plane p, double r) {
        ElectrodePattern e = ElectrodePattern::uniform(n, n, 1.0, p);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double x = (i + 0.5) / n - 0.5, y = (j + 0.5) / n - 0.5;
                if (x * x + y * y < r * r) e.at(i, j) = 0.0;
            }
        return e;
    };
    g.bottom = mk(Plane::bottom, radius);
    g.top = mk(Plane::top, radius * top_scale);
    return g;
}

BilayerGeometry open_ring(int n) {
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::square, 1.0);
    g.mode = GeometryMode::open_single_layer;
    g.H = 0.0;
    g.bottom = ElectrodePattern::uniform(n, n, 0.0, Plane::bottom);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n - 0.5, y = (j + 0.5) / n - 0.5, q = x * x + y * y;
            g.bottom.at(i, j) = (q > 0.0225 && q < 0.16) ? 1.0 : 0.0;
        }
    return g;
}

}  // namespace

TEST_CASE("mirror bilayer null sits on the midplane") {
    const BilayerGeometry g = hole_geom(64, 0.3);
    const FieldEngine e(g, characterization_engine_options(g));
    const TrapSite s = find_rf_null(e, Vec3(0.47, 0.52, 0.4));
    CHECK(std::abs(s.position.z() - 0.5) < 1e-10);
    CHECK(std::abs(s.position.x() - 0.5) < 1e-10);
    CHECK(std::abs(s.position.y() - 0.5) < 1e-10);
    CHECK(s.grad_norm < 1e-9);
    // Laplace: eigenvalues (a, a, -2a) by the fourfold symmetry.
    CHECK(std::abs(s.eigenvalues.sum()) < 1e-8 * s.eigenvalues.cwiseAbs().maxCoeff());
    CHECK(std::abs(s.eigenvalues[1] - s.eigenvalues[2]) < 1e-8 * s.eigenvalues.cwiseAbs().maxCoeff());
    CHECK(!s.degenerate);
    const Anharmonicity a = anharmonic_coefficients(e, s, 0.5);
    CHECK(std::abs(a.c3_z) < 1e-8);
    CHECK(!a.span_reduced);
}

TEST_CASE("no null in a uniform field") {
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::square, 1.0);
    g.mode = GeometryMode::bilayer;
    g.H = 1.0;
    g.bottom = ElectrodePattern::uniform(32, 32, 1.0, Plane::bottom);
    g.top = ElectrodePattern::uniform(32, 32, 0.0, Plane::top);
    const FieldEngine e(g);
    CHECK_THROWS_AS(find_rf_null(e, Vec3(0.5, 0.5, 0.5)), NoNullFound);
    CHECK_THROWS_AS(find_rf_null(e, Vec3(0.5, 0.5, 2.0)), NoNullFound);
}

TEST_CASE("a decaying field is not reported as a null") {
    // A grounded hole in an RF sheet has no trap; the field only decays upward.
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::square, 1.0);
    g.mode = GeometryMode::open_single_layer;
    g.bottom = ElectrodePattern::uniform(32, 32, 1.0, Plane::bottom);
    for (int j = 12; j < 20; ++j)
        for (int i = 12; i < 20; ++i) g.bottom.at(i, j) = 0.0;
    const FieldEngine e(g, characterization_engine_options(g));
    CHECK_THROWS_AS(find_rf_null(e, Vec3(0.5, 0.5, 0.3)), NoNullFound);
}

TEST_CASE("secular frequencies and RF amplitude") {
    const BilayerGeometry g = hole_geom(64, 0.3, 0.8);
    const FieldEngine e(g, characterization_engine_options(g));
    const TrapSite s = find_rf_null(e, Vec3(0.5, 0.5, 0.5));
    const auto ion = units::IonSpecies::beryllium9();
    const double L = 100e-6, orf = 2 * M_PI * 50e6, target = 2 * M_PI * 2e6;
    const double u = solve_urf(s, ion, orf, target, L);
    units::DriveParams drive;
    drive.u_rf = u;
    drive.omega_rf = orf;
    const Vec3 w = secular_frequencies(s, ion, drive, L);
    CHECK(std::abs(mean_secular_frequency(w) / target - 1.0) < 1e-12);
    CHECK(std::abs(solve_urf(s, ion, orf, 2 * target, L) / (2 * u) - 1.0) < 1e-14);
    drive.u_rf = 3 * u;
    const Vec3 w3 = secular_frequencies(s, ion, drive, L);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(w3[i] / (3 * w[i]) - 1.0) < 1e-14);
    // Agreement with the dimensionless curvature conversion.
    const double h = s.position.z();
    const double kappa = site_kappa(s, h);
    CHECK(std::abs(units::urf_from_kappa(kappa, ion.mass, target, orf, h * L, ion.charge) / u - 1.0) < 1e-12);
    TrapSite flat = s;
    flat.eigenvalues[0] = 0.0;
    CHECK_THROWS_AS(secular_frequencies(flat, ion, drive, L), DegenerateTrap);
    CHECK_THROWS_AS(solve_urf(s, ion, orf, -1.0, L), DomainError);
}

TEST_CASE("depth: saddle on the symmetry line and resolution independence") {
    const BilayerGeometry g = hole_geom(64, 0.3);
    const FieldEngine e(g, characterization_engine_options(g));
    const TrapSite s = find_rf_null(e, Vec3(0.5, 0.5, 0.5));
    const DepthReport coarse = trap_depth(e, s, 0.5, {});
    DepthOptions fine_opt;
    fine_opt.nx = fine_opt.ny = 128;
    fine_opt.nz = 65;
    const DepthReport fine = trap_depth(e, s, 0.5, {}, fine_opt);
    CHECK(coarse.polished);
    CHECK(coarse.depth > 0);
    CHECK(std::abs(coarse.depth / fine.depth - 1.0) < 1e-3);
    CHECK(coarse.route == EscapeRoute::own_image);
    CHECK(coarse.saddle.z() == doctest::Approx(0.5).epsilon(1e-6));

    // Oracle: the escape keeps to the midplane mirror line towards the next
    // cell; its barrier is the largest P along that line.
    double best = 0.0, at = 0.0;
    for (int q = 0; q <= 4000; ++q) {
        const double y = 0.5 + 0.5 * q / 4000.0;
        const double p = e.evaluate(Vec3(0.5, y, 0.5)).grad.squaredNorm();
        if (p > best) best = p, at = y;
    }
    // refine by golden section
    double a = at - 1.25e-4, b = at + 1.25e-4;
    auto P = [&](double y) { return e.evaluate(Vec3(0.5, y, 0.5)).grad.squaredNorm(); };
    for (int it = 0; it < 60; ++it) {
        const double m1 = b - 0.618033988749895 * (b - a), m2 = a + 0.618033988749895 * (b - a);
        if (P(m1) > P(m2)) b = m2; else a = m1;
    }
    best = P(0.5 * (a + b));
    CHECK(std::abs(coarse.depth / best - 1.0) < 1e-8);
    CHECK(std::abs(coarse.eta - 0.25 * coarse.depth) < 1e-15);
}

TEST_CASE("neighbouring sites count as escape") {
    const BilayerGeometry g = hole_geom(64, 0.3);
    const FieldEngine e(g, characterization_engine_options(g));
    const TrapSite s = find_rf_null(e, Vec3(0.5, 0.5, 0.5));
    const DepthReport alone = trap_depth(e, s, 0.5, {});
    const DepthReport with_corner = trap_depth(e, s, 0.5, {Vec3(0.0, 0.0, 0.5)});
    CHECK(with_corner.depth <= alone.depth * (1 + 1e-12));
}

TEST_CASE("spurious minima enumeration") {
    const BilayerGeometry g = hole_geom(64, 0.3);
    const FieldEngine e(g, characterization_engine_options(g));
    const MinimaReport m = find_all_minima(e, 0.5);
    REQUIRE(m.sites.size() == 4);
    CHECK(!m.sites[0].is_spurious);
    CHECK(m.sites[0].designed_index == 0);
    int spurious = 0;
    for (const auto& s : m.sites) {
        CHECK(s.position.z() == doctest::Approx(0.5).epsilon(1e-9));
        if (s.is_spurious) ++spurious;
    }
    CHECK(spurious == 3);
    CHECK(m.max_curvature_ratio > 0.0);
    CHECK(m.max_curvature_ratio < 1.0);
    CHECK(m.max_depth_ratio > 0.0);
    CHECK(m.max_depth_ratio < 1.0);
}

TEST_CASE("characterize bilayer and open traps") {
    const BilayerGeometry g = hole_geom(64, 0.3);
    const FieldEngine e(g, characterization_engine_options(g));
    const TrapCharacterization c = characterize(e, 0, 0.5);
    CHECK(c.kappa == doctest::Approx(site_kappa(c.site, 0.5)));
    CHECK(c.eta == doctest::Approx(0.25 * c.depth.depth));
    CHECK(c.secular_freqs_per_volt.minCoeff() > 0);
    // the anharmonic fit does not depend on its span
    const Anharmonicity a = c.anharm;
    CHECK(a.span == doctest::Approx(0.05));

    const BilayerGeometry og = open_ring(64);
    const FieldEngine oe(og, characterization_engine_options(og));
    const TrapCharacterization oc = characterize(oe, 0, 0.25);
    CHECK(oc.site.position.z() > 0.1);
    CHECK(oc.site.position.z() < 0.4);
    CHECK(oc.depth.depth > 0);
    CHECK(oc.depth.route != EscapeRoute::none);
    CHECK_THROWS_AS(characterize(oe, 3, 0.25), DomainError);
}
