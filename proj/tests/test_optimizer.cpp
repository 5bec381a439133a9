#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "biplanar/errors.hpp"
#include "biplanar/optimizer.hpp"
#include "biplanar/pseudo.hpp"

using namespace biplanar;

namespace {

OptimizationProblem make(LatticeKind k, GeometryMode m, double h, int res = 64) {
    OptimizationProblem p;
    p.cell = UnitCell::make(k, 1.0);
    p.mode = m;
    p.h = h;
    p.resolution = res;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("curvature kernel is linear and matches the field") {
    auto p = make(LatticeKind::square, GeometryMode::bilayer, 0.4, 32);
    const auto z = curvature_kernel(p, 0, Mat3::Zero(), Vec3::Zero(), 0.0);
    REQUIRE(z.bottom.size() == 32u * 32u);
    REQUIRE(z.top.size() == z.bottom.size());
    for (double v : z.bottom) CHECK(v == 0.0);

    Mat3 A1 = Mat3::Zero(), A2 = Mat3::Zero();
    A1.diagonal() << -1.0, -1.0, 2.0;
    A2 << 0.3, 0.1, -0.2, 0.1, 0.5, 0.05, -0.2, 0.05, -0.8;
    const Vec3 mu(0.2, -0.1, 0.4);
    const auto k1 = curvature_kernel(p, 0, A1, mu, 0.3);
    const auto k2 = curvature_kernel(p, 0, A2, Vec3::Zero(), 0.0);
    const auto k12 = curvature_kernel(p, 0, A1 + 2.0 * A2, mu, 0.3);
    double err = 0.0, scale = 0.0;
    for (std::size_t q = 0; q < k1.bottom.size(); ++q) {
        err = std::max(err, std::abs(k12.bottom[q] - k1.bottom[q] - 2.0 * k2.bottom[q]));
        err = std::max(err, std::abs(k12.top[q] - k1.top[q] - 2.0 * k2.top[q]));
        scale = std::max(scale, std::abs(k12.bottom[q]));
    }
    CHECK(err < 1e-12 * scale);

    // site at mid-gap: axial weights see the same map from both planes
    const auto kz = curvature_kernel(p, 0, A1, Vec3::Zero(), 0.0);
    double mir = 0.0;
    for (std::size_t q = 0; q < kz.bottom.size(); ++q) mir = std::max(mir, std::abs(kz.bottom[q] - kz.top[q]));
    CHECK(mir < 1e-10 * scale);

    // sum over a random pattern reproduces tr(A H)
    BilayerGeometry g;
    g.cell = p.cell;
    g.mode = p.mode;
    g.H = p.plane_separation();
    g.bottom = ElectrodePattern::uniform(32, 32, 0.0, Plane::bottom);
    g.top = ElectrodePattern::uniform(32, 32, 0.0, Plane::top);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (auto& w : g.bottom.w) w = U(rng);
    for (auto& w : g.top->w) w = U(rng);
    const FieldEngine eng(g, EngineOptions{1e-12, 0.4});
    const auto f = eng.evaluate(Vec3(0.5, 0.5, 0.4));
    double sum = 0.0;
    for (std::size_t q = 0; q < k2.bottom.size(); ++q) sum += g.bottom.w[q] * k2.bottom[q] + g.top->w[q] * k2.top[q];
    CHECK(sum == doctest::Approx((A2 * f.hessian).trace()).epsilon(1e-9));

    CHECK_THROWS_AS(curvature_kernel(p, 1, A1, mu, 0.0), DomainError);
}

TEST_CASE("square bilayer: ascent, constraints, null, optimality, emergent mirror") {
    auto p = make(LatticeKind::square, GeometryMode::bilayer, 0.5);
    const auto r = optimize_pattern(p);
    CHECK(r.converged);
    REQUIRE(!r.history.empty());
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] >= r.history[i - 1] - 1e-9);
    CHECK(r.kappa == doctest::Approx(r.history.back()).epsilon(1e-12));
    CHECK(r.max_gradient < 1e-9);
    CHECK(r.max_hxy < 1e-9);
    for (double w : r.geometry.bottom.w) CHECK((w >= 0.0 && w <= 1.0));

    const FieldEngine eng(r.geometry, characterization_engine_options(r.geometry));
    const auto null = find_rf_null(eng, Vec3(0.5, 0.5, 0.5));
    CHECK((null.position - Vec3(0.5, 0.5, 0.5)).norm() < 1e-6);
    CHECK(site_kappa(null, 0.5) == doctest::Approx(r.kappa).epsilon(1e-3));

    const auto cert = flip_certificate(p, r, 100, 11);
    CHECK(cert.tested == 100);
    CHECK(cert.max_relative_gain <= 1e-6);

    // free optimization finds a (nearly) mirror-symmetric pattern
    int differ = 0;
    for (std::size_t q = 0; q < r.geometry.bottom.w.size(); ++q)
        differ += std::abs(r.geometry.bottom.w[q] - r.geometry.top->w[q]) > 0.5;
    CHECK(differ < 0.01 * r.geometry.bottom.w.size());

    auto ps = p;
    ps.symmetry.lattice_point_group = true;
    ps.symmetry.mirror_z = true;
    const auto rs = optimize_pattern(ps);
    CHECK(rel(rs.kappa, r.kappa) < 0.01);
    for (std::size_t q = 0; q < rs.geometry.bottom.w.size(); ++q) CHECK(rs.geometry.bottom.w[q] == rs.geometry.top->w[q]);
}

TEST_CASE("symmetry-constrained optima match free optima") {
    for (auto k : {LatticeKind::square, LatticeKind::triangular})
        for (auto m : {GeometryMode::open_single_layer, GeometryMode::bilayer}) {
            auto p = make(k, m, 0.1);
            const auto free = optimize_pattern(p);
            p.symmetry.lattice_point_group = true;
            const auto sym = optimize_pattern(p);
            CHECK(rel(sym.kappa, free.kappa) < 0.005);
        }
}

TEST_CASE("square single layer at h/d 0.3 prefers an anisotropic trap") {
    // the point group forces lambda_x = lambda_y; the free optimum does not
    auto p = make(LatticeKind::square, GeometryMode::open_single_layer, 0.3);
    const auto free = optimize_pattern(p);
    p.symmetry.lattice_point_group = true;
    const auto sym = optimize_pattern(p);
    CHECK(free.kappa > 1.2 * sym.kappa);
    const FieldEngine eng(free.geometry, characterization_engine_options(free.geometry));
    const auto s = find_rf_null(eng, Vec3(0.5, 0.5, 0.3));
    CHECK(std::abs(s.eigenvalues[0] - s.eigenvalues[1]) > 0.2 * std::abs(s.eigenvalues[1]));
    CHECK(site_kappa(s, 0.3) == doctest::Approx(free.kappa).epsilon(1e-3));
}

TEST_CASE("single-layer flip certificate and site spreading") {
    auto p = make(LatticeKind::triangular, GeometryMode::open_single_layer, 0.4);
    const auto r = optimize_pattern(p);
    REQUIRE(r.site_kappa.size() == 2);
    CHECK(r.site_kappa[0] == doctest::Approx(r.site_kappa[1]).epsilon(1e-6));
    const auto cert = flip_certificate(p, r, 100, 3);
    CHECK(cert.max_relative_gain <= 1e-6);
    CHECK(r.max_gradient < 1e-9);
}

TEST_CASE("sparse limit approaches the single traps") {
    auto p = make(LatticeKind::square, GeometryMode::bilayer, 0.05, 128);
    p.symmetry.lattice_point_group = true;
    p.symmetry.mirror_z = true;
    CHECK(rel(optimize_pattern(p).kappa, 0.672) < 0.03);
    p.mode = GeometryMode::open_single_layer;
    p.H = 0.0;
    p.symmetry.mirror_z = false;
    CHECK(rel(optimize_pattern(p).kappa, 0.298) < 0.03);
}

TEST_CASE("deterministic across worker counts") {
    auto p = make(LatticeKind::square, GeometryMode::open_single_layer, 0.35, 32);
    setenv("BIPLANAR_THREADS", "1", 1);
    const auto a = optimize_pattern(p);
    setenv("BIPLANAR_THREADS", "4", 1);
    const auto b = optimize_pattern(p);
    unsetenv("BIPLANAR_THREADS");
    CHECK(a.kappa == b.kappa);
    CHECK(a.geometry.bottom.w == b.geometry.bottom.w);
}

TEST_CASE("sweeps, csv and crossing") {
    auto p = make(LatticeKind::square, GeometryMode::open_single_layer, 0.2, 32);
    p.symmetry.lattice_point_group = true;
    const auto rows = sweep_lattice(p, {0.2, 0.3, 0.4, 0.5});
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.error.empty());
        CHECK(r.eta > 0.0);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].kappa < rows[i - 1].kappa);
    const double x = kappa_crossing(rows);
    CHECK(x > 0.2);
    CHECK(x < 0.5);
    const std::string csv = sweep_csv(rows);
    CHECK(csv.rfind("h_over_d,kappa,eta,converged\n0.2,", 0) == 0);

    std::vector<SweepRow> synth(2);
    synth[0].h_over_d = 1.0;
    synth[0].kappa = 0.2;
    synth[1].h_over_d = 2.0;
    synth[1].kappa = 0.05;
    // log-linear: kappa halves per unit
    CHECK(kappa_crossing(synth) == doctest::Approx(1.5).epsilon(1e-12));
    synth[1].kappa = 0.15;
    CHECK_THROWS_AS(kappa_crossing(synth), DomainError);
    synth[1].error = "x";
    CHECK(sweep_csv(synth).find("2,nan,nan,0") != std::string::npos);
}

TEST_CASE("problem validation") {
    auto p = make(LatticeKind::square, GeometryMode::open_single_layer, 0.3);
    p.symmetry.mirror_z = true;
    CHECK_THROWS_AS(optimize_pattern(p), DomainError);
    p = make(LatticeKind::square, GeometryMode::bilayer, 0.3, 48);
    CHECK_THROWS_AS(optimize_pattern(p), DomainError);
    p = make(LatticeKind::square, GeometryMode::bilayer, 0.3);
    p.H = 0.25;
    CHECK_THROWS_AS(optimize_pattern(p), DomainError);
    p = make(LatticeKind::square, GeometryMode::bilayer, 0.3);
    p.H = 0.9;
    p.symmetry.mirror_z = true;
    CHECK_THROWS_AS(optimize_pattern(p), DomainError);
    CHECK(make(LatticeKind::triangular, GeometryMode::bilayer, 0.3).pixels_y() == 128);
    CHECK(make(LatticeKind::kagome, GeometryMode::bilayer, 0.3).pixels_y() == 128);
    CHECK(make(LatticeKind::honeycomb, GeometryMode::bilayer, 0.3).pixels_y() == 128);
}
