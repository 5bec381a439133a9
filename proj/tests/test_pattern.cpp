#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "biplanar/errors.hpp"
#include "biplanar/pattern.hpp"

using namespace biplanar;

namespace {

ElectrodePattern random_pattern(int nx, int ny, std::uint64_t seed, Plane plane = Plane::bottom) {
    ElectrodePattern p = ElectrodePattern::uniform(nx, ny, 0.0, plane);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& w : p.w) w = u(rng);
    return p;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "biplanar_test_pattern";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("lattice cells") {
    for (LatticeKind k : {LatticeKind::square, LatticeKind::triangular, LatticeKind::honeycomb, LatticeKind::kagome}) {
        const UnitCell c = UnitCell::make(k, 2.0);
        CHECK_NOTHROW(c.validate());
        CHECK(parse_lattice(to_string(k)) == k);
        // Every site has its nearest neighbour at distance d.
        for (std::size_t i = 0; i < c.site_count(); ++i) {
            double best = 1e9;
            for (std::size_t j = 0; j < c.site_count(); ++j) {
                for (int a = -1; a <= 1; ++a)
                    for (int b = -1; b <= 1; ++b) {
                        const Vec2 dv = c.site_position(j) + Vec2(a * c.lx, b * c.ly) - c.site_position(i);
                        if (dv.norm() > 1e-12) best = std::min(best, dv.norm());
                    }
            }
            CHECK(best == doctest::Approx(2.0).epsilon(1e-12));
        }
    }
    CHECK(UnitCell::make(LatticeKind::kagome, 1.0).site_count() == 6);
    CHECK_THROWS(parse_lattice("hexagonal-ish"));
}

TEST_CASE("pattern validation") {
    CHECK_THROWS_AS(ElectrodePattern::uniform(48, 32, 0.0).validate(), DomainError);
    CHECK_THROWS_AS(ElectrodePattern::uniform(16, 16, 0.0).validate(), DomainError);
    ElectrodePattern p = ElectrodePattern::uniform(32, 32, 0.5);
    CHECK_NOTHROW(p.validate());
    p.at(3, 4) = 1.5;
    CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("geometry mode rules and offset wrapping") {
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::square, 1.0);
    g.mode = GeometryMode::bilayer;
    g.bottom = ElectrodePattern::uniform(32, 32, 1.0);
    g.H = 1.0;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g.top = ElectrodePattern::uniform(32, 32, 1.0, Plane::top);
    g.offset = Vec2(2.25, -0.5);
    g.normalize();
    CHECK(g.offset.x() == doctest::Approx(0.25));
    CHECK(g.offset.y() == doctest::Approx(0.5));
    g.offset = Vec2(1.0, -3.0);
    g.normalize();
    CHECK(g.offset.x() == 0.0);
    CHECK(g.offset.y() == 0.0);
    g.mode = GeometryMode::open_single_layer;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g.top.reset();
    CHECK_THROWS_AS(g.validate(), DomainError);
    g.H = 0.0;
    CHECK_NOTHROW(g.validate());
    CHECK(parse_mode("covered") == GeometryMode::covered_single_layer);
}

TEST_CASE("8-bit PGM round trip is bit exact") {
    const ElectrodePattern q = quantize(random_pattern(32, 64, 1), 8);
    const ElectrodePattern back = parse_pgm(pgm_string(q, 8));
    CHECK(back.nx == 32);
    CHECK(back.ny == 64);
    CHECK(back.w == q.w);
    const ElectrodePattern q16 = quantize(random_pattern(64, 32, 2), 16);
    CHECK(parse_pgm(pgm_string(q16, 16)).w == q16.w);
    const auto path = scratch("rt.pgm");
    write_pgm(q, path);
    CHECK(read_pgm(path).w == q.w);
}

TEST_CASE("PGM orientation and comments") {
    ElectrodePattern p = ElectrodePattern::uniform(32, 32, 0.0);
    p.at(0, 0) = 1.0;
    const std::string s = pgm_string(p);
    // Row y = 0 is the last raster line.
    CHECK(s.substr(s.size() - 200).find("255") != std::string::npos);
    std::string commented = "P2\n# made by hand\n32 32\n255\n" + s.substr(s.find("255\n") + 4);
    CHECK(parse_pgm(commented).w == p.w);
}

TEST_CASE("malformed PGM reports line and offset") {
    try {
        parse_pgm("P2\n32 32\n255\n0 0 x 0\n");
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(parse_pgm("P5\n"), ParseError);
    CHECK_THROWS_AS(parse_pgm("P2\n32 32\n100\n"), ParseError);
    CHECK_THROWS_AS(parse_pgm("P2\n32 32\n255\n1 2 3\n"), ParseError);
}

TEST_CASE("geometry save and load") {
    BilayerGeometry g;
    g.cell = UnitCell::make(LatticeKind::honeycomb, 1.5);
    g.mode = GeometryMode::bilayer;
    g.H = 2.2;
    g.bottom = quantize(random_pattern(32, 64, 3), 16);
    g.top = quantize(random_pattern(32, 64, 4, Plane::top), 16);
    g.offset = Vec2(0.125, 0.3);
    g.normalize();
    const auto hdr = save_geometry(g, scratch("geom"));
    const BilayerGeometry r = load_geometry(hdr);
    CHECK(r.cell.kind == LatticeKind::honeycomb);
    CHECK(r.cell.d == 1.5);
    CHECK(r.cell.lx == g.cell.lx);
    CHECK(r.H == 2.2);
    CHECK(r.offset == g.offset);
    CHECK(r.bottom.w == g.bottom.w);
    CHECK(r.top->w == g.top->w);
    CHECK(r.top->plane == Plane::top);
}
