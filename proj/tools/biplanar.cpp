#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "biplanar/axisym.hpp"
#include "biplanar/coupling.hpp"
#include "biplanar/errors.hpp"
#include "biplanar/misalign.hpp"
#include "biplanar/optimizer.hpp"
#include "biplanar/pseudo.hpp"
#include "biplanar/scenario.hpp"

using namespace biplanar;

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size() && item.find_first_not_of(" \t", pos) != std::string::npos)
            throw DomainError("bad number '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw DomainError("empty list");
    return out;
}

std::string g10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string result_text(const OptimizationProblem& p, const OptimizationResult& r) {
    std::ostringstream os;
    os << "version = " << kVersion << '\n'
       << "lattice = " << to_string(p.cell.kind) << '\n'
       << "mode = " << to_string(p.mode) << '\n'
       << "h_over_d = " << g10(p.h / p.cell.d) << '\n'
       << "H_over_h = " << g10(p.mode == GeometryMode::open_single_layer ? 0.0 : p.plane_separation() / p.h) << '\n'
       << "resolution = " << p.resolution << '\n'
       << "kappa = " << g10(r.kappa) << '\n';
    for (std::size_t i = 0; i < r.site_kappa.size(); ++i) os << "site_kappa_" << i << " = " << g10(r.site_kappa[i]) << '\n';
    os << "converged = " << (r.converged ? 1 : 0) << '\n'
       << "damped = " << (r.damped ? 1 : 0) << '\n'
       << "iterations = " << r.iterations << '\n'
       << "seed_index = " << r.seed_index << '\n'
       << "max_gradient = " << g10(r.max_gradient) << '\n'
       << "max_hxy = " << g10(r.max_hxy) << '\n'
       << "fractional_share = " << g10(r.fractional_share) << '\n';
    return os.str();
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else write_text(path, text);
}

std::string hd_tag(double hd) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "h%.4g", hd);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilayer ion-trap electrode design"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    auto load_cfg = [&]() {
        ScenarioConfig c = config_path.empty() ? parse_config("") : load_config(config_path);
        return c;
    };

    // optimize
    auto* opt = app.add_subcommand("optimize", "optimize a periodic electrode pattern");
    std::string lattice = "square", mode = "bilayer", hlist = "0.5", out_dir = "out", symmetry;
    double H_over_h = 2.0;
    int resolution = 0;
    opt->add_option("--config", config_path);
    opt->add_option("--lattice", lattice)->check(CLI::IsMember({"square", "triangular", "honeycomb", "kagome"}));
    opt->add_option("--mode", mode)->check(CLI::IsMember({"open", "covered", "bilayer"}));
    opt->add_option("--h-over-d", hlist, "float or comma list");
    opt->add_option("--H-over-h", H_over_h)->default_val(2.0);
    opt->add_option("--resolution", resolution);
    opt->add_option("--symmetry", symmetry)->check(CLI::IsMember({"none", "lattice", "full"}));
    opt->add_option("--out", out_dir);

    // characterize
    auto* chr = app.add_subcommand("characterize", "characterize a saved geometry");
    std::string header;
    double chr_hd = 0.0;
    int site_index = 0;
    chr->add_option("--config", config_path);
    chr->add_option("--geometry", header, "geometry header (.hdr)")->required();
    chr->add_option("--h-over-d", chr_hd)->required();
    chr->add_option("--site", site_index);

    // single-trap
    auto* st = app.add_subcommand("single-trap", "axisymmetric single-trap optima");
    std::string st_kind = "all";
    st->add_option("--config", config_path);
    st->add_option("--kind", st_kind)->check(CLI::IsMember({"all", "open-ring", "double-disc", "covered-ring"}));

    // coupling
    auto* cp = app.add_subcommand("coupling", "exchange-coupling curves");
    std::vector<std::string> fix{"d", "30"};
    std::string sweep = "3:300:60", ion_name, cp_kind = "all", cp_out;
    double omega_MHz = 0.0;
    cp->add_option("--config", config_path);
    cp->add_option("--kind", cp_kind)->check(CLI::IsMember({"all", "free", "single", "bilayer"}));
    cp->add_option("--fix", fix, "d|h <um>")->expected(2);
    cp->add_option("--sweep", sweep, "start:stop:steps in um");
    cp->add_option("--ion", ion_name);
    cp->add_option("--omega", omega_MHz, "secular frequency in MHz");
    cp->add_option("--out", cp_out);

    // misalign
    auto* ma = app.add_subcommand("misalign", "square bilayer misalignment scan");
    std::string ma_list = "0.25,0.5,1.0", ma_out;
    double max_delta = 0.7;
    int steps = 35, directions = 9;
    ma->add_option("--config", config_path);
    ma->add_option("--h-over-d", ma_list);
    ma->add_option("--max-delta", max_delta, "cells");
    ma->add_option("--steps", steps);
    ma->add_option("--directions", directions);
    ma->add_option("--resolution", resolution);
    ma->add_option("--out", ma_out);

    // figures
    auto* fg = app.add_subcommand("figures", "regenerate all figure CSVs from a config");
    fg->add_option("--config", config_path)->required();

    // render
    auto* rd = app.add_subcommand("render", "SVG of a saved pattern tiled 3x3");
    std::string rd_in, rd_out;
    rd->add_option("--pattern", rd_in, ".hdr or .pgm")->required();
    rd->add_option("--out", rd_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*opt) {
            ScenarioConfig cfg = load_cfg();
            if (resolution > 0) cfg.resolution = resolution;
            if (!symmetry.empty()) cfg.symmetry = symmetry;
            cfg.H_over_h = H_over_h;
            cfg.h_over_d = parse_list(hlist);
            cfg.validate();
            const OptimizationProblem tmpl = cfg.problem(parse_lattice(lattice), parse_mode(mode));
            const auto rows = sweep_lattice(tmpl, cfg.h_over_d, true);
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir(out_dir);
            int failed = 0;
            for (const auto& r : rows) {
                const std::string stem = lattice + "_" + mode + "_" + hd_tag(r.h_over_d);
                if (!r.error.empty() || !r.result) {
                    ++failed;
                    std::cerr << "h/d " << r.h_over_d << ": " << r.error << '\n';
                    continue;
                }
                OptimizationProblem p = tmpl;
                p.h = r.h_over_d * p.cell.d;
                p.H = tmpl.mode == GeometryMode::open_single_layer ? 0.0 : H_over_h * p.h;
                save_geometry(r.result->geometry, dir / stem);
                write_text(dir / (stem + ".result.txt"), result_text(p, *r.result) + "eta = " + g10(r.eta) + '\n');
            }
            write_text(dir / "sweep.csv", sweep_csv(rows));
            std::cout << sweep_csv(rows);
            if (failed == static_cast<int>(rows.size())) return 1;
            return failed ? 2 : 0;
        }
        if (*chr) {
            const ScenarioConfig cfg = load_cfg();
            const BilayerGeometry g = load_geometry(header);
            const FieldEngine eng(g, characterization_engine_options(g));
            CharacterizeOptions co;
            co.ion = cfg.species();
            co.omega_rf = 2.0 * std::numbers::pi * cfg.omega_rf_MHz * 1e6;
            co.metres_per_unit = cfg.d_um * 1e-6 / g.cell.d;
            const double h = chr_hd * g.cell.d;
            const auto c = characterize(eng, static_cast<std::size_t>(site_index), h, co);
            const auto& s = c.site;
            std::cout << "site = " << g10(s.position.x()) << ' ' << g10(s.position.y()) << ' ' << g10(s.position.z())
                      << '\n'
                      << "eigenvalues = " << g10(s.eigenvalues[0]) << ' ' << g10(s.eigenvalues[1]) << ' '
                      << g10(s.eigenvalues[2]) << '\n'
                      << "kappa = " << g10(c.kappa) << '\n'
                      << "eta = " << g10(c.eta) << '\n'
                      << "escape = " << static_cast<int>(c.depth.route) << '\n'
                      << "c3_z = " << g10(c.anharm.c3_z) << '\n'
                      << "c4_z = " << g10(c.anharm.c4_z) << '\n'
                      << "c4_inplane = " << g10(c.anharm.c4_inplane) << '\n';
            const double wt = 2.0 * std::numbers::pi * cfg.omega_tilde_MHz * 1e6;
            const double u = solve_urf(s, co.ion, co.omega_rf, wt, co.metres_per_unit);
            std::cout << "u_rf_V = " << g10(u) << '\n';
            return 0;
        }
        if (*st) {
            for (const char* k : {"open-ring", "double-disc", "covered-ring"}) {
                if (st_kind != "all" && st_kind != k) continue;
                std::cout << axisym::report(axisym::optimize_single_trap(axisym::parse_single_trap(k))) << '\n';
            }
            return 0;
        }
        if (*cp) {
            const ScenarioConfig cfg = load_cfg();
            const auto ion = ion_name.empty() ? cfg.species() : units::parse_ion(ion_name);
            const double omega = 2.0 * std::numbers::pi * (omega_MHz > 0.0 ? omega_MHz : cfg.omega_tilde_MHz) * 1e6;
            if (fix[0] != "d" && fix[0] != "h") throw DomainError("--fix takes d or h");
            CouplingSpec fixed;
            const double fv = std::stod(fix[1]) * 1e-6;
            fixed.d = fv;
            fixed.h = fv;
            auto values = parse_range(sweep);
            for (double& v : values) v *= 1e-6;
            const auto rows =
                coupling_curves(fixed, fix[0] == "d" ? SweepVariable::h : SweepVariable::d, values, ion, omega);
            if (cp_kind == "all") {
                emit(cp_out, coupling_csv(rows));
            } else {
                std::ostringstream os;
                os << "sweep_value_um,omega_ex_rad_s,omega_ex_Hz\n";
                for (const auto& r : rows) {
                    const double w = cp_kind == "free" ? r.omega_fs : cp_kind == "single" ? r.omega_se : r.omega_bl;
                    os << g10(r.sweep_value * 1e6) << ',' << g10(w) << ',' << g10(w / (2.0 * std::numbers::pi)) << '\n';
                }
                emit(cp_out, os.str());
            }
            return 0;
        }
        if (*ma) {
            ScenarioConfig cfg = load_cfg();
            if (resolution > 0) cfg.resolution = resolution;
            if (steps < 1 || !(max_delta > 0.0)) throw DomainError("need steps >= 1 and max-delta > 0");
            std::vector<double> mags;
            for (int i = 0; i <= steps; ++i) mags.push_back(max_delta * i / steps);
            std::vector<MisalignmentScan> scans;
            int destroyed = 0;
            for (double hd : parse_list(ma_list)) {
                cfg.h_over_d = {hd};
                cfg.symmetry = "full";
                OptimizationProblem p = cfg.problem(LatticeKind::square, GeometryMode::bilayer);
                const auto r = optimize_pattern(p);
                scans.push_back(scan(r.geometry, p.h, mags, directions));
                destroyed += scans.back().destroyed;
            }
            emit(ma_out, misalignment_csv(scans));
            return destroyed ? 2 : 0;
        }
        if (*fg) {
            const ScenarioConfig cfg = load_config(config_path);
            const auto s = run_figures(cfg);
            for (const auto& e : s.errors) std::cerr << e << '\n';
            std::cout << "wrote " << s.files.size() << " files to " << cfg.output_dir.string() << ", " << s.failed
                      << " of " << s.points << " points failed\n";
            if (s.points > 0 && s.failed == s.points) return 1;
            return s.failed ? 2 : 0;
        }
        if (*rd) {
            emit(rd_out, render_pattern(std::filesystem::path(rd_in)));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
