#include "biplanar/scenario.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "biplanar/coupling.hpp"
#include "biplanar/errors.hpp"

namespace biplanar {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DomainError("not a number: '" + s + "'");
    return v;
}

long to_long(const std::string& s) {
    long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DomainError("not an integer: '" + s + "'");
    return v;
}

std::vector<double> parse_grid(const std::string& v) {
    if (v.rfind("log:", 0) == 0 || v.rfind("lin:", 0) == 0) {
        const auto parts = split(std::string_view(v).substr(4), ':');
        if (parts.size() != 3) throw DomainError("grid needs a:b:n");
        const double a = to_double(parts[0]), b = to_double(parts[1]);
        const long n = to_long(parts[2]);
        if (v[1] == 'o') return log_grid(a, b, static_cast<int>(n));
        if (n < 1 || !(a > 0.0) || !(b >= a)) throw DomainError("bad linear grid");
        std::vector<double> g;
        for (long i = 0; i < n; ++i) g.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1));
        return g;
    }
    std::vector<double> g;
    for (const auto& p : split(v, ',')) g.push_back(to_double(p));
    return g;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

std::vector<double> log_grid(double a, double b, int n) {
    if (n < 1 || !(a > 0.0) || !(b >= a)) throw DomainError("log grid needs 0 < a <= b and n >= 1");
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(n == 1 ? a : a * std::pow(b / a, static_cast<double>(i) / (n - 1)));
    g.back() = b;
    return g;
}

std::vector<double> parse_range(std::string_view spec) {
    const auto parts = split(spec, ':');
    if (parts.size() != 3) throw DomainError("range must be start:stop:steps");
    return log_grid(to_double(parts[0]), to_double(parts[1]), static_cast<int>(to_long(parts[2])));
}

void ScenarioConfig::validate() const {
    species();
    if (!(omega_tilde_MHz > 0.0) || !(omega_rf_MHz > omega_tilde_MHz))
        throw DomainError("need 0 < omega_tilde_MHz < omega_rf_MHz");
    if (!(d_um > 0.0)) throw DomainError("d_um must be positive");
    if (lattices.empty() || modes.empty()) throw DomainError("empty lattice or mode list");
    if (h_over_d.empty()) throw DomainError("empty h_over_d grid");
    for (double h : h_over_d)
        if (!(h > 0.0)) throw DomainError("h_over_d values must be positive");
    if (!(H_over_h > 1.0)) throw DomainError("H_over_h must exceed 1");
    if (resolution < 32 || (resolution & (resolution - 1)) != 0)
        throw DomainError("resolution must be a power of two >= 32");
    if (random_seeds < 0) throw DomainError("random_seeds must be >= 0");
    if (symmetry != "none" && symmetry != "lattice" && symmetry != "full")
        throw DomainError("symmetry must be none, lattice or full");
    parse_range(coupling_h_um);
    parse_range(coupling_d_um);
    if (!(u_max_V > 0.0)) throw DomainError("u_max_V must be positive");
    if (output_dir.empty()) throw DomainError("empty output_dir");
}

units::IonSpecies ScenarioConfig::species() const { return units::parse_ion(ion); }

OptimizationProblem ScenarioConfig::problem(LatticeKind kind, GeometryMode mode) const {
    OptimizationProblem p;
    p.cell = UnitCell::make(kind, 1.0);
    p.mode = mode;
    p.h = h_over_d.front();
    p.H = mode == GeometryMode::open_single_layer ? 0.0 : H_over_h * p.h;
    p.resolution = resolution;
    p.random_seeds = random_seeds;
    p.rng_seed = random_seed;
    p.symmetry.lattice_point_group = symmetry != "none";
    p.symmetry.mirror_z = symmetry == "full" && mode == GeometryMode::bilayer && H_over_h == 2.0;
    return p;
}

ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig c;
    c.source = std::string(text);
    c.h_over_d = log_grid(0.1, 2.0, 40);
    std::set<std::string> seen;
    std::size_t lineno = 0, start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(start, end - start);
        ++lineno;
        start = end + 1;
        const auto hash = raw.find('#');
        const std::string line = trim(raw.substr(0, hash));
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno, 0);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string val = trim(std::string_view(line).substr(eq + 1));
        const std::size_t voff = raw.find(val.empty() ? "=" : val);
        if (!seen.insert(key).second) throw ParseError("duplicate key '" + key + "'", lineno, 0);
        try {
            if (key == "ion") c.ion = val;
            else if (key == "omega_tilde_MHz") c.omega_tilde_MHz = to_double(val);
            else if (key == "omega_rf_MHz") c.omega_rf_MHz = to_double(val);
            else if (key == "d_um") c.d_um = to_double(val);
            else if (key == "lattices") {
                c.lattices.clear();
                for (const auto& s : split(val, ',')) c.lattices.push_back(parse_lattice(s));
            } else if (key == "modes") {
                c.modes.clear();
                for (const auto& s : split(val, ',')) c.modes.push_back(parse_mode(s));
            } else if (key == "h_over_d") c.h_over_d = parse_grid(val);
            else if (key == "H_over_h") c.H_over_h = to_double(val);
            else if (key == "resolution") c.resolution = static_cast<int>(to_long(val));
            else if (key == "output_dir") c.output_dir = val;
            else if (key == "random_seed") c.random_seed = static_cast<unsigned>(to_long(val));
            else if (key == "random_seeds") c.random_seeds = static_cast<int>(to_long(val));
            else if (key == "symmetry") c.symmetry = val;
            else if (key == "coupling_h_um") c.coupling_h_um = val;
            else if (key == "coupling_d_um") c.coupling_d_um = val;
            else if (key == "u_max_V") c.u_max_V = to_double(val);
            else throw ParseError("unknown key '" + key + "'", lineno, 0);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(key + ": " + e.what(), lineno, voff == std::string_view::npos ? 0 : voff);
        }
        if (end == text.size()) break;
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

OutputDir::OutputDir(std::filesystem::path dir, const ScenarioConfig& cfg) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    write("config.txt", cfg.source);
}

void OutputDir::write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    auto it = std::find_if(files_.begin(), files_.end(), [&](const auto& f) { return f.first == name; });
    if (it != files_.end()) it->second = sha256_hex(content);
    else files_.emplace_back(name, sha256_hex(content));
}

void OutputDir::finish() {
    auto files = files_;
    std::sort(files.begin(), files.end());
    std::ostringstream m;
    m << "version = " << kVersion << '\n';
    for (const auto& [name, hash] : files) m << hash << "  " << name << '\n';
    std::ofstream out(dir_ / "manifest.txt", std::ios::binary);
    out << m.str();
    if (!out) throw std::runtime_error("cannot write manifest");
}

std::string sweep_name(const LatticeSweep& s) {
    const char* m = s.mode == GeometryMode::open_single_layer ? "open"
                    : s.mode == GeometryMode::bilayer         ? "bilayer"
                                                              : "covered";
    return to_string(s.kind) + "_" + m;
}

std::vector<LatticeSweep> run_sweeps(const ScenarioConfig& cfg) {
    std::vector<LatticeSweep> out;
    for (auto kind : cfg.lattices)
        for (auto mode : cfg.modes) {
            LatticeSweep s{kind, mode, {}};
            s.rows = sweep_lattice(cfg.problem(kind, mode), cfg.h_over_d);
            out.push_back(std::move(s));
        }
    return out;
}

namespace {

void count(ScenarioStatus& st, const LatticeSweep& s) {
    for (const auto& r : s.rows) {
        ++st.points;
        if (!r.error.empty()) {
            ++st.failed;
            st.errors.push_back(sweep_name(s) + " h/d " + fmt("%.6g", r.h_over_d) + ": " + r.error);
        }
    }
}

}  // namespace

ScenarioStatus figure2_3(const std::vector<LatticeSweep>& sweeps, OutputDir& out) {
    ScenarioStatus st;
    for (const auto& s : sweeps) {
        const std::string name = "kappa_eta_" + sweep_name(s) + ".csv";
        out.write(name, sweep_csv(s.rows));
        st.files.push_back(name);
        count(st, s);
    }
    return st;
}

std::vector<VoltageRow> voltage_rows(const ScenarioConfig& cfg, const std::vector<SweepRow>& sweep) {
    const auto ion = cfg.species();
    const double two_pi = 2.0 * std::numbers::pi;
    const double wt = two_pi * cfg.omega_tilde_MHz * 1e6, wrf = two_pi * cfg.omega_rf_MHz * 1e6;
    std::vector<VoltageRow> rows;
    for (const auto& r : sweep) {
        VoltageRow v;
        v.h_over_d = r.h_over_d;
        v.h_um = r.h_over_d * cfg.d_um;
        if (r.error.empty() && r.kappa > 0.0) {
            const double h = v.h_um * 1e-6;
            v.u_rf = units::urf_from_kappa(r.kappa, ion.mass, wt, wrf, h, ion.charge);
            v.depth_meV = units::joules_to_mev(units::depth_from_eta(r.eta, ion.mass, wrf, h, v.u_rf, ion.charge));
            v.ok = true;
        }
        rows.push_back(v);
    }
    return rows;
}

int nearest_voltage(const std::vector<VoltageRow>& rows, double u_max) {
    int best = -1;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].ok && (best < 0 || std::abs(rows[i].u_rf - u_max) < std::abs(rows[best].u_rf - u_max)))
            best = static_cast<int>(i);
    return best;
}

std::string voltage_csv(const std::vector<VoltageRow>& rows, double u_max) {
    std::ostringstream os;
    os << "h_over_d,h_um,u_rf_V,depth_meV,below_limit,nearest_limit\n";
    const int near = nearest_voltage(rows, u_max);
    char buf[200];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (!r.ok)
            std::snprintf(buf, sizeof buf, "%.6g,%.6g,nan,nan,0,0\n", r.h_over_d, r.h_um);
        else
            std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.10g,%.10g,%d,%d\n", r.h_over_d, r.h_um, r.u_rf, r.depth_meV,
                          r.u_rf <= u_max ? 1 : 0, static_cast<int>(i) == near ? 1 : 0);
        os << buf;
    }
    return os.str();
}

ScenarioStatus figure4_5(const ScenarioConfig& cfg, const std::vector<LatticeSweep>& sweeps, OutputDir& out) {
    ScenarioStatus st;
    for (const auto& s : sweeps) {
        const std::string name = "voltage_depth_" + sweep_name(s) + ".csv";
        out.write(name, voltage_csv(voltage_rows(cfg, s.rows), cfg.u_max_V));
        st.files.push_back(name);
        count(st, s);
    }
    return st;
}

ScenarioStatus figure8(const ScenarioConfig& cfg, OutputDir& out) {
    ScenarioStatus st;
    const auto ion = cfg.species();
    const double omega = 2.0 * std::numbers::pi * cfg.omega_tilde_MHz * 1e6;
    auto metres = [](std::vector<double> v) {
        for (double& x : v) x *= 1e-6;
        return v;
    };
    CouplingSpec fixed;
    fixed.d = cfg.d_um * 1e-6;
    fixed.h = cfg.d_um * 1e-6;
    out.write("coupling_fixed_d.csv",
              coupling_csv(coupling_curves(fixed, SweepVariable::h, metres(parse_range(cfg.coupling_h_um)), ion, omega)));
    out.write("coupling_fixed_h.csv",
              coupling_csv(coupling_curves(fixed, SweepVariable::d, metres(parse_range(cfg.coupling_d_um)), ion, omega)));
    st.files = {"coupling_fixed_d.csv", "coupling_fixed_h.csv"};
    return st;
}

namespace {

const char* kColumns =
    "kappa_eta_<lattice>_<mode>.csv: h_over_d, kappa (h^2 |det H|^(1/3)), eta (h^2 depth), converged (0/1)\n"
    "voltage_depth_<lattice>_<mode>.csv: h_over_d, h_um, u_rf_V (drive amplitude for the target mean secular\n"
    "  frequency), depth_meV, below_limit (u_rf_V <= u_max_V), nearest_limit (grid point closest to u_max_V)\n"
    "coupling_fixed_d.csv: ion height sweep at d = d_um; coupling_fixed_h.csv: spacing sweep at h = d_um\n"
    "  columns sweep_value_um, omega_ex_{fs,se,bl}_rad_s, omega_ex_{fs,se,bl}_Hz\n"
    "Failed points print nan.\n";

}  // namespace

ScenarioStatus run_figures(const ScenarioConfig& cfg) {
    cfg.validate();
    OutputDir out(cfg.output_dir, cfg);
    const auto sweeps = run_sweeps(cfg);
    ScenarioStatus st = figure2_3(sweeps, out);
    auto st45 = figure4_5(cfg, sweeps, out);
    auto st8 = figure8(cfg, out);
    st.files.insert(st.files.end(), st45.files.begin(), st45.files.end());
    st.files.insert(st.files.end(), st8.files.begin(), st8.files.end());
    out.write("columns.txt", kColumns);
    out.finish();
    return st;
}

std::string render_pattern(const ElectrodePattern& p, double lx, double ly, double cell_px) {
    if (p.nx <= 0 || p.ny <= 0 || p.w.size() != static_cast<std::size_t>(p.nx) * p.ny)
        throw DomainError("render_pattern: malformed pattern");
    if (!(lx > 0.0) || !(ly > 0.0) || !(cell_px > 0.0)) throw DomainError("render_pattern: bad cell size");
    const double cw = cell_px, ch = cell_px * ly / lx;
    const double pw = cw / p.nx, ph = ch / p.ny;
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\""
       << fmt("%.6g", 3 * cw) << "\" height=\"" << fmt("%.6g", 3 * ch) << "\" shape-rendering=\"crispEdges\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n<defs>\n<g id=\"cell\">\n";
    for (int j = 0; j < p.ny; ++j) {
        const double y = (p.ny - 1 - j) * ph;  // y up
        int i = 0;
        while (i < p.nx) {
            const int level = static_cast<int>(std::lround(std::clamp(p.at(i, j), 0.0, 1.0) * 255.0));
            int k = i + 1;
            while (k < p.nx && std::lround(std::clamp(p.at(k, j), 0.0, 1.0) * 255.0) == level) ++k;
            if (level > 0) {
                const int g = 255 - (level * 160 + 127) / 255;
                char col[8];
                std::snprintf(col, sizeof col, "#%02x%02x%02x", g, g, g);
                os << "<rect x=\"" << fmt("%.6g", i * pw) << "\" y=\"" << fmt("%.6g", y) << "\" width=\""
                   << fmt("%.6g", (k - i) * pw) << "\" height=\"" << fmt("%.6g", ph) << "\" fill=\"" << col << "\"/>\n";
            }
            i = k;
        }
    }
    os << "</g>\n</defs>\n";
    for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a)
            os << "<use xlink:href=\"#cell\" x=\"" << fmt("%.6g", a * cw) << "\" y=\"" << fmt("%.6g", b * ch)
               << "\"/>\n";
    os << "</svg>\n";
    return os.str();
}

std::string render_pattern(const std::filesystem::path& path) {
    if (path.extension() == ".hdr") {
        const BilayerGeometry g = load_geometry(path);
        return render_pattern(g.bottom, g.cell.lx, g.cell.ly);
    }
    const ElectrodePattern p = read_pgm(path);
    return render_pattern(p, p.nx, p.ny);
}

}  // namespace biplanar
