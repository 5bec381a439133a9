#include "biplanar/pattern.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "biplanar/errors.hpp"

namespace biplanar {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string format_double(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

}  // namespace

std::string to_string(GeometryMode mode) {
    switch (mode) {
        case GeometryMode::open_single_layer: return "open_single_layer";
        case GeometryMode::covered_single_layer: return "covered_single_layer";
        case GeometryMode::bilayer: return "bilayer";
    }
    return "unknown";
}

GeometryMode parse_mode(std::string_view name) {
    if (name == "open" || name == "open_single_layer") return GeometryMode::open_single_layer;
    if (name == "covered" || name == "covered_single_layer")
        return GeometryMode::covered_single_layer;
    if (name == "bilayer") return GeometryMode::bilayer;
    throw DomainError("unknown geometry mode '" + std::string(name) + "'");
}

ElectrodePattern ElectrodePattern::uniform(int nx, int ny, double value, Plane plane) {
    ElectrodePattern p;
    p.nx = nx;
    p.ny = ny;
    p.plane = plane;
    p.w.assign(static_cast<std::size_t>(nx) * ny, value);
    return p;
}

void ElectrodePattern::validate() const {
    if (!is_power_of_two(nx) || !is_power_of_two(ny) || nx < 32 || ny < 32)
        throw DomainError("pattern dimensions must be powers of two >= 32");
    if (w.size() != static_cast<std::size_t>(nx) * ny)
        throw DomainError("pattern weight count does not match its dimensions");
    for (double v : w)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("pattern weights must lie in [0,1]");
}

double BilayerGeometry::pixel_width() const {
    return std::min(cell.lx / bottom.nx, cell.ly / bottom.ny);
}

void BilayerGeometry::normalize() {
    offset = wrap_into_cell(offset, cell.lx, cell.ly);
    // Offsets within rounding of a full period are exactly zero.
    if (offset.x() > cell.lx * (1.0 - 1e-14)) offset.x() = 0.0;
    if (offset.y() > cell.ly * (1.0 - 1e-14)) offset.y() = 0.0;
    validate();
}

void BilayerGeometry::validate() const {
    cell.validate();
    bottom.validate();
    if (top) {
        top->validate();
        if (top->nx != bottom.nx || top->ny != bottom.ny)
            throw DomainError("top and bottom patterns must share a resolution");
    }
    switch (mode) {
        case GeometryMode::bilayer:
            if (!top) throw DomainError("bilayer geometry requires a top pattern");
            if (!(H > 0.0)) throw DomainError("plane separation must be positive");
            break;
        case GeometryMode::covered_single_layer:
            if (top) throw DomainError("covered single layer has a grounded, unpatterned top plane");
            if (!(H > 0.0)) throw DomainError("plane separation must be positive");
            break;
        case GeometryMode::open_single_layer:
            if (top) throw DomainError("open single layer has no top plane");
            if (H != 0.0) throw DomainError("open single layer takes no plane separation");
            break;
    }
}

ElectrodePattern quantize(const ElectrodePattern& p, int bits) {
    const double maxval = bits == 16 ? 65535.0 : 255.0;
    ElectrodePattern q = p;
    for (double& v : q.w) v = std::round(std::clamp(v, 0.0, 1.0) * maxval) / maxval;
    return q;
}

std::string pgm_string(const ElectrodePattern& p, int bits) {
    if (bits != 8 && bits != 16) throw DomainError("PGM bit depth must be 8 or 16");
    const long maxval = bits == 16 ? 65535 : 255;
    std::ostringstream ss;
    ss << "P2\n" << p.nx << ' ' << p.ny << '\n' << maxval << '\n';
    for (int j = p.ny - 1; j >= 0; --j) {
        for (int i = 0; i < p.nx; ++i) {
            const long v = std::lround(std::clamp(p.at(i, j), 0.0, 1.0) * static_cast<double>(maxval));
            if (i) ss << ' ';
            ss << v;
        }
        ss << '\n';
    }
    return ss.str();
}

ElectrodePattern parse_pgm(std::string_view text, Plane plane) {
    std::size_t pos = 0;
    std::size_t line = 1;
    std::size_t line_start = 0;
    auto skip_space = [&] {
        while (pos < text.size()) {
            const char c = text[pos];
            if (c == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
            } else if (c == '\n') {
                ++pos;
                ++line;
                line_start = pos;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto next_token = [&]() -> std::string_view {
        skip_space();
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != '#')
            ++pos;
        if (start == pos) throw ParseError("unexpected end of PGM data", line, pos - line_start);
        return text.substr(start, pos - start);
    };
    auto next_int = [&]() -> long {
        const auto tok = next_token();
        long v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw ParseError("invalid integer '" + std::string(tok) + "' in PGM", line,
                             pos - line_start - tok.size());
        return v;
    };

    if (next_token() != "P2") throw ParseError("not an ASCII PGM (expected P2)", line, 0);
    const long nx = next_int();
    const long ny = next_int();
    const long maxval = next_int();
    if (nx <= 0 || ny <= 0 || nx > (1 << 15) || ny > (1 << 15))
        throw ParseError("invalid PGM dimensions", line, 0);
    if (maxval != 255 && maxval != 65535)
        throw ParseError("PGM maxval must be 255 or 65535", line, 0);
    ElectrodePattern p = ElectrodePattern::uniform(static_cast<int>(nx), static_cast<int>(ny), 0.0, plane);
    for (long j = ny - 1; j >= 0; --j) {
        for (long i = 0; i < nx; ++i) {
            const long v = next_int();
            if (v < 0 || v > maxval)
                throw ParseError("PGM sample out of range", line, pos - line_start);
            p.at(static_cast<int>(i), static_cast<int>(j)) = static_cast<double>(v) / static_cast<double>(maxval);
        }
    }
    skip_space();
    if (pos != text.size()) throw ParseError("trailing data after PGM samples", line, pos - line_start);
    return p;
}

void write_pgm(const ElectrodePattern& p, const std::filesystem::path& path, int bits) {
    write_file(path, pgm_string(p, bits));
}

ElectrodePattern read_pgm(const std::filesystem::path& path, Plane plane) {
    return parse_pgm(read_file(path), plane);
}

std::filesystem::path save_geometry(const BilayerGeometry& g, const std::filesystem::path& stem,
                                    int bits) {
    const std::filesystem::path header = stem.string() + ".hdr";
    const std::filesystem::path bottom = stem.string() + ".bottom.pgm";
    const std::filesystem::path top = stem.string() + ".top.pgm";
    std::ostringstream ss;
    ss << "lattice_kind = " << to_string(g.cell.kind) << '\n'
       << "d = " << format_double(g.cell.d) << '\n'
       << "L_x = " << format_double(g.cell.lx) << '\n'
       << "L_y = " << format_double(g.cell.ly) << '\n'
       << "H = " << format_double(g.H) << '\n'
       << "mode = " << to_string(g.mode) << '\n'
       << "offset_x = " << format_double(g.offset.x()) << '\n'
       << "offset_y = " << format_double(g.offset.y()) << '\n'
       << "bits = " << bits << '\n'
       << "bottom = " << bottom.filename().string() << '\n';
    if (g.top) ss << "top = " << top.filename().string() << '\n';
    write_file(header, ss.str());
    write_pgm(g.bottom, bottom, bits);
    if (g.top) write_pgm(*g.top, top, bits);
    return header;
}

BilayerGeometry load_geometry(const std::filesystem::path& header) {
    const std::string text = read_file(header);
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno, 0);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ParseError("missing header key '" + key + "'", lineno, 0);
        return it->second;
    };
    auto num = [&](const std::string& key) {
        try {
            return std::stod(need(key));
        } catch (const std::invalid_argument&) {
            throw ParseError("header key '" + key + "' is not a number", lineno, 0);
        }
    };
    BilayerGeometry g;
    g.cell = UnitCell::make(parse_lattice(need("lattice_kind")), num("d"));
    g.cell.lx = num("L_x");
    g.cell.ly = num("L_y");
    g.mode = parse_mode(need("mode"));
    g.H = num("H");
    g.offset = {num("offset_x"), num("offset_y")};
    const auto dir = header.parent_path();
    g.bottom = read_pgm(dir / need("bottom"), Plane::bottom);
    if (kv.count("top")) g.top = read_pgm(dir / kv.at("top"), Plane::top);
    g.validate();
    return g;
}

}  // namespace biplanar
