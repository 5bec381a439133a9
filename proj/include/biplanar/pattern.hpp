#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/lattice.hpp"
#include "biplanar/linalg.hpp"

namespace biplanar {

enum class Plane { bottom, top };

enum class GeometryMode { open_single_layer, covered_single_layer, bilayer };

std::string to_string(GeometryMode mode);
// Accepts the long names plus the CLI spellings "open", "covered", "bilayer".
GeometryMode parse_mode(std::string_view name);

// Pixel weights in [0, 1]: the fraction of the drive amplitude applied to each
// pixel. Pixel (i, j) covers [i, i+1) * lx/nx by [j, j+1) * ly/ny and is stored
// at index j * nx + i.
struct ElectrodePattern {
    int nx = 0;
    int ny = 0;
    std::vector<double> w;
    Plane plane = Plane::bottom;

    static ElectrodePattern uniform(int nx, int ny, double value, Plane plane = Plane::bottom);

    double& at(int i, int j) { return w[static_cast<std::size_t>(j) * nx + i]; }
    double at(int i, int j) const { return w[static_cast<std::size_t>(j) * nx + i]; }
    std::size_t size() const { return w.size(); }

    // Throws DomainError unless nx, ny are powers of two >= 32 and all weights lie in [0, 1].
    void validate() const;
};

struct BilayerGeometry {
    UnitCell cell;
    GeometryMode mode = GeometryMode::bilayer;
    ElectrodePattern bottom;
    std::optional<ElectrodePattern> top;
    double H = 0.0;  // plane separation; unused in open mode
    Vec2 offset = Vec2::Zero();  // lateral displacement of the top plane

    bool bounded() const { return mode != GeometryMode::open_single_layer; }
    double pixel_width() const;

    // Validates invariants and reduces the offset modulo the cell.
    void normalize();
    void validate() const;
};

// Quantizes weights to the given bit depth (8 or 16).
ElectrodePattern quantize(const ElectrodePattern& p, int bits);

// ASCII portable graymap; the pixel row j = 0 (y = 0) is written last so the
// image has y pointing up.
void write_pgm(const ElectrodePattern& p, const std::filesystem::path& path, int bits = 8);
ElectrodePattern read_pgm(const std::filesystem::path& path, Plane plane = Plane::bottom);
std::string pgm_string(const ElectrodePattern& p, int bits = 8);
ElectrodePattern parse_pgm(std::string_view text, Plane plane = Plane::bottom);

// Geometry = header "<stem>.hdr" plus "<stem>.bottom.pgm" and, when present,
// "<stem>.top.pgm". Returns the header path.
std::filesystem::path save_geometry(const BilayerGeometry& g, const std::filesystem::path& stem,
                                    int bits = 16);
BilayerGeometry load_geometry(const std::filesystem::path& header);

}  // namespace biplanar
