#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "biplanar/optimizer.hpp"
#include "biplanar/units.hpp"

namespace biplanar {

inline constexpr const char* kVersion = "biplanar 1.0.0";

// Plain "key = value" lines; '#' starts a comment. Lists are comma separated;
// h_over_d also accepts "log:a:b:n" and "lin:a:b:n".
struct ScenarioConfig {
    std::string ion = "Be9";
    double omega_tilde_MHz = 5.0;
    double omega_rf_MHz = 50.0;
    double d_um = 30.0;
    std::vector<LatticeKind> lattices{LatticeKind::square, LatticeKind::triangular, LatticeKind::honeycomb,
                                      LatticeKind::kagome};
    std::vector<GeometryMode> modes{GeometryMode::open_single_layer, GeometryMode::bilayer};
    std::vector<double> h_over_d;  // default 40 log-spaced points over [0.1, 2]
    double H_over_h = 2.0;
    int resolution = 64;
    std::filesystem::path output_dir = "out";
    unsigned random_seed = 20240229;
    int random_seeds = 3;
    // none | lattice | full (lattice point group, plus mirror z for bilayers)
    std::string symmetry = "none";
    // figure 8: sweep ranges in micrometres, "start:stop:steps" (log spaced)
    std::string coupling_h_um = "3:300:60";
    std::string coupling_d_um = "3:300:60";
    double u_max_V = 100.0;

    std::string source;  // verbatim text, echoed into outputs

    void validate() const;
    units::IonSpecies species() const;
    OptimizationProblem problem(LatticeKind kind, GeometryMode mode) const;
};

ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

std::vector<double> log_grid(double a, double b, int n);
// "a:b:n", log spaced
std::vector<double> parse_range(std::string_view spec);

std::string sha256_hex(std::string_view data);

// Output directory bookkeeping: every written file is hashed into
// manifest.txt together with the version string and the echoed config.
class OutputDir {
public:
    OutputDir(std::filesystem::path dir, const ScenarioConfig& cfg);
    void write(const std::string& name, const std::string& content);
    void finish();
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

struct ScenarioStatus {
    int points = 0;
    int failed = 0;
    std::vector<std::string> files;
    std::vector<std::string> errors;
};

struct LatticeSweep {
    LatticeKind kind = LatticeKind::square;
    GeometryMode mode = GeometryMode::bilayer;
    std::vector<SweepRow> rows;
};

// every (lattice, mode) of the config over its h/d grid
std::vector<LatticeSweep> run_sweeps(const ScenarioConfig& cfg);

std::string sweep_name(const LatticeSweep& s);  // e.g. "square_bilayer"

// kappa and eta, one CSV per (lattice, mode)
ScenarioStatus figure2_3(const std::vector<LatticeSweep>& sweeps, OutputDir& out);

struct VoltageRow {
    double h_over_d = 0.0;
    double h_um = 0.0;
    double u_rf = 0.0;      // V
    double depth_meV = 0.0;
    bool ok = false;
};

std::vector<VoltageRow> voltage_rows(const ScenarioConfig& cfg, const std::vector<SweepRow>& sweep);
// columns h_over_d,h_um,u_rf_V,depth_meV,below_limit,nearest_limit
std::string voltage_csv(const std::vector<VoltageRow>& rows, double u_max);
// grid index minimizing |U - u_max| over valid rows, -1 if none
int nearest_voltage(const std::vector<VoltageRow>& rows, double u_max);

// U_rf(h) and depth(h) from the same sweeps
ScenarioStatus figure4_5(const ScenarioConfig& cfg, const std::vector<LatticeSweep>& sweeps, OutputDir& out);

// both coupling panels
ScenarioStatus figure8(const ScenarioConfig& cfg, OutputDir& out);

// All figures into cfg.output_dir; failed points are counted, not thrown.
ScenarioStatus run_figures(const ScenarioConfig& cfg);

// 3x3 tiling, RF shaded by weight, ground white
std::string render_pattern(const ElectrodePattern& p, double lx, double ly, double cell_px = 200.0);
std::string render_pattern(const std::filesystem::path& header_or_pgm);

}  // namespace biplanar
