#include "biplanar/pseudo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

#include "biplanar/errors.hpp"
#include "biplanar/parallel.hpp"

namespace biplanar {

namespace {

double margin_of(const FieldEngine& e, double pixels) { return pixels * e.geometry().pixel_width(); }

bool inside(const FieldEngine& e, const Vec3& r, double margin) {
    if (r.z() < margin) return false;
    return !e.geometry().bounded() || r.z() <= e.geometry().H - margin;
}

Vec3 wrapped(const FieldEngine& e, const Vec3& r) {
    const Vec2 w = wrap_into_cell(r.head<2>(), e.geometry().cell.lx, e.geometry().cell.ly);
    return {w.x(), w.y(), r.z()};
}

double periodic_distance3(const FieldEngine& e, const Vec3& a, const Vec3& b) {
    const double dl = periodic_distance(a.head<2>(), b.head<2>(), e.geometry().cell.lx, e.geometry().cell.ly);
    return std::hypot(dl, a.z() - b.z());
}

Vec3 grad_pseudo(const FieldEval& f) { return 2.0 * f.hessian * f.grad; }

}  // namespace

TrapSite find_rf_null(const FieldEngine& engine, const Vec3& guess) {
    const double d = engine.geometry().cell.d;
    const double margin = engine.margin();
    if (!inside(engine, guess, margin)) throw NoNullFound("RF null search started outside the slab");
    const double max_step = 0.1 * d;
    Vec3 r = guess;
    FieldEval f = engine.evaluate(r);
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        const double gn = f.grad.norm();
        // Relative to the local curvature: a position error below 1e-12 d.
        const double scale = d * f.hessian.norm();
        if (gn < 1e-12 * scale) {
            converged = true;
            break;
        }
        Eigen::FullPivLU<Mat3> lu(f.hessian);
        if (!lu.isInvertible() || std::abs(f.hessian.determinant()) < 1e-30 * std::pow(f.hessian.norm(), 3))
            throw NoNullFound("singular Hessian during RF null search");
        Vec3 step = -lu.solve(f.grad);
        if (step.norm() > max_step) step *= max_step / step.norm();
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Vec3 trial = r + step;
            if (inside(engine, trial, margin)) {
                const FieldEval ft = engine.evaluate(trial);
                if (ft.grad.norm() < gn) {
                    r = trial;
                    f = ft;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!improved) {
            // Stagnation at rounding level.
            converged = gn < 1e-9 * scale;
            break;
        }
    }
    if (!converged) throw NoNullFound("RF null search did not converge");
    TrapSite s;
    s.position = wrapped(engine, r);
    s.hessian = f.hessian;
    s.grad_norm = f.grad.norm();
    Eigen::SelfAdjointEigenSolver<Mat3> es(f.hessian);
    s.eigenvalues = es.eigenvalues();
    s.principal_axes = es.eigenvectors();
    const double lmax = s.eigenvalues.cwiseAbs().maxCoeff();
    s.degenerate = s.eigenvalues.cwiseAbs().minCoeff() < 1e-6 * lmax;
    return s;
}

double site_kappa(const TrapSite& site, double h) { return h * h * std::cbrt(std::abs(site.hessian.determinant())); }

Vec3 secular_frequencies(const TrapSite& site, const units::IonSpecies& ion, const units::DriveParams& drive,
                         double metres_per_unit) {
    ion.validate();
    if (!(drive.u_rf > 0.0) || !(drive.omega_rf > 0.0)) throw DomainError("secular_frequencies: drive must be positive");
    if (!(metres_per_unit > 0.0)) throw DomainError("secular_frequencies: length scale must be positive");
    Vec3 w;
    for (int i = 0; i < 3; ++i) {
        const double lam = std::abs(site.eigenvalues[i]) / (metres_per_unit * metres_per_unit);
        if (lam == 0.0) throw DegenerateTrap("zero curvature along a principal axis");
        w[i] = ion.charge * drive.u_rf * lam / (std::sqrt(2.0) * ion.mass * drive.omega_rf);
    }
    return w;
}

double mean_secular_frequency(const Vec3& w) { return std::cbrt(w[0] * w[1] * w[2]); }

double solve_urf(const TrapSite& site, const units::IonSpecies& ion, double omega_rf, double target, double metres_per_unit) {
    ion.validate();
    if (!(omega_rf > 0.0) || !(target > 0.0)) throw DomainError("solve_urf: frequencies must be positive");
    const double det = std::abs(site.hessian.determinant());
    if (det == 0.0 || site.degenerate) throw DegenerateTrap("solve_urf: degenerate trap");
    const double curv = std::cbrt(det) / (metres_per_unit * metres_per_unit);
    return std::sqrt(2.0) * ion.mass * target * omega_rf / (ion.charge * curv);
}

EngineOptions characterization_engine_options(const BilayerGeometry& g, double margin_pixels) {
    EngineOptions o;
    o.tol = 1e-10;
    o.z_min = margin_pixels * g.pixel_width();
    return o;
}

PseudoGrid sample_pseudo(const FieldEngine& engine, double h, const DepthOptions& opt) {
    if (opt.nx < 4 || opt.ny < 4 || opt.nz < 3) throw DomainError("depth grid too small");
    const BilayerGeometry& g = engine.geometry();
    PseudoGrid grid;
    grid.nx = opt.nx;
    grid.ny = opt.ny;
    grid.nz = opt.nz;
    grid.lx = g.cell.lx;
    grid.ly = g.cell.ly;
    grid.z0 = margin_of(engine, opt.margin_pixels);
    grid.z1 = g.bounded() ? g.H - grid.z0 : opt.open_escape_heights * h;
    if (!(grid.z1 > grid.z0)) throw DomainError("depth grid: empty height range");
    grid.P.resize(static_cast<std::size_t>(opt.nx) * opt.ny * opt.nz);
    parallel_for(static_cast<std::size_t>(opt.nz), [&](std::size_t k) {
        const std::vector<Vec3> layer = engine.gradient_layer(grid.z(static_cast<int>(k)), opt.nx, opt.ny);
        const std::size_t base = k * opt.nx * opt.ny;
        for (std::size_t q = 0; q < layer.size(); ++q) grid.P[base + q] = layer[q].squaredNorm();
    });
    return grid;
}

namespace {

struct Node {
    int i, j, k;
};

Node node_of(const PseudoGrid& g, const Vec3& r) {
    auto wrap = [](long v, int n) { return static_cast<int>(((v % n) + n) % n); };
    Node n;
    n.i = wrap(std::lround(r.x() / g.lx * g.nx), g.nx);
    n.j = wrap(std::lround(r.y() / g.ly * g.ny), g.ny);
    n.k = static_cast<int>(std::clamp<long>(std::lround((r.z() - g.z0) / (g.z1 - g.z0) * (g.nz - 1)), 0, g.nz - 1));
    return n;
}

struct FloodResult {
    bool escaped = false;
    EscapeRoute route = EscapeRoute::none;
    Node top{0, 0, 0};  // highest node inside the flooded region
};

// Flood from `start` over nodes with P <= t, tracking how many times the
// region wraps around the cell so that reaching a periodic image of the start
// is detected.
class Flooder {
public:
    Flooder(const PseudoGrid& g, bool bounded, std::vector<char> other) : g_(g), bounded_(bounded), other_(std::move(other)) {
        const std::size_t n = g.P.size();
        ox_.resize(n);
        oy_.resize(n);
        seen_.resize(n);
    }

    FloodResult run(const Node& start, double t) {
        std::fill(seen_.begin(), seen_.end(), 0);
        FloodResult res;
        std::deque<Node> q;
        const std::size_t s = idx(start);
        if (g_.P[s] > t) return res;
        seen_[s] = 1;
        ox_[s] = oy_[s] = 0;
        q.push_back(start);
        double best = -1.0;
        while (!q.empty()) {
            const Node n = q.front();
            q.pop_front();
            const std::size_t a = idx(n);
            if (g_.P[a] > best) {
                best = g_.P[a];
                res.top = n;
            }
            if (!res.escaped) {
                if (n.k == 0 || (bounded_ && n.k == g_.nz - 1)) {
                    res.escaped = true;
                    res.route = EscapeRoute::plane_margin;
                } else if (!bounded_ && n.k == g_.nz - 1) {
                    res.escaped = true;
                    res.route = EscapeRoute::open_top;
                } else if (other_[a]) {
                    res.escaped = true;
                    res.route = EscapeRoute::neighbor_site;
                }
            }
            static constexpr int di[6] = {1, -1, 0, 0, 0, 0}, dj[6] = {0, 0, 1, -1, 0, 0}, dk[6] = {0, 0, 0, 0, 1, -1};
            for (int e = 0; e < 6; ++e) {
                int i = n.i + di[e], j = n.j + dj[e];
                const int k = n.k + dk[e];
                if (k < 0 || k >= g_.nz) continue;
                int wx = ox_[a], wy = oy_[a];
                if (i < 0) i += g_.nx, --wx;
                if (i >= g_.nx) i -= g_.nx, ++wx;
                if (j < 0) j += g_.ny, --wy;
                if (j >= g_.ny) j -= g_.ny, ++wy;
                const Node m{i, j, k};
                const std::size_t b = idx(m);
                if (g_.P[b] > t) continue;
                if (seen_[b]) {
                    if ((ox_[b] != wx || oy_[b] != wy) && !res.escaped) {
                        res.escaped = true;
                        res.route = EscapeRoute::own_image;
                    }
                    continue;
                }
                seen_[b] = 1;
                ox_[b] = static_cast<short>(wx);
                oy_[b] = static_cast<short>(wy);
                q.push_back(m);
            }
        }
        return res;
    }

    std::size_t idx(const Node& n) const { return (static_cast<std::size_t>(n.k) * g_.ny + n.j) * g_.nx + n.i; }

private:
    const PseudoGrid& g_;
    bool bounded_;
    std::vector<char> other_;
    std::vector<short> ox_, oy_;
    std::vector<char> seen_;
};

// Newton on grad P = 2 H g = 0 with a finite-difference Jacobian.
bool polish_saddle(const FieldEngine& e, Vec3& r, double max_shift) {
    const double d = e.geometry().cell.d;
    const double step = 1e-5 * d;
    const Vec3 start = r;
    for (int it = 0; it < 25; ++it) {
        const FieldEval f = e.evaluate(r);
        const Vec3 F = grad_pseudo(f);
        Mat3 J;
        for (int c = 0; c < 3; ++c) {
            Vec3 dr = Vec3::Zero();
            dr[c] = step;
            if (!inside(e, r + dr, e.margin()) || !inside(e, r - dr, e.margin())) return false;
            J.col(c) = (grad_pseudo(e.evaluate(r + dr)) - grad_pseudo(e.evaluate(r - dr))) / (2 * step);
        }
        Eigen::FullPivLU<Mat3> lu(J);
        if (!lu.isInvertible()) return false;
        const Vec3 dx = -lu.solve(F);
        r += dx;
        if ((r - start).cwiseAbs().maxCoeff() > max_shift || !inside(e, r, e.margin())) return false;
        if (dx.norm() < 1e-11 * d) return true;
    }
    return false;
}

}  // namespace

DepthReport trap_depth(const FieldEngine& engine, const PseudoGrid& grid, const TrapSite& site, double h,
                       const std::vector<Vec3>& others, const DepthOptions& opt) {
    const bool bounded = engine.geometry().bounded();
    std::vector<char> other(grid.P.size(), 0);
    auto index = [&](const Node& n) { return (static_cast<std::size_t>(n.k) * grid.ny + n.j) * grid.nx + n.i; };
    // Nearest node, moved downhill to the discrete minimum of the basin.
    Node start = node_of(grid, site.position);
    for (int step = 0; step < 4; ++step) {
        Node best = start;
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const Node m{(start.i + di + grid.nx) % grid.nx, (start.j + dj + grid.ny) % grid.ny, start.k + dk};
                    if (m.k < 1 || m.k > grid.nz - 2) continue;
                    if (grid.P[index(m)] < grid.P[index(best)]) best = m;
                }
        if (index(best) == index(start)) break;
        start = best;
    }
    for (const Vec3& o : others) {
        const Node n = node_of(grid, o);
        if (index(n) != index(start)) other[index(n)] = 1;
    }
    Flooder fl(grid, bounded, std::move(other));
    double lo = grid.P[index(start)];
    double hi = *std::max_element(grid.P.begin(), grid.P.end());
    if (fl.run(start, lo).escaped) throw DegenerateTrap("trap basin is unconfined at threshold zero");
    FloodResult at_hi = fl.run(start, hi);
    if (!at_hi.escaped) throw NumericalError("depth flood never reaches an escape region");
    for (int b = 0; b < opt.bisections; ++b) {
        const double mid = 0.5 * (lo + hi);
        FloodResult r = fl.run(start, mid);
        if (r.escaped) {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
        }
    }
    DepthReport rep;
    rep.route = at_hi.route;
    const Node s = at_hi.top;
    rep.saddle = Vec3(grid.lx * s.i / grid.nx, grid.ly * s.j / grid.ny, grid.z(s.k));
    double level = grid.P[index(s)];
    const double site_value = engine.evaluate(site.position).grad.squaredNorm();
    if (opt.polish && s.k > 0 && s.k < grid.nz - 1) {
        Vec3 r = rep.saddle;
        const double cell = std::max({grid.lx / grid.nx, grid.ly / grid.ny, (grid.z1 - grid.z0) / (grid.nz - 1)});
        if (polish_saddle(engine, r, 2.0 * cell)) {
            const double v = engine.evaluate(r).grad.squaredNorm();
            if (v >= site_value && v <= 1.1 * level) {
                level = v;
                rep.saddle = wrapped(engine, r);
                rep.polished = true;
            }
        }
    }
    rep.depth = level - site_value;
    rep.eta = h * h * rep.depth;
    double margin_min = 1e300;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            margin_min = std::min(margin_min, grid.at(i, j, 0));
            if (bounded) margin_min = std::min(margin_min, grid.at(i, j, grid.nz - 1));
        }
    rep.margin_below_saddle = margin_min < level;
    return rep;
}

DepthReport trap_depth(const FieldEngine& engine, const TrapSite& site, double h, const std::vector<Vec3>& others,
                       const DepthOptions& opt) {
    return trap_depth(engine, sample_pseudo(engine, h, opt), site, h, others, opt);
}

MinimaReport find_all_minima(const FieldEngine& engine, double h, const DepthOptions& opt, bool with_depths) {
    const BilayerGeometry& g = engine.geometry();
    const UnitCell& cell = g.cell;
    const double d = cell.d;
    MinimaReport rep;
    std::vector<TrapSite> mains;
    for (std::size_t s = 0; s < cell.site_count(); ++s) {
        const Vec2 p = cell.site_position(s);
        try {
            TrapSite t = find_rf_null(engine, Vec3(p.x(), p.y(), h));
            t.designed_index = static_cast<int>(s);
            mains.push_back(t);
        } catch (const NoNullFound&) {
        }
    }
    const PseudoGrid grid = sample_pseudo(engine, h, opt);
    std::vector<Vec3> seeds;
    for (int k = 1; k < grid.nz - 1; ++k)
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                const double v = grid.at(i, j, k);
                bool minimum = true;
                for (int dk = -1; dk <= 1 && minimum; ++dk)
                    for (int dj = -1; dj <= 1 && minimum; ++dj)
                        for (int di = -1; di <= 1 && minimum; ++di) {
                            if (!di && !dj && !dk) continue;
                            const int ii = (i + di + grid.nx) % grid.nx, jj = (j + dj + grid.ny) % grid.ny;
                            if (grid.at(ii, jj, k + dk) < v) minimum = false;
                        }
                if (minimum) seeds.emplace_back(grid.lx * i / grid.nx, grid.ly * j / grid.ny, grid.z(k));
            }
    std::vector<std::optional<TrapSite>> found(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t q) {
        try {
            found[q] = find_rf_null(engine, seeds[q]);
        } catch (const NumericalError&) {
        } catch (const DomainError&) {
        }
    });
    std::vector<TrapSite> all = mains;
    for (auto& f : found) {
        if (!f) continue;
        bool dup = false;
        for (const auto& t : all)
            if (periodic_distance3(engine, t.position, f->position) < 1e-3 * d) dup = true;
        if (dup) continue;
        f->is_spurious = true;
        all.push_back(*f);
    }
    // Deterministic order: main sites by designed index, then spurious by position.
    std::stable_sort(all.begin(), all.end(), [](const TrapSite& a, const TrapSite& b) {
        if (a.is_spurious != b.is_spurious) return !a.is_spurious;
        if (!a.is_spurious) return a.designed_index < b.designed_index;
        auto key = [](const TrapSite& t) {
            return std::array<double, 3>{std::round(t.position.z() * 1e9), std::round(t.position.y() * 1e9),
                                         std::round(t.position.x() * 1e9)};
        };
        return key(a) < key(b);
    });
    rep.sites = all;
    rep.depth_ratio.assign(all.size(), 1.0);
    double main_curv = 0.0;
    for (const auto& m : mains) main_curv += std::cbrt(std::abs(m.hessian.determinant())) / mains.size();
    for (const auto& t : all)
        if (t.is_spurious && main_curv > 0)
            rep.max_curvature_ratio = std::max(rep.max_curvature_ratio, std::cbrt(std::abs(t.hessian.determinant())) / main_curv);
    if (with_depths && !mains.empty()) {
        std::vector<double> depth(all.size(), 0.0);
        parallel_for(all.size(), [&](std::size_t q) {
            std::vector<Vec3> others;
            for (std::size_t p = 0; p < all.size(); ++p)
                if (p != q && (all[q].is_spurious || !all[p].is_spurious)) others.push_back(all[p].position);
            try {
                depth[q] = trap_depth(engine, grid, all[q], h, others, opt).depth;
            } catch (const NumericalError&) {
                depth[q] = 0.0;
            }
        });
        double main_depth = 0.0;
        for (std::size_t q = 0; q < all.size(); ++q)
            if (!all[q].is_spurious) main_depth += depth[q] / mains.size();
        for (std::size_t q = 0; q < all.size(); ++q) {
            if (!all[q].is_spurious) continue;
            rep.depth_ratio[q] = main_depth > 0 ? depth[q] / main_depth : 0.0;
            rep.max_depth_ratio = std::max(rep.max_depth_ratio, rep.depth_ratio[q]);
        }
    }
    return rep;
}

Anharmonicity anharmonic_coefficients(const FieldEngine& engine, const TrapSite& site, double h) {
    // Axis nearest z, and the in-plane axis nearest x.
    int iz = 0;
    for (int c = 1; c < 3; ++c)
        if (std::abs(site.principal_axes(2, c)) > std::abs(site.principal_axes(2, iz))) iz = c;
    int ix = -1;
    for (int c = 0; c < 3; ++c)
        if (c != iz && (ix < 0 || std::abs(site.principal_axes(0, c)) > std::abs(site.principal_axes(0, ix)))) ix = c;
    Vec3 ux = site.principal_axes.col(ix);
    {
        // degenerate in-plane pair: any axis of the pair is principal, take the one along x
        const int iy = 3 - iz - ix;
        const double la = site.eigenvalues[ix], lb = site.eigenvalues[iy];
        if (std::abs(la - lb) <= 1e-6 * std::max(std::abs(la), std::abs(lb))) {
            const Vec3 a = site.principal_axes.col(ix), b = site.principal_axes.col(iy);
            const Vec3 x = a.x() * a + b.x() * b;
            if (x.norm() > 1e-3) ux = x.normalized();
        }
    }

    Anharmonicity out;
    double span = 0.1 * h;
    const int n = 41;
    auto fit = [&](const Vec3& u, double sp, Eigen::Matrix<double, 7, 1>& a) {
        Eigen::MatrixXd V(n, 7);
        Eigen::VectorXd P(n);
        for (int i = 0; i < n; ++i) {
            const double t = -1.0 + 2.0 * i / (n - 1);
            double p = 1.0;
            for (int c = 0; c < 7; ++c, p *= t) V(i, c) = p;
            P[i] = engine.evaluate(site.position + t * sp * u).grad.squaredNorm();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
        const double cond = svd.singularValues()[0] / svd.singularValues()[6];
        if (cond > 1e8) return false;
        const Eigen::VectorXd b = V.colPivHouseholderQr().solve(P);
        double s = 1.0;
        for (int c = 0; c < 7; ++c, s *= sp) a[c] = b[c] / s;
        return true;
    };
    for (int attempt = 0; attempt < 8; ++attempt) {
        try {
            Eigen::Matrix<double, 7, 1> az, ax;
            if (!fit(site.principal_axes.col(iz), span, az) || !fit(ux, span, ax)) {
                span *= 0.5;
                out.span_reduced = true;
                continue;
            }
            out.c3_z = az[3] * h / az[2];
            out.c4_z = az[4] * h * h / az[2];
            out.c4_inplane = ax[4] * h * h / ax[2];
            out.span = span;
            return out;
        } catch (const DomainError&) {
            span *= 0.5;
            out.span_reduced = true;
        }
    }
    throw NumericalError("anharmonic fit failed");
}

TrapCharacterization characterize(const FieldEngine& engine, std::size_t index, double h, const CharacterizeOptions& opt) {
    const UnitCell& cell = engine.geometry().cell;
    if (index >= cell.site_count()) throw DomainError("characterize: site index out of range");
    TrapCharacterization c;
    const Vec2 p = cell.site_position(index);
    c.site = find_rf_null(engine, Vec3(p.x(), p.y(), h));
    c.site.designed_index = static_cast<int>(index);
    std::vector<Vec3> others;
    for (std::size_t s = 0; s < cell.site_count(); ++s) {
        if (s == index) continue;
        const Vec2 q = cell.site_position(s);
        try {
            others.push_back(find_rf_null(engine, Vec3(q.x(), q.y(), h)).position);
        } catch (const NoNullFound&) {
            others.emplace_back(q.x(), q.y(), h);
        }
    }
    c.kappa = site_kappa(c.site, h);
    c.depth = trap_depth(engine, c.site, h, others, opt.depth);
    c.depth_psi_dimensionless = c.depth.depth;
    c.eta = c.depth.eta;
    const double L2 = opt.metres_per_unit * opt.metres_per_unit;
    for (int i = 0; i < 3; ++i)
        c.secular_freqs_per_volt[i] =
            opt.ion.charge * std::abs(c.site.eigenvalues[i]) / L2 / (std::sqrt(2.0) * opt.ion.mass * opt.omega_rf);
    if (opt.anharmonic) c.anharm = anharmonic_coefficients(engine, c.site, h);
    return c;
}

}  // namespace biplanar
