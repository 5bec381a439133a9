#include "biplanar/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "biplanar/errors.hpp"
#include "biplanar/parallel.hpp"
#include "biplanar/pseudo.hpp"

namespace biplanar {

double OptimizationProblem::plane_separation() const {
    if (mode == GeometryMode::open_single_layer) return 0.0;
    return H > 0.0 ? H : 2.0 * h;
}

int OptimizationProblem::pixels_y() const {
    const int e = static_cast<int>(std::lround(std::log2(cell.ly / cell.lx)));
    return e >= 0 ? resolution << e : resolution >> (-e);
}

void OptimizationProblem::validate() const {
    cell.validate();
    if (!(h > 0.0)) throw DomainError("optimizer: h must be positive");
    if (mode != GeometryMode::open_single_layer && !(plane_separation() > h))
        throw DomainError("optimizer: need 0 < h < H");
    if (resolution < 32 || (resolution & (resolution - 1)) != 0 || pixels_y() < 32)
        throw DomainError("optimizer: resolution must be a power of two >= 32");
    if (symmetry.mirror_z && (mode != GeometryMode::bilayer || std::abs(plane_separation() - 2.0 * h) > 1e-12 * h))
        throw DomainError("optimizer: mirror_z needs a bilayer with h = H/2");
    if (random_seeds < 0 || max_iterations < 1 || !(rel_tol > 0.0)) throw DomainError("optimizer: bad iteration settings");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kHessComp[6] = {kHxx, kHyy, kHzz, kHxy, kHxz, kHyz};

BilayerGeometry blank_geometry(const OptimizationProblem& p) {
    BilayerGeometry g;
    g.cell = p.cell;
    g.mode = p.mode;
    g.H = p.plane_separation();
    g.bottom = ElectrodePattern::uniform(p.pixels_x(), p.pixels_y(), 0.0, Plane::bottom);
    if (p.mode == GeometryMode::bilayer) g.top = ElectrodePattern::uniform(p.pixels_x(), p.pixels_y(), 0.0, Plane::top);
    return g;
}

// Spectrum accurate at the site height (the nearest plane is h or H - h away).
FieldEngine kernel_engine(const OptimizationProblem& p) {
    EngineOptions o;
    o.tol = 1e-12;
    o.z_min = p.mode == GeometryMode::open_single_layer ? p.h : std::min(p.h, p.plane_separation() - p.h);
    return FieldEngine(blank_geometry(p), o);
}

// --- pixel symmetry orbits ---

struct PixelMap {
    int nx, ny;
    bool two_planes;
    std::size_t npix() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t size() const { return two_planes ? 2 * npix() : npix(); }
};

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

bool maps_sites(const UnitCell& c, const std::function<Vec2(const Vec2&)>& op) {
    for (const Vec2& s : c.sites) {
        const Vec2 t = op(s);
        bool hit = false;
        for (const Vec2& u : c.sites) {
            const double dx = t.x() - u.x() - std::round(t.x() - u.x()), dy = t.y() - u.y() - std::round(t.y() - u.y());
            if (std::abs(dx) < 1e-9 && std::abs(dy) < 1e-9) hit = true;
        }
        if (!hit) return false;
    }
    return true;
}

// Mirror line (fractional coordinate) along one axis that maps sites to sites
// and pixels to pixels, or -1.
double find_mirror(const UnitCell& c, int axis, int n) {
    std::vector<double> cand;
    for (const Vec2& a : c.sites)
        for (const Vec2& b : c.sites) {
            const double m = 0.5 * (a[axis] + b[axis]);
            cand.push_back(m - std::floor(m));
            cand.push_back(m + 0.5 - std::floor(m + 0.5));
        }
    std::sort(cand.begin(), cand.end());
    for (double m : cand) {
        if (!near_integer(2.0 * m * n)) continue;
        auto op = [&](const Vec2& s) {
            Vec2 t = s;
            t[axis] = 2.0 * m - s[axis];
            return t;
        };
        if (maps_sites(c, op)) return m;
    }
    return -1.0;
}

std::vector<int> symmetry_orbits(const OptimizationProblem& p, const PixelMap& pm, int& count) {
    const std::size_t n = pm.size();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    auto unite = [&](std::size_t a, std::size_t b) {
        const int ra = find(static_cast<int>(a)), rb = find(static_cast<int>(b));
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    };
    auto idx = [&](int plane, int i, int j) { return plane * pm.npix() + static_cast<std::size_t>(j) * pm.nx + i; };
    const int planes = pm.two_planes ? 2 : 1;
    auto wrap = [](long v, int m) { return static_cast<int>(((v % m) + m) % m); };

    if (p.symmetry.lattice_point_group) {
        const double mx = find_mirror(p.cell, 0, pm.nx), my = find_mirror(p.cell, 1, pm.ny);
        for (int pl = 0; pl < planes; ++pl)
            for (int j = 0; j < pm.ny; ++j)
                for (int i = 0; i < pm.nx; ++i) {
                    if (mx >= 0) unite(idx(pl, i, j), idx(pl, wrap(std::lround(2 * mx * pm.nx) - 1 - i, pm.nx), j));
                    if (my >= 0) unite(idx(pl, i, j), idx(pl, i, wrap(std::lround(2 * my * pm.ny) - 1 - j, pm.ny)));
                }
        // diagonal mirror through site 0 on square grids
        if (pm.nx == pm.ny && std::abs(p.cell.lx - p.cell.ly) < 1e-12 * p.cell.lx) {
            const Vec2 s0 = p.cell.sites[0];
            const double shift = (s0.x() - s0.y()) * pm.nx;
            auto op = [&](const Vec2& s) { return Vec2(s.y() + s0.x() - s0.y(), s.x() - s0.x() + s0.y()); };
            if (near_integer(shift) && maps_sites(p.cell, op)) {
                const long sh = std::lround(shift);
                for (int pl = 0; pl < planes; ++pl)
                    for (int j = 0; j < pm.ny; ++j)
                        for (int i = 0; i < pm.nx; ++i) unite(idx(pl, i, j), idx(pl, wrap(j + sh, pm.nx), wrap(i - sh, pm.ny)));
            }
        }
    }
    if (p.symmetry.mirror_z)
        for (std::size_t q = 0; q < pm.npix(); ++q) unite(q, q + pm.npix());

    std::vector<int> orbit(n, -1), label(n, -1);
    count = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const int r = find(static_cast<int>(q));
        if (label[r] < 0) label[r] = count++;
        orbit[q] = label[r];
    }
    return orbit;
}

// --- kernels over (reduced) variables ---

struct SiteKernels {
    std::array<VectorXd, kComponentCount> c;
};

struct Reduced {
    PixelMap pm;
    std::vector<int> orbit;
    int nvar = 0;
    std::vector<SiteKernels> sites;
};

Reduced build_kernels(const OptimizationProblem& p, bool reduce) {
    const FieldEngine eng = kernel_engine(p);
    Reduced R;
    R.pm = {p.pixels_x(), p.pixels_y(), p.mode == GeometryMode::bilayer};
    if (reduce) {
        R.orbit = symmetry_orbits(p, R.pm, R.nvar);
    } else {
        R.orbit.resize(R.pm.size());
        std::iota(R.orbit.begin(), R.orbit.end(), 0);
        R.nvar = static_cast<int>(R.pm.size());
    }
    const std::size_t ns = p.cell.site_count();
    R.sites.resize(ns);
    parallel_for(ns, [&](std::size_t s) {
        const Vec2 xy = p.cell.site_position(s);
        const PixelKernels k = eng.pixel_kernels(Vec3(xy.x(), xy.y(), p.h));
        for (int c = 0; c < kComponentCount; ++c) {
            VectorXd v = VectorXd::Zero(R.nvar);
            const std::size_t np = R.pm.npix();
            for (std::size_t q = 0; q < np; ++q) v[R.orbit[q]] += k.bottom[c][q];
            if (R.pm.two_planes)
                for (std::size_t q = 0; q < np; ++q) v[R.orbit[q + np]] += k.top[c][q];
            R.sites[s].c[c] = std::move(v);
        }
    });
    return R;
}

Mat3 site_hessian(const SiteKernels& k, const VectorXd& w) {
    const double hxx = k.c[kHxx].dot(w), hyy = k.c[kHyy].dot(w), hzz = k.c[kHzz].dot(w);
    const double hxy = k.c[kHxy].dot(w), hxz = k.c[kHxz].dot(w), hyz = k.c[kHyz].dot(w);
    Mat3 m;
    m << hxx, hxy, hxz, hxy, hyy, hyz, hxz, hyz, hzz;
    return m;
}

double curvature(const Mat3& m, double h) { return h * h * std::cbrt(std::abs(m.determinant())); }

// gradient of |det|^(1/3) up to a positive factor
Mat3 linearization(const Mat3& m) {
    const double det = m.determinant();
    if (det == 0.0) return Mat3::Zero();
    return std::cbrt(std::abs(det)) * m.inverse();
}

VectorXd sensitivity(const Reduced& R, const std::vector<Mat3>& A) {
    VectorXd s = VectorXd::Zero(R.nvar);
    for (std::size_t i = 0; i < R.sites.size(); ++i) {
        const Mat3& a = A[i];
        const auto& k = R.sites[i].c;
        s += a(0, 0) * k[kHxx] + a(1, 1) * k[kHyy] + a(2, 2) * k[kHzz] + 2 * a(0, 1) * k[kHxy] + 2 * a(0, 2) * k[kHxz] +
             2 * a(1, 2) * k[kHyz];
    }
    return s;
}

// Rows are scaled to unit norm. Rows that a symmetry reduction annihilates
// are dropped; "zero" is judged against the curvature kernel times h.
MatrixXd constraint_rows(const Reduced& R, double h) {
    double ref = 0.0;
    for (const auto& s : R.sites) ref = std::max(ref, s.c[kHzz].norm());
    std::vector<VectorXd> kept;
    for (const auto& s : R.sites)
        for (int c : {kGx, kGy, kGz, kHxy}) {
            const double n = s.c[c].norm();
            if (n > 1e-10 * ref * (c == kHxy ? 1.0 : h)) kept.push_back(s.c[c] / n);
        }
    MatrixXd C(kept.size(), R.nvar);
    for (std::size_t i = 0; i < kept.size(); ++i) C.row(i) = kept[i].transpose();
    return C;
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

// Approximate multipliers for max s.w over w in [0,1]^n with C w = 0, from
// the entropy-smoothed dual with continuation in the smoothing width.
void smoothed_multipliers(const VectorXd& s, const MatrixXd& C, VectorXd& mu) {
    const Eigen::Index n = s.size(), m = C.rows();
    if (m == 0) return;
    const VectorXd colsum = C.cwiseAbs().colwise().sum().transpose();
    const double rowsum = C.cwiseAbs().rowwise().sum().maxCoeff();
    VectorXd w(n), tau(n), t(n);
    if (mu.size() != m) mu = VectorXd::Zero(m);
    for (double scale : {1e-1, 1e-2, 1e-3}) {
        tau = scale * (s.cwiseAbs() + colsum).array() + 1e-300;
        auto dual_of = [&](const VectorXd& tt) {
            double f = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) f += tau[i] * softplus(tt[i]);
            return f;
        };
        auto dual = [&](const VectorXd& mm) {
            return dual_of(((s - C.transpose() * mm).array() / tau.array()).matrix());
        };
        double damping = 0.0;
        std::vector<Eigen::Index> active;
        for (int it = 0; it < 60; ++it) {
            t = ((s - C.transpose() * mu).array() / tau.array()).matrix();
            for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.5 * (1.0 + std::tanh(0.5 * t[i]));
            const VectorXd r = C * w;
            if (m == 0 || r.cwiseAbs().maxCoeff() < 1e-8 * rowsum) break;  // the simplex finishes exactly
            // only pixels inside the smoothing band carry curvature
            active.clear();
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(t[i]) < 40.0) active.push_back(i);
            MatrixXd Ca(m, active.size());
            VectorXd Da(active.size());
            for (std::size_t q = 0; q < active.size(); ++q) {
                const Eigen::Index i = active[q];
                Ca.col(q) = C.col(i);
                Da[q] = w[i] * (1.0 - w[i]) / tau[i];
            }
            const MatrixXd Hs = Ca * Da.asDiagonal() * Ca.transpose();
            const double tr = Hs.trace();
            if (!(tr > 1e-300)) break;
            // Levenberg damping carried across steps in place of long backtracking
            const double f0 = dual_of(t);
            bool accepted = false;
            for (int tries = 0; tries < 40 && !accepted; ++tries) {
                MatrixXd Hd = Hs;
                Hd.diagonal().array() += (1e-12 + damping) * tr + 1e-300;
                const VectorXd step = Hd.ldlt().solve(r);
                if (dual(mu + step) <= f0 - 1e-4 * r.dot(step)) {
                    mu += step;
                    accepted = true;
                    damping *= 0.25;
                } else {
                    damping = std::max(10.0 * damping, 1e-8);
                }
            }
            if (!accepted) break;
        }
    }
}

// Bounded-variable revised simplex for max c.w, C w = 0, 0 <= w <= 1. Starts
// from w = [c - C^T y > 0] for the warm multipliers y, with one artificial per
// row, and drives the artificials out first. Returns a vertex: at most
// C.rows() fractional entries. y receives the final multipliers.
VectorXd lp_vertex(const VectorXd& c, const MatrixXd& C, VectorXd& y) {
    const Eigen::Index m = C.rows(), n = C.cols();
    if (y.size() != m) y = VectorXd::Zero(m);
    smoothed_multipliers(c, C, y);
    VectorXd x = ((c - C.transpose() * y).array() > 0.0).cast<double>().matrix();
    if (m == 0) return x;
    const VectorXd r = -(C * x);
    const double scale = C.cwiseAbs().rowwise().sum().maxCoeff();
    const double ptol = 1e-13 * scale, dtol = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());

    // Variables 0..n-1 are pixels, n..n+m-1 artificials with column sign_i e_i.
    VectorXd sign(m), xa(m), upper_a(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        sign[i] = r[i] >= 0 ? 1.0 : -1.0;
        xa[i] = std::abs(r[i]);
        upper_a[i] = 1e300;
    }
    std::vector<Eigen::Index> basis(m);
    for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;
    std::vector<char> in_basis(n, 0);
    auto column = [&](Eigen::Index j) -> VectorXd {
        if (j < n) return C.col(j);
        VectorXd e = VectorXd::Zero(m);
        e[j - n] = sign[j - n];
        return e;
    };
    auto value = [&](Eigen::Index j) -> double& { return j < n ? x[j] : xa[j - n]; };
    auto upper = [&](Eigen::Index j) { return j < n ? 1.0 : upper_a[j - n]; };

    for (int phase = 1; phase <= 2; ++phase) {
        VectorXd cost_p = phase == 1 ? VectorXd::Zero(n) : c;
        auto cost = [&](Eigen::Index j) { return j < n ? cost_p[j] : (phase == 1 ? -1.0 : 0.0); };
        int degenerate_run = 0;
        for (long iter = 0;; ++iter) {
            if (iter > 50 * (n + m)) throw NumericalError("simplex: iteration limit");
            MatrixXd B(m, m);
            VectorXd cb(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                B.col(i) = column(basis[i]);
                cb[i] = cost(basis[i]);
            }
            const Eigen::FullPivLU<MatrixXd> lu(B);
            if (iter % 32 == 0) {
                // refresh basic values from the nonbasic ones
                VectorXd rhs = VectorXd::Zero(m);
                for (Eigen::Index j = 0; j < n; ++j)
                    if (!in_basis[j] && x[j] != 0.0) rhs -= x[j] * C.col(j);
                for (Eigen::Index i = 0; i < m; ++i) {
                    const Eigen::Index j = n + i;
                    if (std::find(basis.begin(), basis.end(), j) == basis.end() && xa[i] != 0.0) rhs -= xa[i] * column(j);
                }
                const VectorXd xb = lu.solve(rhs);
                for (Eigen::Index i = 0; i < m; ++i) value(basis[i]) = xb[i];
            }
            y = lu.transpose().solve(cb);
            // pricing; reduced costs change only when the basis does, so all
            // improving candidates are tried in order until one pivots
            const VectorXd d = cost_p - C.transpose() * y;
            const bool bland = degenerate_run > 50;
            std::vector<std::pair<double, Eigen::Index>> cand;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (in_basis[j]) continue;
                const double gain = x[j] < 0.5 ? d[j] : -d[j];
                if (gain > dtol) cand.emplace_back(bland ? -static_cast<double>(j) : gain, j);
            }
            if (cand.empty()) break;
            std::sort(cand.begin(), cand.end(), [](const auto& p, const auto& q) {
                return p.first != q.first ? p.first > q.first : p.second < q.second;
            });
            bool pivoted = false;
            for (const auto& cj : cand) {
                const Eigen::Index enter = cj.second;
                const double dir = x[enter] < 0.5 ? 1.0 : -1.0;
                const VectorXd alpha = lu.solve(C.col(enter));
                double t = 1.0;
                Eigen::Index leave = -1;
                double leave_mag = 0.0;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double a = dir * alpha[i];
                    const Eigen::Index j = basis[i];
                    double ti;
                    if (a > 1e-11) {
                        ti = std::max(0.0, value(j)) / a;
                    } else if (a < -1e-11 && upper(j) < 1e299) {
                        ti = std::max(0.0, upper(j) - value(j)) / -a;
                    } else {
                        continue;
                    }
                    if (ti < t - 1e-15 || (ti <= t + 1e-15 && leave >= 0 && std::abs(a) > leave_mag) ||
                        (ti <= t + 1e-15 && leave < 0)) {
                        t = std::min(t, ti);
                        leave = i;
                        leave_mag = std::abs(a);
                    }
                }
                for (Eigen::Index i = 0; i < m; ++i) value(basis[i]) -= t * dir * alpha[i];
                if (leave < 0) {
                    x[enter] = dir > 0 ? 1.0 : 0.0;  // bound flip
                    continue;
                }
                degenerate_run = t < 1e-14 ? degenerate_run + 1 : 0;
                x[enter] += t * dir;
                const Eigen::Index out = basis[leave];
                const double a = dir * alpha[leave];
                value(out) = a > 0 ? 0.0 : upper(out);
                if (out < n) in_basis[out] = 0;
                basis[leave] = enter;
                in_basis[enter] = 1;
                pivoted = true;
                break;
            }
            if (!pivoted) break;
        }
        if (phase == 1) {
            double infeas = xa.sum();
            if (infeas > 1e3 * ptol) throw InfeasibleError("simplex: site constraints cannot be met");
            // artificials stay at zero from here on
            for (Eigen::Index i = 0; i < m; ++i) {
                upper_a[i] = 0.0;
                xa[i] = 0.0;
            }
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) x[j] = std::clamp(x[j], 0.0, 1.0);
    return x;
}

struct SeedRun {
    VectorXd w;
    double kappa = 0.0;
    std::vector<double> history;
    bool converged = false;
    bool damped = false;
    int iterations = 0;
    Mat3 A0 = Mat3::Zero();
};

double mean_kappa(const std::vector<Mat3>& H, double h) {
    double k = 0.0;
    for (const auto& m : H) k += curvature(m, h);
    return k / H.size();
}

std::vector<Mat3> hessians(const Reduced& R, const VectorXd& w) {
    std::vector<Mat3> H;
    for (const auto& s : R.sites) H.push_back(site_hessian(s, w));
    return H;
}

SeedRun run_seed(const OptimizationProblem& p, const Reduced& R, const MatrixXd& C, std::vector<Mat3> A) {
    SeedRun out;
    VectorXd mu;
    std::vector<Mat3> A_prev = A;
    VectorXd w = lp_vertex(sensitivity(R, A), C, mu);  // first vertex
    std::vector<Mat3> Hw = hessians(R, w);
    double kw = mean_kappa(Hw, p.h);
    out.history.push_back(kw);
    bool retry = false;
    for (int it = 0; it < p.max_iterations; ++it) {
        out.iterations = it + 1;
        if (retry) {
            // damped: average the current and previous linearizations
            for (std::size_t i = 0; i < A.size(); ++i) {
                const double na = A[i].norm(), nb = A_prev[i].norm();
                if (na > 0 && nb > 0) A[i] = 0.5 * (A[i] / na + A_prev[i] / nb);
            }
        } else {
            for (std::size_t i = 0; i < A.size(); ++i) A[i] = linearization(Hw[i]);
        }
        VectorXd s = sensitivity(R, A);
        const double smax = s.cwiseAbs().maxCoeff();
        if (!(smax > 0.0)) break;
        s /= smax;
        const VectorXd v = lp_vertex(s, C, mu);
        const std::vector<Mat3> Hv = hessians(R, v);
        auto line = [&](double g) {
            std::vector<Mat3> Hg(Hw.size());
            for (std::size_t i = 0; i < Hw.size(); ++i) Hg[i] = (1 - g) * Hw[i] + g * Hv[i];
            return mean_kappa(Hg, p.h);
        };
        // coarse scan, then golden section around the best node
        const int nodes = 64;
        double best_g = 0.0, best = kw;
        for (int q = 1; q <= nodes; ++q) {
            const double g = static_cast<double>(q) / nodes, f = line(g);
            if (f > best) best = f, best_g = g;
        }
        for (int q = 7; q <= 40 && best_g == 0.0; ++q) {
            const double g = std::ldexp(1.0, -q), f = line(g);
            if (f > best) best = f, best_g = g;
        }
        if (best_g > 0.0) {
            double a = std::max(0.0, best_g - 1.0 / nodes), b = std::min(1.0, best_g + 1.0 / nodes);
            const double r = 0.5 * (std::sqrt(5.0) - 1.0);
            for (int q = 0; q < 60; ++q) {
                const double m1 = b - r * (b - a), m2 = a + r * (b - a);
                if (line(m1) > line(m2)) b = m2; else a = m1;
            }
            const double g = 0.5 * (a + b), f = line(g);
            if (f > best) best = f, best_g = g;
        }
        if (best_g == 0.0) {
            // stationary unless a damped linearization still ascends
            if (retry || it == 0) {
                out.converged = true;
                break;
            }
            retry = out.damped = true;
            continue;
        }
        retry = false;
        w = (1 - best_g) * w + best_g * v;
        Hw = hessians(R, w);
        const double prev = kw;
        kw = mean_kappa(Hw, p.h);
        out.history.push_back(kw);
        A_prev = A;
        if (std::abs(kw - prev) < p.rel_tol * kw) {
            out.converged = true;
            break;
        }
    }
    out.w = w;
    out.kappa = kw;
    return out;
}

std::vector<Mat3> random_spd(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.5, 2.0);
    Mat3 g;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g(i, j) = nd(rng);
    const Mat3 q = Eigen::HouseholderQR<Mat3>(g).householderQ();
    const Vec3 lam(ud(rng), ud(rng), ud(rng));
    return {q * lam.asDiagonal() * q.transpose()};
}

BilayerGeometry expand(const OptimizationProblem& p, const Reduced& R, const VectorXd& w) {
    BilayerGeometry g = blank_geometry(p);
    const std::size_t np = R.pm.npix();
    for (std::size_t q = 0; q < np; ++q) g.bottom.w[q] = std::clamp(w[R.orbit[q]], 0.0, 1.0);
    if (g.top)
        for (std::size_t q = 0; q < np; ++q) g.top->w[q] = std::clamp(w[R.orbit[q + np]], 0.0, 1.0);
    return g;
}

}  // namespace

SensitivityMap curvature_kernel(const OptimizationProblem& problem, std::size_t site, const Mat3& A, const Vec3& mu,
                                double nu) {
    problem.validate();
    if (site >= problem.cell.site_count()) throw DomainError("curvature_kernel: site index out of range");
    const FieldEngine eng = kernel_engine(problem);
    const Vec2 xy = problem.cell.site_position(site);
    const PixelKernels k = eng.pixel_kernels(Vec3(xy.x(), xy.y(), problem.h));
    SensitivityMap out;
    out.nx = k.nx;
    out.ny = k.ny;
    auto fill = [&](const std::array<std::vector<double>, kComponentCount>& c, std::vector<double>& dst) {
        dst.resize(c[0].size());
        for (std::size_t q = 0; q < dst.size(); ++q)
            dst[q] = A(0, 0) * c[kHxx][q] + A(1, 1) * c[kHyy][q] + A(2, 2) * c[kHzz][q] + 2 * A(0, 1) * c[kHxy][q] +
                     2 * A(0, 2) * c[kHxz][q] + 2 * A(1, 2) * c[kHyz][q] - mu.x() * c[kGx][q] - mu.y() * c[kGy][q] -
                     mu.z() * c[kGz][q] - nu * c[kHxy][q];
    };
    fill(k.bottom, out.bottom);
    if (k.has_top()) fill(k.top, out.top);
    return out;
}

OptimizationResult optimize_pattern(const OptimizationProblem& problem, const std::optional<BilayerGeometry>& warm_start) {
    problem.validate();
    const Reduced R = build_kernels(problem, true);
    const MatrixXd C = constraint_rows(R, problem.h);
    if (C.rows() >= R.nvar) throw InfeasibleError("optimizer: more constraints than free pixels");
    const std::size_t ns = problem.cell.site_count();

    std::vector<std::vector<Mat3>> seeds;
    Mat3 axial = Mat3::Zero();
    axial.diagonal() << -1.0, -1.0, 2.0;
    seeds.emplace_back(ns, axial);
    for (int q = 0; q < problem.random_seeds; ++q) seeds.emplace_back(ns, random_spd(problem.rng_seed + q)[0]);
    if (warm_start && warm_start->mode == problem.mode && warm_start->bottom.nx == problem.pixels_x() &&
        warm_start->bottom.ny == problem.pixels_y()) {
        // the previous pattern, placed at this problem's heights
        BilayerGeometry wg = *warm_start;
        wg.cell = problem.cell;
        if (wg.bounded()) wg.H = problem.plane_separation();
        const FieldEngine we(wg, EngineOptions{1e-10, std::min(problem.h, wg.bounded() ? wg.H - problem.h : problem.h)});
        std::vector<Mat3> A(ns);
        bool ok = true;
        for (std::size_t s = 0; s < ns; ++s) {
            const Vec2 xy = problem.cell.site_position(s);
            A[s] = linearization(we.evaluate(Vec3(xy.x(), xy.y(), problem.h)).hessian);
            ok = ok && A[s].norm() > 0.0;
        }
        if (ok) seeds.push_back(A);
    }

    std::vector<SeedRun> runs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t q) { runs[q] = run_seed(problem, R, C, seeds[q]); });
    std::size_t best = 0;
    for (std::size_t q = 1; q < runs.size(); ++q)
        if (runs[q].kappa > runs[best].kappa) best = q;
    const SeedRun& win = runs[best];
    if (!(win.kappa > 0.0)) throw InfeasibleError("optimizer: no seed produced a confining pattern");

    OptimizationResult res;
    res.geometry = expand(problem, R, win.w);
    res.kappa = win.kappa;
    res.converged = win.converged;
    res.damped = win.damped;
    res.iterations = win.iterations;
    res.seed_index = static_cast<int>(best);
    res.history = win.history;
    const std::vector<Mat3> Hs = hessians(R, win.w);
    for (const auto& m : Hs) res.site_kappa.push_back(curvature(m, problem.h));
    res.final_weight = linearization(Hs[0]);
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& k = R.sites[s].c;
        const Vec3 g(k[kGx].dot(win.w), k[kGy].dot(win.w), k[kGz].dot(win.w));
        res.max_gradient = std::max(res.max_gradient, g.norm() * problem.cell.d);
        res.max_hxy = std::max(res.max_hxy, std::abs(k[kHxy].dot(win.w)) * problem.cell.d * problem.cell.d);
    }
    std::size_t frac = 0, total = 0;
    auto count = [&](const ElectrodePattern& e) {
        for (double v : e.w) frac += (v > 1e-6 && v < 1 - 1e-6), ++total;
    };
    count(res.geometry.bottom);
    if (res.geometry.top) count(*res.geometry.top);
    res.fractional_share = static_cast<double>(frac) / total;
    return res;
}

FlipCertificate flip_certificate(const OptimizationProblem& problem, const OptimizationResult& result, int pixels,
                                 std::uint64_t seed) {
    problem.validate();
    const Reduced R = build_kernels(problem, false);
    const std::size_t np = R.pm.npix(), n = R.pm.size();
    VectorXd w(n);
    for (std::size_t q = 0; q < np; ++q) w[q] = result.geometry.bottom.w[q];
    if (R.pm.two_planes)
        for (std::size_t q = 0; q < np; ++q) w[q + np] = result.geometry.top->w[q];

    const int nx = R.pm.nx, ny = R.pm.ny;
    auto rounded = [&](std::size_t q) { return w[q] > 0.5; };
    auto boundary = [&](std::size_t q) {
        if (w[q] > 1e-6 && w[q] < 1 - 1e-6) return true;
        const std::size_t pl = q / np, r = q % np;
        const int i = static_cast<int>(r % nx), j = static_cast<int>(r / nx);
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int e = 0; e < 4; ++e) {
            const std::size_t o = pl * np + static_cast<std::size_t>((j + dj[e] + ny) % ny) * nx + (i + di[e] + nx) % nx;
            if (rounded(o) != rounded(q)) return true;
        }
        return false;
    };
    std::vector<std::size_t> edge;
    for (std::size_t q = 0; q < n; ++q)
        if (boundary(q)) edge.push_back(q);

    // constraint rows in the same order as the optimizer, unnormalized
    std::vector<const VectorXd*> rows;
    for (const auto& s : R.sites)
        for (int c : {kGx, kGy, kGz, kHxy}) rows.push_back(&s.c[c]);
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    MatrixXd CF(m, edge.size());
    for (Eigen::Index r = 0; r < m; ++r)
        for (std::size_t e = 0; e < edge.size(); ++e) CF(r, e) = (*rows[r])[edge[e]];
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(CF);

    const std::vector<Mat3> H0 = hessians(R, w);
    const double k0 = mean_kappa(H0, problem.h);
    FlipCertificate cert;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int guard = 0; cert.tested < pixels && guard < 100 * pixels; ++guard) {
        const std::size_t q = pick(rng);
        if (boundary(q)) {
            ++cert.skipped_boundary;
            continue;
        }
        const double delta = rounded(q) ? -1.0 : 1.0;
        VectorXd cp(m);
        for (Eigen::Index r = 0; r < m; ++r) cp[r] = (*rows[r])[q] * delta;
        const VectorXd corr = -cod.solve(cp);
        std::vector<Mat3> H = H0;
        for (std::size_t i = 0; i < R.sites.size(); ++i) {
            Mat3 dH = Mat3::Zero();
            auto add = [&](std::size_t var, double amount) {
                const auto& k = R.sites[i].c;
                Mat3 t;
                t << k[kHxx][var], k[kHxy][var], k[kHxz][var], k[kHxy][var], k[kHyy][var], k[kHyz][var], k[kHxz][var],
                    k[kHyz][var], k[kHzz][var];
                dH += amount * t;
            };
            add(q, delta);
            for (std::size_t e = 0; e < edge.size(); ++e) add(edge[e], corr[e]);
            H[i] += dH;
        }
        const double k1 = mean_kappa(H, problem.h);
        cert.max_relative_gain = std::max(cert.max_relative_gain, (k1 - k0) / k0);
        if (cert.tested == 0) cert.max_relative_gain = (k1 - k0) / k0;
        cert.max_correction = std::max(cert.max_correction, corr.cwiseAbs().maxCoeff());
        ++cert.tested;
    }
    return cert;
}

std::vector<SweepRow> sweep_lattice(const OptimizationProblem& tmpl, const std::vector<double>& h_over_d, bool keep) {
    if (h_over_d.empty()) throw DomainError("sweep_lattice: empty h/d list");
    const double ratio = tmpl.mode == GeometryMode::open_single_layer ? 0.0 : tmpl.plane_separation() / tmpl.h;
    std::vector<SweepRow> rows;
    std::optional<BilayerGeometry> warm;
    for (double hd : h_over_d) {
        SweepRow row;
        row.h_over_d = hd;
        try {
            OptimizationProblem p = tmpl;
            p.h = hd * tmpl.cell.d;
            p.H = ratio * p.h;
            OptimizationResult r = optimize_pattern(p, warm);
            row.kappa = r.kappa;
            row.converged = r.converged;
            warm = r.geometry;
            const FieldEngine eng(r.geometry, characterization_engine_options(r.geometry));
            CharacterizeOptions co;
            co.anharmonic = false;
            row.eta = characterize(eng, 0, p.h, co).eta;
            if (keep) row.result = std::move(r);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "h_over_d,kappa,eta,converged\n";
    char buf[160];
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            std::snprintf(buf, sizeof buf, "%.6g,nan,nan,0\n", r.h_over_d);
        } else {
            std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%d\n", r.h_over_d, r.kappa, r.eta, r.converged ? 1 : 0);
        }
        os << buf;
    }
    return os.str();
}

double kappa_crossing(const std::vector<SweepRow>& rows, double level) {
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const SweepRow &a = rows[i], &b = rows[i + 1];
        if (!a.error.empty() || !b.error.empty()) continue;
        if (a.kappa >= level && b.kappa < level) {
            const double t = std::log(a.kappa / level) / std::log(a.kappa / b.kappa);
            return a.h_over_d + t * (b.h_over_d - a.h_over_d);
        }
    }
    throw DomainError("kappa_crossing: level not bracketed by the sweep");
}

}  // namespace biplanar
