#include "biplanar/axisym.hpp"

#include <boost/math/tools/roots.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <queue>
#include <tuple>

#include "biplanar/errors.hpp"
#include "biplanar/nelder_mead.hpp"
#include "biplanar/parallel.hpp"

namespace biplanar::axisym {

namespace {

constexpr double kPi = std::numbers::pi;

// Signed disc terms and planes that make up a set of rings.
struct Term {
    double a;  // disc radius; infinity = whole plane
    double sign;
    bool top;
};

std::vector<Term> decompose(const Electrodes& e, GeometryMode mode) {
    std::vector<Term> t;
    for (const auto& r : e) {
        r.validate();
        const bool top = r.plane == Plane::top;
        if (top && mode != GeometryMode::bilayer) throw DomainError("top-plane electrodes need bilayer mode");
        t.push_back({r.r2, 1.0, top});
        if (r.r1 > 0.0) t.push_back({r.r1, -1.0, top});
    }
    return t;
}

void check_point(double z, double H, GeometryMode mode) {
    if (mode == GeometryMode::open_single_layer) {
        if (!(z > 0.0)) throw DomainError("axisym: z must be positive");
    } else if (!(H > 0.0) || !(z > 0.0 && z < H)) {
        throw DomainError("axisym: point must lie strictly between the planes");
    }
}

// Open disc on axis: phi = 1 - z / sqrt(a^2 + z^2) and four z-derivatives.
AxisDerivatives open_disc_axis(double a, double z) {
    const double a2 = a * a, z2 = z * z, s = a2 + z2, rs = std::sqrt(s);
    const double s32 = s * rs, s52 = s32 * s, s72 = s52 * s, s92 = s72 * s;
    return {1.0 - z / rs, -a2 / s32, 3.0 * a2 * z / s52, 3.0 * a2 * (a2 - 4.0 * z2) / s72,
            -15.0 * a2 * z * (3.0 * a2 - 4.0 * z2) / s92};
}

// Open disc off axis, from the current-loop form with complete elliptic integrals.
OffAxisGradient open_disc_gradient(double a, double rho, double z) {
    const double scale = std::sqrt(a * a + z * z);
    if (rho < 1e-5 * scale) {
        const AxisDerivatives d = open_disc_axis(a, z);
        return {-0.5 * rho * d[2], d[1]};
    }
    const double sp = (a + rho) * (a + rho) + z * z;
    const double dm = (a - rho) * (a - rho) + z * z;
    const double m = 4.0 * a * rho / sp;
    const double k = std::sqrt(m);
    const double K = std::comp_ellint_1(k), E = std::comp_ellint_2(k);
    const double s = std::sqrt(sp);
    OffAxisGradient g;
    g.phi_z = -(K + (a * a - rho * rho - z * z) / dm * E) / (kPi * s);
    g.phi_rho = -z * (-K + (a * a + rho * rho + z * z) / dm * E) / (kPi * rho * s);
    return g;
}

// Adaptive 7/15-point Gauss-Kronrod on vector integrands. Each component is
// accepted when its error estimate is below rel * (L1 norm of the integrand).
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
using Arr = std::array<double, N>;

// The integrand returns 2N entries: N values followed by N sums of the
// magnitudes of their terms, so cancelling contributions keep a proper scale.
template <std::size_t N, class F>
void gk15(F& f, double a, double b, Arr<N>& kr, Arr<N>& err, Arr<N>& l1) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Arr<N> g{};
    kr.fill(0.0);
    l1.fill(0.0);
    for (int i = 0; i < 8; ++i) {
        const int reps = i == 7 ? 1 : 2;
        for (int s = 0; s < reps; ++s) {
            const double x = c + (s ? -1.0 : 1.0) * h * kXgk[i];
            const Arr<2 * N> v = f(x);
            for (std::size_t q = 0; q < N; ++q) {
                kr[q] += kWgk[i] * v[q];
                l1[q] += kWgk[i] * v[N + q];
                if (i % 2 == 1) g[q] += kWg[i / 2] * v[q];
            }
        }
    }
    for (std::size_t q = 0; q < N; ++q) {
        kr[q] *= h;
        l1[q] *= h;
        err[q] = std::abs(kr[q] - g[q] * h);
    }
}

template <std::size_t N, class F>
bool adapt(F& f, double a, double b, double rel, int depth, Arr<N>& out, Arr<N>& l1_out) {
    Arr<N> kr, err, l1;
    gk15<N>(f, a, b, kr, err, l1);
    bool ok = true;
    for (std::size_t q = 0; q < N; ++q)
        if (err[q] > rel * l1[q] + 1e-300) ok = false;
    if (!ok && depth > 0) {
        const double m = 0.5 * (a + b);
        Arr<N> o1{}, o2{}, la{}, lb{};
        const bool ok1 = adapt<N>(f, a, m, rel, depth - 1, o1, la);
        const bool ok2 = adapt<N>(f, m, b, rel, depth - 1, o2, lb);
        for (std::size_t q = 0; q < N; ++q) {
            out[q] += o1[q] + o2[q];
            l1_out[q] += la[q] + lb[q];
        }
        return ok1 && ok2;
    }
    for (std::size_t q = 0; q < N; ++q) {
        out[q] += kr[q];
        l1_out[q] += l1[q];
    }
    return ok;
}

// Integral over k in [0, kmax] split into panels of width at most `panel`.
template <std::size_t N, class F>
Arr<N> hankel_integral(F f, double kmax, double panel, const char* what) {
    const int n = std::max(1, static_cast<int>(std::ceil(kmax / panel)));
    Arr<N> out{}, l1{};
    bool ok = true;
    for (int p = 0; p < n; ++p) ok = adapt<N>(f, kmax * p / n, kmax * (p + 1) / n, 1e-10, 18, out, l1) && ok;
    if (!ok) throw NumericalError(std::string("Hankel quadrature did not converge: ") + what);
    return out;
}

double cover_kmax(double H, double zz_max) { return 50.0 / (2.0 * H - zz_max); }

double panel_width(double H, double zz_max, double radius) {
    return std::min(kPi / std::max(radius, 1e-12), 2.0 / (2.0 * H - zz_max));
}

}  // namespace

void RingElectrode::validate() const {
    if (!(r1 >= 0.0) || !(r2 > r1)) throw DomainError("ring electrode needs 0 <= r1 < r2");
}

AxisDerivatives axis_potential(const Electrodes& e, double z, double H, GeometryMode mode) {
    check_point(z, H, mode);
    const std::vector<Term> terms = decompose(e, mode);
    AxisDerivatives d{};
    const bool bounded = mode != GeometryMode::open_single_layer;
    double zz_max = 0.0, a_max = 0.0;
    for (const Term& t : terms) {
        const double zz = t.top ? H - z : z;
        const double flip = t.top ? -1.0 : 1.0;
        if (std::isinf(t.a)) {
            if (!bounded) {
                d[0] += t.sign;
            } else {
                d[0] += t.sign * (H - zz) / H;
                d[1] += t.sign * flip * (-1.0 / H);
            }
            continue;
        }
        const AxisDerivatives o = open_disc_axis(t.a, zz);
        double f = 1.0;
        for (int n = 0; n < 5; ++n, f *= flip) d[n] += t.sign * f * o[n];
        zz_max = std::max(zz_max, zz);
        a_max = std::max(a_max, t.a);
    }
    if (!bounded || a_max == 0.0) return d;

    // Cover correction: subtract the integral of a J1(ka) d^n/dz^n C(k, z),
    // C = [exp(-k(2H-z)) - exp(-k(2H+z))] / (1 - exp(-2kH)).
    auto integrand = [&](double k) {
        Arr<10> v{};
        if (k == 0.0) return v;
        const double den = -std::expm1(-2.0 * k * H);
        for (const Term& t : terms) {
            if (std::isinf(t.a)) continue;
            const double zz = t.top ? H - z : z;
            const double flip = t.top ? -1.0 : 1.0;
            const double w = t.sign * t.a * ::j1(k * t.a) / den;
            const double ep = std::exp(-k * (2.0 * H - zz)), em = std::exp(-k * (2.0 * H + zz));
            double kn = 1.0, f = 1.0, par = 1.0;
            for (int n = 0; n < 5; ++n, kn *= k, f *= flip, par = -par) {
                const double term = w * f * kn * (ep - par * em);
                v[n] += term;
                v[5 + n] += std::abs(term);
            }
        }
        return v;
    };
    const Arr<5> c = hankel_integral<5>(integrand, cover_kmax(H, zz_max), panel_width(H, zz_max, a_max), "axis");
    for (int n = 0; n < 5; ++n) d[n] -= c[n];
    return d;
}

OffAxisGradient offaxis_gradient(const Electrodes& e, double rho, double z, double H, GeometryMode mode) {
    check_point(z, H, mode);
    if (!(rho >= 0.0)) throw DomainError("axisym: rho must be non-negative");
    const std::vector<Term> terms = decompose(e, mode);
    const bool bounded = mode != GeometryMode::open_single_layer;
    OffAxisGradient g;
    double zz_max = 0.0, a_max = 0.0;
    for (const Term& t : terms) {
        const double zz = t.top ? H - z : z;
        const double flip = t.top ? -1.0 : 1.0;
        if (std::isinf(t.a)) {
            if (bounded) g.phi_z += t.sign * flip * (-1.0 / H);
            continue;
        }
        const OffAxisGradient o = open_disc_gradient(t.a, rho, zz);
        g.phi_rho += t.sign * o.phi_rho;
        g.phi_z += t.sign * flip * o.phi_z;
        zz_max = std::max(zz_max, zz);
        a_max = std::max(a_max, t.a);
    }
    if (!bounded || a_max == 0.0) return g;
    auto integrand = [&](double k) {
        Arr<4> v{};
        if (k == 0.0) return v;
        const double den = -std::expm1(-2.0 * k * H);
        const double j0 = ::j0(k * rho), j1 = ::j1(k * rho);
        for (const Term& t : terms) {
            if (std::isinf(t.a)) continue;
            const double zz = t.top ? H - z : z;
            const double flip = t.top ? -1.0 : 1.0;
            const double w = t.sign * t.a * ::j1(k * t.a) / den;
            const double ep = std::exp(-k * (2.0 * H - zz)), em = std::exp(-k * (2.0 * H + zz));
            const double tr = w * k * j1 * (ep - em), tz = w * flip * j0 * k * (ep + em);
            v[0] += tr;
            v[1] += tz;
            v[2] += std::abs(tr);
            v[3] += std::abs(tz);
        }
        return v;
    };
    const Arr<2> c = hankel_integral<2>(integrand, cover_kmax(H, zz_max),
                                        panel_width(H, zz_max, std::max(a_max, rho)), "off-axis");
    g.phi_rho += c[0];
    g.phi_z -= c[1];
    return g;
}

double offaxis_pseudopotential(const Electrodes& e, double rho, double z, double H, GeometryMode mode) {
    return offaxis_gradient(e, rho, z, H, mode).pseudo();
}

double on_axis_kappa(const Electrodes& e, double h, double H, GeometryMode mode) {
    const AxisDerivatives d = axis_potential(e, h, H, mode);
    return h * h * std::abs(d[2]) / std::cbrt(4.0);
}

PseudoMap pseudopotential_map(const Electrodes& e, double h, double H, GeometryMode mode, int n, double margin) {
    if (n < 3) throw DomainError("pseudopotential_map: need at least 3 points per axis");
    const bool bounded = mode != GeometryMode::open_single_layer;
    const double zlo = margin * h, zhi = bounded ? H - margin * h : 6.0 * h;
    PseudoMap m;
    m.rho.resize(n);
    m.z.resize(n);
    for (int i = 0; i < n; ++i) {
        m.rho[i] = 6.0 * h * i / (n - 1);
        m.z[i] = zlo + (zhi - zlo) * i / (n - 1);
    }
    m.P.resize(static_cast<std::size_t>(n) * n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (int j = 0; j < n; ++j) m.P[i * n + j] = offaxis_pseudopotential(e, m.rho[i], m.z[j], H, mode);
    });
    return m;
}

std::string map_csv(const PseudoMap& m) {
    std::string out = "rho,z,pseudo\n";
    char buf[128];
    for (std::size_t i = 0; i < m.rho.size(); ++i)
        for (std::size_t j = 0; j < m.z.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.12g\n", m.rho[i], m.z[j], m.at(i, j));
            out += buf;
        }
    return out;
}

namespace {

// Stationary value of a quadratic fitted to the 3 x 3 patch around (i, j),
// mirrored across the axis at i = 0. Returns false unless the fit is a saddle
// whose stationary point lies within the patch.
bool refine_saddle(const PseudoMap& m, std::size_t i, std::size_t j, double& value, double& rho, double& z) {
    const std::size_t nz = m.z.size();
    if (i + 1 >= m.rho.size() || j == 0 || j + 1 >= nz) return false;
    Eigen::Matrix<double, 9, 6> A;
    Eigen::Matrix<double, 9, 1> b;
    int r = 0;
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj, ++r) {
            const std::size_t ii = i == 0 && di < 0 ? 1 : i + di;
            A.row(r) << 1.0, di, dj, 0.5 * di * di, di * dj, 0.5 * dj * dj;
            b[r] = m.at(ii, j + dj);
        }
    const Eigen::Matrix<double, 6, 1> c = A.colPivHouseholderQr().solve(b);
    Eigen::Matrix2d hess;
    hess << c[3], c[4], c[4], c[5];
    if (hess.determinant() >= 0.0) return false;
    const Eigen::Vector2d x = -hess.fullPivLu().solve(Eigen::Vector2d(c[1], c[2]));
    if (std::abs(x[0]) > 1.0 || std::abs(x[1]) > 1.0) return false;
    value = c[0] + 0.5 * Eigen::Vector2d(c[1], c[2]).dot(x);
    const double dr = m.rho[1] - m.rho[0], dz = m.z[1] - m.z[0];
    rho = std::abs(m.rho[i] + x[0] * dr);
    z = m.z[j] + x[1] * dz;
    return true;
}

}  // namespace

DepthResult trap_depth(const PseudoMap& m, double h, double H, GeometryMode mode) {
    (void)H;
    const std::size_t nr = m.rho.size(), nz = m.z.size();
    const bool bounded = mode != GeometryMode::open_single_layer;
    std::size_t j0 = 0;
    for (std::size_t j = 1; j < nz; ++j)
        if (std::abs(m.z[j] - h) < std::abs(m.z[j0] - h)) j0 = j;
    auto escape = [&](std::size_t i, std::size_t j) {
        return i + 1 == nr || j == 0 || (bounded && j + 1 == nz) || (!bounded && m.z[j] >= 5.0 * h);
    };
    using Node = std::tuple<double, std::size_t, std::size_t>;
    std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
    std::vector<char> seen(nr * nz, 0);
    pq.emplace(m.at(0, j0), 0, j0);
    double level = -1.0;
    std::size_t si = 0, sj = j0;
    while (!pq.empty()) {
        const auto [v, i, j] = pq.top();
        pq.pop();
        if (seen[i * nz + j]) continue;
        seen[i * nz + j] = 1;
        if (v > level) {
            level = v;
            si = i;
            sj = j;
        }
        if (escape(i, j)) break;
        const long di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int q = 0; q < 4; ++q) {
            const long a = static_cast<long>(i) + di[q], b = static_cast<long>(j) + dj[q];
            if (a < 0 || b < 0 || a >= static_cast<long>(nr) || b >= static_cast<long>(nz)) continue;
            if (!seen[a * nz + b]) pq.emplace(m.at(a, b), a, b);
        }
    }
    DepthResult r;
    r.saddle_rho = m.rho[si];
    r.saddle_z = m.z[sj];
    if (escape(si, sj)) {
        r.escape = (si + 1 == nr || (!bounded && m.z[sj] >= 5.0 * h)) ? EscapeKind::far_field : EscapeKind::plane;
    } else {
        r.escape = EscapeKind::saddle;
        double v, rr, zz;
        if (refine_saddle(m, si, sj, v, rr, zz)) {
            level = v;
            r.saddle_rho = rr;
            r.saddle_z = zz;
        }
    }
    // The trap itself is an exact RF null.
    r.depth = level;
    return r;
}

DepthResult trap_depth(const Electrodes& e, double h, double H, GeometryMode mode, int n) {
    return trap_depth(pseudopotential_map(e, h, H, mode, n), h, H, mode);
}

std::string to_string(SingleTrapKind kind) {
    switch (kind) {
        case SingleTrapKind::open_ring: return "open_ring";
        case SingleTrapKind::bilayer_double_disc: return "bilayer_double_disc";
        case SingleTrapKind::covered_ring: return "covered_ring";
    }
    return "?";
}

SingleTrapKind parse_single_trap(std::string_view name) {
    if (name == "open_ring" || name == "open-ring") return SingleTrapKind::open_ring;
    if (name == "bilayer_double_disc" || name == "double-disc" || name == "double_disc")
        return SingleTrapKind::bilayer_double_disc;
    if (name == "covered_ring" || name == "covered-ring") return SingleTrapKind::covered_ring;
    throw DomainError("unknown single-trap mode '" + std::string(name) + "'");
}

Electrodes single_trap_electrodes(SingleTrapKind kind, double r1, double r2) {
    switch (kind) {
        case SingleTrapKind::open_ring:
        case SingleTrapKind::covered_ring: return {RingElectrode{r1, r2, Plane::bottom}};
        case SingleTrapKind::bilayer_double_disc:
            return {RingElectrode{0.0, r1, Plane::bottom}, RingElectrode{0.0, r1, Plane::top}};
    }
    return {};
}

double open_ring_outer_radius(double r1, double h) {
    // phi_z(h) = g(r1) - g(r2) with g(r) = r^2/(r^2+h^2)^(3/2), which peaks at r = sqrt(2) h.
    auto g = [h](double r) { return r * r / std::pow(r * r + h * h, 1.5); };
    const double peak = std::sqrt(2.0) * h;
    if (!(r1 > 0.0 && r1 < peak)) throw NoNullFound("open ring: no RF null at h for this inner radius");
    const double target = g(r1);
    double hi = 2.0 * peak;
    while (g(hi) > target) hi *= 2.0;
    boost::uintmax_t it = 200;
    const auto br = boost::math::tools::toms748_solve([&](double r) { return g(r) - target; }, peak, hi,
                                                      boost::math::tools::eps_tolerance<double>(52), it);
    return 0.5 * (br.first + br.second);
}

double covered_ring_height(double r1, double r2, double h) {
    const Electrodes e{RingElectrode{r1, r2, Plane::bottom}};
    auto f = [&](double H) { return axis_potential(e, h, H, GeometryMode::covered_single_layer)[1]; };
    double lo = 1.05 * h, flo = f(lo);
    for (int k = 0; k < 60; ++k) {
        const double hi = lo * 1.12, fhi = f(hi);
        if ((flo < 0.0) != (fhi < 0.0)) {
            boost::uintmax_t it = 200;
            const auto br = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                              boost::math::tools::eps_tolerance<double>(50), it);
            return 0.5 * (br.first + br.second);
        }
        lo = hi;
        flo = fhi;
    }
    throw NoNullFound("covered ring: no cover height puts the RF null at h");
}

namespace {

struct Seeded {
    std::vector<double> x;
    double f;
    int evals;
    bool converged;
};

Seeded best_of_restarts(const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<std::vector<double>>& seeds, double step) {
    Seeded best{{}, 1e300, 0, false};
    for (const auto& s : seeds) {
        const SimplexResult r = nelder_mead(f, s, step, 1e-12, 1e-9, 4000);
        best.evals += r.evaluations;
        if (r.f < best.f) {
            best.x = r.x;
            best.f = r.f;
            best.converged = r.converged;
        }
    }
    return best;
}

constexpr double kCoveredR2Cap = 60.0;

}  // namespace

SingleTrapResult optimize_single_trap(SingleTrapKind kind) {
    SingleTrapResult res;
    res.kind = kind;
    const double h = 1.0;
    res.h = h;
    switch (kind) {
        case SingleTrapKind::open_ring: {
            res.mode = GeometryMode::open_single_layer;
            auto f = [&](const std::vector<double>& x) {
                const double r1 = std::exp(x[0]);
                if (r1 >= std::sqrt(2.0) * h) return 1e300;
                const double r2 = open_ring_outer_radius(r1, h);
                return -on_axis_kappa(single_trap_electrodes(kind, r1, r2), h, 0.0, res.mode);
            };
            const Seeded s = best_of_restarts(f, {{std::log(0.6)}, {std::log(0.45)}, {std::log(0.9)}}, 0.1);
            res.r1 = std::exp(s.x[0]);
            res.r2 = res.r2_search = open_ring_outer_radius(res.r1, h);
            res.kappa = -s.f;
            res.converged = s.converged;
            res.evaluations = s.evals;
            break;
        }
        case SingleTrapKind::bilayer_double_disc: {
            res.mode = GeometryMode::bilayer;
            res.H = 2.0 * h;
            auto f = [&](const std::vector<double>& x) {
                const double r = std::exp(x[0]);
                return -on_axis_kappa(single_trap_electrodes(kind, r, 0.0), h, res.H, res.mode);
            };
            const Seeded s = best_of_restarts(f, {{std::log(0.8)}, {std::log(0.6)}, {std::log(1.1)}}, 0.1);
            res.r1 = 0.0;
            res.r2 = res.r2_search = std::exp(s.x[0]);
            res.kappa = -s.f;
            res.converged = s.converged;
            res.evaluations = s.evals;
            break;
        }
        case SingleTrapKind::covered_ring: {
            res.mode = GeometryMode::covered_single_layer;
            auto radii = [](const std::vector<double>& x) {
                return std::pair{std::exp(x[0]), std::min(std::exp(x[1]), kCoveredR2Cap)};
            };
            auto f = [&](const std::vector<double>& x) {
                const auto [r1, r2] = radii(x);
                if (r2 < 1.5 * r1) return 1e300;
                try {
                    const double H = covered_ring_height(r1, r2, h);
                    return -on_axis_kappa(single_trap_electrodes(kind, r1, r2), h, H, res.mode);
                } catch (const NoNullFound&) {
                    return 1e300;
                }
            };
            const Seeded s = best_of_restarts(
                f, {{std::log(0.8), std::log(10.0)}, {std::log(0.7), std::log(6.0)}, {std::log(0.95), std::log(20.0)}},
                0.15);
            const auto [r1, r2] = radii(s.x);
            const double best = -s.f;
            res.r1 = r1;
            res.r2_search = r2;
            // Smallest outer radius whose kappa is within 1e-6 of the best.
            auto kap = [&](double rr) {
                try {
                    return on_axis_kappa(single_trap_electrodes(kind, r1, rr), h, covered_ring_height(r1, rr, h),
                                         res.mode);
                } catch (const NoNullFound&) {
                    return 0.0;
                }
            };
            double lo = 2.0 * r1, hi = r2;
            if (kap(lo) >= (1.0 - 1e-6) * best) hi = lo;
            for (int it = 0; it < 50 && hi / lo > 1.0 + 1e-6; ++it) {
                const double mid = std::sqrt(lo * hi);
                (kap(mid) >= (1.0 - 1e-6) * best ? hi : lo) = mid;
            }
            res.r2 = hi;
            res.H = covered_ring_height(r1, hi, h);
            res.kappa = kap(hi);
            res.converged = s.converged;
            res.evaluations = s.evals;
            break;
        }
    }
    res.electrodes = single_trap_electrodes(kind, kind == SingleTrapKind::bilayer_double_disc ? res.r2 : res.r1,
                                            res.r2);
    const double H = std::isinf(res.H) ? 0.0 : res.H;
    res.depth = trap_depth(res.electrodes, h, H, res.mode);
    res.eta = h * h * res.depth.depth;
    return res;
}

std::string report(const SingleTrapResult& r) {
    std::string out;
    char buf[160];
    auto line = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.10g\n", k, v);
        out += buf;
    };
    out += "kind = " + to_string(r.kind) + "\n";
    out += "mode = " + to_string(r.mode) + "\n";
    line("h", r.h);
    line("kappa", r.kappa);
    line("eta", r.eta);
    if (r.kind == SingleTrapKind::bilayer_double_disc) {
        line("r", r.r2);
    } else {
        line("r1", r.r1);
        line("r2", r.r2);
        if (r.kind == SingleTrapKind::covered_ring) line("r2_search", r.r2_search);
    }
    if (std::isinf(r.H))
        out += "H = inf\n";
    else
        line("H", r.H);
    line("saddle_rho", r.depth.saddle_rho);
    line("saddle_z", r.depth.saddle_z);
    out += std::string("escape = ") +
           (r.depth.escape == EscapeKind::saddle ? "saddle" : r.depth.escape == EscapeKind::plane ? "plane" : "far_field") +
           "\n";
    out += std::string("converged = ") + (r.converged ? "true" : "false") + "\n";
    std::snprintf(buf, sizeof buf, "evaluations = %d\n", r.evaluations);
    out += buf;
    return out;
}

}  // namespace biplanar::axisym
