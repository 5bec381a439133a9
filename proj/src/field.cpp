#include "biplanar/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include "biplanar/errors.hpp"

namespace biplanar {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Forward 2-D DFT of a row-major ny x nx array. The FFTW planner is not
// reentrant, so plan creation and destruction are serialized.
class Dft2d {
public:
    Dft2d(int nx, int ny) : n_(static_cast<std::size_t>(nx) * ny) {
        std::lock_guard lock(fftw_planner_mutex());
        in_ = fftw_alloc_complex(n_);
        out_ = fftw_alloc_complex(n_);
        if (!in_ || !out_) throw NumericalError("FFT buffer allocation failed");
        plan_ = fftw_plan_dft_2d(ny, nx, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        if (!plan_) throw NumericalError("FFT planning failed");
    }
    ~Dft2d() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    Dft2d(const Dft2d&) = delete;
    Dft2d& operator=(const Dft2d&) = delete;

    cd* in() { return reinterpret_cast<cd*>(in_); }
    const cd* out() const { return reinterpret_cast<const cd*>(out_); }
    void run() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

// Exact transform of one pixel column/row, shifted to the pixel origin and
// normalized by the pixel count: sinc(pi m / n) exp(-i pi m / n) / n.
std::vector<cd> pixel_factors(int n_modes, int npix) {
    std::vector<cd> f(2 * n_modes + 1);
    for (int m = -n_modes; m <= n_modes; ++m) {
        const double a = kPi * m / npix;
        f[m + n_modes] = sinc(a) * std::polar(1.0, -a) / static_cast<double>(npix);
    }
    return f;
}

int wrap_index(int m, int n) { return ((m % n) + n) % n; }

}  // namespace

GreenProfile surface_green_fourier(double k, double z, double H, GeometryMode mode) {
    if (k < 0.0 || z < 0.0) throw DomainError("surface_green_fourier: k and z must be non-negative");
    GreenProfile p;
    if (mode == GeometryMode::open_single_layer) {
        p.g = std::exp(-k * z);
        p.dg = -k * p.g;
        p.d2g = k * k * p.g;
        return p;
    }
    if (!(H > 0.0) || z > H) throw DomainError("surface_green_fourier: need 0 <= z <= H");
    if (k == 0.0) {
        p.g = (H - z) / H;
        p.dg = -1.0 / H;
        p.d2g = 0.0;
        return p;
    }
    const double den = -std::expm1(-2.0 * k * H);
    const double a = std::exp(-k * z);
    const double b = std::exp(-2.0 * k * (H - z));
    p.g = a * -std::expm1(-2.0 * k * (H - z)) / den;
    p.dg = -k * a * (1.0 + b) / den;
    p.d2g = k * k * p.g;
    return p;
}

GreenProfile top_plane_green(double k, double z, double H) {
    GreenProfile p = surface_green_fourier(k, H - z, H, GeometryMode::bilayer);
    p.dg = -p.dg;
    return p;
}

cd SpectralField::at(int mx, int my) const {
    if (std::abs(mx) > n_modes_ || std::abs(my) > n_modes_)
        throw DomainError("SpectralField::at: mode index out of range");
    const std::size_t q = static_cast<std::size_t>(wrap_index(my, ny_)) * nx_ + wrap_index(mx, nx_);
    return fx_[mx + n_modes_] * fy_[my + n_modes_] * dft_[q];
}

SpectralField SpectralField::translated(const Vec2& shift, double lx, double ly) const {
    SpectralField s = *this;
    for (int m = -n_modes_; m <= n_modes_; ++m) {
        s.fx_[m + n_modes_] *= std::polar(1.0, -2.0 * kPi * m * shift.x() / lx);
        s.fy_[m + n_modes_] *= std::polar(1.0, -2.0 * kPi * m * shift.y() / ly);
    }
    return s;
}

SpectralField pattern_spectrum(const ElectrodePattern& p, int n_modes) {
    p.validate();
    if (n_modes < 1) throw DomainError("pattern_spectrum: n_modes must be >= 1");
    SpectralField s;
    s.n_modes_ = n_modes;
    s.nx_ = p.nx;
    s.ny_ = p.ny;
    const std::size_t n = p.size();
    s.dft_.resize(n);
    {
        Dft2d fft(p.nx, p.ny);
        for (std::size_t i = 0; i < n; ++i) fft.in()[i] = p.w[i];
        fft.run();
        std::copy(fft.out(), fft.out() + n, s.dft_.begin());
    }
    // Make the symmetry of a real input exact.
    for (int qy = 0; qy < p.ny; ++qy) {
        for (int qx = 0; qx < p.nx; ++qx) {
            const std::size_t a = static_cast<std::size_t>(qy) * p.nx + qx;
            const std::size_t b = static_cast<std::size_t>((p.ny - qy) % p.ny) * p.nx + (p.nx - qx) % p.nx;
            if (a == b)
                s.dft_[a] = s.dft_[a].real();
            else if (a < b)
                s.dft_[b] = std::conj(s.dft_[a]);
        }
    }
    s.fx_ = pixel_factors(n_modes, p.nx);
    s.fy_ = pixel_factors(n_modes, p.ny);
    return s;
}

int required_modes(double max_period, double z_min, double tol) {
    if (!(z_min > 0.0) || !(max_period > 0.0)) throw DomainError("required_modes: z_min and period must be positive");
    if (!(tol > 0.0 && tol < 1.0)) throw DomainError("required_modes: tol must lie in (0, 1)");
    const double n = std::log(1.0 / tol) * max_period / (2.0 * kPi * z_min);
    if (n > 1e6) throw DomainError("required_modes: z_min too small for the requested tolerance");
    return std::max(1, static_cast<int>(std::ceil(n - 1e-9)));
}

int required_modes(const BilayerGeometry& geom, double z_min, double tol) {
    return required_modes(geom.cell.max_period(), z_min, tol);
}

FieldEngine::FieldEngine(BilayerGeometry geom, EngineOptions options) : geom_(std::move(geom)), tol_(options.tol) {
    geom_.normalize();
    double z_min = options.z_min;
    if (z_min <= 0.0) z_min = geom_.bounded() ? 0.1 * geom_.H : 0.1 * geom_.cell.min_period();
    n_modes_ = required_modes(geom_, z_min, tol_);
    bottom_ = pattern_spectrum(geom_.bottom, n_modes_);
    if (geom_.mode == GeometryMode::bilayer)
        top_ = pattern_spectrum(*geom_.top, n_modes_).translated(geom_.offset, geom_.cell.lx, geom_.cell.ly);
}

double FieldEngine::z_upper() const {
    return geom_.bounded() ? geom_.H : std::numeric_limits<double>::infinity();
}

int FieldEngine::plane_modes(double distance, bool& truncated) const {
    const int need = required_modes(geom_.cell.max_period(), distance, tol_);
    if (need > n_modes_) {
        truncated = true;
        return n_modes_;
    }
    return need;
}

namespace {

void check_height(const FieldEngine& e, double z) {
    const double m = e.margin() * (1.0 - 1e-9);
    if (!(z >= m) || (e.geometry().bounded() && !(z <= e.geometry().H - m)))
        throw DomainError("field evaluation closer than one pixel width to an electrode plane");
}

template <class Profile>
void accumulate_plane(const SpectralField& s, int n, const Vec3& r, double lx, double ly, Profile profile,
                      FieldEval& out) {
    const double x = r.x(), y = r.y();
    std::vector<cd> ex(n + 1), ey(2 * n + 1);
    for (int m = 0; m <= n; ++m) ex[m] = std::polar(1.0, 2.0 * kPi * m * x / lx);
    for (int m = -n; m <= n; ++m) ey[m + n] = std::polar(1.0, 2.0 * kPi * m * y / ly);

    double phi = 0, gx = 0, gy = 0, gz = 0, hxx = 0, hyy = 0, hzz = 0, hxy = 0, hxz = 0, hyz = 0;
    {
        const GreenProfile g0 = profile(0.0);
        const double c0 = s.at(0, 0).real();
        phi += c0 * g0.g;
        gz += c0 * g0.dg;
        hzz += c0 * g0.d2g;
    }
    auto add = [&](int mx, int my, const GreenProfile& g) {
        const double kx = 2.0 * kPi * mx / lx, ky = 2.0 * kPi * my / ly;
        const cd t = s.at(mx, my) * ex[mx] * ey[my + n];
        const double re = 2.0 * t.real(), im = 2.0 * t.imag();
        phi += re * g.g;
        gx -= kx * im * g.g;
        gy -= ky * im * g.g;
        gz += re * g.dg;
        hxx -= kx * kx * re * g.g;
        hyy -= ky * ky * re * g.g;
        hxy -= kx * ky * re * g.g;
        hzz += re * g.d2g;
        hxz -= kx * im * g.dg;
        hyz -= ky * im * g.dg;
    };
    for (int mx = 0; mx <= n; ++mx) {
        for (int my = 0; my <= n; ++my) {
            if (mx == 0 && my == 0) continue;
            const double kx = 2.0 * kPi * mx / lx, ky = 2.0 * kPi * my / ly;
            const GreenProfile g = profile(std::hypot(kx, ky));
            if (mx == 0) {
                add(0, my, g);
            } else {
                add(mx, my, g);
                if (my > 0) add(mx, -my, g);
            }
        }
    }
    out.phi += phi;
    out.grad += Vec3(gx, gy, gz);
    Mat3 h;
    h << hxx, hxy, hxz, hxy, hyy, hyz, hxz, hyz, hzz;
    out.hessian += h;
}

}  // namespace

FieldEval FieldEngine::evaluate(const Vec3& r) const {
    check_height(*this, r.z());
    FieldEval out;
    const double lx = geom_.cell.lx, ly = geom_.cell.ly, H = geom_.H, z = r.z();
    const GeometryMode mode = geom_.mode;
    const int nb = plane_modes(z, out.truncated);
    accumulate_plane(bottom_, nb, r, lx, ly, [&](double k) { return surface_green_fourier(k, z, H, mode); }, out);
    if (mode == GeometryMode::bilayer) {
        const int nt = plane_modes(H - z, out.truncated);
        accumulate_plane(top_, nt, r, lx, ly, [&](double k) { return top_plane_green(k, z, H); }, out);
    }
    return out;
}

std::vector<Vec3> FieldEngine::gradient_layer(double z, int gx, int gy) const {
    check_height(*this, z);
    if (gx < 1 || gy < 1) throw DomainError("gradient_layer: grid must be non-empty");
    const double lx = geom_.cell.lx, ly = geom_.cell.ly, H = geom_.H;
    bool trunc = false;
    const int nb = plane_modes(z, trunc);
    const int nt = geom_.mode == GeometryMode::bilayer ? plane_modes(H - z, trunc) : 0;
    const int n = std::max(nb, nt);
    const int w = 2 * n + 1;

    // Combined z-profiles of both planes per mode.
    std::vector<cd> s0(static_cast<std::size_t>(w) * w), s1(s0.size());
    for (int mx = -n; mx <= n; ++mx) {
        for (int my = -n; my <= n; ++my) {
            const double k = std::hypot(2.0 * kPi * mx / lx, 2.0 * kPi * my / ly);
            cd a = 0.0, b = 0.0;
            if (std::abs(mx) <= nb && std::abs(my) <= nb) {
                const GreenProfile g = surface_green_fourier(k, z, H, geom_.mode);
                const cd c = bottom_.at(mx, my);
                a += c * g.g;
                b += c * g.dg;
            }
            if (nt > 0 && std::abs(mx) <= nt && std::abs(my) <= nt) {
                const GreenProfile g = top_plane_green(k, z, H);
                const cd c = top_.at(mx, my);
                a += c * g.g;
                b += c * g.dg;
            }
            const std::size_t q = static_cast<std::size_t>(mx + n) * w + (my + n);
            s0[q] = a;
            s1[q] = b;
        }
    }
    // Partial sums over my for every grid row.
    std::vector<cd> ey(static_cast<std::size_t>(gy) * w);
    for (int j = 0; j < gy; ++j)
        for (int my = -n; my <= n; ++my)
            ey[static_cast<std::size_t>(j) * w + my + n] = std::polar(1.0, 2.0 * kPi * my * j / gy);
    std::vector<cd> t0(static_cast<std::size_t>(w) * gy), ty(t0.size()), t1(t0.size());
    for (int mx = 0; mx < w; ++mx) {
        for (int j = 0; j < gy; ++j) {
            cd a = 0.0, b = 0.0, c = 0.0;
            const cd* e = &ey[static_cast<std::size_t>(j) * w];
            for (int my = 0; my < w; ++my) {
                const std::size_t q = static_cast<std::size_t>(mx) * w + my;
                const double ky = 2.0 * kPi * (my - n) / ly;
                a += s0[q] * e[my];
                b += cd(0.0, ky) * s0[q] * e[my];
                c += s1[q] * e[my];
            }
            const std::size_t q = static_cast<std::size_t>(mx) * gy + j;
            t0[q] = a;
            ty[q] = b;
            t1[q] = c;
        }
    }
    std::vector<Vec3> out(static_cast<std::size_t>(gx) * gy);
    std::vector<cd> ex(w);
    for (int i = 0; i < gx; ++i) {
        for (int mx = -n; mx <= n; ++mx) ex[mx + n] = std::polar(1.0, 2.0 * kPi * mx * i / gx);
        for (int j = 0; j < gy; ++j) {
            double ax = 0, ay = 0, az = 0;
            for (int mx = 0; mx < w; ++mx) {
                const std::size_t q = static_cast<std::size_t>(mx) * gy + j;
                const double kx = 2.0 * kPi * (mx - n) / lx;
                ax += (cd(0.0, kx) * t0[q] * ex[mx]).real();
                ay += (ty[q] * ex[mx]).real();
                az += (t1[q] * ex[mx]).real();
            }
            out[static_cast<std::size_t>(j) * gx + i] = Vec3(ax, ay, az);
        }
    }
    return out;
}

PixelKernels FieldEngine::pixel_kernels(const Vec3& r, double tol) const {
    check_height(*this, r.z());
    const int nx = geom_.bottom.nx, ny = geom_.bottom.ny;
    const double lx = geom_.cell.lx, ly = geom_.cell.ly, H = geom_.H, z = r.z();
    PixelKernels out;
    out.nx = nx;
    out.ny = ny;
    const std::size_t npix = static_cast<std::size_t>(nx) * ny;
    Dft2d fft(nx, ny);

    auto plane = [&](double distance, const Vec2& shift, auto profile,
                     std::array<std::vector<double>, kComponentCount>& dst) {
        const int n = required_modes(geom_.cell.max_period(), distance, tol);
        const std::vector<cd> fx = pixel_factors(n, nx), fy = pixel_factors(n, ny);
        std::array<std::vector<cd>, kComponentCount> folded;
        for (auto& f : folded) f.assign(npix, 0.0);
        for (int mx = -n; mx <= n; ++mx) {
            const double kx = 2.0 * kPi * mx / lx;
            for (int my = -n; my <= n; ++my) {
                const double ky = 2.0 * kPi * my / ly;
                const GreenProfile g = profile(std::hypot(kx, ky));
                const cd base = fx[mx + n] * fy[my + n] *
                                std::polar(1.0, kx * (r.x() - shift.x()) + ky * (r.y() - shift.y()));
                const std::size_t q = static_cast<std::size_t>(wrap_index(my, ny)) * nx + wrap_index(mx, nx);
                const cd i1(0.0, 1.0);
                folded[kPhi][q] += base * g.g;
                folded[kGx][q] += base * i1 * kx * g.g;
                folded[kGy][q] += base * i1 * ky * g.g;
                folded[kGz][q] += base * g.dg;
                folded[kHxx][q] -= base * kx * kx * g.g;
                folded[kHyy][q] -= base * ky * ky * g.g;
                folded[kHzz][q] += base * g.d2g;
                folded[kHxy][q] -= base * kx * ky * g.g;
                folded[kHxz][q] += base * i1 * kx * g.dg;
                folded[kHyz][q] += base * i1 * ky * g.dg;
            }
        }
        for (int c = 0; c < kComponentCount; ++c) {
            std::copy(folded[c].begin(), folded[c].end(), fft.in());
            fft.run();
            dst[c].resize(npix);
            for (std::size_t p = 0; p < npix; ++p) dst[c][p] = fft.out()[p].real();
        }
    };

    plane(z, Vec2::Zero(), [&](double k) { return surface_green_fourier(k, z, H, geom_.mode); }, out.bottom);
    if (geom_.mode == GeometryMode::bilayer)
        plane(H - z, geom_.offset, [&](double k) { return top_plane_green(k, z, H); }, out.top);
    return out;
}

}  // namespace biplanar
