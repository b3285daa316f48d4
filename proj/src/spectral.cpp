#include "slab/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "slab/errors.hpp"

namespace slab {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not thread safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

namespace detail {

// Work buffers and FFTW plans for one grid shape. Every transform runs under
// `mutex`, on the same buffers, so results never depend on caller alignment.
struct TransformPlans {
    int nx, ny, nz, nyh;
    double* real = nullptr;          // nx * ny * nz
    fftw_complex* half = nullptr;    // nx * nyh * nz
    fftw_plan r2c = nullptr, c2r = nullptr;
    fftw_plan dct_fwd = nullptr, dct_inv = nullptr, dst_fwd = nullptr, dst_inv = nullptr;
    std::mutex mutex;

    TransformPlans(int nx_, int ny_, int nz_) : nx(nx_), ny(ny_), nz(nz_), nyh(ny_ / 2 + 1) {
        std::lock_guard lock(planner_mutex());
        real = fftw_alloc_real(static_cast<std::size_t>(nx) * ny * nz);
        half = fftw_alloc_complex(static_cast<std::size_t>(nx) * nyh * nz);

        fftw_iodim fwd_dims[2] = {{nx, ny * nz, nyh * nz}, {ny, nz, nz}};
        fftw_iodim inv_dims[2] = {{nx, nyh * nz, ny * nz}, {ny, nz, nz}};
        fftw_iodim planes = {nz, 1, 1};
        r2c = fftw_plan_guru_dft_r2c(2, fwd_dims, 1, &planes, real, half, FFTW_ESTIMATE);
        c2r = fftw_plan_guru_dft_c2r(2, inv_dims, 1, &planes, half, real, FFTW_ESTIMATE);

        // Vertical transforms act on the real and imaginary parts of every
        // horizontal mode of the half spectrum, in place.
        auto* h = reinterpret_cast<double*>(half);
        fftw_iodim line = {nz, 2, 2};
        fftw_iodim many[2] = {{nx * nyh, 2 * nz, 2 * nz}, {2, 1, 1}};
        auto plan_r2r = [&](fftw_r2r_kind kind) {
            return fftw_plan_guru_r2r(1, &line, 2, many, h, h, &kind, FFTW_ESTIMATE);
        };
        dct_fwd = plan_r2r(FFTW_REDFT10);
        dct_inv = plan_r2r(FFTW_REDFT01);
        dst_fwd = plan_r2r(FFTW_RODFT10);
        dst_inv = plan_r2r(FFTW_RODFT01);
        if (!r2c || !c2r || !dct_fwd || !dct_inv || !dst_fwd || !dst_inv)
            throw DimensionError("FFTW could not plan transforms for this grid");
    }

    ~TransformPlans() {
        std::lock_guard lock(planner_mutex());
        for (fftw_plan p : {r2c, c2r, dct_fwd, dct_inv, dst_fwd, dst_inv})
            if (p) fftw_destroy_plan(p);
        fftw_free(real);
        fftw_free(half);
    }

    TransformPlans(const TransformPlans&) = delete;
    TransformPlans& operator=(const TransformPlans&) = delete;

    std::size_t half_index(int ix, int iy, int l) const {
        return (static_cast<std::size_t>(ix) * nyh + iy) * nz + l;
    }
};

}  // namespace detail

const char* to_string(Parity p) { return p == Parity::Odd ? "odd" : "even"; }

// ---------------------------------------------------------------------------
// Domain

Domain::Domain(double length, int nx, int ny, int kmax, int nz)
    : length_(length), nx_(nx), ny_(ny), kmax_(kmax), nz_(nz) {
    std::ostringstream why;
    if (!(length > 0.0) || !std::isfinite(length)) why << "L must be positive; ";
    if (nx < 8 || nx % 2 != 0) why << "Nx must be even and >= 8; ";
    if (ny < 8 || ny % 2 != 0) why << "Ny must be even and >= 8; ";
    if (kmax < 1) why << "Kmax must be >= 1; ";
    if (nz < (3 * kmax) / 2 + 1) why << "Nz must exceed 3*Kmax/2 (alias-free products); ";
    if (!why.str().empty()) throw DimensionError("invalid domain: " + why.str());
    plans_ = std::make_shared<detail::TransformPlans>(nx, ny, nz);
}

double Domain::xi(int ix) const { return 2.0 * kPi * mode_number(ix, nx_) / length_; }
double Domain::eta(int iy) const { return 2.0 * kPi * mode_number(iy, ny_) / length_; }
double Domain::xi_deriv(int ix) const { return ix == nx_ / 2 ? 0.0 : xi(ix); }
double Domain::eta_deriv(int iy) const { return iy == ny_ / 2 ? 0.0 : eta(iy); }
double Domain::kz(int k) const { return kPi * k; }

double Domain::horizontal_symbol(int ix, int iy) const {
    const double a = xi(ix), b = eta(iy);
    return a * a + b * b;
}

double Domain::symbol(int ix, int iy, int k) const {
    const double c = kz(k);
    return horizontal_symbol(ix, iy) + c * c;
}

double Domain::mode_weight() const {
    const double dk = 2.0 * kPi / length_;
    return dk * dk;
}

bool Domain::in_dealias_band(int ix, int iy) const {
    return std::abs(mode_number(ix, nx_)) <= dealias_cutoff_x() &&
           std::abs(mode_number(iy, ny_)) <= dealias_cutoff_y();
}

double Domain::x(int i) const { return length_ * i / nx_; }
double Domain::y(int j) const { return length_ * j / ny_; }
double Domain::z(int l) const { return (l + 0.5) / nz_; }

bool Domain::operator==(const Domain& o) const {
    return length_ == o.length_ && nx_ == o.nx_ && ny_ == o.ny_ && kmax_ == o.kmax_ &&
           nz_ == o.nz_;
}

detail::TransformPlans& Domain::plans() const { return *plans_; }

// ---------------------------------------------------------------------------
// SpectralScalar

SpectralScalar::SpectralScalar(Domain domain, Parity parity)
    : domain_(std::move(domain)), parity_(parity), coeff_(domain_.spectral_size()) {}

cplx& SpectralScalar::mode(int n, int m, int k) {
    const int ix = (n % domain_.nx() + domain_.nx()) % domain_.nx();
    const int iy = (m % domain_.ny() + domain_.ny()) % domain_.ny();
    return at(ix, iy, k);
}

const cplx& SpectralScalar::mode(int n, int m, int k) const {
    return const_cast<SpectralScalar*>(this)->mode(n, m, k);
}

void SpectralScalar::check_compatible(const SpectralScalar& other) const {
    if (domain_ != other.domain_) throw DimensionError("fields live on different domains");
    if (parity_ != other.parity_)
        throw ParityError(std::string("cannot combine ") + to_string(parity_) + " and " +
                          to_string(other.parity_) + " fields");
}

SpectralScalar& SpectralScalar::operator+=(const SpectralScalar& other) {
    check_compatible(other);
    for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += other.coeff_[i];
    return *this;
}

SpectralScalar& SpectralScalar::operator-=(const SpectralScalar& other) {
    check_compatible(other);
    for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] -= other.coeff_[i];
    return *this;
}

SpectralScalar& SpectralScalar::operator*=(double s) {
    for (auto& c : coeff_) c *= s;
    return *this;
}

SpectralScalar& SpectralScalar::operator*=(cplx s) {
    for (auto& c : coeff_) c *= s;
    return *this;
}

SpectralScalar& SpectralScalar::axpy(double s, const SpectralScalar& other) {
    check_compatible(other);
    for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += s * other.coeff_[i];
    return *this;
}

bool SpectralScalar::all_finite() const {
    return std::all_of(coeff_.begin(), coeff_.end(),
                       [](cplx c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

double SpectralScalar::max_abs() const {
    double m = 0.0;
    for (auto c : coeff_) m = std::max(m, std::abs(c));
    return m;
}

SpectralScalar operator+(SpectralScalar a, const SpectralScalar& b) { return a += b; }
SpectralScalar operator-(SpectralScalar a, const SpectralScalar& b) { return a -= b; }
SpectralScalar operator*(double s, SpectralScalar a) { return a *= s; }
SpectralScalar operator-(SpectralScalar a) { return a *= -1.0; }

// ---------------------------------------------------------------------------
// PhysicalScalar

PhysicalScalar::PhysicalScalar(Domain domain)
    : domain_(std::move(domain)), values_(domain_.physical_size(), 0.0) {}

PhysicalScalar::PhysicalScalar(Domain domain, std::vector<double> values)
    : domain_(std::move(domain)), values_(std::move(values)) {
    if (values_.size() != domain_.physical_size())
        throw DimensionError("physical field has " + std::to_string(values_.size()) +
                             " samples, grid needs " + std::to_string(domain_.physical_size()));
}

// ---------------------------------------------------------------------------
// Transforms

SpectralScalar to_spectral(const PhysicalScalar& field, Parity parity) {
    const Domain& d = field.domain();
    if (field.values().size() != d.physical_size())
        throw DimensionError("physical field does not match its domain grid");
    auto& p = d.plans();
    SpectralScalar out(d, parity);

    std::lock_guard lock(p.mutex);
    std::copy(field.values().begin(), field.values().end(), p.real);
    fftw_execute(p.r2c);
    fftw_execute(parity == Parity::Odd ? p.dst_fwd : p.dct_fwd);

    const int nz = d.nz();
    const double norm = 1.0 / (static_cast<double>(d.nx()) * d.ny() * nz);
    auto half_coeff = [&](int ix, int iy, int k) -> cplx {
        // DCT-II: Y_k = n c_k (k >= 1), 2n c_0. DST-II: Y_{k-1} = n c_k.
        const int slot = parity == Parity::Odd ? k - 1 : k;
        const auto& v = p.half[p.half_index(ix, iy, slot)];
        const double scale = (parity == Parity::Even && k == 0) ? 0.5 * norm : norm;
        return {v[0] * scale, v[1] * scale};
    };

    const int k0 = parity == Parity::Odd ? 1 : 0;
    for (int ix = 0; ix < d.nx(); ++ix) {
        for (int iy = 0; iy < d.ny(); ++iy) {
            for (int k = k0; k <= d.kmax(); ++k) {
                if (iy < p.nyh) {
                    out.at(ix, iy, k) = half_coeff(ix, iy, k);
                } else {
                    out.at(ix, iy, k) =
                        std::conj(half_coeff((d.nx() - ix) % d.nx(), d.ny() - iy, k));
                }
            }
        }
    }
    return out;
}

PhysicalScalar to_physical(const SpectralScalar& f) {
    const Domain& d = f.domain();
    auto& p = d.plans();
    PhysicalScalar out(d);

    std::lock_guard lock(p.mutex);
    const std::size_t nhalf = static_cast<std::size_t>(d.nx()) * p.nyh * d.nz();
    std::fill(reinterpret_cast<double*>(p.half), reinterpret_cast<double*>(p.half) + 2 * nhalf,
              0.0);

    const bool odd = f.parity() == Parity::Odd;
    for (int ix = 0; ix < d.nx(); ++ix) {
        for (int iy = 0; iy < p.nyh; ++iy) {
            // DCT-III: X_0 = c_0, X_k = c_k / 2. DST-III: X_{k-1} = c_k / 2.
            for (int k = odd ? 1 : 0; k <= d.kmax(); ++k) {
                const cplx c = f.at(ix, iy, k);
                const double s = (!odd && k == 0) ? 1.0 : 0.5;
                auto& v = p.half[p.half_index(ix, iy, odd ? k - 1 : k)];
                v[0] = s * c.real();
                v[1] = s * c.imag();
            }
        }
    }
    fftw_execute(odd ? p.dst_inv : p.dct_inv);
    fftw_execute(p.c2r);
    std::copy(p.real, p.real + d.physical_size(), out.values().begin());
    return out;
}

std::vector<double> synthesize_at(const SpectralScalar& f, double z) {
    const Domain& d = f.domain();
    // Collapse the vertical series at height z into a k = 0 Even field, then
    // synthesize that plane.
    SpectralScalar plane(d, Parity::Even);
    const bool odd = f.parity() == Parity::Odd;
    for (int ix = 0; ix < d.nx(); ++ix) {
        for (int iy = 0; iy < d.ny(); ++iy) {
            cplx sum = 0.0;
            for (int k = odd ? 1 : 0; k <= d.kmax(); ++k) {
                const double basis = odd ? std::sin(kPi * k * z) : std::cos(kPi * k * z);
                sum += f.at(ix, iy, k) * basis;
            }
            plane.at(ix, iy, 0) = sum;
        }
    }
    const PhysicalScalar phys = to_physical(plane);
    std::vector<double> out(static_cast<std::size_t>(d.nx()) * d.ny());
    for (int i = 0; i < d.nx(); ++i)
        for (int j = 0; j < d.ny(); ++j) out[static_cast<std::size_t>(i) * d.ny() + j] = phys.at(i, j, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Differential operators

SpectralScalar deriv(const SpectralScalar& f, Axis axis) {
    const Domain& d = f.domain();
    if (axis != Axis::Z) {
        SpectralScalar out(d, f.parity());
        for (int ix = 0; ix < d.nx(); ++ix) {
            for (int iy = 0; iy < d.ny(); ++iy) {
                const cplx factor(0.0, axis == Axis::X ? d.xi_deriv(ix) : d.eta_deriv(iy));
                for (int k = 0; k <= d.kmax(); ++k) out.at(ix, iy, k) = factor * f.at(ix, iy, k);
            }
        }
        return out;
    }

    // d/dz sin(k pi z) = k pi cos(k pi z); d/dz cos(k pi z) = -k pi sin(k pi z).
    const Parity target = flip(f.parity());
    const double sign = f.parity() == Parity::Odd ? 1.0 : -1.0;
    SpectralScalar out(d, target);
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 1; k <= d.kmax(); ++k)
                out.at(ix, iy, k) = sign * d.kz(k) * f.at(ix, iy, k);
    return out;
}

SpectralScalar lambda_pow(const SpectralScalar& f, double alpha) {
    const Domain& d = f.domain();
    if (alpha < 0.0 && f.parity() == Parity::Even) {
        const double c0 = std::abs(f.at(0, 0, 0));
        const double scale = std::max(sobolev_norm(f, 0) / d.length(), f.max_abs());
        if (c0 > 1e-12 * scale || (scale == 0.0 && c0 > 0.0))
            throw SingularModeError("Lambda^alpha with alpha < 0 needs a vanishing constant mode");
    }
    SpectralScalar out(d, f.parity());
    for (int ix = 0; ix < d.nx(); ++ix) {
        for (int iy = 0; iy < d.ny(); ++iy) {
            for (int k = 0; k <= d.kmax(); ++k) {
                const double s = d.symbol(ix, iy, k);
                if (s == 0.0) {
                    out.at(ix, iy, k) = alpha == 0.0 ? f.at(ix, iy, k) : cplx(0.0);
                    continue;
                }
                out.at(ix, iy, k) = std::pow(s, 0.5 * alpha) * f.at(ix, iy, k);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Norms

namespace {

double vertical_weight(int k) { return k == 0 ? 1.0 : 0.5; }

}  // namespace

double sobolev_norm(const SpectralScalar& f, int m) {
    if (m < 0) throw DomainError("Sobolev order must be nonnegative");
    const Domain& d = f.domain();
    double sum = 0.0;
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) {
                const double a = std::norm(f.at(ix, iy, k));
                if (a == 0.0) continue;
                sum += vertical_weight(k) * std::pow(1.0 + d.symbol(ix, iy, k), m) * a;
            }
    // w * (L^2/2pi)^2 = L^2
    return d.length() * std::sqrt(sum);
}

double hat_norm(const SpectralScalar& f, HatNorm p) {
    const Domain& d = f.domain();
    const double hat_scale = d.length() * d.length() / (2.0 * kPi);
    double acc = 0.0;
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) {
                const double h = hat_scale * std::sqrt(vertical_weight(k)) * std::abs(f.at(ix, iy, k));
                switch (p) {
                    case HatNorm::L1: acc += h; break;
                    case HatNorm::L2: acc += h * h; break;
                    case HatNorm::Linf: acc = std::max(acc, h); break;
                }
            }
    switch (p) {
        case HatNorm::L1: return d.mode_weight() * acc;
        case HatNorm::L2: return std::sqrt(d.mode_weight() * acc);
        case HatNorm::Linf: return acc;
    }
    return acc;
}

double linf(const PhysicalScalar& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

double linf_physical(const SpectralScalar& f) { return linf(to_physical(f)); }

// ---------------------------------------------------------------------------
// Products

void truncate_to_band(SpectralScalar& f) {
    const Domain& d = f.domain();
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            if (!d.in_dealias_band(ix, iy))
                for (int k = 0; k <= d.kmax(); ++k) f.at(ix, iy, k) = 0.0;
}

void hermitian_project(SpectralScalar& f) {
    const Domain& d = f.domain();
    for (int ix = 0; ix < d.nx(); ++ix) {
        const int jx = (d.nx() - ix) % d.nx();
        for (int iy = 0; iy < d.ny(); ++iy) {
            const int jy = (d.ny() - iy) % d.ny();
            // Visit each mirror pair once.
            if (d.index(ix, iy, 0) > d.index(jx, jy, 0)) continue;
            for (int k = 0; k <= d.kmax(); ++k) {
                const cplx avg = 0.5 * (f.at(ix, iy, k) + std::conj(f.at(jx, jy, k)));
                f.at(ix, iy, k) = avg;
                f.at(jx, jy, k) = std::conj(avg);
            }
        }
    }
}

SpectralScalar product(const SpectralScalar& a, const SpectralScalar& b, bool dealias) {
    if (a.domain() != b.domain()) throw DimensionError("product of fields on different domains");
    PhysicalScalar pa = to_physical(a);
    const PhysicalScalar pb = to_physical(b);
    auto va = pa.values();
    auto vb = pb.values();
    for (std::size_t i = 0; i < va.size(); ++i) va[i] *= vb[i];
    SpectralScalar out = to_spectral(pa, product_parity(a.parity(), b.parity()));
    if (dealias) truncate_to_band(out);
    return out;
}

}  // namespace slab
