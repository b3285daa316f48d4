#pragma once

// Mixed Fourier x sine/cosine representation of scalar fields on the slab
// T_L^2 x (0,1).
//
// A scalar field is stored as complex amplitudes of the basis
//
//     e^{i(xi_n x + eta_m y)} * sin(k pi z)   (Parity::Odd,  k = 1..Kmax)
//     e^{i(xi_n x + eta_m y)} * cos(k pi z)   (Parity::Even, k = 0..Kmax)
//
// with xi_n = 2 pi n / L. Coefficient arrays are row-major with n_xi outer,
// n_eta middle and k inner; the horizontal indices run in FFT order
// (0, 1, ..., N/2-1, -N/2, ..., -1). Slot k = 0 of an Odd field is always 0.
//
// Norms are computed from the unitary hat function
//
//     f_hat(xi, eta, k) = (L^2 / 2pi) * sqrt(nu_k) * c(n, m, k),  nu_0 = 1, nu_k = 1/2,
//
// integrated with the Riemann weight (2pi/L)^2 per horizontal mode. With this
// convention sobolev_norm(f, 0) is exactly the L2 norm of f over the periodic
// slab.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace slab {

using cplx = std::complex<double>;

enum class Parity { Odd, Even };
enum class Axis { X, Y, Z };

const char* to_string(Parity p);

/// Parity of a product: equal parities give Even, different give Odd.
constexpr Parity product_parity(Parity a, Parity b) {
    return a == b ? Parity::Even : Parity::Odd;
}

constexpr Parity flip(Parity p) { return p == Parity::Odd ? Parity::Even : Parity::Odd; }

namespace detail {
struct TransformPlans;
}

/// Periodic horizontal box of side L, Kmax vertical modes, Nz interior
/// collocation points z_l = (l + 1/2) / Nz.
class Domain {
public:
    Domain(double length, int nx, int ny, int kmax, int nz);

    double length() const { return length_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int kmax() const { return kmax_; }
    int nz() const { return nz_; }
    int nk() const { return kmax_ + 1; }

    std::size_t spectral_size() const {
        return static_cast<std::size_t>(nx_) * ny_ * nk();
    }
    std::size_t physical_size() const {
        return static_cast<std::size_t>(nx_) * ny_ * nz_;
    }
    std::size_t index(int ix, int iy, int k) const {
        return (static_cast<std::size_t>(ix) * ny_ + iy) * nk() + k;
    }
    std::size_t grid_index(int i, int j, int l) const {
        return (static_cast<std::size_t>(i) * ny_ + j) * nz_ + l;
    }

    // Signed mode number of an FFT-order index.
    static int mode_number(int idx, int n) { return idx < n / 2 ? idx : idx - n; }

    double xi(int ix) const;
    double eta(int iy) const;
    // Wavenumbers used for differentiation: the Nyquist mode is mapped to 0.
    double xi_deriv(int ix) const;
    double eta_deriv(int iy) const;
    double kz(int k) const;
    // Full symbol xi^2 + eta^2 + pi^2 k^2.
    double symbol(int ix, int iy, int k) const;
    double horizontal_symbol(int ix, int iy) const;

    /// (2pi/L)^2, the area element of one horizontal mode.
    double mode_weight() const;

    // 2/3 rule: horizontal modes with |n| <= cutoff survive products.
    int dealias_cutoff_x() const { return (nx_ + 2) / 3 - 1; }
    int dealias_cutoff_y() const { return (ny_ + 2) / 3 - 1; }
    bool in_dealias_band(int ix, int iy) const;

    double x(int i) const;
    double y(int j) const;
    double z(int l) const;

    bool operator==(const Domain& other) const;
    bool operator!=(const Domain& other) const { return !(*this == other); }

    detail::TransformPlans& plans() const;

private:
    double length_;
    int nx_, ny_, kmax_, nz_;
    std::shared_ptr<detail::TransformPlans> plans_;
};

class SpectralScalar {
public:
    SpectralScalar(Domain domain, Parity parity);

    const Domain& domain() const { return domain_; }
    Parity parity() const { return parity_; }

    std::span<cplx> coeff() { return coeff_; }
    std::span<const cplx> coeff() const { return coeff_; }

    cplx& at(int ix, int iy, int k) { return coeff_[domain_.index(ix, iy, k)]; }
    const cplx& at(int ix, int iy, int k) const { return coeff_[domain_.index(ix, iy, k)]; }

    // Coefficient for signed mode numbers (n, m).
    cplx& mode(int n, int m, int k);
    const cplx& mode(int n, int m, int k) const;

    SpectralScalar& operator+=(const SpectralScalar& other);
    SpectralScalar& operator-=(const SpectralScalar& other);
    SpectralScalar& operator*=(double s);
    SpectralScalar& operator*=(cplx s);

    // this += s * other
    SpectralScalar& axpy(double s, const SpectralScalar& other);

    bool all_finite() const;
    double max_abs() const;

private:
    void check_compatible(const SpectralScalar& other) const;

    Domain domain_;
    Parity parity_;
    std::vector<cplx> coeff_;
};

SpectralScalar operator+(SpectralScalar a, const SpectralScalar& b);
SpectralScalar operator-(SpectralScalar a, const SpectralScalar& b);
SpectralScalar operator*(double s, SpectralScalar a);
SpectralScalar operator-(SpectralScalar a);

/// Real values on the (x_i, y_j, z_l) grid, z fastest.
class PhysicalScalar {
public:
    explicit PhysicalScalar(Domain domain);
    PhysicalScalar(Domain domain, std::vector<double> values);

    const Domain& domain() const { return domain_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& at(int i, int j, int l) { return values_[domain_.grid_index(i, j, l)]; }
    double at(int i, int j, int l) const { return values_[domain_.grid_index(i, j, l)]; }

    template <class F>
    static PhysicalScalar sample(const Domain& d, F&& f) {
        PhysicalScalar out(d);
        for (int i = 0; i < d.nx(); ++i)
            for (int j = 0; j < d.ny(); ++j)
                for (int l = 0; l < d.nz(); ++l) out.at(i, j, l) = f(d.x(i), d.y(j), d.z(l));
        return out;
    }

private:
    Domain domain_;
    std::vector<double> values_;
};

SpectralScalar to_spectral(const PhysicalScalar& field, Parity parity);
PhysicalScalar to_physical(const SpectralScalar& f);

/// Synthesizes the field on the horizontal grid at an arbitrary height z,
/// by direct vertical summation. Row-major (i, j).
std::vector<double> synthesize_at(const SpectralScalar& f, double z);

SpectralScalar deriv(const SpectralScalar& f, Axis axis);

/// Lambda^alpha: multiplies every coefficient by (xi^2 + eta^2 + pi^2 k^2)^{alpha/2}.
/// Throws SingularModeError for alpha < 0 when the constant mode of an Even
/// field is not negligible.
SpectralScalar lambda_pow(const SpectralScalar& f, double alpha);

double sobolev_norm(const SpectralScalar& f, int m);

enum class HatNorm { L1, L2, Linf };
double hat_norm(const SpectralScalar& f, HatNorm p);

double linf_physical(const SpectralScalar& f);
double linf(const PhysicalScalar& f);

/// Pointwise product evaluated on the collocation grid, projected back onto
/// the (dealiased) retained modes.
SpectralScalar product(const SpectralScalar& a, const SpectralScalar& b, bool dealias = true);

/// Zeroes horizontal modes outside the 2/3 band.
void truncate_to_band(SpectralScalar& f);

/// Replaces c(n,m,k) by the Hermitian average (c(n,m,k) + conj(c(-n,-m,k))) / 2,
/// i.e. projects onto real-valued fields. Nyquist rows are treated as their own
/// mirrors.
void hermitian_project(SpectralScalar& f);

}  // namespace slab
