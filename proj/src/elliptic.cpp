#include "slab/elliptic.hpp"

#include <cmath>
#include <string>

#include "slab/errors.hpp"

namespace slab {

VectorField::VectorField(SpectralScalar a, SpectralScalar b, SpectralScalar d, FieldRole r)
    : c{std::move(a), std::move(b), std::move(d)}, role(r) {
    if (c[0].domain() != c[1].domain() || c[0].domain() != c[2].domain())
        throw DimensionError("vector components live on different domains");
    check_role(*this);
}

VectorField VectorField::zero(const Domain& d, FieldRole role) {
    auto p = role_parities(role);
    if (role == FieldRole::Generic) p = role_parities(FieldRole::Velocity);
    return VectorField(SpectralScalar(d, p[0]), SpectralScalar(d, p[1]), SpectralScalar(d, p[2]), role);
}

VectorField& VectorField::operator+=(const VectorField& o) {
    for (int i = 0; i < 3; ++i) (*this)[i] += o[i];
    return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
    for (int i = 0; i < 3; ++i) (*this)[i] -= o[i];
    return *this;
}

VectorField& VectorField::operator*=(double s) {
    for (auto& x : c) x *= s;
    return *this;
}

std::array<Parity, 3> role_parities(FieldRole role) {
    switch (role) {
        case FieldRole::Vorticity: return {Parity::Odd, Parity::Odd, Parity::Even};
        case FieldRole::Velocity: return {Parity::Even, Parity::Even, Parity::Odd};
        case FieldRole::Generic: break;
    }
    return {Parity::Odd, Parity::Odd, Parity::Odd};
}

void check_role(const VectorField& v) {
    if (v.role == FieldRole::Generic) return;
    const auto want = role_parities(v.role);
    for (int i = 0; i < 3; ++i)
        if (v[i].parity() != want[static_cast<std::size_t>(i)])
            throw ParityError("component " + std::to_string(i + 1) + " has parity " +
                              to_string(v[i].parity()) + ", role requires " +
                              to_string(want[static_cast<std::size_t>(i)]));
}

SpectralScalar neg_laplacian(const SpectralScalar& f) {
    const Domain& d = f.domain();
    SpectralScalar out(d, f.parity());
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) out.at(ix, iy, k) = d.symbol(ix, iy, k) * f.at(ix, iy, k);
    return out;
}

namespace {

SpectralScalar divide_by_symbol(const SpectralScalar& f) {
    const Domain& d = f.domain();
    SpectralScalar out(d, f.parity());
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) {
                const double s = d.symbol(ix, iy, k);
                out.at(ix, iy, k) = s == 0.0 ? cplx(0.0) : f.at(ix, iy, k) / s;
            }
    return out;
}

}  // namespace

bool constant_mode_negligible(const SpectralScalar& f) {
    const double c0 = std::abs(f.at(0, 0, 0));
    if (c0 == 0.0) return true;
    const double rms = sobolev_norm(f, 0) / f.domain().length();
    return c0 <= 1e-12 * rms;
}

SpectralScalar invert_dirichlet(const SpectralScalar& f) {
    if (f.parity() != Parity::Odd) throw ParityError("Dirichlet inversion needs an Odd (sine) field");
    return divide_by_symbol(f);
}

SpectralScalar invert_neumann(const SpectralScalar& f, MeanPolicy policy) {
    if (f.parity() != Parity::Even) throw ParityError("Neumann inversion needs an Even (cosine) field");
    if (policy == MeanPolicy::Reject && !constant_mode_negligible(f))
        throw SingularModeError("Neumann inversion of a field with nonzero mean mode");
    return divide_by_symbol(f);
}

VectorField gradient(const SpectralScalar& f) {
    return VectorField(deriv(f, Axis::X), deriv(f, Axis::Y), deriv(f, Axis::Z));
}

VectorField curl(const VectorField& v) {
    // Each component of the curl subtracts two derivatives that must agree in parity.
    if (v[2].parity() != flip(v[1].parity()) || v[2].parity() != flip(v[0].parity()))
        throw ParityError("curl needs component parities of a velocity or vorticity field");
    FieldRole out_role = FieldRole::Generic;
    if (v.role == FieldRole::Velocity) out_role = FieldRole::Vorticity;
    if (v.role == FieldRole::Vorticity) out_role = FieldRole::Velocity;
    return VectorField(deriv(v[2], Axis::Y) - deriv(v[1], Axis::Z),
                       deriv(v[0], Axis::Z) - deriv(v[2], Axis::X),
                       deriv(v[1], Axis::X) - deriv(v[0], Axis::Y), out_role);
}

SpectralScalar divergence(const VectorField& v) {
    if (v[0].parity() != v[1].parity() || v[2].parity() != flip(v[0].parity()))
        throw ParityError("divergence needs component parities of a velocity or vorticity field");
    auto out = deriv(v[0], Axis::X);
    out += deriv(v[1], Axis::Y);
    out += deriv(v[2], Axis::Z);
    return out;
}

double sobolev_norm(const VectorField& v, int m) {
    double s = 0.0;
    for (const auto& x : v.c) {
        const double n = sobolev_norm(x, m);
        s += n * n;
    }
    return std::sqrt(s);
}

double divergence_ratio(const VectorField& v) {
    const double scale = sobolev_norm(v, 1);
    if (scale == 0.0) return 0.0;
    return sobolev_norm(divergence(v), 0) / scale;
}

VectorField velocity_from_vorticity(const VectorField& w) {
    if (w.role != FieldRole::Vorticity) throw ParityError("velocity_from_vorticity needs a vorticity field");
    const double div = divergence_ratio(w);
    if (div > 1e-10)
        throw ContractError("vorticity is not divergence free (relative divergence " +
                            std::to_string(div) + ")");
    const auto psi1 = invert_dirichlet(w[0]);
    const auto psi2 = invert_dirichlet(w[1]);
    const auto psi3 = invert_neumann(w[2], MeanPolicy::Reject);
    return VectorField(deriv(psi3, Axis::Y) - deriv(psi2, Axis::Z),
                       deriv(psi1, Axis::Z) - deriv(psi3, Axis::X),
                       deriv(psi2, Axis::X) - deriv(psi1, Axis::Y), FieldRole::Velocity);
}

}  // namespace slab
