#pragma once

// Poisson inversion, vector calculus and Biot-Savart recovery on the slab.
//
// Vorticity fields have parities (Odd, Odd, Even) and velocity fields
// (Even, Even, Odd): omega_1 = omega_2 = 0 and d3 omega_3 = 0 on z = 0, 1, and
// u_3 = 0, d3 u_1 = d3 u_2 = 0 there.

#include <array>

#include "slab/spectral.hpp"

namespace slab {

enum class FieldRole { Vorticity, Velocity, Generic };

struct VectorField {
    std::array<SpectralScalar, 3> c;
    FieldRole role = FieldRole::Generic;

    VectorField(SpectralScalar a, SpectralScalar b, SpectralScalar d, FieldRole r = FieldRole::Generic);

    /// Zero field with the role's parities.
    static VectorField zero(const Domain& d, FieldRole role);

    SpectralScalar& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    const SpectralScalar& operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    const Domain& domain() const { return c[0].domain(); }

    VectorField& operator+=(const VectorField& o);
    VectorField& operator-=(const VectorField& o);
    VectorField& operator*=(double s);
};

/// Component parities required by a role. Generic has none.
std::array<Parity, 3> role_parities(FieldRole role);

/// Throws ParityError when the components do not carry the role's parities.
void check_role(const VectorField& v);

enum class MeanPolicy { Reject, Project };

/// -Delta applied spectrally (multiplies by xi^2 + eta^2 + pi^2 k^2).
SpectralScalar neg_laplacian(const SpectralScalar& f);

/// Solves -Delta psi = f, psi = 0 on z = 0, 1 (sine series).
SpectralScalar invert_dirichlet(const SpectralScalar& f);

/// Solves -Delta psi = f, d3 psi = 0 on z = 0, 1 (cosine series). The
/// constant mode of psi is fixed to zero. With MeanPolicy::Reject a
/// non-negligible constant mode of f throws SingularModeError.
SpectralScalar invert_neumann(const SpectralScalar& f, MeanPolicy policy);

/// True when the (0,0,0) coefficient is below 1e-12 of the field's RMS amplitude.
bool constant_mode_negligible(const SpectralScalar& f);

VectorField gradient(const SpectralScalar& f);
VectorField curl(const VectorField& v);
SpectralScalar divergence(const VectorField& v);

/// ||div v||_{L2} / ||v||_{H1}; zero for the zero field.
double divergence_ratio(const VectorField& v);

/// u = curl (-Delta)^{-1} omega with Dirichlet inversion for omega_1, omega_2 and
/// Neumann inversion for omega_3. Requires a divergence-free vorticity
/// (ContractError otherwise) with vanishing omega_3 mean mode.
VectorField velocity_from_vorticity(const VectorField& w);

/// Norm of a vector field as the root-sum-square of its component norms.
double sobolev_norm(const VectorField& v, int m);

}  // namespace slab
