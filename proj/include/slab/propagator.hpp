#pragma once

// Exact solution operators of the linearized system.
//
// Per horizontal/vertical mode with q = xi^2 + eta^2 and Xi = q + pi^2 k^2 the
// temperature obeys theta'' + Xi theta' + (q/Xi) theta = F, whose
// characteristic roots are lambda_{+-} = (-Xi +- sigma)/2 with
// sigma^2 = Xi^2 - 4q/Xi.

#include <array>
#include <functional>
#include <optional>

#include "slab/spectral.hpp"
#include "slab/state.hpp"

namespace slab {

struct ModeDispersion {
    double q = 0.0;
    double Xi = 0.0;
    double sigma = 0.0;
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
};

/// Throws DomainError for k < 1 or q < 0. lambda_plus uses the rationalized
/// form -2q / (Xi^2 (1 + sqrt(1 - 4q/Xi^3))), free of cancellation.
ModeDispersion dispersion(double q, int k);

/// -2q/Xi^2 <= l+ <= -q/Xi^2, -Xi <= l- <= -Xi/2, sigma >= sqrt(pi^4 - 4) and
/// both roots solve l^2 + Xi l + q/Xi = 0 to 1e-12 Xi^2.
bool within_dispersion_bounds(const ModeDispersion& d);

struct SemigroupFactors {
    double L1 = 1.0;    // (e^{l+ t} + e^{l- t}) / 2
    double L2 = 0.0;    // (e^{l+ t} - e^{l- t}) / sigma
    double dtL1 = 0.0;
    double dtL2 = 1.0;
};

SemigroupFactors semigroup_factors(double t, const ModeDispersion& d);

/// e^{t Delta}: multiplies each coefficient by e^{-Xi t}.
SpectralScalar heat_propagate(const SpectralScalar& f, double t);

/// Time-indexed forcing for the Duhamel term.
using ForcingSampler = std::function<SpectralScalar(double)>;

/// L1(t) theta0 + L2(t) (Xi/2 theta0 + theta1) + int_0^t L2(t - s) F(s) ds.
/// The Duhamel integral uses `nquad` equal panels, each with a 4-point
/// Gauss-Legendre rule.
SpectralScalar solve_theta_linear(const SpectralScalar& theta0, const SpectralScalar& theta1,
                                  const ForcingSampler* forcing, double t, int nquad = 0);

/// Propagator of the constant 3x3 mode system
///     w1' = -Xi w1 + i eta th,  w2' = -Xi w2 - i xi th,  th' = (i eta w1 - i xi w2) / Xi
/// evaluated with a Pade scaling-and-squaring matrix exponential. `xi`, `eta`
/// are the differentiation wavenumbers and `Xi` the full symbol of the mode.
std::array<std::array<cplx, 3>, 3> coupled_mode_propagator(double xi, double eta, double Xi, double t);

/// Exact flow of the linearized equations over time t: omega_3 decays by the
/// heat semigroup, (omega_1, omega_2, theta) by the coupled mode system.
State exact_linear_coupled(const State& s, double t);

}  // namespace slab
