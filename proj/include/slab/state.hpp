#pragma once

#include "slab/elliptic.hpp"

namespace slab {

/// Dynamical state (omega_1, omega_2, omega_3, theta) at time `time`.
/// Parities are (Odd, Odd, Even; Odd).
struct State {
    VectorField omega;
    SpectralScalar theta;
    double time = 0.0;

    State(VectorField w, SpectralScalar th, double t = 0.0);

    static State zero(const Domain& d);
    const Domain& domain() const { return theta.domain(); }
};

/// Throws ParityError / DimensionError when the state is not well formed.
void check_state(const State& s);

}  // namespace slab
