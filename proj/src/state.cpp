#include "slab/state.hpp"

#include "slab/errors.hpp"

namespace slab {

State::State(VectorField w, SpectralScalar th, double t) : omega(std::move(w)), theta(std::move(th)), time(t) {
    check_state(*this);
}

State State::zero(const Domain& d) {
    return State(VectorField::zero(d, FieldRole::Vorticity), SpectralScalar(d, Parity::Odd));
}

void check_state(const State& s) {
    if (s.omega.role != FieldRole::Vorticity) throw ParityError("state vorticity must carry the vorticity role");
    check_role(s.omega);
    if (s.theta.parity() != Parity::Odd) throw ParityError("temperature perturbation must be Odd");
    if (s.theta.domain() != s.omega.domain()) throw DimensionError("state fields on different domains");
}

}  // namespace slab
