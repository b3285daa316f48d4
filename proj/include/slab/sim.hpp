#pragma once

// Pseudo-spectral integration of the nonlinear system
//
//     d_t omega - Delta omega + u.grad omega - omega.grad u = (d2 theta, -d1 theta, 0)
//     d_t theta + u.grad theta = -u_3
//
// with Lawson (integrating-factor) Runge-Kutta steps: e^{-Xi dt} acts on the
// vorticity modes, theta has no integrating factor.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slab/decay.hpp"
#include "slab/state.hpp"

namespace slab {

enum class Scheme { IFRK2, IFRK4 };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct StepperConfig {
    double dt = 0.05;
    double t_end = 1.0;
    Scheme scheme = Scheme::IFRK4;
    bool dealias = true;
    int projection_stride = 0;  // 0: never project
    int monitor_stride = 1;
    int m_prime = 3;
    bool linear_only = false;

    /// Throws ConfigError on invalid values.
    void validate() const;
    /// Number of steps to t_end; t_end must be a multiple of dt.
    std::int64_t steps() const;
};

/// Tendency excluding the Delta omega part.
struct Tendency {
    VectorField domega;
    SpectralScalar dtheta;
    double max_speed = 0.0;  // max |u| on the grid, when computed
};

/// f1 = -u.grad omega + omega.grad u + (d2 theta, -d1 theta, 0) and
/// -u.grad theta - u_3, with dealiased products.
Tendency rhs(const State& s, bool dealias = true);
/// Only the linear coupling terms (buoyancy and -u_3).
Tendency rhs_linear(const State& s);
/// P(a . grad f) evaluated on the grid and projected onto `target`. A product
/// whose parity differs from `target` throws ParityError.
SpectralScalar advect(const VectorField& a, const SpectralScalar& f, Parity target, bool dealias = true);
/// The quadratic part of the vorticity tendency, -u.grad omega + omega.grad u.
VectorField nonlinear_vorticity_terms(const State& s, bool dealias = true);

/// Full time derivatives (d_t omega, d_t theta, d_t u).
struct TimeDerivatives {
    VectorField omega;
    SpectralScalar theta;
    VectorField u;
};
TimeDerivatives time_derivatives(const State& s, bool dealias = true, bool linear_only = false);

/// Forcing of theta'' - Delta theta' - Delta_h (-Delta)^{-1} theta = f2.
SpectralScalar compute_f2(const State& s, bool dealias = true);

/// d_t theta at t = 0: -u0.grad theta0 - u30.
SpectralScalar theta_rate(const State& s, bool dealias = true);

/// Random initial data with spectrum e^{-falloff |kappa|} inside the dealias
/// band, scaled so that E1-proxy (order m_prime) equals `amplitude`.
State gen_initial(const Domain& d, std::uint64_t seed, double amplitude, double falloff, int m_prime = 3);

/// Maximum of |u| on the collocation grid.
double max_speed(const State& s);
/// dt * max|u| * max(2 pi Nx / (3L), 2 pi Ny / (3L), pi Kmax).
double cfl_number(const State& s, double dt);

/// Removes the gradient part of omega: omega + grad phi with -Delta phi = div omega.
void project_divergence_free(State& s);

// ---------------------------------------------------------------------------
// Monitors

struct ObservableInfo {
    const char* name;
    double target;
};

inline constexpr int kNumObservables = 11;
extern const std::array<ObservableInfo, kNumObservables> kDecayObservables;

struct Monitors {
    std::int64_t step = 0;
    double time = 0.0;
    std::array<double, 4> E{};      // E1..E4 proxies at this sample
    std::array<double, 4> E_sup{};  // running suprema over samples
    std::array<double, kNumObservables> obs{};
    double energy = 0.0;        // |omega|^2 + |grad theta|^2
    double dissipation = 0.0;   // 2 int_0^t |grad omega|^2
    double divergence = 0.0;    // divergence ratio of omega
    double omega3_mean = 0.0;   // |(0,0,0) coefficient of omega_3|
};

/// Instantaneous monitor values; E_sup is left equal to E.
Monitors measure(const State& s, const StepperConfig& cfg);

// ---------------------------------------------------------------------------
// Time stepping

/// One step from s.
State step(const State& s, const StepperConfig& cfg);

/// Stateful driver: keeps the tendency at the current state for reuse as the
/// first stage of the next step, the dissipation integral, and running
/// suprema. Everything is a deterministic function of (config, state, snapshot).
class Simulation {
public:
    Simulation(StepperConfig cfg, State s0);

    struct Snapshot {
        std::int64_t step = 0;
        double t_start = 0.0;  // time of step 0
        std::array<double, 4> E_sup{};
        double dissipation = 0.0;
    };
    Simulation(StepperConfig cfg, State s, const Snapshot& snap);

    const State& state() const { return state_; }
    const StepperConfig& config() const { return cfg_; }
    std::int64_t step_index() const { return step_; }
    double time() const { return state_.time; }
    double dissipation() const { return dissipation_; }
    Snapshot snapshot() const { return {step_, t_start_, E_sup_, dissipation_}; }

    /// Advances one step. Throws StepSizeError on CFL violation and
    /// BlowUpError on non-finite coefficients; the state is then unchanged.
    void advance();

    /// Measures the current state and updates the running suprema.
    Monitors sample();

private:
    const Tendency& tendency();
    Tendency evaluate(const State& s) const;

    StepperConfig cfg_;
    State state_;
    std::int64_t step_ = 0;
    double t_start_ = 0.0;
    std::array<double, 4> E_sup_{};
    double dissipation_ = 0.0;
    std::optional<Tendency> tendency_;
    std::vector<double> exp_full_, exp_half_;
    // omega(s_g) = c[0] w0 + c[1] N0 + c[2] w1 + c[3] N1 at the quadrature
    // nodes of one step, per mode
    std::vector<std::array<double, 4>> dissipation_coeff_;
    std::vector<double> dissipation_weight_;
    std::vector<double> node_weights_;
};

struct RunResult {
    std::vector<Monitors> series;
    State final_state;
    bool failed = false;
    double failure_time = 0.0;
    std::string failure;
    // Fits of each theorem observable over the decay window
    RateWindow window;
    std::array<std::optional<RateFit>, kNumObservables> fits;
};

/// Window [5, t*/2] clipped to t_end, t* = 1/|lambda_+((2pi/L)^2, 1)|.
RateWindow decay_window(const Domain& d, double t_end);

/// Fits every observable over the window; entries stay empty when fewer than
/// five samples fall inside.
void fit_observables(RunResult& r);

RunResult run(const StepperConfig& cfg, const State& s0);

}  // namespace slab
