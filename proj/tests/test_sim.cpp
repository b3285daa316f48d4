#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "slab/errors.hpp"
#include "slab/propagator.hpp"
#include "slab/sim.hpp"
#include "test_fields.hpp"

using namespace slab;
using slab::testing::eval_point;
using slab::testing::random_field;
using slab::testing::rel_diff;

namespace {

constexpr double kPi = std::numbers::pi;

// State whose quadratic products stay inside the retained band.
State narrow_state(const Domain& d, std::mt19937_64& rng, double amp, int hband = 2, int kband = 3) {
    const VectorField a(random_field(d, Parity::Odd, rng, hband, kband), random_field(d, Parity::Odd, rng, hband, kband),
                        random_field(d, Parity::Even, rng, hband, kband), FieldRole::Vorticity);
    VectorField w = curl(curl(a));
    w[2].at(0, 0, 0) = 0.0;
    w *= amp;
    return State(w, amp * random_field(d, Parity::Odd, rng, hband, kband));
}

double state_diff(const State& a, const State& b) {
    double e = rel_diff(a.theta, b.theta);
    for (int i = 0; i < 3; ++i) e = std::max(e, rel_diff(a.omega[i], b.omega[i]));
    return e;
}

double state_norm_diff(const State& a, const State& b) {
    double s = sobolev_norm(a.theta - b.theta, 0);
    for (int i = 0; i < 3; ++i) s += sobolev_norm(a.omega[i] - b.omega[i], 0);
    return s;
}

// 4th-order centered difference of a point evaluator along one axis.
template <class F>
double fd(F&& f, double x, double y, double z, int axis) {
    const double h = 1e-3;
    auto at = [&](double s) {
        return f(x + (axis == 0 ? s : 0.0), y + (axis == 1 ? s : 0.0), z + (axis == 2 ? s : 0.0));
    };
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

StepperConfig linear_cfg(Scheme s, double dt, double t_end) {
    StepperConfig c;
    c.scheme = s;
    c.dt = dt;
    c.t_end = t_end;
    c.linear_only = true;
    return c;
}

}  // namespace

TEST_CASE("rhs of the zero state vanishes") {
    const Domain d(8.0, 16, 16, 6, 10);
    const auto t = rhs(State::zero(d));
    for (int i = 0; i < 3; ++i) CHECK(t.domega[i].max_abs() == 0.0);
    CHECK(t.dtheta.max_abs() == 0.0);
    CHECK(compute_f2(State::zero(d)).max_abs() == 0.0);
    const State s = step(State::zero(d), StepperConfig{});
    for (int i = 0; i < 3; ++i) CHECK(s.omega[i].max_abs() == 0.0);
    CHECK(s.theta.max_abs() == 0.0);
}

TEST_CASE("rhs buoyancy example") {
    const Domain d(8.0, 16, 16, 6, 10);
    State s = State::zero(d);
    s.theta.mode(1, 0, 1) = 0.5;
    s.theta.mode(-1, 0, 1) = 0.5;  // sin(pi z) cos(2 pi x / L)
    const auto t = rhs(s);
    const double k1 = 2 * kPi / d.length();
    CHECK(t.domega[0].max_abs() == 0.0);
    CHECK(t.domega[2].max_abs() == 0.0);
    // (2pi/L) sin(2 pi x/L) sin(pi z)
    CHECK(std::abs(t.domega[1].mode(1, 0, 1) - cplx(0.0, -0.5 * k1)) < 1e-15);
    CHECK(std::abs(t.domega[1].mode(-1, 0, 1) - cplx(0.0, 0.5 * k1)) < 1e-15);
    CHECK(t.dtheta.max_abs() == 0.0);
}

TEST_CASE("rhs against pointwise finite differences") {
    const Domain d(8.0, 16, 16, 6, 10);
    std::mt19937_64 rng(21);
    const State s = narrow_state(d, rng, 0.1);
    const VectorField u = velocity_from_vorticity(s.omega);
    const auto t = rhs(s);

    std::uniform_real_distribution<double> ux(0.0, d.length()), uz(0.05, 0.95);
    double worst = 0.0, scale = 0.0;
    for (int p = 0; p < 6; ++p) {
        const double x = ux(rng), y = ux(rng), z = uz(rng);
        auto field = [](const SpectralScalar& f) {
            return [&f](double a, double b, double c) { return eval_point(f, a, b, c); };
        };
        double U[3], W[3];
        for (int j = 0; j < 3; ++j) {
            U[j] = eval_point(u[j], x, y, z);
            W[j] = eval_point(s.omega[j], x, y, z);
        }
        double expect[4];
        for (int i = 0; i < 3; ++i) {
            double adv = 0.0, str = 0.0;
            for (int j = 0; j < 3; ++j) {
                adv += U[j] * fd(field(s.omega[i]), x, y, z, j);
                str += W[j] * fd(field(u[i]), x, y, z, j);
            }
            expect[i] = -adv + str;
        }
        expect[0] += fd(field(s.theta), x, y, z, 1);
        expect[1] -= fd(field(s.theta), x, y, z, 0);
        double adv = 0.0;
        for (int j = 0; j < 3; ++j) adv += U[j] * fd(field(s.theta), x, y, z, j);
        expect[3] = -adv - U[2];

        for (int i = 0; i < 4; ++i) {
            const double got = eval_point(i < 3 ? t.domega[i] : t.dtheta, x, y, z);
            worst = std::max(worst, std::abs(got - expect[i]));
            scale = std::max(scale, std::abs(expect[i]));
        }
    }
    CHECK(worst <= 1e-6 * scale);
}

TEST_CASE("advect parity hook") {
    const Domain d(8.0, 16, 16, 6, 10);
    std::mt19937_64 rng(2);
    const State s = narrow_state(d, rng, 1.0);
    const VectorField u = velocity_from_vorticity(s.omega);
    CHECK_NOTHROW(advect(u, s.theta, Parity::Odd));
    CHECK_THROWS_AS(advect(u, s.theta, Parity::Even), ParityError);
    CHECK_THROWS_AS(advect(s.omega, s.theta, Parity::Odd), ParityError);
}

TEST_CASE("compute_f2 against the second time derivative") {
    // theta_t = G(state) is quadratic in the state, so the centered difference
    // along the full tendency gives theta_tt exactly up to rounding
    const Domain d(8.0, 16, 16, 6, 10);
    std::mt19937_64 rng(5);
    const State s = narrow_state(d, rng, 0.05);
    const TimeDerivatives td = time_derivatives(s);
    const double eps = 1e-3;
    auto shifted = [&](double e) {
        State x = s;
        for (int i = 0; i < 3; ++i) x.omega[i].axpy(e, td.omega[i]);
        x.theta.axpy(e, td.theta);
        return x;
    };
    const SpectralScalar theta_tt = (1.0 / (2 * eps)) * (theta_rate(shifted(eps)) - theta_rate(shifted(-eps)));
    const SpectralScalar psi = invert_dirichlet(s.theta);
    SpectralScalar oracle = theta_tt + neg_laplacian(td.theta);
    oracle -= deriv(deriv(psi, Axis::X), Axis::X);
    oracle -= deriv(deriv(psi, Axis::Y), Axis::Y);

    const SpectralScalar f2 = compute_f2(s);
    CHECK(f2.max_abs() > 0.0);
    CHECK(rel_diff(f2, oracle) < 1e-7);
}

TEST_CASE("quadratic scaling of the nonlinear terms") {
    const Domain d(8.0, 16, 16, 6, 10);
    std::mt19937_64 rng(8);
    const State s = narrow_state(d, rng, 1e-2);
    State half = s;
    for (int i = 0; i < 3; ++i) half.omega[i] *= 0.5;
    half.theta *= 0.5;
    const double r1 = sobolev_norm(nonlinear_vorticity_terms(s), 0) / sobolev_norm(nonlinear_vorticity_terms(half), 0);
    CHECK(r1 == doctest::Approx(4.0).epsilon(0.05));
    const double r2 = sobolev_norm(compute_f2(s), 0) / sobolev_norm(compute_f2(half), 0);
    CHECK(r2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("gen_initial") {
    const Domain d(16.0, 32, 32, 11, 17);
    const State a = gen_initial(d, 42, 1e-3, 1.0);
    const State b = gen_initial(d, 42, 1e-3, 1.0);
    CHECK(state_diff(a, b) == 0.0);
    for (int i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < a.omega[i].coeff().size(); ++j) CHECK_EQ(a.omega[i].coeff()[j], b.omega[i].coeff()[j]);
    CHECK(state_diff(a, gen_initial(d, 43, 1e-3, 1.0)) > 0.1);
    CHECK(divergence_ratio(a.omega) <= 1e-12);
    CHECK(a.omega[0].parity() == Parity::Odd);
    CHECK(a.omega[1].parity() == Parity::Odd);
    CHECK(a.omega[2].parity() == Parity::Even);
    CHECK(a.theta.parity() == Parity::Odd);
    CHECK(a.omega[2].at(0, 0, 0) == cplx(0.0));
    CHECK(measure(a, StepperConfig{}).E[0] == doctest::Approx(1e-3).epsilon(1e-12));
    // falloff: the top vertical mode is far below the first
    CHECK(sobolev_norm(a.theta, 0) > 0.0);
    const State z = gen_initial(d, 42, 0.0, 1.0);
    CHECK(z.theta.max_abs() == 0.0);
    CHECK_THROWS_AS(gen_initial(d, 1, -1.0, 1.0), DomainError);
    // inside the dealias band
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            if (!d.in_dealias_band(ix, iy)) CHECK(a.theta.at(ix, iy, 1) == cplx(0.0));
}

TEST_CASE("linear-only stepping converges to the exact propagator") {
    const Domain d(16.0, 16, 16, 6, 10);
    const State s0 = gen_initial(d, 4, 1.0, 1.0);
    const double T = 1.0;
    const State exact = exact_linear_coupled(s0, T);
    for (auto [scheme, order] : {std::pair{Scheme::IFRK2, 1.9}, std::pair{Scheme::IFRK4, 3.8}}) {
        std::vector<double> err;
        for (double dt : {0.025, 0.0125, 0.00625}) {
            auto r = run(linear_cfg(scheme, dt, T), s0);
            REQUIRE_FALSE(r.failed);
            err.push_back(state_norm_diff(r.final_state, exact));
        }
        CAPTURE(to_string(scheme));
        CHECK(std::log2(err[0] / err[1]) >= order);
        CHECK(std::log2(err[1] / err[2]) >= order);
    }
}

TEST_CASE("linear energy law") {
    const Domain d(24.0, 24, 24, 6, 10);
    const State s0 = gen_initial(d, 6, 1.0, 0.5);
    auto cfg = linear_cfg(Scheme::IFRK4, 0.02, 2.0);
    cfg.monitor_stride = 10;
    const auto r = run(cfg, s0);
    const double e0 = r.series.front().energy;
    double prev = e0;
    for (const auto& m : r.series) {
        CHECK(std::abs(m.energy - e0 + m.dissipation) <= 1e-6 * e0);
        CHECK(m.energy <= prev);
        prev = m.energy;
    }
}

TEST_CASE("omega_3 decays faster than omega_h in linear runs") {
    const Domain d(16.0, 16, 16, 6, 10);
    const State s0 = gen_initial(d, 9, 1.0, 0.5);
    auto cfg = linear_cfg(Scheme::IFRK4, 0.05, 4.0);
    cfg.monitor_stride = 20;
    const auto r = run(cfg, s0);
    const auto& a = r.series.front();
    const auto& b = r.series.back();
    const double w3 = b.obs[5] / a.obs[5];
    const double wh = b.obs[1] / a.obs[1];
    CHECK(w3 < wh);
    // pure heat decay of omega_3
    CHECK(rel_diff(r.final_state.omega[2], heat_propagate(s0.omega[2], 4.0)) < 1e-12);
}

TEST_CASE("nonlinear invariants over many steps") {
    const Domain d(8.0, 16, 16, 6, 10);
    const State s0 = gen_initial(d, 13, 1e-2, 0.5);
    StepperConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 20.0;
    cfg.monitor_stride = 100;
    const auto r = run(cfg, s0);
    REQUIRE_FALSE(r.failed);
    const double e0 = r.series.front().energy;
    const double E1 = r.series.front().E[0];
    for (const auto& m : r.series) {
        CHECK(m.divergence <= 1e-8);
        CHECK(m.omega3_mean == 0.0);
        CHECK(m.E[0] <= 2.0 * E1);
        CHECK(m.energy <= (1 + 0.1) * e0);
        CHECK(std::abs(m.energy - e0 + m.dissipation) <= 1e-3 * e0);
        for (double v : m.obs) CHECK(std::isfinite(v));
    }
    CHECK(r.series.size() == 21);
}

TEST_CASE("small-amplitude stability to t = 10") {
    const Domain d(32.0, 32, 32, 11, 17);
    const State s0 = gen_initial(d, 1, 1e-3, 1.0);
    StepperConfig cfg;
    cfg.dt = 0.1;
    cfg.t_end = 10.0;
    cfg.monitor_stride = 10;
    const auto r = run(cfg, s0);
    REQUIRE_FALSE(r.failed);
    const double E1 = r.series.front().E[0];
    for (const auto& m : r.series) CHECK(m.E[0] <= 2.0 * E1);
    CHECK(r.series.back().E_sup[0] <= 2.0 * E1);
}

TEST_CASE("projection keeps the state divergence free") {
    const Domain d(8.0, 16, 16, 6, 10);
    std::mt19937_64 rng(4);
    State s = narrow_state(d, rng, 1.0);
    s.omega[0].at(1, 0, 1) += 0.3;
    s.omega[0].mode(-1, 0, 1) += 0.3;
    CHECK(divergence_ratio(s.omega) > 1e-6);
    project_divergence_free(s);
    CHECK(divergence_ratio(s.omega) < 1e-13);
}

TEST_CASE("step errors") {
    const Domain d(8.0, 16, 16, 6, 10);
    SUBCASE("CFL") {
        const State s0 = gen_initial(d, 1, 500.0, 0.5);
        StepperConfig cfg;
        cfg.dt = 0.5;
        cfg.t_end = 0.5;
        CHECK(cfl_number(s0, cfg.dt) > 0.5);
        CHECK_THROWS_AS(step(s0, cfg), StepSizeError);
        const auto r = run(cfg, s0);
        CHECK(r.failed);
        CHECK(r.series.size() == 1);
        CHECK(r.failure_time == 0.0);
    }
    SUBCASE("non-finite") {
        State s0 = gen_initial(d, 1, 1e-3, 0.5);
        s0.theta.at(1, 1, 1) = cplx(NAN, 0.0);
        CHECK_THROWS_AS(step(s0, StepperConfig{}), BlowUpError);
    }
    SUBCASE("config") {
        StepperConfig c;
        c.dt = 0.3;
        c.t_end = 1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.dt = -1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = StepperConfig{};
        c.m_prime = 9;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK_THROWS_AS(scheme_from_string("RK3"), ConfigError);
    }
}

TEST_CASE("run bookkeeping and resumption") {
    const Domain d(8.0, 16, 16, 6, 10);
    const State s0 = gen_initial(d, 3, 1e-2, 0.5);
    StepperConfig cfg;
    cfg.dt = 0.05;
    SUBCASE("t_end = 0") {
        cfg.t_end = 0.0;
        const auto r = run(cfg, s0);
        CHECK(r.series.size() == 1);
        for (const auto& f : r.fits) CHECK_FALSE(f.has_value());
    }
    SUBCASE("resume is bit-identical") {
        cfg.t_end = 1.0;
        cfg.monitor_stride = 2;
        Simulation one(cfg, s0);
        std::vector<Monitors> a;
        a.push_back(one.sample());
        for (int i = 0; i < 20; ++i) {
            one.advance();
            if (one.step_index() % 2 == 0) a.push_back(one.sample());
        }
        Simulation first(cfg, s0);
        std::vector<Monitors> b;
        b.push_back(first.sample());
        for (int i = 0; i < 10; ++i) {
            first.advance();
            if (first.step_index() % 2 == 0) b.push_back(first.sample());
        }
        Simulation second(cfg, first.state(), first.snapshot());
        for (int i = 0; i < 10; ++i) {
            second.advance();
            if (second.step_index() % 2 == 0) b.push_back(second.sample());
        }
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].time == b[i].time);
            CHECK(a[i].E_sup == b[i].E_sup);
            CHECK(a[i].obs == b[i].obs);
            CHECK(a[i].dissipation == b[i].dissipation);
        }
        CHECK(state_diff(one.state(), second.state()) == 0.0);
    }
}

TEST_CASE("decay window") {
    const Domain d(64 * kPi, 16, 16, 6, 10);
    const auto w = decay_window(d, 50.0);
    CHECK(w.t_min == 5.0);
    CHECK(w.t_max == 50.0);
    const auto w2 = decay_window(d, 1e9);
    const double q = std::pow(2 * kPi / d.length(), 2);
    CHECK(w2.t_max == doctest::Approx(0.5 / std::abs(dispersion(q, 1).lambda_plus)));
}

TEST_CASE("linear-only theta Linf decay over [5, 100] at L = 64 pi") {
    const Domain d(64 * kPi, 64, 64, 11, 17);
    const State s0 = gen_initial(d, 3, 1e-3, 1.0);
    auto cfg = linear_cfg(Scheme::IFRK4, 0.1, 100.0);
    cfg.monitor_stride = 10;
    auto r = run(cfg, s0);
    r.window = {5.0, 100.0};
    fit_observables(r);
    REQUIRE(r.fits[7].has_value());
    const double slope = r.fits[7]->exponent;
    CAPTURE(slope);
    CHECK(slope >= -1.3);
    CHECK(slope <= -0.7);
}
