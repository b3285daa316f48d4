#include "slab/sim.hpp"

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "slab/errors.hpp"
#include "slab/propagator.hpp"

namespace slab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Axis kAxes[3] = {Axis::X, Axis::Y, Axis::Z};

struct Phys {
    PhysicalScalar v;
    Parity p;
};

Phys phys(const SpectralScalar& f) { return {to_physical(f), f.parity()}; }

std::array<Phys, 3> phys(const VectorField& v) { return {phys(v[0]), phys(v[1]), phys(v[2])}; }

// Sum of pointwise products, all of one parity.
class ProductSum {
public:
    ProductSum(const Domain& d, Parity target) : sum_(d), target_(target) {}

    void add(double sign, const Phys& a, const Phys& b) {
        if (product_parity(a.p, b.p) != target_)
            throw ParityError(std::string("product of ") + to_string(a.p) + " and " + to_string(b.p) +
                              " fields cannot enter a " + to_string(target_) + " sum");
        auto s = sum_.values();
        auto va = a.v.values();
        auto vb = b.v.values();
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += sign * va[i] * vb[i];
    }

    SpectralScalar finish(bool dealias) const {
        SpectralScalar out = to_spectral(sum_, target_);
        if (dealias) truncate_to_band(out);
        return out;
    }

private:
    PhysicalScalar sum_;
    Parity target_;
};

// P(a . grad f) for a field `a` given on the grid.
SpectralScalar transport(const std::array<Phys, 3>& a, const SpectralScalar& f, Parity target, bool dealias) {
    ProductSum acc(f.domain(), target);
    for (int j = 0; j < 3; ++j) acc.add(1.0, a[j], phys(deriv(f, kAxes[j])));
    return acc.finish(dealias);
}

double grid_max_magnitude(const std::vector<const PhysicalScalar*>& comps) {
    double m = 0.0;
    const std::size_t n = comps.front()->values().size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto* c : comps) s += c->values()[i] * c->values()[i];
        m = std::max(m, s);
    }
    return std::sqrt(m);
}

double linf_magnitude(const std::vector<SpectralScalar>& comps) {
    std::vector<PhysicalScalar> p;
    for (const auto& c : comps) p.push_back(to_physical(c));
    std::vector<const PhysicalScalar*> ptr;
    for (const auto& x : p) ptr.push_back(&x);
    return grid_max_magnitude(ptr);
}

double rss_norm(const std::vector<SpectralScalar>& comps, int m) {
    double s = 0.0;
    for (const auto& c : comps) {
        const double n = sobolev_norm(c, m);
        s += n * n;
    }
    return std::sqrt(s);
}

SpectralScalar buoyancy_x(const SpectralScalar& theta) { return deriv(theta, Axis::Y); }
SpectralScalar buoyancy_y(const SpectralScalar& theta) { return -deriv(theta, Axis::X); }

struct Rule {
    std::vector<double> x, w;  // on [0, 1]
};

Rule gauss_legendre01(int n) {
    Rule r;
    for (double z : boost::math::legendre_p_zeros<double>(n)) {
        const double dp = boost::math::legendre_p_prime<double>(n, z);
        const double w = 1.0 / ((1.0 - z * z) * dp * dp);
        r.x.push_back(0.5 * (1.0 + z));
        r.w.push_back(w);
        if (z != 0.0) {
            r.x.push_back(0.5 * (1.0 - z));
            r.w.push_back(w);
        }
    }
    return r;
}

constexpr int kDissipationNodes = 16;

// (e^z - 1)/z and (e^z - 1 - z)/z^2
double phi1(double z) { return std::abs(z) < 1e-8 ? 1.0 + 0.5 * z : std::expm1(z) / z; }
double phi2(double z) {
    if (std::abs(z) < 0.1) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0;
    return (std::expm1(z) - z) / (z * z);
}

void scale_omega(VectorField& w, const std::vector<double>& f) {
    for (int i = 0; i < 3; ++i) {
        auto c = w[i].coeff();
        for (std::size_t j = 0; j < c.size(); ++j) c[j] *= f[j];
    }
}

// a += h * t
void add_scaled(State& a, double h, const Tendency& t) {
    for (int i = 0; i < 3; ++i) a.omega[i].axpy(h, t.domega[i]);
    a.theta.axpy(h, t.dtheta);
}

std::vector<double> exp_table(const Domain& d, double h) {
    std::vector<double> e(d.spectral_size());
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) e[d.index(ix, iy, k)] = std::exp(-d.symbol(ix, iy, k) * h);
    return e;
}

void check_finite(const State& s, const State& last, std::int64_t step) {
    const char* names[4] = {"omega_1", "omega_2", "omega_3", "theta"};
    for (int i = 0; i < 4; ++i) {
        const SpectralScalar& f = i < 3 ? s.omega[i] : s.theta;
        if (!f.all_finite()) {
            std::ostringstream os;
            os << "non-finite coefficients in " << names[i] << " at step " << step + 1 << " (t = " << s.time
               << "); last valid state at t = " << last.time << " has max |omega| = "
               << std::max({last.omega[0].max_abs(), last.omega[1].max_abs(), last.omega[2].max_abs()})
               << ", max |theta| = " << last.theta.max_abs();
            throw BlowUpError(os.str());
        }
    }
}

}  // namespace

const char* to_string(Scheme s) { return s == Scheme::IFRK2 ? "IFRK2" : "IFRK4"; }

Scheme scheme_from_string(const std::string& s) {
    if (s == "IFRK2") return Scheme::IFRK2;
    if (s == "IFRK4") return Scheme::IFRK4;
    throw ConfigError("unknown scheme '" + s + "' (expected IFRK2 or IFRK4)");
}

void StepperConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("stepper.dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("stepper.t_end must be nonnegative");
    if (projection_stride < 0) throw ConfigError("stepper.projection_stride must be >= 0");
    if (monitor_stride < 1) throw ConfigError("stepper.monitor_stride must be >= 1");
    if (m_prime < 0 || m_prime > 8) throw ConfigError("stepper.m_prime must lie in [0, 8]");
    steps();
}

std::int64_t StepperConfig::steps() const {
    const double n = std::round(t_end / dt);
    if (std::abs(n * dt - t_end) > 1e-9 * std::max(1.0, t_end))
        throw ConfigError("stepper.t_end must be an integer multiple of stepper.dt");
    return static_cast<std::int64_t>(n);
}

// ---------------------------------------------------------------------------

namespace {
// -u.grad omega + omega.grad u = curl(u x omega) for divergence-free u, omega
VectorField rotational_terms(const std::array<Phys, 3>& U, const std::array<Phys, 3>& W, const Domain& d,
                             bool dealias) {
    std::array<SpectralScalar, 3> c = {SpectralScalar(d, Parity::Even), SpectralScalar(d, Parity::Even),
                                       SpectralScalar(d, Parity::Odd)};
    for (int i = 0; i < 3; ++i) {
        const int j = (i + 1) % 3, k = (i + 2) % 3;
        ProductSum acc(d, c[i].parity());
        acc.add(1.0, U[j], W[k]);
        acc.add(-1.0, U[k], W[j]);
        c[i] = acc.finish(dealias);
    }
    return curl(VectorField(c[0], c[1], c[2], FieldRole::Velocity));
}
}  // namespace

SpectralScalar advect(const VectorField& a, const SpectralScalar& f, Parity target, bool dealias) {
    if (a.domain() != f.domain()) throw DimensionError("advect: fields on different domains");
    return transport(phys(a), f, target, dealias);
}

VectorField nonlinear_vorticity_terms(const State& s, bool dealias) {
    return rotational_terms(phys(velocity_from_vorticity(s.omega)), phys(s.omega), s.domain(), dealias);
}

Tendency rhs_linear(const State& s) {
    const VectorField u = velocity_from_vorticity(s.omega);
    const Domain& d = s.domain();
    VectorField dw(buoyancy_x(s.theta), buoyancy_y(s.theta), SpectralScalar(d, Parity::Even), FieldRole::Vorticity);
    return {std::move(dw), -u[2], 0.0};
}

Tendency rhs(const State& s, bool dealias) {
    const Domain& d = s.domain();
    const VectorField u = velocity_from_vorticity(s.omega);
    const auto U = phys(u);
    const auto W = phys(s.omega);

    VectorField dw = rotational_terms(U, W, d, dealias);
    dw[0] += buoyancy_x(s.theta);
    dw[1] += buoyancy_y(s.theta);

    SpectralScalar dth = -transport(U, s.theta, Parity::Odd, dealias);
    dth -= u[2];
    const double speed = grid_max_magnitude({&U[0].v, &U[1].v, &U[2].v});
    return {std::move(dw), std::move(dth), speed};
}

TimeDerivatives time_derivatives(const State& s, bool dealias, bool linear_only) {
    Tendency t = linear_only ? rhs_linear(s) : rhs(s, dealias);
    VectorField w = t.domega;
    for (int i = 0; i < 3; ++i) w[i] -= neg_laplacian(s.omega[i]);
    w.role = FieldRole::Vorticity;
    // the mean mode of d_t omega_3 vanishes analytically
    w[2].at(0, 0, 0) = 0.0;
    VectorField u = velocity_from_vorticity(w);
    return {std::move(w), std::move(t.dtheta), std::move(u)};
}

SpectralScalar theta_rate(const State& s, bool dealias) { return rhs(s, dealias).dtheta; }

SpectralScalar compute_f2(const State& s, bool dealias) {
    const Domain& d = s.domain();
    const VectorField u = velocity_from_vorticity(s.omega);
    const TimeDerivatives td = time_derivatives(s, dealias);
    const auto U = phys(u);
    const auto Ut = phys(td.u);
    const auto W = phys(s.omega);

    ProductSum acc(d, Parity::Odd);
    for (int j = 0; j < 3; ++j) {
        acc.add(-1.0, Ut[j], phys(deriv(s.theta, kAxes[j])));
        acc.add(-1.0, U[j], phys(deriv(td.theta, kAxes[j])));
    }
    SpectralScalar f = acc.finish(dealias);
    f -= neg_laplacian(transport(U, s.theta, Parity::Odd, dealias));

    const SpectralScalar adv1 = transport(U, s.omega[0], Parity::Odd, dealias);
    const SpectralScalar adv2 = transport(U, s.omega[1], Parity::Odd, dealias);
    const SpectralScalar str1 = transport(W, u[0], Parity::Odd, dealias);
    const SpectralScalar str2 = transport(W, u[1], Parity::Odd, dealias);
    f += deriv(invert_dirichlet(adv2), Axis::X);
    f -= deriv(invert_dirichlet(adv1), Axis::Y);
    f -= deriv(invert_dirichlet(str2), Axis::X);
    f += deriv(invert_dirichlet(str1), Axis::Y);
    return f;
}

State gen_initial(const Domain& d, std::uint64_t seed, double amplitude, double falloff, int m_prime) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw DomainError("gen_initial: amplitude must be >= 0");
    if (!(falloff >= 0.0)) throw DomainError("gen_initial: falloff must be >= 0");
    if (amplitude == 0.0) return State::zero(d);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto random = [&](Parity p) {
        SpectralScalar f(d, p);
        for (int ix = 0; ix < d.nx(); ++ix)
            for (int iy = 0; iy < d.ny(); ++iy)
                for (int k = 0; k <= d.kmax(); ++k) {
                    const double re = normal(rng), im = normal(rng);
                    if (!d.in_dealias_band(ix, iy) || (p == Parity::Odd && k == 0)) continue;
                    const double kappa = std::sqrt(d.symbol(ix, iy, k));
                    f.at(ix, iy, k) = std::exp(-falloff * kappa) * cplx(re, im);
                }
        hermitian_project(f);
        return f;
    };
    // vector potential with vorticity parities, so that curl A is a velocity
    const SpectralScalar a1 = random(Parity::Odd), a2 = random(Parity::Odd), a3 = random(Parity::Even);
    const SpectralScalar th = random(Parity::Odd);
    const VectorField u = curl(VectorField(a1, a2, a3, FieldRole::Vorticity));
    VectorField w = curl(u);
    w[2].at(0, 0, 0) = 0.0;
    State s(w, th);

    const double e1 = measure(s, StepperConfig{.m_prime = m_prime}).E[0];
    if (!(e1 > 0.0)) return State::zero(d);
    const double c = amplitude / e1;
    for (int i = 0; i < 3; ++i) s.omega[i] *= c;
    s.theta *= c;
    return s;
}

double max_speed(const State& s) {
    const auto U = phys(velocity_from_vorticity(s.omega));
    return grid_max_magnitude({&U[0].v, &U[1].v, &U[2].v});
}

namespace {
double cfl_wavenumber(const Domain& d) {
    return std::max({2.0 * kPi * d.nx() / (3.0 * d.length()), 2.0 * kPi * d.ny() / (3.0 * d.length()),
                     kPi * d.kmax()});
}
}  // namespace

double cfl_number(const State& s, double dt) { return dt * max_speed(s) * cfl_wavenumber(s.domain()); }

void project_divergence_free(State& s) {
    const SpectralScalar div = divergence(s.omega);
    const VectorField g = gradient(invert_dirichlet(div));
    for (int i = 0; i < 3; ++i) s.omega[i] += g[i];
}

// ---------------------------------------------------------------------------

const std::array<ObservableInfo, kNumObservables> kDecayObservables = {{
    {"theta_H5", -0.5},
    {"omega_h_H3", -1.0},
    {"grad_h_theta_H3", -1.0},
    {"grad_h_omega_h_H1", -1.5},
    {"grad_h2_theta_H1", -1.5},
    {"omega_3_H3", -1.25},
    {"omega_3_Linf", -2.0},
    {"theta_Linf", -1.0},
    {"d3_theta_Linf", -1.0},
    {"grad_h_theta_Linf", -1.5},
    {"omega_h_Linf", -1.5},
}};

Monitors measure(const State& s, const StepperConfig& cfg) {
    const int m = cfg.m_prime;
    const double t = s.time;
    const double bt = bracket(t);
    const VectorField u = velocity_from_vorticity(s.omega);

    const SpectralScalar th1 = deriv(s.theta, Axis::X), th2 = deriv(s.theta, Axis::Y);
    const SpectralScalar th3 = deriv(s.theta, Axis::Z);
    const std::vector<SpectralScalar> grad_h_theta = {th1, th2};
    const std::vector<SpectralScalar> grad_h2_theta = {deriv(th1, Axis::X), deriv(th1, Axis::Y),
                                                       deriv(th2, Axis::X), deriv(th2, Axis::Y)};
    const std::vector<SpectralScalar> omega_h = {s.omega[0], s.omega[1]};
    const std::vector<SpectralScalar> grad_h_omega_h = {deriv(s.omega[0], Axis::X), deriv(s.omega[0], Axis::Y),
                                                        deriv(s.omega[1], Axis::X), deriv(s.omega[1], Axis::Y)};
    std::vector<SpectralScalar> grad_u;
    for (int i = 0; i < 3; ++i)
        for (Axis a : kAxes) grad_u.push_back(deriv(u[i], a));

    Monitors mo;
    mo.time = t;
    auto& o = mo.obs;
    o[0] = sobolev_norm(s.theta, 5);
    o[1] = rss_norm(omega_h, 3);
    o[2] = rss_norm(grad_h_theta, 3);
    o[3] = rss_norm(grad_h_omega_h, 1);
    o[4] = rss_norm(grad_h2_theta, 1);
    o[5] = sobolev_norm(s.omega[2], 3);
    o[6] = linf_magnitude({s.omega[2]});
    o[7] = linf_magnitude({s.theta});
    o[8] = linf_magnitude({th3});
    o[9] = linf_magnitude(grad_h_theta);
    o[10] = linf_magnitude(omega_h);

    const double u_w1inf = linf_magnitude({u[0], u[1], u[2]}) + linf_magnitude(grad_u);
    mo.E[0] = sobolev_norm(s.theta, m + 1) + sobolev_norm(s.omega, m) +
              sobolev_norm(lambda_pow(s.omega[2], -1.0), 0);
    mo.E[1] = std::pow(bt, 1.5) * (o[9] + u_w1inf + o[10]) + bt * bt * o[6] + bt * (o[7] + o[8]);
    mo.E[2] = std::sqrt(bt) * o[0] + bt * (o[2] + o[1]) + std::pow(bt, 0.75) * rss_norm({u[0], u[1]}, 4) +
              std::pow(bt, 1.5) * (o[4] + o[3] + sobolev_norm(u[2], 3)) + std::pow(bt, 1.25) * o[5];
    const TimeDerivatives td = time_derivatives(s, cfg.dealias, cfg.linear_only);
    mo.E[3] = std::pow(bt, 1.5) * (sobolev_norm(td.theta, 1) + sobolev_norm(td.omega, 0) + sobolev_norm(td.u, 1));
    mo.E_sup = mo.E;

    const double w = sobolev_norm(s.omega, 0);
    const double g = rss_norm({th1, th2, th3}, 0);
    mo.energy = w * w + g * g;
    mo.divergence = divergence_ratio(s.omega);
    mo.omega3_mean = std::abs(s.omega[2].at(0, 0, 0));
    return mo;
}

// ---------------------------------------------------------------------------

Simulation::Simulation(StepperConfig cfg, State s0) : Simulation(cfg, std::move(s0), Snapshot{}) {}


Simulation::Simulation(StepperConfig cfg, State s, const Snapshot& snap)
    : cfg_(cfg),
      state_(std::move(s)),
      step_(snap.step),
      t_start_(snap.step == 0 ? state_.time : snap.t_start),
      E_sup_(snap.E_sup),
      dissipation_(snap.dissipation) {
    cfg_.validate();
    check_state(state_);
    const Domain& d = state_.domain();
    const double h = cfg_.dt;
    exp_full_ = exp_table(d, h);
    exp_half_ = exp_table(d, 0.5 * h);

    const Rule rule = gauss_legendre01(kDissipationNodes);
    dissipation_coeff_.resize(d.spectral_size() * kDissipationNodes);
    dissipation_weight_.resize(d.spectral_size());
    const double L2 = d.length() * d.length();
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k) {
                const std::size_t idx = d.index(ix, iy, k);
                const double Xi = d.symbol(ix, iy, k);
                dissipation_weight_[idx] = L2 * (k == 0 ? 1.0 : 0.5) * Xi * h;
                for (int g = 0; g < kDissipationNodes; ++g) {
                    const double tau = rule.x[g], sg = tau * h;
                    auto& c = dissipation_coeff_[idx * kDissipationNodes + g];
                    if (Xi * h <= 2.0) {
                        // cubic Hermite interpolation of e^{Xi s} omega(s)
                        const double a = std::exp(-Xi * sg), b = std::exp(Xi * (h - sg));
                        c = {a * (2 * tau * tau * tau - 3 * tau * tau + 1), a * h * (tau * tau * tau - 2 * tau * tau + tau),
                             b * (-2 * tau * tau * tau + 3 * tau * tau), b * h * (tau * tau * tau - tau * tau)};
                    } else {
                        // stiff mode: exact response to a linearly interpolated tendency
                        const double z = -Xi * sg;
                        const double p1 = sg * phi1(z), p2 = sg * sg * phi2(z) / h;
                        c = {std::exp(z), p1 - p2, 0.0, p2};
                    }
                }
            }
    node_weights_ = rule.w;
}

Tendency Simulation::evaluate(const State& s) const {
    // a non-finite stage would otherwise surface as an elliptic error
    check_finite(s, state_, step_);
    return cfg_.linear_only ? rhs_linear(s) : rhs(s, cfg_.dealias);
}

const Tendency& Simulation::tendency() {
    if (!tendency_) tendency_ = evaluate(state_);
    return *tendency_;
}

void Simulation::advance() {
    const Domain& d = state_.domain();
    const double h = cfg_.dt;
    const Tendency k1 = tendency();
    const double speed = cfg_.linear_only ? max_speed(state_) : k1.max_speed;
    const double cfl = h * speed * cfl_wavenumber(d);
    if (cfl > 0.5) {
        std::ostringstream os;
        os << "CFL number " << cfl << " exceeds 0.5 at t = " << state_.time << " (dt = " << h << ", max|u| = " << speed
           << ")";
        throw StepSizeError(os.str());
    }

    State next = state_;
    if (cfg_.scheme == Scheme::IFRK2) {
        State a = state_;
        add_scaled(a, h, k1);
        scale_omega(a.omega, exp_full_);
        const Tendency k2 = evaluate(a);
        add_scaled(next, 0.5 * h, k1);
        scale_omega(next.omega, exp_full_);
        add_scaled(next, 0.5 * h, k2);
    } else {
        State a = state_;
        add_scaled(a, 0.5 * h, k1);
        scale_omega(a.omega, exp_half_);
        const Tendency k2 = evaluate(a);

        State b = state_;
        scale_omega(b.omega, exp_half_);
        add_scaled(b, 0.5 * h, k2);
        Tendency k3 = evaluate(b);

        State c = state_;
        scale_omega(c.omega, exp_full_);
        Tendency k3e = k3;
        scale_omega(k3e.domega, exp_half_);
        add_scaled(c, h, k3e);
        const Tendency k4 = evaluate(c);

        scale_omega(next.omega, exp_full_);
        Tendency k1e = k1;
        scale_omega(k1e.domega, exp_full_);
        add_scaled(next, h / 6.0, k1e);
        for (int i = 0; i < 3; ++i) k3.domega[i] += k2.domega[i];
        k3.dtheta += k2.dtheta;
        scale_omega(k3.domega, exp_half_);
        add_scaled(next, h / 3.0, k3);
        add_scaled(next, h / 6.0, k4);
    }
    next.time = t_start_ + static_cast<double>(step_ + 1) * h;
    next.omega[2].at(0, 0, 0) = 0.0;
    if (cfg_.projection_stride > 0 && (step_ + 1) % cfg_.projection_stride == 0) project_divergence_free(next);
    check_finite(next, state_, step_);

    Tendency k_next = evaluate(next);

    double acc = 0.0;
    const std::size_t n = d.spectral_size();
    for (int i = 0; i < 3; ++i) {
        const std::span<const cplx> w0 = state_.omega[i].coeff(), w1 = next.omega[i].coeff();
        const std::span<const cplx> n0 = k1.domega[i].coeff(), n1 = k_next.domega[i].coeff();
        for (std::size_t idx = 0; idx < n; ++idx) {
            if (w0[idx] == 0.0 && w1[idx] == 0.0 && n0[idx] == 0.0 && n1[idx] == 0.0) continue;
            double sum = 0.0;
            for (int g = 0; g < kDissipationNodes; ++g) {
                const auto& c = dissipation_coeff_[idx * kDissipationNodes + g];
                sum += node_weights_[g] * std::norm(c[0] * w0[idx] + c[1] * n0[idx] + c[2] * w1[idx] + c[3] * n1[idx]);
            }
            acc += dissipation_weight_[idx] * sum;
        }
    }

    state_ = std::move(next);
    tendency_ = std::move(k_next);
    dissipation_ += 2.0 * acc;
    ++step_;
}

Monitors Simulation::sample() {
    Monitors m = measure(state_, cfg_);
    m.step = step_;
    for (int i = 0; i < 4; ++i) E_sup_[i] = std::max(E_sup_[i], m.E[i]);
    m.E_sup = E_sup_;
    m.dissipation = dissipation_;
    return m;
}

State step(const State& s, const StepperConfig& cfg) {
    StepperConfig one = cfg;
    one.t_end = cfg.dt;
    Simulation sim(one, s);
    sim.advance();
    return sim.state();
}

RateWindow decay_window(const Domain& d, double t_end) {
    const double qmin = std::pow(2.0 * kPi / d.length(), 2);
    const double tstar = 1.0 / std::abs(dispersion(qmin, 1).lambda_plus);
    return {5.0, std::min(0.5 * tstar, t_end)};
}

void fit_observables(RunResult& r) {
    for (int j = 0; j < kNumObservables; ++j) {
        std::vector<double> ts, vs;
        for (const auto& m : r.series)
            if (m.time >= r.window.t_min && m.time <= r.window.t_max && m.time > 1.0 && m.obs[j] > 0.0) {
                ts.push_back(m.time);
                vs.push_back(m.obs[j]);
            }
        r.fits[j].reset();
        if (ts.size() >= 5) r.fits[j] = fit_rate(ts, vs);
    }
}

RunResult run(const StepperConfig& cfg, const State& s0) {
    Simulation sim(cfg, s0);
    RunResult r{{}, s0, false, 0.0, {}, {}, {}};
    r.window = decay_window(s0.domain(), cfg.t_end);
    const std::int64_t n = cfg.steps();
    try {
        r.series.push_back(sim.sample());
        for (std::int64_t i = 0; i < n; ++i) {
            sim.advance();
            if (sim.step_index() % cfg.monitor_stride == 0) r.series.push_back(sim.sample());
        }
    } catch (const Error& e) {
        r.failed = true;
        r.failure_time = sim.time();
        r.failure = e.what();
    }
    r.final_state = sim.state();
    fit_observables(r);
    return r;
}

}  // namespace slab
