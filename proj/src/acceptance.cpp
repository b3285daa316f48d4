#include "slab/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "slab/errors.hpp"
#include "slab/io.hpp"
#include "slab/propagator.hpp"

namespace slab {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::string num(double v, int digits = 3) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

SpectralScalar random_field(const Domain& d, Parity p, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    SpectralScalar f(d, p);
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy) {
            if (!d.in_dealias_band(ix, iy)) continue;
            for (int k = (p == Parity::Odd ? 1 : 0); k <= d.kmax(); ++k) f.at(ix, iy, k) = {g(rng), g(rng)};
        }
    hermitian_project(f);
    return f;
}

// Divergence-free vorticity curl(curl A).
VectorField random_vorticity(const Domain& d, std::mt19937_64& rng) {
    const VectorField a(random_field(d, Parity::Odd, rng), random_field(d, Parity::Odd, rng),
                        random_field(d, Parity::Even, rng), FieldRole::Vorticity);
    return curl(curl(a));
}

double max_rel(const SpectralScalar& a, const SpectralScalar& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.coeff().size(); ++i) {
        num = std::max(num, std::abs(a.coeff()[i] - b.coeff()[i]));
        den = std::max({den, std::abs(a.coeff()[i]), std::abs(b.coeff()[i])});
    }
    return den == 0.0 ? num : num / den;
}

double state_distance(const State& a, const State& b) {
    double s = sobolev_norm(a.theta - b.theta, 0);
    for (int i = 0; i < 3; ++i) s += sobolev_norm(a.omega[i] - b.omega[i], 0);
    return s;
}

// ---------------------------------------------------------------------------

CriterionResult c1(const fs::path&) {
    const auto t0 = std::chrono::steady_clock::now();
    const DecayConfig dc;
    const auto times = log_time_grid(dc.window.t_min, dc.window.t_max, dc.per_decade);
    bool pass = true;
    std::string detail;
    for (const auto& obs : default_rate_observables()) {
        const RateRow r = rate_row(obs, times, Profile::gaussian(), dc.quad, dc.window);
        pass = pass && r.pass;
        detail += (detail.empty() ? "" : ", ") + obs.name + " " + num(r.fit.exponent) + "/" + num(obs.target);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = pass && secs <= 300.0;
    return {1, "linear kernel decay rates over [10, 1e4], +-0.1", pass, "fitted/target: " + detail, 0.0};
}

CriterionResult c2(const fs::path&) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> logq(-12.0, 8.0);
    std::uniform_int_distribution<int> kk(1, 10000);
    int failures = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double q = i % 100 == 0 ? 0.0 : std::pow(10.0, logq(rng));
        const int k = i % 2 ? kk(rng) : 1 + i % 5;
        if (!within_dispersion_bounds(dispersion(q, k))) ++failures;
    }
    return {2, "dispersion invariants", failures == 0,
            std::to_string(failures) + " failures on " + std::to_string(n) + " modes", 0.0};
}

CriterionResult c3(const fs::path&) {
    const Domain d(16.0, 32, 32, 11, 17);
    std::mt19937_64 rng(31);
    double poisson = 0.0, identity = 0.0, ce1 = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = random_field(d, Parity::Odd, rng);
        poisson = std::max(poisson, sobolev_norm(neg_laplacian(invert_dirichlet(f)) - f, 0) / sobolev_norm(f, 0));
        auto g = random_field(d, Parity::Even, rng);
        g.at(0, 0, 0) = 0.0;
        poisson = std::max(poisson, sobolev_norm(neg_laplacian(invert_neumann(g, MeanPolicy::Reject)) - g, 0) /
                                        sobolev_norm(g, 0));

        const VectorField w = random_vorticity(d, rng);
        const VectorField u = velocity_from_vorticity(w);
        const VectorField cu = curl(u);
        for (int i = 0; i < 3; ++i) identity = std::max(identity, max_rel(cu[i], w[i]));
        for (int m = 0; m <= 3; ++m) {
            double grad2 = 0.0;
            for (int i = 0; i < 3; ++i) grad2 += std::pow(sobolev_norm(gradient(u[i]), m), 2);
            ce1 = std::max(ce1, (sobolev_norm(u[2], m + 1) + std::sqrt(grad2)) / sobolev_norm(w, m));
        }
    }
    const bool pass = poisson <= 1e-12 && identity <= 1e-10 && ce1 <= 4.0;
    return {3, "elliptic exactness at 32x32x17", pass,
            "Poisson residual " + num(poisson) + " (<= 1e-12), curl(BS(w)) - w " + num(identity) +
                " (<= 1e-10), Biot-Savart ratio " + num(ce1) + " (<= 4)",
            0.0};
}

// theta of the nonlinear run against the second-order form driven by f2
// recorded at every step and interpolated linearly in time.
double cross_formulation_error(const State& s0, double T, double dt) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.t_end = T;
    Simulation sim(cfg, s0);
    std::vector<SpectralScalar> f2{compute_f2(s0)};
    for (std::int64_t i = 0; i < cfg.steps(); ++i) {
        sim.advance();
        f2.push_back(compute_f2(sim.state()));
    }
    const ForcingSampler sampler = [&](double s) {
        const double x = s / dt;
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(x), f2.size() - 2);
        const double a = x - static_cast<double>(j);
        SpectralScalar out = (1.0 - a) * f2[j];
        out.axpy(a, f2[j + 1]);
        return out;
    };
    const SpectralScalar lin =
        solve_theta_linear(s0.theta, theta_rate(s0), &sampler, T, static_cast<int>(cfg.steps()));
    return sobolev_norm(lin - sim.state().theta, 0) / sobolev_norm(sim.state().theta, 0);
}

CriterionResult c4(const fs::path&) {
    // per mode: exact coupled propagator against the second-order form
    std::mt19937_64 rng(44);
    const Domain d(std::uniform_real_distribution<double>(4.0, 40.0)(rng), 32, 32, 4, 7);
    State s(random_vorticity(d, rng), random_field(d, Parity::Odd, rng));
    s.omega[2].at(0, 0, 0) = 0.0;
    const SpectralScalar theta1 = -velocity_from_vorticity(s.omega)[2];
    int modes = 0;
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 1; k <= d.kmax(); ++k) modes += s.theta.at(ix, iy, k) != 0.0;
    double worst = 0.0;
    for (double t : {0.1, 1.0, 10.0}) {
        const auto a = exact_linear_coupled(s, t).theta;
        const auto b = solve_theta_linear(s.theta, theta1, nullptr, t);
        for (std::size_t i = 0; i < a.coeff().size(); ++i)
            worst = std::max(worst, std::abs(a.coeff()[i] - b.coeff()[i]) / std::max(std::abs(b.coeff()[i]), 1e-3));
    }

    // full field, nonlinear
    const Domain dn(16.0, 16, 16, 6, 10);
    const State s0 = gen_initial(dn, 21, 1.0, 1.0);
    const double T = 1.0;
    std::vector<double> err;
    for (double dt : {0.02, 0.01, 0.005}) err.push_back(cross_formulation_error(s0, T, dt));
    const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);

    const bool pass = modes >= 1000 && worst <= 1e-10 && p1 >= 1.9 && p2 >= 1.9;
    return {4, "formulation equivalence", pass,
            "per-mode max rel. error " + num(worst) + " on " + std::to_string(modes) +
                " modes (<= 1e-10); forced second-order form vs nonlinear theta: errors " + num(err[0]) + ", " +
                num(err[1]) + ", " + num(err[2]) + ", orders " + num(p1) + ", " + num(p2) + " (>= 1.9)",
            0.0};
}

CriterionResult c5(const fs::path&) {
    const Domain d(24.0, 48, 48, 11, 17);
    const State s0 = gen_initial(d, 5, 1.0, 0.5);
    StepperConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = 10.0;
    cfg.scheme = Scheme::IFRK4;
    cfg.linear_only = true;
    cfg.monitor_stride = 10;
    const RunResult r = run(cfg, s0);
    double worst = 0.0;
    bool monotone = true;
    const double e0 = r.series.front().energy;
    for (std::size_t i = 0; i < r.series.size(); ++i) {
        const auto& m = r.series[i];
        worst = std::max(worst, std::abs(m.energy - e0 + m.dissipation) / e0);
        if (i > 0 && m.energy > r.series[i - 1].energy) monotone = false;
    }
    const bool pass = !r.failed && worst <= 1e-6 && monotone;
    return {5, "linear energy law at 48x48x17", pass,
            "max |dE + 2 int |grad w|^2| / E0 = " + num(worst) + " (<= 1e-6) over " +
                std::to_string(r.series.size()) + " samples, monotone " + (monotone ? "yes" : "no") +
                (r.failed ? ", run failed: " + r.failure : ""),
            0.0};
}

CriterionResult c6(const fs::path&) {
    const Domain d(64.0 * kPi, 64, 64, 11, 17);
    const State s0 = gen_initial(d, 6, 1e-3, 1.0);
    StepperConfig cfg;
    cfg.dt = 0.1;
    cfg.t_end = 50.0;
    cfg.monitor_stride = 5;
    const RunResult r = run(cfg, s0);
    const double E1 = r.series.front().E[0];
    double growth = 0.0, div = 0.0, mean = 0.0;
    for (const auto& m : r.series) {
        growth = std::max(growth, m.E[0] / E1);
        div = std::max(div, m.divergence);
        mean = std::max(mean, m.omega3_mean);
    }
    bool parity = true;
    try {
        check_state(r.final_state);
    } catch (const Error&) {
        parity = false;
    }
    // omega_3 observables against the omega_h ones
    const int w3[] = {5, 6};
    const int wh[] = {1, 3, 10};
    double slowest3 = -INFINITY, fastesth = INFINITY;
    bool fitted = true;
    std::string slopes;
    for (int j : w3) {
        fitted = fitted && r.fits[j].has_value();
        if (!r.fits[j]) continue;
        slowest3 = std::max(slowest3, r.fits[j]->exponent);
        slopes += std::string(kDecayObservables[j].name) + " " + num(r.fits[j]->exponent) + " ";
    }
    for (int j : wh) {
        fitted = fitted && r.fits[j].has_value();
        if (!r.fits[j]) continue;
        fastesth = std::min(fastesth, r.fits[j]->exponent);
        slopes += std::string(kDecayObservables[j].name) + " " + num(r.fits[j]->exponent) + " ";
    }
    const double gap = slowest3 - fastesth;
    const bool pass = !r.failed && growth <= 2.0 && div <= 1e-10 && mean == 0.0 && parity && fitted && gap <= -0.5;
    return {6, "nonlinear small-data stability at 64x64x17, t = 50", pass,
            "max E1/E1(0) " + num(growth) + " (<= 2), max divergence ratio " + num(div) + ", omega_3 mean " +
                num(mean) + ", parity " + (parity ? "ok" : "broken") + "; window [" + num(r.window.t_min) + ", " +
                num(r.window.t_max) + "] slopes: " + slopes + "; slowest omega_3 minus fastest omega_h " + num(gap) +
                " (<= -0.5)" + (r.failed ? "; run failed: " + r.failure : ""),
            0.0};
}

CriterionResult c7(const fs::path&) {
    const Domain d(16.0, 16, 16, 6, 10);
    const State s0 = gen_initial(d, 4, 1.0, 1.0);
    const double T = 1.0;
    const State exact = exact_linear_coupled(s0, T);
    bool pass = true;
    std::string detail;
    for (auto [scheme, order] : {std::pair{Scheme::IFRK2, 1.9}, std::pair{Scheme::IFRK4, 3.8}}) {
        std::vector<double> err;
        for (double dt : {0.025, 0.0125, 0.00625}) {
            StepperConfig cfg;
            cfg.scheme = scheme;
            cfg.dt = dt;
            cfg.t_end = T;
            cfg.linear_only = true;
            err.push_back(state_distance(run(cfg, s0).final_state, exact));
        }
        const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
        pass = pass && p1 >= order && p2 >= order;
        detail += std::string(detail.empty() ? "" : "; ") + to_string(scheme) + " orders " + num(p1) + ", " +
                  num(p2) + " (>= " + num(order) + ")";
    }
    return {7, "integrator order without nonlinearity", pass, detail, 0.0};
}

CriterionResult c8(const fs::path&) {
    bool pass = true;
    std::string detail;
    for (auto [mu, nu] : {std::pair{1.5, 0.5}, std::pair{1.0, 1.0}, std::pair{2.0, 1.0}}) {
        double lo = INFINITY, hi = 0.0, elo = INFINITY, ehi = 0.0;
        for (double t : {10.0, 100.0, 1000.0}) {
            const auto b = convolution_bound(t, mu, nu);
            lo = std::min(lo, b.ratio);
            hi = std::max(hi, b.ratio);
            elo = std::min(elo, b.exp_ratio);
            ehi = std::max(ehi, b.exp_ratio);
        }
        pass = pass && hi <= 1.5 * lo && ehi <= 1.5 * elo;
        detail += std::string(detail.empty() ? "" : "; ") + "(" + num(mu) + "," + num(nu) + ") ratio band " +
                  num(hi / lo, 4) + ", exp band " + num(ehi / elo, 4);
    }
    return {8, "convolution lemma boundedness (band <= 1.5)", pass, detail, 0.0};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CriterionResult c9(const fs::path& workdir) {
    RunConfig cfg;
    cfg.domain = {8.0, 16, 16, 6, 10};
    cfg.stepper.dt = 0.05;
    cfg.stepper.t_end = 10.0;
    cfg.stepper.monitor_stride = 2;
    cfg.initial = {9, 1e-2, 1.0};
    const fs::path a = workdir / "c9_a", b = workdir / "c9_b", c = workdir / "c9_c";
    for (const auto& p : {a, b, c}) fs::remove_all(p);
    std::ostringstream log;
    cmd_simulate(cfg, a, log);
    cmd_simulate(cfg, b, log);
    const bool same = slurp(a / cfg.output.series) == slurp(b / cfg.output.series) &&
                      slurp(a / cfg.output.fits) == slurp(b / cfg.output.fits) &&
                      slurp(a / cfg.output.checkpoint) == slurp(b / cfg.output.checkpoint);
    RunConfig half = cfg;
    half.stepper.t_end = 5.0;
    cmd_simulate(half, c, log);
    cmd_resume(c / cfg.output.checkpoint, 10.0, c, log);
    const bool resumed = slurp(a / cfg.output.series) == slurp(c / cfg.output.series) &&
                         slurp(a / cfg.output.checkpoint) == slurp(c / cfg.output.checkpoint);
    const bool pass = same && resumed;
    return {9, "determinism and resume", pass,
            std::string("two runs bit-identical: ") + (same ? "yes" : "no") + "; t = 5 + resume to 10 equals one-shot: " +
                (resumed ? "yes" : "no"),
            0.0};
}

}  // namespace

CriterionResult run_criterion(int id, const fs::path& workdir) {
    static const std::function<CriterionResult(const fs::path&)> table[] = {c1, c2, c3, c4, c5, c6, c7, c8, c9};
    if (id < 1 || id > kNumCriteria) throw UsageError("criterion must lie in 1..9");
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
        r = table[id - 1](workdir);
    } catch (const std::exception& e) {
        r = {id, "criterion " + std::to_string(id), false, std::string("error: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream os;
    os << "criterion " << r.id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.title << ": " << r.detail << " ("
       << num(r.seconds, 3) << " s)";
    return os.str();
}

}  // namespace slab
