#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "slab/decay.hpp"
#include "slab/errors.hpp"

using namespace slab;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct evaluation of the kernel norm for the gaussian profile on k = 1,
// from the characteristic roots in long double and adaptive quadrature.
double oracle_norm(double t, Kernel kernel, HMult hmult, KernelNorm norm) {
    auto f = [&](double r) -> double {
        const long double q = (long double)r * r;
        const long double Xi = q + (long double)kPi * kPi;
        const long double s = std::sqrt(Xi * Xi - 4 * q / Xi);
        const long double lp = (-Xi + s) / 2, lm = (-Xi - s) / 2;
        const long double ep = std::exp(lp * t), em = std::exp(lm * t);
        long double m = 0;
        switch (kernel) {
            case Kernel::L1: m = (ep + em) / 2; break;
            case Kernel::L2: m = (ep - em) / s; break;
            case Kernel::dtL1: m = (lp * ep + lm * em) / 2; break;
            case Kernel::dtL2: m = (lp * ep - lm * em) / s; break;
            case Kernel::heatG: m = std::exp(-q / (Xi * Xi) * t); break;
        }
        long double h = 1;
        if (hmult == HMult::grad_h) h = std::sqrt(q);
        if (hmult == HMult::grad_h2) h = q;
        if (hmult == HMult::d3) h = kPi;
        const long double v = m * h * std::exp(-q);
        return double((norm == KernelNorm::HatL1 ? std::fabs(v) : v * v) * 2 * kPi * r);
    };
    using boost::math::quadrature::gauss_kronrod;
    // the slow layer sits at r ~ pi^2 / sqrt(t)
    const double a = std::min(1.0, 10.0 / std::sqrt(std::max(t, 1.0)));
    double I = gauss_kronrod<double, 61>::integrate(f, 0.0, a, 15, 1e-13) +
               gauss_kronrod<double, 61>::integrate(f, a, 12.0, 15, 1e-13);
    return norm == KernelNorm::HatL1 ? I : std::sqrt(I);
}

double oracle_conv(double t, double mu, double nu, bool exponential) {
    auto br = [](double s) { return s > 1.0 ? s : 1.0; };
    auto f = [&](double s) {
        return exponential ? std::exp(-(t - s)) * std::pow(br(s), -nu)
                           : std::pow(br(t - s), -mu) * std::pow(br(s), -1 - nu);
    };
    using boost::math::quadrature::gauss_kronrod;
    double sum = 0.0;
    std::vector<double> pts = {0.0};
    if (t > 1.0) pts.push_back(1.0);
    if (t > 2.0) pts.push_back(t - 1.0);
    pts.push_back(t);
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        sum += gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 25, 1e-12);
    return sum;
}

}  // namespace

TEST_CASE("kernel_norm at t = 0 is the profile norm") {
    const auto v = kernel_norm(0.0, Kernel::L1, HMult::none, KernelNorm::HatL1, Profile::gaussian(), {});
    CHECK(v.value == doctest::Approx(kPi).epsilon(1e-12));
    CHECK_FALSE(v.warning);
    const auto w = kernel_norm(0.0, Kernel::L1, HMult::none, KernelNorm::HatL2, Profile::gaussian(), {});
    CHECK(w.value == doctest::Approx(std::sqrt(kPi / 2)).epsilon(1e-12));
    CHECK(kernel_norm(0.0, Kernel::L2, HMult::none, KernelNorm::HatL1, Profile::gaussian(), {}).value == 0.0);
}

TEST_CASE("kernel_norm against adaptive quadrature") {
    const auto p = Profile::gaussian();
    for (Kernel k : {Kernel::L1, Kernel::L2, Kernel::dtL1, Kernel::dtL2, Kernel::heatG})
        for (HMult h : {HMult::none, HMult::grad_h, HMult::grad_h2, HMult::d3})
            for (KernelNorm n : {KernelNorm::HatL1, KernelNorm::HatL2})
                for (double t : {0.5, 10.0, 1e3, 1e5}) {
                    CAPTURE(t);
                    const double got = kernel_norm(t, k, h, n, p, {}).value;
                    CHECK(got == doctest::Approx(oracle_norm(t, k, h, n)).epsilon(1e-7));
                }
}

TEST_CASE("kernel_norm quadrature convergence") {
    const auto p = Profile::gaussian();
    QuadratureSpec base, wide, fine;
    wide.R = 2 * base.R;
    fine.n_r = 2 * base.n_r;
    fine.n_phi = 2 * base.n_phi;
    for (const auto& o : all_rate_observables())
        for (double t : {1.0, 1e2, 1e4}) {
            const double v = kernel_norm_sum(t, o.kernels, o.hmult, o.norm, p, base).value;
            CHECK(std::abs(kernel_norm_sum(t, o.kernels, o.hmult, o.norm, p, wide).value - v) < 1e-3 * v);
            CHECK(std::abs(kernel_norm_sum(t, o.kernels, o.hmult, o.norm, p, fine).value - v) < 1e-3 * v);
        }
}

TEST_CASE("kernel_norm is nonincreasing in t") {
    const auto p = Profile::gaussian();
    const auto grid = log_time_grid(1.0, 1e5, 8);
    for (Kernel k : {Kernel::L1, Kernel::L2, Kernel::heatG})
        for (HMult h : {HMult::none, HMult::grad_h, HMult::d3})
            for (KernelNorm n : {KernelNorm::HatL1, KernelNorm::HatL2}) {
                double prev = INFINITY;
                for (double t : grid) {
                    const double v = kernel_norm(t, k, h, n, p, {}).value;
                    CHECK(v <= prev);
                    prev = v;
                }
            }
    double prev = INFINITY;
    for (double t : log_time_grid(0.01, 1.0, 8)) {
        const double v = kernel_norm(t, Kernel::L1, HMult::none, KernelNorm::HatL1, p, {}).value;
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("asymptotic rates of the kernel norms") {
    // local slopes once t is far beyond the plateau scale pi^4
    const auto p = Profile::gaussian();
    const auto times = log_time_grid(1e5, 1e6, 4);
    for (const auto& o : all_rate_observables()) {
        CAPTURE(o.name);
        const auto row = rate_row(o, times, p, {}, {1e5, 1e6});
        CHECK(row.window_valid);
        CHECK(std::abs(row.fit.exponent - o.target) <= 0.02);
        CHECK_FALSE(row.warning);
    }
}

TEST_CASE("excluding q = 0 gives exponential decay") {
    const auto p = Profile::gaussian();
    QuadratureSpec cut;
    cut.q_min = 0.05;
    auto at = [&](double t) { return kernel_norm(t, Kernel::L1, HMult::none, KernelNorm::HatL1, p, cut).value; };
    // e^{lambda_+(q_min) t} with lambda_+ ~ -q_min / pi^4
    const double lp = -0.05 / std::pow(0.05 + kPi * kPi, 2);
    const double slope = std::log(at(4e4) / at(2e4)) / 2e4;
    CHECK(slope <= 0.9 * lp);
    CHECK(slope >= 1.5 * lp);
    // an algebraic tail would give log-slope -1 here
    CHECK(std::log(at(4e4) / at(2e4)) / std::log(2.0) < -10.0);
}

TEST_CASE("truncation warning") {
    Profile wide = Profile::gaussian();
    wide.radial = [](double q) { return std::exp(-q / 100.0); };
    QuadratureSpec small;
    small.R = 4.0;
    const auto v = kernel_norm(1.0, Kernel::L1, HMult::none, KernelNorm::HatL1, wide, small);
    CHECK(v.warning);
    CHECK(v.tail > 0.01);
    CHECK_THROWS_AS(kernel_norm(-1.0, Kernel::L1, HMult::none, KernelNorm::HatL1, wide, small), DomainError);
    small.n_r = 0;
    CHECK_THROWS_AS(kernel_norm(1.0, Kernel::L1, HMult::none, KernelNorm::HatL1, wide, small), DomainError);
}

TEST_CASE("vertical weights and cutoff") {
    Profile p = Profile::gaussian();
    p.vertical_weights = {1.0, 0.5};
    QuadratureSpec one, two;
    two.Kq = 2;
    const double a = kernel_norm(0.0, Kernel::L1, HMult::d3, KernelNorm::HatL1, p, one).value;
    const double b = kernel_norm(0.0, Kernel::L1, HMult::d3, KernelNorm::HatL1, p, two).value;
    CHECK(a == doctest::Approx(kPi * kPi));
    CHECK(b == doctest::Approx(kPi * kPi * 2.0));
}

TEST_CASE("fit_rate") {
    const auto times = log_time_grid(10.0, 1e4, 4);
    SUBCASE("exact power law") {
        std::vector<double> v;
        for (double t : times) v.push_back(1.0 / t);
        const auto f = fit_rate(times, v);
        CHECK(f.exponent == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(f.stderr_ < 1e-10);
        CHECK(f.r_squared == doctest::Approx(1.0));
        CHECK(f.samples == 13);
        CHECK(f.t_min == 10.0);
        CHECK(f.t_max == 1e4);
    }
    SUBCASE("noisy power law") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> noise;
        std::vector<double> v;
        for (double t : times) v.push_back(3.0 * std::pow(t, -1.5) * (1 + 0.01 * noise(rng)));
        const auto f = fit_rate(times, v);
        CHECK(f.exponent >= -1.55);
        CHECK(f.exponent <= -1.45);
    }
    SUBCASE("constant") {
        const auto f = fit_rate(times, std::vector<double>(times.size(), 2.5));
        CHECK(std::abs(f.exponent) < 1e-15);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(fit_rate({2, 3, 4, 5}, {1, 1, 1, 1}), InsufficientDataError);
        CHECK_THROWS_AS(fit_rate({1, 2, 3, 4, 5}, {1, 1, 1, 1, 1}), DomainError);
        CHECK_THROWS_AS(fit_rate({2, 3, 3, 4, 5}, {1, 1, 1, 1, 1}), DomainError);
        CHECK_THROWS_AS(fit_rate({2, 3, 4, 5, 6}, {1, 1, 0, 1, 1}), DomainError);
    }
}

TEST_CASE("convolution_bound") {
    const auto z = convolution_bound(0.0, 1.5, 0.5);
    CHECK(z.integral == 0.0);
    CHECK(z.exp_integral == 0.0);
    for (auto [mu, nu] : {std::pair{1.5, 0.5}, std::pair{1.0, 1.0}, std::pair{2.0, 1.0}})
        for (double t : {0.5, 3.0, 10.0, 1e2, 1e3}) {
            CAPTURE(t);
            const auto b = convolution_bound(t, mu, nu);
            CHECK(b.integral == doctest::Approx(oracle_conv(t, mu, nu, false)).epsilon(1e-9));
            CHECK(b.exp_integral == doctest::Approx(oracle_conv(t, mu, nu, true)).epsilon(1e-9));
        }
    SUBCASE("boundedness, mu = 3/2, nu = 1/2") {
        double lo = INFINITY, hi = 0;
        for (double t : {10.0, 1e2, 1e3}) {
            const double r = convolution_bound(t, 1.5, 0.5).ratio;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        CHECK(hi / lo < 1.2);
    }
    SUBCASE("exponential variant, nu = 1") {
        for (double t : {10.0, 1e2, 1e3, 1e4}) CHECK(convolution_bound(t, 1.0, 1.0).exp_ratio < 1.2);
    }
}

TEST_CASE("rate_row window handling") {
    const auto p = Profile::gaussian();
    const auto& o = rate_observable("L1L2_hatL1");
    const auto early = rate_row(o, {1.5, 2.0, 3.0, 5.0, 8.0}, p, {});
    CHECK_FALSE(early.window_valid);
    CHECK_FALSE(early.pass);
    CHECK(std::isnan(early.fit.exponent));
    CHECK_THROWS_AS(rate_row(o, {100.0}, p, {}), InsufficientDataError);
    CHECK_THROWS_AS(rate_observable("nope"), UsageError);
    CHECK(default_rate_observables().size() == 8);
}

TEST_CASE("log_time_grid") {
    const auto g = log_time_grid(10.0, 1e4, 4);
    REQUIRE(g.size() == 13);
    CHECK(g.front() == 10.0);
    CHECK(g.back() == 1e4);
    CHECK(g[4] == doctest::Approx(100.0));
}
