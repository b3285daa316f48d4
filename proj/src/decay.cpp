#include "slab/decay.hpp"

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "slab/errors.hpp"
#include "slab/propagator.hpp"

namespace slab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPanelNodes = 8;

struct Rule {
    std::vector<double> x, w;  // on [-1, 1]
};

Rule gauss_legendre(int n) {
    Rule r;
    for (double z : boost::math::legendre_p_zeros<double>(n)) {
        const double dp = boost::math::legendre_p_prime<double>(n, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x.push_back(z);
        r.w.push_back(w);
        if (z != 0.0) {
            r.x.push_back(-z);
            r.w.push_back(w);
        }
    }
    return r;
}

const Rule& panel_rule() {
    static const Rule r = gauss_legendre(kPanelNodes);
    return r;
}

template <class F>
double integrate_panels(const std::vector<double>& breaks, const Rule& rule, F&& f) {
    double sum = 0.0;
    for (size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i], b = breaks[i + 1];
        const double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (size_t j = 0; j < rule.x.size(); ++j) sum += h * rule.w[j] * f(c + h * rule.x[j]);
    }
    return sum;
}

double kernel_factor(Kernel kernel, double t, double q, int k) {
    if (kernel == Kernel::heatG) {
        const double Xi = q + kPi * kPi * k * k;
        return std::exp(-q / (Xi * Xi) * t);
    }
    const auto f = semigroup_factors(t, dispersion(q, k));
    switch (kernel) {
        case Kernel::L1: return f.L1;
        case Kernel::L2: return f.L2;
        case Kernel::dtL1: return f.dtL1;
        case Kernel::dtL2: return f.dtL2;
        default: break;
    }
    return 0.0;
}

double multiplier(HMult m, double q, int k) {
    switch (m) {
        case HMult::none: return 1.0;
        case HMult::grad_h: return std::sqrt(q);
        case HMult::grad_h2: return q;
        case HMult::d3: return k * kPi;
    }
    return 1.0;
}

// Radial breakpoints: geometric towards r = 0, where the slow modes live.
std::vector<double> radial_breaks(const QuadratureSpec& quad) {
    const int panels = std::max(2, (quad.n_r + kPanelNodes - 1) / kPanelNodes);
    std::vector<double> b;
    double lo = std::sqrt(quad.q_min);
    int geometric = panels;
    if (lo == 0.0) {
        lo = quad.R * 1e-6;
        b.push_back(0.0);
        geometric = panels - 1;
    }
    const double ratio = std::pow(quad.R / lo, 1.0 / geometric);
    for (int i = 0; i < geometric; ++i) b.push_back(lo * std::pow(ratio, i));
    b.push_back(quad.R);
    return b;
}

}  // namespace

Profile Profile::gaussian() {
    Profile p;
    p.radial = [](double q) { return std::exp(-q); };
    p.vertical_weights = {1.0};
    p.smoothness = 8.0;
    return p;
}

void QuadratureSpec::validate() const {
    if (!(R > 0.0) || n_r <= 0 || n_phi <= 0 || Kq <= 0 || !(q_min >= 0.0) || q_min >= R * R)
        throw DomainError("quadrature spec: R, n_r, n_phi, Kq must be positive and q_min in [0, R^2)");
}

NormValue kernel_norm_sum(double t, const std::vector<Kernel>& kernels, HMult hmult, KernelNorm norm,
                          const Profile& p, const QuadratureSpec& quad) {
    if (!(t >= 0.0)) throw DomainError("kernel_norm: t must be >= 0");
    quad.validate();
    const int kmax = std::min<int>(quad.Kq, static_cast<int>(p.vertical_weights.size()));

    // The profiles are radial, so the equispaced angular rule is exact and
    // the angular integral reduces to its weight sum.
    const double angular = 2.0 * kPi;

    NormValue out;
    for (Kernel kernel : kernels) {
        auto integrand = [&](double r) {
            const double q = r * r;
            const double g = p.radial(q);
            double s = 0.0;
            for (int k = 1; k <= kmax; ++k) {
                const double a = p.vertical_weights[k - 1];
                if (a == 0.0) continue;
                const double v = kernel_factor(kernel, t, q, k) * multiplier(hmult, q, k) * g * a;
                s += norm == KernelNorm::HatL1 ? std::abs(v) : v * v;
            }
            return s * r * angular;
        };
        auto breaks = radial_breaks(quad);
        if (norm == KernelNorm::HatL1) {
            // |dtL2| has a kink where the kernel changes sign; split panels there
            std::vector<double> refined = {breaks.front()};
            for (size_t i = 0; i + 1 < breaks.size(); ++i) {
                for (int k = 1; k <= kmax; ++k) {
                    auto sgn = [&](double r) { return kernel_factor(kernel, t, r * r, k) > 0.0; };
                    double a = breaks[i], b = breaks[i + 1];
                    if (sgn(a) == sgn(b)) continue;
                    const bool sa = sgn(a);
                    for (int it = 0; it < 80 && b - a > 1e-15 * b; ++it) {
                        const double m = 0.5 * (a + b);
                        (sgn(m) == sa ? a : b) = m;
                    }
                    refined.push_back(0.5 * (a + b));
                }
                refined.push_back(breaks[i + 1]);
            }
            std::sort(refined.begin(), refined.end());
            breaks = std::move(refined);
        }
        const double body = integrate_panels(breaks, panel_rule(), integrand);
        std::vector<double> tail_breaks;
        for (int i = 0; i <= 8; ++i) tail_breaks.push_back(quad.R * (1.0 + i / 8.0));
        const double tail = integrate_panels(tail_breaks, panel_rule(), integrand);

        const double value = norm == KernelNorm::HatL1 ? body : std::sqrt(body);
        double rel = 0.0;
        if (body > 0.0) rel = norm == KernelNorm::HatL1 ? tail / body : std::sqrt(1.0 + tail / body) - 1.0;
        else if (tail > 0.0) rel = std::numeric_limits<double>::infinity();
        out.value += value;
        out.tail = std::max(out.tail, rel);
    }
    out.warning = out.tail > 0.01;
    return out;
}

NormValue kernel_norm(double t, Kernel kernel, HMult hmult, KernelNorm norm, const Profile& p,
                      const QuadratureSpec& quad) {
    return kernel_norm_sum(t, {kernel}, hmult, norm, p, quad);
}

RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.size() != values.size()) throw DimensionError("fit_rate: times and values differ in length");
    const size_t n = times.size();
    if (n < 5) throw InsufficientDataError("fit_rate: need at least 5 samples, got " + std::to_string(n));
    for (size_t i = 0; i < n; ++i) {
        if (!(times[i] > 1.0)) throw DomainError("fit_rate: times must exceed 1");
        if (i > 0 && !(times[i] > times[i - 1])) throw DomainError("fit_rate: times must be strictly increasing");
        if (!(values[i] > 0.0)) throw DomainError("fit_rate: values must be positive");
    }
    std::vector<double> x(n), y(n);
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        x[i] = std::log(times[i]);
        y[i] = std::log(values[i]);
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    RateFit f;
    f.exponent = sxy / sxx;
    const double res = std::max(0.0, syy - f.exponent * sxy);
    f.stderr_ = std::sqrt(res / (n - 2) / sxx);
    f.r_squared = syy > 0.0 ? 1.0 - res / syy : 1.0;
    f.t_min = times.front();
    f.t_max = times.back();
    f.samples = static_cast<int>(n);
    return f;
}

ConvolutionBound convolution_bound(double t, double mu, double nu, int nquad) {
    if (!(t >= 0.0)) throw DomainError("convolution_bound: t must be >= 0");
    if (!(mu > 0.0) || !(nu > 0.0)) throw DomainError("convolution_bound: mu and nu must be positive");
    if (nquad < 1) throw DomainError("convolution_bound: nquad must be positive");
    ConvolutionBound b;
    if (t == 0.0) return b;

    // kinks at s = 1 and s = t - 1; power-law and exponential layers at both ends
    std::vector<double> br = {0.0, t};
    for (double d = 0.125; d < t; d *= 2.0) {
        br.push_back(d);
        br.push_back(t - d);
    }
    br.push_back(std::min(1.0, t));
    br.push_back(std::max(0.0, t - 1.0));
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end(), [](double a, double c) { return std::abs(a - c) <= 1e-14 * (1 + a); }),
             br.end());

    const Rule rule = gauss_legendre(nquad);
    b.integral = integrate_panels(br, rule, [&](double s) {
        return std::pow(bracket(t - s), -mu) * std::pow(bracket(s), -1.0 - nu);
    });
    b.exp_integral = integrate_panels(br, rule, [&](double s) { return std::exp(-(t - s)) * std::pow(bracket(s), -nu); });
    b.ratio = b.integral * std::pow(bracket(t), mu);
    b.exp_ratio = b.exp_integral * std::pow(bracket(t), nu);
    return b;
}

std::vector<RateObservable> default_rate_observables() {
    using K = Kernel;
    const std::vector<K> L = {K::L1, K::L2};
    const std::vector<K> dL = {K::dtL1, K::dtL2};
    return {
        {"L1L2_hatL1", L, HMult::none, KernelNorm::HatL1, -1.0},
        {"L1L2_d3_hatL1", L, HMult::d3, KernelNorm::HatL1, -1.0},
        {"dtL1L2_hatL1", dL, HMult::none, KernelNorm::HatL1, -2.0},
        {"L1L2_gradh_hatL1", L, HMult::grad_h, KernelNorm::HatL1, -1.5},
        {"L1L2_hatL2", L, HMult::none, KernelNorm::HatL2, -0.5},
        {"dtL1L2_hatL2", dL, HMult::none, KernelNorm::HatL2, -1.5},
        {"L1L2_gradh_hatL2", L, HMult::grad_h, KernelNorm::HatL2, -1.0},
        {"L1L2_gradh2_hatL2", L, HMult::grad_h2, KernelNorm::HatL2, -1.5},
    };
}

std::vector<RateObservable> all_rate_observables() {
    auto v = default_rate_observables();
    v.push_back({"heatG_hatL1", {Kernel::heatG}, HMult::none, KernelNorm::HatL1, -1.0});
    return v;
}

const RateObservable& rate_observable(const std::string& name) {
    static const auto all = all_rate_observables();
    for (const auto& o : all)
        if (o.name == name) return o;
    throw UsageError("unknown decay observable '" + name + "'");
}

std::vector<double> log_time_grid(double t0, double t1, int per_decade) {
    if (!(t0 > 0.0) || !(t1 >= t0) || per_decade < 1) throw DomainError("log_time_grid: need 0 < t0 <= t1");
    const int n = static_cast<int>(std::ceil(std::log10(t1 / t0) * per_decade - 1e-9));
    std::vector<double> g;
    for (int i = 0; i <= n; ++i) g.push_back(i == n ? t1 : t0 * std::pow(10.0, double(i) / per_decade));
    return g;
}

RateRow rate_row(const RateObservable& obs, const std::vector<double>& times, const Profile& p,
                 const QuadratureSpec& quad, const RateWindow& window) {
    if (times.size() < 5)
        throw InsufficientDataError("rate table: need at least 5 time points, got " + std::to_string(times.size()));
    RateRow row;
    row.obs = obs;
    row.times = times;
    for (double t : times) {
        const auto v = kernel_norm_sum(t, obs.kernels, obs.hmult, obs.norm, p, quad);
        row.values.push_back(v.value);
        row.tails.push_back(v.tail);
        row.warning = row.warning || v.warning;
    }
    auto subset_fit = [&](double lo, double hi, RateFit& out) {
        std::vector<double> ts, vs;
        for (size_t i = 0; i < times.size(); ++i)
            if (times[i] >= lo * (1 - 1e-12) && times[i] <= hi * (1 + 1e-12) && times[i] > 1.0) {
                ts.push_back(times[i]);
                vs.push_back(row.values[i]);
            }
        if (ts.size() < 5) {
            out.exponent = std::numeric_limits<double>::quiet_NaN();
            out.samples = static_cast<int>(ts.size());
            out.t_min = lo;
            out.t_max = hi;
            return false;
        }
        out = fit_rate(ts, vs);
        return true;
    };
    row.window_valid = subset_fit(window.t_min, window.t_max, row.fit);
    subset_fit(std::max(window.t_min, window.t_max / 10.0), window.t_max, row.tail_fit);
    row.pass = row.window_valid && std::abs(row.fit.exponent - obs.target) <= 0.1;
    return row;
}

void write_rate_table(std::ostream& os, const std::vector<RateRow>& rows) {
    os << std::setprecision(12);
    os << "observable,target,exponent,stderr,r_squared,t_min,t_max,samples,last_decade_exponent,window_valid,"
          "pass,accuracy_warning\n";
    for (const auto& r : rows) {
        os << r.obs.name << ',' << r.obs.target << ',' << r.fit.exponent << ',' << r.fit.stderr_ << ','
           << r.fit.r_squared << ',' << r.fit.t_min << ',' << r.fit.t_max << ',' << r.fit.samples << ','
           << r.tail_fit.exponent << ',' << (r.window_valid ? 1 : 0) << ',' << (r.pass ? "pass" : "fail") << ','
           << (r.warning ? 1 : 0) << '\n';
    }
}

void write_rate_series(std::ostream& os, const RateRow& row) {
    os << std::setprecision(15);
    os << "t," << row.obs.name << ",tail_fraction\n";
    for (size_t i = 0; i < row.times.size(); ++i) os << row.times[i] << ',' << row.values[i] << ',' << row.tails[i] << '\n';
}

}  // namespace slab
