#pragma once

// Kernel norms over the continuous frequency space R^2 x {1, 2, ...} and
// algebraic rate fitting.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace slab {

struct Profile {
    std::function<double(double)> radial;  // function of q = xi^2 + eta^2
    std::vector<double> vertical_weights;  // A(k), k = 1..size()
    double smoothness = 8.0;

    /// e^{-q} on k = 1.
    static Profile gaussian();
};

struct QuadratureSpec {
    double R = 8.0;     // radial truncation
    int n_r = 512;      // radial nodes on [0, R], 8 per geometric panel
    int n_phi = 8;      // angular nodes
    int Kq = 1;         // vertical cutoff
    double q_min = 0.0; // integrate only over q >= q_min

    void validate() const;
};

enum class Kernel { L1, L2, dtL1, dtL2, heatG };
enum class HMult { none, grad_h, grad_h2, d3 };
enum class KernelNorm { HatL1, HatL2 };

struct NormValue {
    double value = 0.0;
    double tail = 0.0;   // estimate of the part beyond R, relative to value
    bool warning = false;
};

NormValue kernel_norm(double t, Kernel kernel, HMult hmult, KernelNorm norm, const Profile& p,
                      const QuadratureSpec& quad);

/// Sum of the norms of several kernels, e.g. |L1 f| + |L2 f|.
NormValue kernel_norm_sum(double t, const std::vector<Kernel>& kernels, HMult hmult, KernelNorm norm,
                          const Profile& p, const QuadratureSpec& quad);

struct RateFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    double r_squared = 0.0;
    int samples = 0;
};

RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values);

struct ConvolutionBound {
    double integral = 0.0;      // int_0^t <t-s>^{-mu} <s>^{-1-nu} ds
    double ratio = 0.0;         // integral * <t>^mu
    double exp_integral = 0.0;  // int_0^t e^{-(t-s)} <s>^{-nu} ds
    double exp_ratio = 0.0;     // exp_integral * <t>^nu
};

/// Composite Gauss-Legendre with nquad nodes per panel on panels refined
/// geometrically towards s = 0 and s = t.
ConvolutionBound convolution_bound(double t, double mu, double nu, int nquad = 16);

inline double bracket(double t) { return t > 1.0 ? t : 1.0; }

struct RateObservable {
    std::string name;
    std::vector<Kernel> kernels;
    HMult hmult;
    KernelNorm norm;
    double target;
};

/// The eight observables of the linear rate table.
std::vector<RateObservable> default_rate_observables();
/// Default table plus the heat-type kernel.
std::vector<RateObservable> all_rate_observables();
const RateObservable& rate_observable(const std::string& name);

struct RateRow {
    RateObservable obs;
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> tails;
    bool window_valid = false;
    RateFit fit;        // over the fit window
    RateFit tail_fit;   // over the last decade of the window
    bool pass = false;  // |exponent - target| <= 0.1
    bool warning = false;
};

struct RateWindow {
    double t_min = 10.0;
    double t_max = 1e4;
};

/// Geometric grid with `per_decade` points per decade, endpoints included.
std::vector<double> log_time_grid(double t0, double t1, int per_decade);

RateRow rate_row(const RateObservable& obs, const std::vector<double>& times, const Profile& p,
                 const QuadratureSpec& quad, const RateWindow& window = {});

void write_rate_table(std::ostream& os, const std::vector<RateRow>& rows);
void write_rate_series(std::ostream& os, const RateRow& row);

}  // namespace slab
