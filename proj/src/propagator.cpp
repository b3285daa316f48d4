#include "slab/propagator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "slab/errors.hpp"

namespace slab {

namespace {

constexpr double kPi = std::numbers::pi;

// 4-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 4> kGlNodes = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                            0.8611363115940526};
constexpr std::array<double, 4> kGlWeights = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                              0.3478548451374538};

}  // namespace

ModeDispersion dispersion(double q, int k) {
    if (k < 1) throw DomainError("temperature modes need k >= 1");
    if (!(q >= 0.0) || !std::isfinite(q)) throw DomainError("q must be finite and nonnegative");
    ModeDispersion d;
    d.q = q;
    d.Xi = q + kPi * kPi * k * k;
    const double root = std::sqrt(1.0 - 4.0 * q / (d.Xi * d.Xi * d.Xi));
    d.lambda_plus = q > 0.0 ? -2.0 * q / (d.Xi * d.Xi * (1.0 + root)) : 0.0;
    d.lambda_minus = -d.Xi - d.lambda_plus;
    d.sigma = d.lambda_plus - d.lambda_minus;
    return d;
}

bool within_dispersion_bounds(const ModeDispersion& d) {
    const double X2 = d.Xi * d.Xi;
    const double q = d.q;
    bool ok = d.lambda_plus >= -2.0 * q / X2 && d.lambda_plus <= -q / X2;
    ok = ok && d.lambda_minus >= -d.Xi && d.lambda_minus <= -d.Xi / 2;
    ok = ok && d.sigma >= std::sqrt(std::pow(kPi, 4) - 4.0);
    for (double l : {d.lambda_plus, d.lambda_minus}) ok = ok && std::abs(l * l + d.Xi * l + q / d.Xi) <= 1e-12 * X2;
    return ok;
}

SemigroupFactors semigroup_factors(double t, const ModeDispersion& d) {
    if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
    const double ep = std::exp(d.lambda_plus * t);
    const double em = std::exp(d.lambda_minus * t);
    SemigroupFactors f;
    f.L1 = 0.5 * (ep + em);
    f.L2 = (ep - em) / d.sigma;
    f.dtL1 = 0.5 * (d.lambda_plus * ep + d.lambda_minus * em);
    f.dtL2 = (d.lambda_plus * ep - d.lambda_minus * em) / d.sigma;
    return f;
}

SpectralScalar heat_propagate(const SpectralScalar& f, double t) {
    if (t < 0.0) throw DomainError("heat propagation time must be nonnegative");
    const Domain& d = f.domain();
    SpectralScalar out(d, f.parity());
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 0; k <= d.kmax(); ++k)
                out.at(ix, iy, k) = std::exp(-d.symbol(ix, iy, k) * t) * f.at(ix, iy, k);
    return out;
}

SpectralScalar solve_theta_linear(const SpectralScalar& theta0, const SpectralScalar& theta1,
                                  const ForcingSampler* forcing, double t, int nquad) {
    if (theta0.parity() != Parity::Odd || theta1.parity() != Parity::Odd)
        throw ParityError("temperature data must be Odd");
    if (theta0.domain() != theta1.domain()) throw DimensionError("temperature data on different domains");
    if (t < 0.0) throw DomainError("time must be nonnegative");
    if (forcing && nquad < 2) throw DomainError("Duhamel quadrature needs nquad >= 2");

    const Domain& d = theta0.domain();
    SpectralScalar out(d, Parity::Odd);
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy) {
            const double q = d.horizontal_symbol(ix, iy);
            for (int k = 1; k <= d.kmax(); ++k) {
                const auto disp = dispersion(q, k);
                const auto f = semigroup_factors(t, disp);
                out.at(ix, iy, k) =
                    f.L1 * theta0.at(ix, iy, k) + f.L2 * (0.5 * disp.Xi * theta0.at(ix, iy, k) + theta1.at(ix, iy, k));
            }
        }
    if (!forcing || t == 0.0) return out;

    const double h = t / nquad;
    for (int panel = 0; panel < nquad; ++panel) {
        for (std::size_t g = 0; g < kGlNodes.size(); ++g) {
            const double s = h * (panel + 0.5 * (kGlNodes[g] + 1.0));
            const double w = 0.5 * h * kGlWeights[g];
            const SpectralScalar F = (*forcing)(s);
            if (F.parity() != Parity::Odd) throw ParityError("temperature forcing must be Odd");
            for (int ix = 0; ix < d.nx(); ++ix)
                for (int iy = 0; iy < d.ny(); ++iy) {
                    const double q = d.horizontal_symbol(ix, iy);
                    for (int k = 1; k <= d.kmax(); ++k) {
                        const cplx c = F.at(ix, iy, k);
                        if (c == 0.0) continue;
                        out.at(ix, iy, k) += w * semigroup_factors(t - s, dispersion(q, k)).L2 * c;
                    }
                }
        }
    }
    return out;
}

std::array<std::array<cplx, 3>, 3> coupled_mode_propagator(double xi, double eta, double Xi, double t) {
    const double q = xi * xi + eta * eta;
    std::array<std::array<cplx, 3>, 3> out{};
    if (q == 0.0) {
        // Decoupled: omega_h heat decay, theta frozen.
        out[0][0] = out[1][1] = std::exp(-Xi * t);
        out[2][2] = 1.0;
        return out;
    }
    const cplx I(0.0, 1.0);
    Eigen::Matrix3cd A;
    A << -Xi, 0.0, I * eta,
         0.0, -Xi, -I * xi,
         I * eta / Xi, -I * xi / Xi, 0.0;
    const Eigen::Matrix3cd E = (A * t).exp();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = E(i, j);
    return out;
}

State exact_linear_coupled(const State& s, double t) {
    check_state(s);
    if (t < 0.0) throw DomainError("time must be nonnegative");
    const Domain& d = s.domain();
    State out = State::zero(d);
    out.time = s.time + t;
    out.omega[2] = heat_propagate(s.omega[2], t);
    for (int ix = 0; ix < d.nx(); ++ix)
        for (int iy = 0; iy < d.ny(); ++iy)
            for (int k = 1; k <= d.kmax(); ++k) {
                const cplx v[3] = {s.omega[0].at(ix, iy, k), s.omega[1].at(ix, iy, k), s.theta.at(ix, iy, k)};
                if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) continue;
                const auto P = coupled_mode_propagator(d.xi_deriv(ix), d.eta_deriv(iy), d.symbol(ix, iy, k), t);
                cplx r[3];
                for (std::size_t i = 0; i < 3; ++i) r[i] = P[i][0] * v[0] + P[i][1] * v[1] + P[i][2] * v[2];
                out.omega[0].at(ix, iy, k) = r[0];
                out.omega[1].at(ix, iy, k) = r[1];
                out.theta.at(ix, iy, k) = r[2];
            }
    return out;
}

}  // namespace slab
