#pragma once

// Run configuration, checkpoints, CSV series and the bodies of the
// command-line subcommands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slab/decay.hpp"
#include "slab/sim.hpp"

namespace slab {

struct DomainConfig {
    double L = 64.0 * std::numbers::pi;
    int nx = 64;
    int ny = 64;
    int kmax = 11;
    int nz = 17;

    Domain make() const;
};

struct InitialConfig {
    std::uint64_t seed = 1;
    double amplitude = 1e-3;
    double falloff = 1.0;
};

struct DecayConfig {
    QuadratureSpec quad;
    double t_min = 10.0;
    double t_max = 1e4;
    int per_decade = 4;
    std::vector<std::string> observables;  // empty: the eight default rows
    RateWindow window;

    std::vector<RateObservable> resolved() const;
    std::vector<double> times() const;
};

enum class FloatFormat { Shortest, Scientific };

struct OutputConfig {
    std::string series = "series.csv";
    std::string checkpoint = "checkpoint.ckpt";
    std::int64_t checkpoint_stride = 0;  // steps; 0: only at the end
    std::string rate_table = "rate_table.csv";
    std::string rate_series_prefix = "rate_";
    std::string fits = "fits.csv";
    FloatFormat float_format = FloatFormat::Shortest;
};

struct RunConfig {
    DomainConfig domain;
    StepperConfig stepper;
    InitialConfig initial;
    DecayConfig decay;
    OutputConfig output;

    /// Throws ConfigError.
    void validate() const;
};

/// INI-style text: [domain], [stepper], [initial], [decay], [output] blocks of
/// `key = value` lines, `#` or `;` comments. Errors name the source and line.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Every key, in a fixed order, with doubles in shortest round-trip form.
std::string serialize_config(const RunConfig& cfg);

std::string format_double(double v, FloatFormat f = FloatFormat::Shortest);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Line 1: "slab-checkpoint 1". Line 2: one-line JSON header (config echo,
// step, time, running suprema, dissipation, field norms, payload size and a
// SHA-256 digest over header and payload). Then the payload: per field
// (omega_1, omega_2, omega_3, theta) the coefficients in (ix, iy, k) order,
// k fastest, each as real and imaginary little-endian 64-bit floats.

struct Checkpoint {
    RunConfig config;
    State state;
    Simulation::Snapshot snapshot;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const State& s,
                     const Simulation::Snapshot& snap);
/// Throws IoError when unreadable and CorruptionError on any inconsistency.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV

/// Observable columns carry their target exponent: "theta_H5@-0.5".
std::string series_header();
std::string series_row(const Monitors& m, FloatFormat f = FloatFormat::Shortest);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Subcommands

struct DispersionTableArgs {
    double q_min = 0.0;
    double q_max = 10.0;
    int nq = 11;
    bool log_spacing = false;
    int k_min = 1;
    int k_max = 1;
};
/// Rows (q, k, Xi, sigma, lambda_plus, lambda_minus, bounds). Returns the
/// number of rows failing a bound check.
int cmd_dispersion_table(const DispersionTableArgs& a, std::ostream& os);

/// Rate table and per-row series under `out`; the summary goes to `log`.
std::vector<RateRow> cmd_linear_decay(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

struct SimulateResult {
    std::int64_t steps = 0;
    double time = 0.0;
    std::int64_t samples = 0;
};
/// Series, fits and checkpoints under `out`. Numerical failures save the last
/// valid state to the checkpoint path and are rethrown.
SimulateResult cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// Continues from a checkpoint to `t_end` (default: the echoed config). Rows
/// of `out`/series after the checkpoint step are replaced.
SimulateResult cmd_resume(const std::filesystem::path& checkpoint, std::optional<double> t_end,
                          const std::filesystem::path& out, std::ostream& log);

/// Fits the named columns (all "@" columns when empty) of a series CSV over
/// [t_min, t_max].
std::vector<std::pair<std::string, std::optional<RateFit>>> cmd_fit(const std::filesystem::path& csv,
                                                                    const std::vector<std::string>& columns,
                                                                    double t_min, double t_max, std::ostream& os);

}  // namespace slab
