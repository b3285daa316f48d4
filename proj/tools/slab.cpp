// Command-line front end: dispersion-table, linear-decay, simulate, resume,
// verify, fit.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "slab/acceptance.hpp"
#include "slab/errors.hpp"
#include "slab/io.hpp"

namespace fs = std::filesystem;

namespace {

slab::RunConfig config_from(const std::string& path, const std::optional<std::uint64_t>& seed) {
    slab::RunConfig cfg = path.empty() ? slab::RunConfig{} : slab::load_config(path);
    if (seed) cfg.initial.seed = *seed;
    cfg.validate();
    return cfg;
}

std::vector<int> parse_ids(const std::vector<int>& ids, bool all) {
    if (all) return {1, 2, 3, 4, 5, 6, 7, 8, 9};
    if (ids.empty()) return {2, 3, 4, 7, 8};  // the quick invariant suites
    return ids;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral Boussinesq slab toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;

    auto* disp = app.add_subcommand("dispersion-table", "lambda_+-, sigma and bound checks per (q, k)");
    slab::DispersionTableArgs da;
    int k_single = -1;
    disp->add_option("--q-min", da.q_min, "smallest q")->capture_default_str();
    disp->add_option("--q-max", da.q_max, "largest q")->capture_default_str();
    disp->add_option("--nq", da.nq, "number of q values")->capture_default_str();
    disp->add_flag("--log", da.log_spacing, "geometric q spacing");
    disp->add_option("--k-min", da.k_min, "smallest vertical mode")->capture_default_str();
    disp->add_option("--k-max", da.k_max, "largest vertical mode")->capture_default_str();
    disp->add_option("--k", k_single, "a single vertical mode");

    auto* decay = app.add_subcommand("linear-decay", "kernel norm series and the fitted rate table");
    decay->add_option("--config", config_path, "run configuration")->check(CLI::ExistingFile);
    decay->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "nonlinear run with monitors and checkpoints");
    sim->add_option("--config", config_path, "run configuration")->check(CLI::ExistingFile);
    sim->add_option("--seed", seed, "override initial.seed");
    sim->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* res = app.add_subcommand("resume", "continue a run from a checkpoint");
    std::string ckpt;
    std::optional<double> t_end;
    res->add_option("checkpoint", ckpt, "checkpoint file")->required();
    res->add_option("--t-end", t_end, "new end time (default: the checkpoint's)");
    res->add_option("--out", out_dir, "output directory (default: the checkpoint's directory)");

    auto* ver = app.add_subcommand("verify", "run acceptance criteria");
    std::vector<int> ids;
    bool all = false;
    ver->add_option("--criterion", ids, "criterion numbers (default: 2 3 4 7 8)")->check(CLI::Range(1, 9));
    ver->add_flag("--all", all, "all nine criteria");
    ver->add_option("--out", out_dir, "scratch directory")->capture_default_str();

    auto* fit = app.add_subcommand("fit", "log-log rate fit of series columns");
    std::string csv;
    std::vector<std::string> columns;
    double t_min = 5.0, t_max = 1e300;
    fit->add_option("csv", csv, "series CSV")->required();
    fit->add_option("--column", columns, "column names (default: every observable column)");
    fit->add_option("--t-min", t_min, "window start")->capture_default_str();
    fit->add_option("--t-max", t_max, "window end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*disp) {
            if (k_single >= 0) da.k_min = da.k_max = k_single;
            return slab::cmd_dispersion_table(da, std::cout) == 0 ? 0 : 3;
        }
        if (*decay) {
            const auto rows = slab::cmd_linear_decay(config_from(config_path, seed), out_dir, std::cout);
            for (const auto& r : rows)
                if (r.warning) std::cerr << "warning: " << r.obs.name << ": truncation tail above 1%\n";
            return 0;
        }
        if (*sim) {
            slab::cmd_simulate(config_from(config_path, seed), out_dir, std::cout);
            return 0;
        }
        if (*res) {
            const fs::path dir = res->count("--out") ? fs::path(out_dir) : fs::path(ckpt).parent_path();
            slab::cmd_resume(ckpt, t_end, dir.empty() ? fs::path(".") : dir, std::cout);
            return 0;
        }
        if (*ver) {
            fs::create_directories(out_dir);
            bool ok = true;
            for (int id : parse_ids(ids, all)) {
                const auto r = slab::run_criterion(id, out_dir);
                std::cout << slab::format_result(r) << std::endl;
                ok = ok && r.pass;
            }
            return ok ? 0 : 3;
        }
        if (*fit) {
            slab::cmd_fit(csv, columns, t_min, t_max, std::cout);
            return 0;
        }
    } catch (const slab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
