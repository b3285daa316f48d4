#include <doctest.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "slab/errors.hpp"
#include "slab/io.hpp"

using namespace slab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("slab_io_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_run() {
    RunConfig c;
    c.domain = {8.0, 16, 16, 6, 10};
    c.stepper.dt = 0.05;
    c.stepper.t_end = 1.0;
    c.stepper.monitor_stride = 2;
    c.initial = {7, 1e-2, 1.0};
    return c;
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text, "run.ini");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config defaults and round trip") {
    const RunConfig d = parse_config("");
    CHECK(serialize_config(d) == serialize_config(RunConfig{}));

    const std::string text =
        "# run\n[domain]\nL = 201.06192982974676\nnx = 64\nny = 48\nkmax = 11\nnz = 17\n\n"
        "[stepper]\ndt = 0.1\nt_end = 50\nscheme = IFRK2\nmonitor_stride = 5\nlinear_only = true\n"
        "[initial]\nseed = 18446744073709551615\namplitude = 1e-3\n"
        "[decay]\nobservables = L1L2_hatL1, heatG_hatL1\nR = 6.5\n"
        "[output]\nseries = a b.csv\nfloat_format = scientific\n";
    const RunConfig c = parse_config(text);
    CHECK(c.domain.L == 201.06192982974676);
    CHECK(c.domain.ny == 48);
    CHECK(c.stepper.scheme == Scheme::IFRK2);
    CHECK(c.stepper.linear_only);
    CHECK(c.initial.seed == 18446744073709551615ull);
    CHECK(c.decay.observables == std::vector<std::string>{"L1L2_hatL1", "heatG_hatL1"});
    CHECK(c.output.series == "a b.csv");
    CHECK(c.output.float_format == FloatFormat::Scientific);

    const std::string once = serialize_config(c);
    const RunConfig again = parse_config(once);
    CHECK(serialize_config(again) == once);
    CHECK(again.domain.L == c.domain.L);
}

TEST_CASE("shortest doubles round trip") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::bit_cast<double>(rng());
        if (!std::isfinite(v)) continue;
        for (auto f : {FloatFormat::Shortest, FloatFormat::Scientific}) {
            const std::string s = format_double(v, f);
            double back = 0.0;
            std::from_chars(s.data(), s.data() + s.size(), back);
            CHECK(back == v);
        }
    }
}

TEST_CASE("config errors carry the line") {
    CHECK(error_of("[domain]\nL = 8\nLx = 3\n").rfind("run.ini:3: unknown key 'Lx'", 0) == 0);
    CHECK(error_of("[domian]\n").rfind("run.ini:1: unknown section", 0) == 0);
    CHECK(error_of("L = 3\n").rfind("run.ini:1:", 0) == 0);
    CHECK(error_of("[domain]\nL = 8\nL = 9\n").find("run.ini:3: duplicate key") == 0);
    CHECK(error_of("[domain]\nnx = 12.5\n").rfind("run.ini:2: domain.nx", 0) == 0);
    CHECK(error_of("[domain]\nnx = 7\n").rfind("run.ini:2: domain.nx: nx must be even", 0) == 0);
    CHECK(error_of("[stepper]\ndt = 0.3\n\nt_end = 1\n").rfind("run.ini:4:", 0) == 0);
    CHECK(error_of("[stepper]\nscheme = RK3\n").rfind("run.ini:2:", 0) == 0);
    CHECK(error_of("[stepper]\ndealias = yes\n").rfind("run.ini:2:", 0) == 0);
    CHECK(error_of("[domain]\nkmax = 12\nnz = 17\n").rfind("run.ini:3: nz must exceed", 0) == 0);
    CHECK(error_of("[decay]\nobservables = L1L2_hatL1, nope\n").rfind("run.ini:2:", 0) == 0);
    CHECK(error_of("[decay]\nobservables = a,,b\n").rfind("run.ini:2:", 0) == 0);
    CHECK(error_of("[output]\n\n\ncheckpoint_stride = -1\n").rfind("run.ini:4:", 0) == 0);
    CHECK(error_of("[domain\n").rfind("run.ini:1: malformed", 0) == 0);
    CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), IoError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const fs::path dir = scratch("ckpt");
    const RunConfig cfg = small_run();
    State s = gen_initial(cfg.domain.make(), 11, 0.3, 0.5);
    s.time = 0.1 + 0.2;
    const Simulation::Snapshot snap{6, 0.0, {1.0 / 3, 2.5e-300, 7.0, 0.1}, 1e-17};
    save_checkpoint(dir / "a.ckpt", cfg, s, snap);
    const Checkpoint ck = load_checkpoint(dir / "a.ckpt");
    CHECK(serialize_config(ck.config) == serialize_config(cfg));
    CHECK(ck.snapshot.step == 6);
    CHECK(ck.snapshot.E_sup == snap.E_sup);
    CHECK(ck.snapshot.dissipation == snap.dissipation);
    CHECK(ck.state.time == s.time);
    for (int i = 0; i < 4; ++i) {
        const auto& a = i < 3 ? s.omega[i] : s.theta;
        const auto& b = i < 3 ? ck.state.omega[i] : ck.state.theta;
        CHECK(std::memcmp(a.coeff().data(), b.coeff().data(), a.coeff().size_bytes()) == 0);
    }
    // saving again gives the same bytes
    save_checkpoint(dir / "b.ckpt", ck.config, ck.state, ck.snapshot);
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

    const std::string good = slurp(dir / "a.ckpt");
    auto corrupt = [&](std::string bytes) {
        std::ofstream(dir / "c.ckpt", std::ios::binary) << bytes;
        return dir / "c.ckpt";
    };
    SUBCASE("payload byte") {
        std::string b = good;
        b[b.size() - 100] ^= 0x01;
        CHECK_THROWS_AS(load_checkpoint(corrupt(b)), CorruptionError);
    }
    SUBCASE("truncated") {
        CHECK_THROWS_AS(load_checkpoint(corrupt(good.substr(0, good.size() - 8))), CorruptionError);
    }
    SUBCASE("header edit") {
        std::string b = good;
        const auto at = b.find("\"step\":6");
        REQUIRE(at != std::string::npos);
        b[at + 7] = '7';
        CHECK_THROWS_AS(load_checkpoint(corrupt(b)), CorruptionError);
    }
    SUBCASE("not a checkpoint") { CHECK_THROWS_AS(load_checkpoint(corrupt("hello\n")), CorruptionError); }
    SUBCASE("missing") {
        try {
            load_checkpoint(dir / "missing.ckpt");
            FAIL("no error");
        } catch (const CorruptionError&) {
            FAIL("a missing file is not corruption");
        } catch (const IoError& e) {
            CHECK(e.exit_code() == 4);
        }
    }
}

TEST_CASE("series csv layout") {
    const std::string h = series_header();
    CHECK(h.rfind("step,time,E1,E2,E3,E4,E1_sup", 0) == 0);
    CHECK(h.find(",theta_H5@-0.5,") != std::string::npos);
    CHECK(h.find(",omega_3_H3@-1.25,") != std::string::npos);
    CHECK(h.find(",omega_3_Linf@-2,") != std::string::npos);
    Monitors m;
    m.step = 3;
    m.time = 0.15;
    const std::string r = series_row(m);
    CHECK(std::count(h.begin(), h.end(), ',') == std::count(r.begin(), r.end(), ','));
    CHECK(r.rfind("3,0.15,", 0) == 0);
}

TEST_CASE("dispersion table") {
    std::ostringstream os;
    DispersionTableArgs a;
    a.q_min = a.q_max = 0.0;
    a.nq = 1;
    CHECK(cmd_dispersion_table(a, os) == 0);
    CHECK(os.str() == "q,k,Xi,sigma,lambda_plus,lambda_minus,bounds\n0,1,9.869604401089358,9.869604401089358,0,"
                      "-9.869604401089358,pass\n");
    a = {1e-6, 1e4, 100, true, 1, 10};
    std::ostringstream sweep;
    CHECK(cmd_dispersion_table(a, sweep) == 0);
    const std::string rows = sweep.str();
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 1001);
    a.k_min = 0;
    CHECK_THROWS_AS(cmd_dispersion_table(a, os), UsageError);
    a = {};
    a.q_min = 5;
    a.q_max = 1;
    CHECK_THROWS_AS(cmd_dispersion_table(a, os), UsageError);
}

TEST_CASE("linear decay command") {
    const fs::path dir = scratch("decay");
    std::ostringstream log;
    RunConfig c;
    c.decay.t_min = 1.0;
    c.decay.t_max = 9.0;
    c.decay.per_decade = 8;
    const auto rows = cmd_linear_decay(c, dir, log);
    CHECK(rows.size() == 8);
    for (const auto& r : rows) CHECK_FALSE(r.window_valid);
    CHECK(fs::exists(dir / "rate_table.csv"));
    CHECK(fs::exists(dir / "rate_L1L2_hatL1.csv"));

    c.decay.t_max = 1.0;
    CHECK_THROWS_AS(cmd_linear_decay(c, dir, log), InsufficientDataError);
}

TEST_CASE("simulate, resume and fit") {
    std::ostringstream log;
    SUBCASE("t_end = 0 gives a header-only series") {
        const fs::path dir = scratch("zero");
        RunConfig c = small_run();
        c.stepper.t_end = 0.0;
        cmd_simulate(c, dir, log);
        CHECK(slurp(dir / "series.csv") == series_header() + "\n");
        CHECK(fs::exists(dir / "checkpoint.ckpt"));
    }
    SUBCASE("determinism and resumption") {
        const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
        const RunConfig cfg = small_run();
        cmd_simulate(cfg, a, log);
        cmd_simulate(cfg, b, log);
        CHECK(slurp(a / "series.csv") == slurp(b / "series.csv"));
        CHECK(slurp(a / "checkpoint.ckpt") == slurp(b / "checkpoint.ckpt"));

        RunConfig half = cfg;
        half.stepper.t_end = 0.45;  // not on a sample step
        cmd_simulate(half, c, log);
        cmd_resume(c / "checkpoint.ckpt", 1.0, c, log);
        CHECK(slurp(c / "series.csv") == slurp(a / "series.csv"));

        // resuming from an earlier checkpoint drops the later rows first
        RunConfig early = cfg;
        early.stepper.t_end = 0.4;
        early.output.checkpoint = "early.ckpt";
        cmd_simulate(early, c, log);
        cmd_simulate(cfg, c, log);
        cmd_resume(c / "early.ckpt", 1.0, c, log);
        CHECK(slurp(c / "series.csv") == slurp(a / "series.csv"));
        CHECK(load_checkpoint(c / "early.ckpt").snapshot.step == 20);
        CHECK_THROWS_AS(cmd_resume(c / "early.ckpt", 0.5, c, log), UsageError);

        const auto none = cmd_fit(a / "series.csv", {"theta_H5"}, 0.1, 1.0, log);
        REQUIRE(none.size() == 1);
        CHECK(none[0].first == "theta_H5@-0.5");
        CHECK_FALSE(none[0].second.has_value());  // no samples beyond t = 1
        {
            std::ofstream f(a / "power.csv");
            f << "time,x@-1.5\n";
            for (int i = 2; i <= 40; ++i) f << i << ',' << std::pow(i, -1.5) << '\n';
        }
        const auto fits = cmd_fit(a / "power.csv", {}, 2.0, 40.0, log);
        REQUIRE(fits.size() == 1);
        REQUIRE(fits[0].second.has_value());
        CHECK(fits[0].second->exponent == doctest::Approx(-1.5).epsilon(1e-5));
        CHECK(fits[0].second->samples == 39);
        CHECK_THROWS_AS(cmd_fit(a / "series.csv", {"nope"}, 0.1, 1.0, log), UsageError);
        CHECK_THROWS_AS(cmd_fit(a / "missing.csv", {}, 0.1, 1.0, log), IoError);
    }
    SUBCASE("corrupted checkpoint refuses to resume") {
        const fs::path dir = scratch("corrupt");
        cmd_simulate(small_run(), dir, log);
        std::string b = slurp(dir / "checkpoint.ckpt");
        b[b.size() - 1] ^= 0x10;
        std::ofstream(dir / "checkpoint.ckpt", std::ios::binary) << b;
        CHECK_THROWS_AS(cmd_resume(dir / "checkpoint.ckpt", std::nullopt, dir, log), CorruptionError);
    }
}
