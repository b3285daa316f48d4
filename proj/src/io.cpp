#include "slab/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include "json.hpp"
#include <sstream>

#include "slab/errors.hpp"
#include "slab/propagator.hpp"

namespace slab {

namespace fs = std::filesystem;
using nlohmann::json;

Domain DomainConfig::make() const { return Domain(L, nx, ny, kmax, nz); }

std::vector<RateObservable> DecayConfig::resolved() const {
    if (observables.empty()) return default_rate_observables();
    std::vector<RateObservable> out;
    for (const auto& n : observables) out.push_back(rate_observable(n));
    return out;
}

std::vector<double> DecayConfig::times() const { return log_time_grid(t_min, t_max, per_decade); }

std::string format_double(double v, FloatFormat f) {
    char buf[64];
    const auto r = f == FloatFormat::Shortest ? std::to_chars(buf, buf + sizeof buf, v)
                                              : std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
    return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view v) {
    T out{};
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError("not a valid number: '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

FloatFormat parse_float_format(std::string_view v) {
    if (v == "shortest") return FloatFormat::Shortest;
    if (v == "scientific") return FloatFormat::Scientific;
    throw ConfigError("float_format must be shortest or scientific");
}

// One config key: how to read it, how to write it, and a check of its value
// alone (empty string when fine).
struct Field {
    const char* section;
    const char* key;
    std::function<void(std::string_view)> set;
    std::function<std::string()> get;
    std::function<std::string()> check;
};

std::string require(bool ok, const char* msg) { return ok ? std::string() : std::string(msg); }

std::vector<Field> fields(RunConfig& c) {
    auto dbl = [](double& x) {
        return std::pair{std::function<void(std::string_view)>([&x](std::string_view v) { x = parse_number<double>(v); }),
                         std::function<std::string()>([&x] { return format_double(x); })};
    };
    auto integer = [](auto& x) {
        using T = std::remove_reference_t<decltype(x)>;
        return std::pair{std::function<void(std::string_view)>([&x](std::string_view v) { x = parse_number<T>(v); }),
                         std::function<std::string()>([&x] { return std::to_string(x); })};
    };
    auto boolean = [](bool& x) {
        return std::pair{std::function<void(std::string_view)>([&x](std::string_view v) { x = parse_bool(v); }),
                         std::function<std::string()>([&x] { return std::string(x ? "true" : "false"); })};
    };
    auto text = [](std::string& x) {
        return std::pair{std::function<void(std::string_view)>([&x](std::string_view v) { x = std::string(v); }),
                         std::function<std::string()>([&x] { return x; })};
    };
    std::vector<Field> f;
    auto add = [&f](const char* s, const char* k, auto io, std::function<std::string()> check) {
        f.push_back({s, k, std::move(io.first), std::move(io.second), std::move(check)});
    };

    auto& d = c.domain;
    add("domain", "L", dbl(d.L), [&d] { return require(d.L > 0.0 && std::isfinite(d.L), "L must be positive"); });
    add("domain", "nx", integer(d.nx), [&d] { return require(d.nx >= 8 && d.nx % 2 == 0, "nx must be even and >= 8"); });
    add("domain", "ny", integer(d.ny), [&d] { return require(d.ny >= 8 && d.ny % 2 == 0, "ny must be even and >= 8"); });
    add("domain", "kmax", integer(d.kmax), [&d] { return require(d.kmax >= 1, "kmax must be >= 1"); });
    add("domain", "nz", integer(d.nz), [&d] { return require(d.nz >= 1, "nz must be positive"); });

    auto& s = c.stepper;
    add("stepper", "dt", dbl(s.dt), [&s] { return require(s.dt > 0.0 && std::isfinite(s.dt), "dt must be positive"); });
    add("stepper", "t_end", dbl(s.t_end),
        [&s] { return require(s.t_end >= 0.0 && std::isfinite(s.t_end), "t_end must be nonnegative"); });
    add("stepper", "scheme",
        std::pair{std::function<void(std::string_view)>([&s](std::string_view v) { s.scheme = scheme_from_string(std::string(v)); }),
                  std::function<std::string()>([&s] { return std::string(to_string(s.scheme)); })},
        [] { return std::string(); });
    add("stepper", "dealias", boolean(s.dealias), [] { return std::string(); });
    add("stepper", "projection_stride", integer(s.projection_stride),
        [&s] { return require(s.projection_stride >= 0, "projection_stride must be >= 0"); });
    add("stepper", "monitor_stride", integer(s.monitor_stride),
        [&s] { return require(s.monitor_stride >= 1, "monitor_stride must be >= 1"); });
    add("stepper", "m_prime", integer(s.m_prime),
        [&s] { return require(s.m_prime >= 0 && s.m_prime <= 8, "m_prime must lie in [0, 8]"); });
    add("stepper", "linear_only", boolean(s.linear_only), [] { return std::string(); });

    auto& i = c.initial;
    add("initial", "seed", integer(i.seed), [] { return std::string(); });
    add("initial", "amplitude", dbl(i.amplitude),
        [&i] { return require(i.amplitude >= 0.0 && std::isfinite(i.amplitude), "amplitude must be nonnegative"); });
    add("initial", "falloff", dbl(i.falloff),
        [&i] { return require(i.falloff >= 0.0 && std::isfinite(i.falloff), "falloff must be nonnegative"); });

    auto& y = c.decay;
    add("decay", "R", dbl(y.quad.R), [&y] { return require(y.quad.R > 0.0 && std::isfinite(y.quad.R), "R must be positive"); });
    add("decay", "n_r", integer(y.quad.n_r), [&y] { return require(y.quad.n_r > 0, "n_r must be positive"); });
    add("decay", "n_phi", integer(y.quad.n_phi), [&y] { return require(y.quad.n_phi > 0, "n_phi must be positive"); });
    add("decay", "Kq", integer(y.quad.Kq), [&y] { return require(y.quad.Kq > 0, "Kq must be positive"); });
    add("decay", "q_min", dbl(y.quad.q_min), [&y] { return require(y.quad.q_min >= 0.0, "q_min must be >= 0"); });
    add("decay", "t_min", dbl(y.t_min), [&y] { return require(y.t_min > 0.0 && std::isfinite(y.t_min), "t_min must be positive"); });
    add("decay", "t_max", dbl(y.t_max), [&y] { return require(y.t_max > 0.0 && std::isfinite(y.t_max), "t_max must be positive"); });
    add("decay", "per_decade", integer(y.per_decade), [&y] { return require(y.per_decade >= 1, "per_decade must be >= 1"); });
    add("decay", "observables",
        std::pair{std::function<void(std::string_view)>([&y](std::string_view v) {
                      y.observables.clear();
                      while (!v.empty()) {
                          const auto comma = v.find(',');
                          const auto item = trim(v.substr(0, comma));
                          if (item.empty()) throw ConfigError("empty entry in observable list");
                          y.observables.emplace_back(item);
                          v = comma == std::string_view::npos ? std::string_view() : v.substr(comma + 1);
                      }
                  }),
                  std::function<std::string()>([&y] {
                      std::string out;
                      for (const auto& n : y.observables) out += (out.empty() ? "" : ", ") + n;
                      return out;
                  })},
        [&y]() -> std::string {
            for (const auto& n : y.observables) try {
                    rate_observable(n);
                } catch (const Error&) {
                    return "unknown observable '" + n + "'";
                }
            return {};
        });
    add("decay", "window_t_min", dbl(y.window.t_min),
        [&y] { return require(y.window.t_min > 0.0, "window_t_min must be positive"); });
    add("decay", "window_t_max", dbl(y.window.t_max),
        [&y] { return require(y.window.t_max > 0.0, "window_t_max must be positive"); });

    auto& o = c.output;
    add("output", "series", text(o.series), [&o] { return require(!o.series.empty(), "series path is empty"); });
    add("output", "checkpoint", text(o.checkpoint), [&o] { return require(!o.checkpoint.empty(), "checkpoint path is empty"); });
    add("output", "checkpoint_stride", integer(o.checkpoint_stride),
        [&o] { return require(o.checkpoint_stride >= 0, "checkpoint_stride must be >= 0"); });
    add("output", "rate_table", text(o.rate_table), [&o] { return require(!o.rate_table.empty(), "rate_table path is empty"); });
    add("output", "rate_series_prefix", text(o.rate_series_prefix), [] { return std::string(); });
    add("output", "fits", text(o.fits), [&o] { return require(!o.fits.empty(), "fits path is empty"); });
    add("output", "float_format",
        std::pair{std::function<void(std::string_view)>([&o](std::string_view v) { o.float_format = parse_float_format(v); }),
                  std::function<std::string()>([&o] {
                      return std::string(o.float_format == FloatFormat::Shortest ? "shortest" : "scientific");
                  })},
        [] { return std::string(); });
    return f;
}

const char* const kSections[] = {"domain", "stepper", "initial", "decay", "output"};

// Checks involving several keys; `where` names the line of a key.
void cross_checks(const RunConfig& c, const std::function<std::string(const char*)>& where) {
    const auto& d = c.domain;
    if (d.nz < (3 * d.kmax) / 2 + 1)
        throw ConfigError(where("domain.nz") + "nz must exceed 3*kmax/2 (nz >= " + std::to_string(3 * d.kmax / 2 + 1) + ")");
    try {
        c.stepper.steps();
    } catch (const ConfigError& e) {
        throw ConfigError(where("stepper.t_end") + e.what());
    }
    if (c.decay.t_max < c.decay.t_min) throw ConfigError(where("decay.t_max") + "t_max must be >= t_min");
    if (c.decay.window.t_max <= c.decay.window.t_min)
        throw ConfigError(where("decay.window_t_max") + "window_t_max must exceed window_t_min");
    if (c.decay.quad.q_min >= c.decay.quad.R * c.decay.quad.R)
        throw ConfigError(where("decay.q_min") + "q_min must be below R^2");
}

}  // namespace

void RunConfig::validate() const {
    RunConfig copy = *this;
    for (const auto& f : fields(copy))
        if (auto msg = f.check(); !msg.empty()) throw ConfigError(std::string(f.section) + "." + f.key + ": " + msg);
    cross_checks(*this, [](const char* key) { return std::string(key) + ": "; });
}

RunConfig parse_config(std::string_view text, const std::string& source) {
    RunConfig cfg;
    auto table = fields(cfg);
    std::map<std::string, int> seen;  // "section.key" -> line
    std::string section;
    int lineno = 0;
    auto fail = [&](const std::string& msg) { throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg); };

    while (!text.empty()) {
        ++lineno;
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
                fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        if (section.empty()) fail("key '" + key + "' outside of a section");
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const Field& f) { return f.section == section && f.key == key; });
        if (it == table.end()) fail("unknown key '" + key + "' in [" + section + "]");
        const std::string full = section + "." + key;
        if (seen.count(full)) fail("duplicate key '" + key + "' (first set on line " + std::to_string(seen[full]) + ")");
        seen[full] = lineno;
        try {
            it->set(value);
        } catch (const UsageError& e) {
            fail(full + ": " + e.what());
        }
        if (auto msg = it->check(); !msg.empty()) fail(full + ": " + msg);
    }
    cross_checks(cfg, [&](const char* key) {
        const auto it = seen.find(key);
        return it == seen.end() ? source + ": " + key + " (default): " : source + ":" + std::to_string(it->second) + ": ";
    });
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string serialize_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::string out, section;
    for (const auto& f : fields(copy)) {
        if (section != f.section) {
            section = f.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get() + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "slab-checkpoint 1";

std::string sha256_hex(const std::string& a, const std::string& b) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, a.data(), a.size()) == 1 && EVP_DigestUpdate(ctx, b.data(), b.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw IoError("SHA-256 computation failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

void put_le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

const SpectralScalar& component(const State& s, int i) { return i < 3 ? s.omega[i] : s.theta; }
SpectralScalar& component(State& s, int i) { return i < 3 ? s.omega[i] : s.theta; }
const char* const kFieldNames[4] = {"omega_1", "omega_2", "omega_3", "theta"};

json norms_of(const State& s) {
    json n = json::object();
    for (int i = 0; i < 4; ++i) n[kFieldNames[i]] = sobolev_norm(component(s, i), 0);
    return n;
}

}  // namespace

void save_checkpoint(const fs::path& path, const RunConfig& cfg, const State& s, const Simulation::Snapshot& snap) {
    std::string payload;
    payload.reserve(4 * s.domain().spectral_size() * 16);
    for (int i = 0; i < 4; ++i)
        for (const cplx& c : component(s, i).coeff()) {
            put_le(payload, c.real());
            put_le(payload, c.imag());
        }
    json h;
    h["schema"] = 1;
    h["config"] = serialize_config(cfg);
    h["step"] = snap.step;
    h["t_start"] = snap.t_start;
    h["time"] = s.time;
    h["E_sup"] = snap.E_sup;
    h["dissipation"] = snap.dissipation;
    h["fields"] = kFieldNames;
    h["layout"] = "(ix, iy, k) row-major, k fastest; real then imaginary; little-endian float64";
    h["norms"] = norms_of(s);
    h["payload_bytes"] = payload.size();
    h["sha256"] = sha256_hex(h.dump(), payload);

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out << kMagic << '\n' << h.dump() << '\n';
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("short write to checkpoint " + tmp.string());
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::string magic, header;
    std::getline(in, magic);
    if (magic != kMagic) throw CorruptionError(path.string() + ": not a checkpoint (bad magic line)");
    std::getline(in, header);
    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string payload = rest.str();

    json h;
    try {
        h = json::parse(header);
    } catch (const json::exception& e) {
        throw CorruptionError(path.string() + ": unreadable header: " + e.what());
    }
    try {
        if (h.at("schema").get<int>() != 1) throw CorruptionError(path.string() + ": unsupported schema");
        const std::string digest = h.at("sha256").get<std::string>();
        json body = h;
        body.erase("sha256");
        if (sha256_hex(body.dump(), payload) != digest) throw CorruptionError(path.string() + ": digest mismatch");

        RunConfig cfg = parse_config(h.at("config").get<std::string>(), path.string() + " (config echo)");
        const Domain d = cfg.domain.make();
        const std::size_t n = d.spectral_size();
        if (payload.size() != 4 * n * 16 || h.at("payload_bytes").get<std::size_t>() != payload.size())
            throw CorruptionError(path.string() + ": payload size does not match the domain");

        State s = State::zero(d);
        const char* p = payload.data();
        for (int i = 0; i < 4; ++i)
            for (cplx& c : component(s, i).coeff()) {
                c = {get_le(p), get_le(p + 8)};
                p += 16;
            }
        s.time = h.at("time").get<double>();
        if (norms_of(s) != h.at("norms")) throw CorruptionError(path.string() + ": field norms do not match the header");

        Simulation::Snapshot snap;
        snap.step = h.at("step").get<std::int64_t>();
        snap.t_start = h.at("t_start").get<double>();
        snap.E_sup = h.at("E_sup").get<std::array<double, 4>>();
        snap.dissipation = h.at("dissipation").get<double>();
        return {std::move(cfg), std::move(s), snap};
    } catch (const json::exception& e) {
        throw CorruptionError(path.string() + ": malformed header: " + e.what());
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint config echo rejected: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

std::string series_header() {
    std::string h = "step,time";
    for (int i = 1; i <= 4; ++i) h += ",E" + std::to_string(i);
    for (int i = 1; i <= 4; ++i) h += ",E" + std::to_string(i) + "_sup";
    for (const auto& o : kDecayObservables) h += std::string(",") + o.name + "@" + format_double(o.target);
    return h + ",energy,dissipation,divergence,omega3_mean";
}

std::string series_row(const Monitors& m, FloatFormat f) {
    std::string r = std::to_string(m.step) + "," + format_double(m.time, f);
    for (double v : m.E) r += "," + format_double(v, f);
    for (double v : m.E_sup) r += "," + format_double(v, f);
    for (double v : m.obs) r += "," + format_double(v, f);
    for (double v : {m.energy, m.dissipation, m.divergence, m.omega3_mean}) r += "," + format_double(v, f);
    return r;
}

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

namespace {
std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    while (true) {
        const auto c = line.find(',');
        out.push_back(trim(line.substr(0, c)));
        if (c == std::string_view::npos) return out;
        line = line.substr(c + 1);
    }
}
}  // namespace

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    for (auto c : split_commas(line)) t.columns.emplace_back(c);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != t.columns.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                          " columns");
        std::vector<double> row;
        for (auto c : cells) try {
                row.push_back(parse_number<double>(c));
            } catch (const ConfigError&) {
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + std::string(c) + "'");
            }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_dispersion_table(const DispersionTableArgs& a, std::ostream& os) {
    if (a.k_min < 1) throw UsageError("k must be >= 1 (temperature modes have no k = 0 component)");
    if (a.k_max < a.k_min) throw UsageError("k-max must be >= k-min");
    if (!(a.q_min >= 0.0) || !std::isfinite(a.q_max) || a.q_max < a.q_min) throw UsageError("need 0 <= q-min <= q-max");
    if (a.nq < 1) throw UsageError("nq must be >= 1");
    if (a.log_spacing && a.q_min <= 0.0) throw UsageError("logarithmic q spacing needs q-min > 0");
    os << "q,k,Xi,sigma,lambda_plus,lambda_minus,bounds\n";
    int failures = 0;
    for (int k = a.k_min; k <= a.k_max; ++k)
        for (int i = 0; i < a.nq; ++i) {
            const double s = a.nq == 1 ? 0.0 : static_cast<double>(i) / (a.nq - 1);
            const double q = a.log_spacing ? a.q_min * std::pow(a.q_max / a.q_min, s) : a.q_min + s * (a.q_max - a.q_min);
            const auto d = dispersion(q, k);
            const bool ok = within_dispersion_bounds(d);
            failures += !ok;
            os << format_double(q) << ',' << k << ',' << format_double(d.Xi) << ',' << format_double(d.sigma) << ','
               << format_double(d.lambda_plus) << ',' << format_double(d.lambda_minus) << ',' << (ok ? "pass" : "fail")
               << '\n';
        }
    return failures;
}

namespace {

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::trunc) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::out | mode);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
}

void write_fit_table(std::ostream& os, const std::vector<std::pair<std::string, std::optional<RateFit>>>& fits,
                     const RateWindow& w) {
    os << "observable,target,exponent,stderr,r_squared,t_min,t_max,samples\n";
    for (const auto& [col, fit] : fits) {
        const auto at = col.find('@');
        const std::string name = col.substr(0, at);
        const std::string target = at == std::string::npos ? "" : col.substr(at + 1);
        os << name << ',' << target;
        if (fit)
            os << ',' << format_double(fit->exponent) << ',' << format_double(fit->stderr_) << ','
               << format_double(fit->r_squared) << ',' << format_double(fit->t_min) << ',' << format_double(fit->t_max)
               << ',' << fit->samples << '\n';
        else
            os << ",nan,nan,nan," << format_double(w.t_min) << ',' << format_double(w.t_max) << ",0\n";
    }
}

std::vector<std::pair<std::string, std::optional<RateFit>>> fit_columns(const CsvTable& t,
                                                                       std::vector<std::string> columns,
                                                                       double t_min, double t_max) {
    const int tc = t.column("time");
    if (tc < 0) throw UsageError("series has no time column");
    if (columns.empty())
        for (const auto& c : t.columns)
            if (c.find('@') != std::string::npos) columns.push_back(c);
    std::vector<std::pair<std::string, std::optional<RateFit>>> out;
    for (const auto& name : columns) {
        int c = t.column(name);
        if (c < 0)  // allow the bare observable name
            for (std::size_t j = 0; j < t.columns.size(); ++j)
                if (t.columns[j].rfind(name + "@", 0) == 0) c = static_cast<int>(j);
        if (c < 0) throw UsageError("series has no column '" + name + "'");
        std::vector<double> ts, vs;
        for (const auto& r : t.rows)
            if (r[tc] >= t_min && r[tc] <= t_max && r[tc] > 1.0 && r[c] > 0.0) {
                ts.push_back(r[tc]);
                vs.push_back(r[c]);
            }
        std::optional<RateFit> fit;
        if (ts.size() >= 5) fit = fit_rate(ts, vs);
        out.emplace_back(t.columns[c], fit);
    }
    return out;
}

// Advances `sim` to the configured end, appending rows to `series` and
// writing checkpoints. `sampled` says whether the current step already has a
// row.
SimulateResult drive(Simulation& sim, const RunConfig& cfg, std::ofstream& series, bool sampled, const fs::path& out) {
    const StepperConfig& sc = cfg.stepper;
    const std::int64_t n = sc.steps();
    const fs::path ckpt = out / cfg.output.checkpoint;
    SimulateResult r;
    auto emit = [&] {
        series << series_row(sim.sample(), cfg.output.float_format) << '\n';
        series.flush();
        ++r.samples;
    };
    if (!sampled && sim.step_index() < n && sim.step_index() % sc.monitor_stride == 0) emit();
    while (sim.step_index() < n) {
        try {
            sim.advance();
        } catch (const Error&) {
            save_checkpoint(ckpt, cfg, sim.state(), sim.snapshot());
            throw;
        }
        if (sim.step_index() % sc.monitor_stride == 0) emit();
        if (cfg.output.checkpoint_stride > 0 && sim.step_index() % cfg.output.checkpoint_stride == 0)
            save_checkpoint(ckpt, cfg, sim.state(), sim.snapshot());
    }
    if (!series) throw IoError("write error on the series file");
    save_checkpoint(ckpt, cfg, sim.state(), sim.snapshot());
    r.steps = sim.step_index();
    r.time = sim.time();
    return r;
}

void finish_run(const RunConfig& cfg, const fs::path& out, const SimulateResult& r, std::ostream& log) {
    const RateWindow w = decay_window(cfg.domain.make(), cfg.stepper.t_end);
    const auto fits = fit_columns(read_csv(out / cfg.output.series), {}, w.t_min, w.t_max);
    auto f = open_out(out / cfg.output.fits);
    write_fit_table(f, fits, w);
    log << "steps " << r.steps << ", t = " << format_double(r.time) << ", " << r.samples << " new samples\n"
        << "decay window [" << format_double(w.t_min) << ", " << format_double(w.t_max) << "]\n";
    write_fit_table(log, fits, w);
}

}  // namespace

std::vector<RateRow> cmd_linear_decay(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const auto times = cfg.decay.times();
    if (times.size() < 2) throw InsufficientDataError("the decay time grid has a single point");
    const Profile p = Profile::gaussian();
    std::vector<RateRow> rows;
    for (const auto& obs : cfg.decay.resolved()) {
        rows.push_back(rate_row(obs, times, p, cfg.decay.quad, cfg.decay.window));
        auto f = open_out(out / (cfg.output.rate_series_prefix + obs.name + ".csv"));
        write_rate_series(f, rows.back());
    }
    auto f = open_out(out / cfg.output.rate_table);
    write_rate_table(f, rows);
    write_rate_table(log, rows);
    return rows;
}

SimulateResult cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const Domain d = cfg.domain.make();
    const State s0 = gen_initial(d, cfg.initial.seed, cfg.initial.amplitude, cfg.initial.falloff, cfg.stepper.m_prime);
    auto series = open_out(out / cfg.output.series);
    series << series_header() << '\n';
    Simulation sim(cfg.stepper, s0);
    const auto r = drive(sim, cfg, series, false, out);
    series.close();
    finish_run(cfg, out, r, log);
    return r;
}

SimulateResult cmd_resume(const fs::path& checkpoint, std::optional<double> t_end, const fs::path& out,
                          std::ostream& log) {
    Checkpoint ck = load_checkpoint(checkpoint);
    RunConfig cfg = ck.config;
    if (t_end) cfg.stepper.t_end = *t_end;
    cfg.validate();
    if (cfg.stepper.steps() < ck.snapshot.step) throw UsageError("t_end lies before the checkpoint time");

    // keep the rows up to the checkpoint step
    const fs::path path = out / cfg.output.series;
    std::vector<std::string> kept;
    bool sampled = false;
    if (fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        if (line != series_header()) throw IoError(path.string() + ": header does not match this build's series layout");
        while (std::getline(in, line)) {
            const auto comma = line.find(',');
            std::int64_t step = 0;
            try {
                step = parse_number<std::int64_t>(std::string_view(line).substr(0, comma));
            } catch (const ConfigError&) {
                throw IoError(path.string() + ": malformed row '" + line + "'");
            }
            if (step > ck.snapshot.step) break;
            sampled = step == ck.snapshot.step;
            kept.push_back(line);
        }
    }
    auto series = open_out(path);
    series << series_header() << '\n';
    for (const auto& l : kept) series << l << '\n';

    Simulation sim(cfg.stepper, std::move(ck.state), ck.snapshot);
    const auto r = drive(sim, cfg, series, sampled, out);
    series.close();
    finish_run(cfg, out, r, log);
    return r;
}

std::vector<std::pair<std::string, std::optional<RateFit>>> cmd_fit(const fs::path& csv,
                                                                    const std::vector<std::string>& columns,
                                                                    double t_min, double t_max, std::ostream& os) {
    if (!(t_max > t_min)) throw UsageError("fit window needs t-max > t-min");
    const auto fits = fit_columns(read_csv(csv), columns, t_min, t_max);
    write_fit_table(os, fits, {t_min, t_max});
    return fits;
}

}  // namespace slab
