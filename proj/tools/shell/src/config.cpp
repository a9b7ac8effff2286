#include "chiral/shell/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>

namespace chiral::shell {

ConfigError::ConfigError(std::string key, int line, const std::string& what)
    : std::runtime_error(key + (line > 0 ? " (line " + std::to_string(line) + ")" : "") + ": " +
                         what),
      key_(std::move(key)), line_(line) {}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct BadValue {
    std::string what;
};

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
        throw BadValue{"expected a number, got '" + std::string(s) + "'"};
    return v;
}

template <class Int>
Int parse_integer(std::string_view s) {
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
        throw BadValue{"expected an integer, got '" + std::string(s) + "'"};
    return v;
}

template <class T>
std::vector<T> parse_list(std::string_view s, T (*one)(std::string_view)) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(one(trim(s.substr(start, comma - start))));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Typed get/set for one member.
template <class T> struct Codec;

template <> struct Codec<double> {
    static double read(std::string_view s) { return parse_double(s); }
    static std::string write(double v) { return format_double(v); }
};
template <> struct Codec<int> {
    static int read(std::string_view s) { return parse_integer<int>(s); }
    static std::string write(int v) { return std::to_string(v); }
};
template <> struct Codec<std::uint64_t> {
    static std::uint64_t read(std::string_view s) { return parse_integer<std::uint64_t>(s); }
    static std::string write(std::uint64_t v) { return std::to_string(v); }
};
template <> struct Codec<bool> {
    static bool read(std::string_view s) {
        if (s == "true") return true;
        if (s == "false") return false;
        throw BadValue{"expected true or false, got '" + std::string(s) + "'"};
    }
    static std::string write(bool v) { return v ? "true" : "false"; }
};
template <> struct Codec<std::string> {
    static std::string read(std::string_view s) {
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        if (s.find('"') != std::string_view::npos) throw BadValue{"stray quote in string"};
        return std::string(s);
    }
    static std::string write(const std::string& v) { return '"' + v + '"'; }
};
template <> struct Codec<std::optional<double>> {
    static std::optional<double> read(std::string_view s) {
        if (s == "auto") return std::nullopt;
        return parse_double(s);
    }
    static std::string write(const std::optional<double>& v) {
        return v ? format_double(*v) : "auto";
    }
};
template <> struct Codec<std::vector<double>> {
    static std::vector<double> read(std::string_view s) { return parse_list<double>(s, parse_double); }
    static std::string write(const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
        return out;
    }
};
template <> struct Codec<std::vector<std::uint64_t>> {
    static std::vector<std::uint64_t> read(std::string_view s) {
        return parse_list<std::uint64_t>(s, parse_integer<std::uint64_t>);
    }
    static std::string write(const std::vector<std::uint64_t>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
        return out;
    }
};

struct Field {
    std::string name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field field(std::string name, T RunConfig::*member) {
    return {std::move(name),
            [member](RunConfig& c, std::string_view s) { c.*member = Codec<T>::read(s); },
            [member](const RunConfig& c) { return Codec<T>::write(c.*member); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all{
        field("n_atoms", &RunConfig::n_atoms),
        field("gamma_1d_frac", &RunConfig::gamma_1d_frac),
        field("chi_r", &RunConfig::chi_r),
        field("delta", &RunConfig::delta),
        field("s0", &RunConfig::s0),
        field("omega", &RunConfig::omega),
        field("gamma_p", &RunConfig::gamma_p),
        field("gamma_p_ratio", &RunConfig::gamma_p_ratio),
        field("omega_r", &RunConfig::omega_r),
        field("probe_gamma_frac", &RunConfig::probe_gamma_frac),
        field("wavenumber_per_cm", &RunConfig::wavenumber_per_cm),
        field("mass_kg", &RunConfig::mass_kg),
        field("linewidth_mhz", &RunConfig::linewidth_mhz),
        field("linewidth_is_free_space", &RunConfig::linewidth_is_free_space),
        field("model", &RunConfig::model),
        field("dt", &RunConfig::dt),
        field("stride", &RunConfig::stride),
        field("budget", &RunConfig::budget),
        field("sample_interval", &RunConfig::sample_interval),
        field("polish", &RunConfig::polish),
        field("polish_threshold", &RunConfig::polish_threshold),
        field("eps_p", &RunConfig::eps_p),
        field("eps_sigma", &RunConfig::eps_sigma),
        field("eps_spread", &RunConfig::eps_spread),
        field("window", &RunConfig::window),
        field("cycle_window", &RunConfig::cycle_window),
        field("cycle_correlation", &RunConfig::cycle_correlation),
        field("anneal_start", &RunConfig::anneal_start),
        field("anneal_step", &RunConfig::anneal_step),
        field("anneal_deltas", &RunConfig::anneal_deltas),
        field("first_budget", &RunConfig::first_budget),
        field("jitter", &RunConfig::jitter),
        field("chi_step", &RunConfig::chi_step),
        field("optics_source", &RunConfig::optics_source),
        field("probe_min", &RunConfig::probe_min),
        field("probe_max", &RunConfig::probe_max),
        field("probe_points", &RunConfig::probe_points),
        field("kick", &RunConfig::kick),
        field("t_sample", &RunConfig::t_sample),
        field("mode_sample_interval", &RunConfig::mode_sample_interval),
        field("potential_atom", &RunConfig::potential_atom),
        field("potential_points", &RunConfig::potential_points),
        field("chi_r_new", &RunConfig::chi_r_new),
        field("quench_duration", &RunConfig::quench_duration),
        field("record_interval", &RunConfig::record_interval),
        field("transplant_atom", &RunConfig::transplant_atom),
        field("trials", &RunConfig::trials),
        field("threshold", &RunConfig::threshold),
        field("equilibration_jitter", &RunConfig::equilibration_jitter),
        field("sweep_axis", &RunConfig::sweep_axis),
        field("sweep_values", &RunConfig::sweep_values),
        field("sweep_seeds", &RunConfig::sweep_seeds),
        field("sweep_anneal", &RunConfig::sweep_anneal),
        field("scaling_n", &RunConfig::scaling_n),
        field("seed", &RunConfig::seed),
        field("workers", &RunConfig::workers),
        field("output_dir", &RunConfig::output_dir),
    };
    return all;
}

const Field& find_field(const std::string& key, int line) {
    for (const Field& f : fields())
        if (f.name == key) return f;
    throw ConfigError(key, line, "unknown key");
}

void set_value(RunConfig& cfg, const std::string& key, std::string_view value, int line) {
    const Field& f = find_field(key, line);
    try {
        f.set(cfg, trim(value));
    } catch (const BadValue& e) {
        throw ConfigError(key, line, e.what);
    }
    cfg.explicit_keys.insert(key);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const Field& f : fields()) k.push_back(f.name);
        return k;
    }();
    return keys;
}

std::string get_value(const RunConfig& cfg, const std::string& key) {
    return find_field(key, 0).get(cfg);
}

RunConfig parse_config_text(const std::string& text, RunConfig cfg) {
    std::istringstream in(text);
    std::string raw;
    std::set<std::string> seen;
    for (int line = 1; std::getline(in, raw); ++line) {
        // '#' outside a quoted string starts a comment
        bool quoted = false;
        std::size_t cut = raw.size();
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') quoted = !quoted;
            if (raw[i] == '#' && !quoted) {
                cut = i;
                break;
            }
        }
        const std::string_view body = trim(std::string_view(raw).substr(0, cut));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(std::string(body), line, "expected 'key = value'");
        const std::string key(trim(body.substr(0, eq)));
        if (key.empty()) throw ConfigError("", line, "missing key before '='");
        if (!seen.insert(key).second) throw ConfigError(key, line, "key given twice");
        set_value(cfg, key, body.substr(eq + 1), line);
        cfg.key_lines[key] = line;
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", 0, "cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    RunConfig cfg = parse_config_text(text.str(), std::move(base));
    cfg.config_path = path;
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const bool from_file = cfg.key_lines.count(key) > 0;
    const std::string before = from_file ? get_value(cfg, key) : std::string();
    set_value(cfg, key, value, 0);
    cfg.key_lines.erase(key);
    if (from_file) cfg.overrides.push_back({key, before, get_value(cfg, key)});
}

std::string write_config(const RunConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) out += f.name + " = " + f.get(cfg) + "\n";
    return out;
}

AtomicConstants RunConfig::atomic_constants() const {
    AtomicConstants a;
    a.wavenumber_per_cm = wavenumber_per_cm;
    a.mass_kg = mass_kg;
    a.linewidth_mhz = linewidth_mhz;
    a.linewidth_is_free_space = linewidth_is_free_space;
    return a;
}

PhysicalParams RunConfig::physical_params() const {
    PhysicalParams p;
    p.n_atoms = n_atoms;
    p.gamma_1d_frac = gamma_1d_frac;
    p.chi_r = chi_r;
    p.delta = delta;
    p.s0 = s0;
    p.omega = omega;
    p.omega_r = omega_r ? *omega_r : atomic_constants().omega_r_over_gamma_tot(gamma_1d_frac);
    p.gamma_p = gamma_p_ratio ? *gamma_p_ratio * p.omega_r : gamma_p;
    p.probe_gamma_frac = probe_gamma_frac;
    return p;
}

SteadyOptions RunConfig::steady_options() const {
    SteadyOptions o;
    o.integrator.model = model == "dynamic" ? CoherenceModel::Dynamic : CoherenceModel::Adiabatic;
    o.integrator.dt = dt;
    o.integrator.stride = stride;
    o.budget = budget;
    o.sample_interval = sample_interval;
    o.polish = polish;
    o.polish_threshold = polish_threshold;
    o.tol.eps_p = eps_p;
    o.tol.eps_sigma = eps_sigma;
    o.tol.eps_spread = eps_spread;
    o.tol.window = window;
    o.tol.cycle_window = cycle_window;
    o.tol.cycle_correlation = cycle_correlation;
    return o;
}

AnnealSchedule RunConfig::anneal_schedule() const {
    AnnealSchedule s;
    s.start = anneal_start;
    s.step = anneal_step;
    s.explicit_deltas = anneal_deltas;
    s.first_budget = first_budget;
    s.jitter = jitter;
    return s;
}

void RunConfig::validate() const {
    auto fail = [&](const std::string& key, const std::string& what) {
        const auto it = key_lines.find(key);
        throw ConfigError(key, it == key_lines.end() ? 0 : it->second, what);
    };
    auto positive = [&](const std::string& key, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be > 0");
    };
    try {
        physical_params().validate();
    } catch (const ValidationError& e) {
        std::string what = e.what();
        const std::string prefix = e.field() + ": ";
        if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
        fail(e.field(), what);
    }
    if (gamma_p_ratio && !(*gamma_p_ratio >= 0.0)) fail("gamma_p_ratio", "must be >= 0");
    if (omega_r && !(*omega_r > 0.0)) fail("omega_r", "must be > 0");
    positive("wavenumber_per_cm", wavenumber_per_cm);
    positive("mass_kg", mass_kg);
    positive("linewidth_mhz", linewidth_mhz);
    if (model != "adiabatic" && model != "dynamic") fail("model", "must be adiabatic or dynamic");
    if (!(dt >= 0.0)) fail("dt", "must be >= 0 (0 selects the default)");
    if (stride < 1) fail("stride", "must be >= 1");
    positive("budget", budget);
    positive("sample_interval", sample_interval);
    positive("polish_threshold", polish_threshold);
    positive("eps_p", eps_p);
    positive("eps_sigma", eps_sigma);
    positive("eps_spread", eps_spread);
    positive("window", window);
    positive("cycle_window", cycle_window);
    if (!(cycle_correlation > 0.0 && cycle_correlation < 1.0))
        fail("cycle_correlation", "must lie in (0, 1)");
    positive("anneal_start", anneal_start);
    positive("anneal_step", anneal_step);
    positive("first_budget", first_budget);
    if (!(jitter >= 0.0 && jitter <= 1.0)) fail("jitter", "must lie in [0, 1]");
    if (!(chi_step >= 0.0)) fail("chi_step", "must be >= 0");
    if (optics_source != "steady" && optics_source != "ws-chiral" &&
        optics_source != "ws-symmetric" && optics_source != "lattice")
        fail("optics_source", "must be steady, ws-chiral, ws-symmetric or lattice");
    if (probe_points < 1) fail("probe_points", "must be >= 1");
    if (!(probe_min <= probe_max) || (probe_points > 1 && !(probe_min < probe_max)))
        fail("probe_max", "must exceed probe_min");
    if (!(kick >= 0.0)) fail("kick", "must be >= 0");
    positive("t_sample", t_sample);
    positive("mode_sample_interval", mode_sample_interval);
    if (potential_atom < -1) fail("potential_atom", "must be >= -1");
    if (potential_points < 3) fail("potential_points", "must be >= 3");
    if (!(std::abs(chi_r_new) <= 1.0)) fail("chi_r_new", "must lie in [-1, 1]");
    positive("quench_duration", quench_duration);
    positive("record_interval", record_interval);
    if (transplant_atom < -1) fail("transplant_atom", "must be >= -1");
    if (trials < 1) fail("trials", "must be >= 1");
    positive("threshold", threshold);
    if (!(equilibration_jitter >= 0.0 && equilibration_jitter <= 1.0))
        fail("equilibration_jitter", "must lie in [0, 1]");
    try {
        parse_sweep_axis(sweep_axis);
    } catch (const ValidationError& e) {
        fail("sweep_axis", e.what());
    }
    if (sweep_seeds.empty()) fail("sweep_seeds", "needs at least one seed");
    if (workers < 0) fail("workers", "must be >= 0");
    if (output_dir.empty()) fail("output_dir", "must not be empty");
}

}  // namespace chiral::shell
