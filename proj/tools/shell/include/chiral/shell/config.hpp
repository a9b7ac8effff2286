#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiral/analytic.hpp"
#include "chiral/experiments.hpp"

namespace chiral::shell {

/// Bad configuration input. `line` is 0 for values that did not come from a file.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& what);
    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

struct RunConfig {
    // physics
    int n_atoms = 50;
    double gamma_1d_frac = 0.25;
    double chi_r = 0.0;
    double delta = 20.0;
    double s0 = 0.1;
    std::optional<double> omega;
    double gamma_p = 0.005;
    std::optional<double> gamma_p_ratio;       // gamma_p / omega_r, overrides gamma_p
    std::optional<double> omega_r;             // derived from the atomic constants when unset
    std::optional<double> probe_gamma_frac;
    double wavenumber_per_cm = 11727.0;
    double mass_kg = 2.20694695e-25;
    double linewidth_mhz = 5.2;
    bool linewidth_is_free_space = true;

    // integration and steady-state search
    std::string model = "adiabatic";
    double dt = 0.0;
    int stride = 1;
    double budget = 1.0e4;
    double sample_interval = 10.0;
    bool polish = true;
    double polish_threshold = 1e-4;
    double eps_p = 1e-7;
    double eps_sigma = 1e-7;
    double eps_spread = 1e-7;
    double window = 200.0;
    double cycle_window = 2.0e4;
    double cycle_correlation = 0.9;

    // annealing
    double anneal_start = 20.0;
    double anneal_step = 0.5;
    std::vector<double> anneal_deltas;
    double first_budget = 5.0e4;
    double jitter = 0.02;
    double chi_step = 0.01;   // chirality continuation step for phase-slip experiments

    // experiments
    std::string optics_source = "steady";
    double probe_min = -40.0;
    double probe_max = 40.0;
    int probe_points = 4001;
    double kick = 1e-3;
    double t_sample = 4.0e5;
    double mode_sample_interval = 20.0;
    int potential_atom = -1;   // -1: last atom before the first slip
    int potential_points = 401;
    double chi_r_new = 0.27;
    double quench_duration = 4.0e5;
    double record_interval = 100.0;
    int transplant_atom = -1;
    int trials = 8;
    double threshold = 0.01;
    double equilibration_jitter = 0.25;
    std::string sweep_axis = "chi_r";
    std::vector<double> sweep_values;
    std::vector<std::uint64_t> sweep_seeds{0};
    bool sweep_anneal = true;
    std::vector<double> scaling_n{50, 75, 100, 150, 200};

    // run
    std::uint64_t seed = 0;
    int workers = 0;
    std::string output_dir = "out";

    // bookkeeping, not keys
    std::set<std::string> explicit_keys;
    std::map<std::string, int> key_lines;
    struct Override {
        std::string key;
        std::string file_value;
        std::string flag_value;
    };
    std::vector<Override> overrides;
    std::string config_path;

    PhysicalParams physical_params() const;
    AtomicConstants atomic_constants() const;
    SteadyOptions steady_options() const;
    AnnealSchedule anneal_schedule() const;

    /// Checks every invariant; throws ConfigError naming the key (and line when known).
    void validate() const;
};

/// All recognised keys in canonical order.
const std::vector<std::string>& config_keys();

/// Strict `key = value` text: '#' starts a comment, blank lines are ignored, unknown or
/// repeated keys and unparsable values are errors.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

/// Sets one key from a command-line flag, recording the file value it replaces.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

std::string get_value(const RunConfig& cfg, const std::string& key);

/// Canonical text of every key; parse_config_text(write_config(c)) reproduces c.
std::string write_config(const RunConfig& cfg);

/// Shortest text that reads back to the same double ("nan", "inf", "-inf" for the rest).
std::string format_double(double v);

}  // namespace chiral::shell
