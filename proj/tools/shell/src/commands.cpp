#include "chiral/shell/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include "chiral/analytic.hpp"
#include "chiral/experiments.hpp"
#include "chiral/optics.hpp"
#include "chiral/shell/output.hpp"

namespace chiral::shell {

using nlohmann::json;

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{
        "simulate", "anneal", "analytic-ws", "analytic-chiral", "optics", "modes",
        "potential", "quench", "transplant", "equilibration", "sweep", "thermo"};
    return names;
}

void apply_subcommand_defaults(const std::string& sub, RunConfig& cfg) {
    auto def = [&](const std::string& key, auto value, auto RunConfig::*member) {
        if (!cfg.explicit_keys.count(key)) cfg.*member = value;
    };
    if (sub == "analytic-chiral") def("chi_r", 1.0, &RunConfig::chi_r);
    if (sub == "modes") {
        def("chi_r", 1.0, &RunConfig::chi_r);
        def("n_atoms", 6, &RunConfig::n_atoms);
    }
    if (sub == "equilibration") {
        def("chi_r", 1.0, &RunConfig::chi_r);
        def("n_atoms", 10, &RunConfig::n_atoms);
    }
    if (sub == "potential" || sub == "quench" || sub == "transplant") {
        def("delta", 1.0, &RunConfig::delta);
        // a continuation step where an atom crosses the slip can need more than 1e5
        def("budget", 2.0e5, &RunConfig::budget);
    }
    if (sub == "quench") def("chi_r", 0.26, &RunConfig::chi_r);
    // near resonance single atoms can take over 1e5 to cross between groups
    if (sub == "optics") def("budget", 2.0e5, &RunConfig::budget);
}

json error_record(const std::string& type, const std::string& message, int exit_code,
                  const std::string& key, int line) {
    json e{{"type", type}, {"message", message}, {"exit_code", exit_code}};
    if (!key.empty()) e["key"] = key;
    if (line > 0) e["line"] = line;
    return json{{"error", e}};
}

namespace {

int exit_for(Classification c) {
    switch (c) {
        case Classification::Steady: return kOk;
        case Classification::Diverged: return kDiverged;
        default: return kNotConverged;
    }
}

std::string join(const std::vector<int>& v, char sep = ';') {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
    return s;
}

CsvTable steady_table(const EnsembleState& s) {
    CsvTable t({"j", "f_j", "p_j", "re_sigma_j", "im_sigma_j", "z_j"});
    const std::vector<int> order = position_order(s.z);
    const std::vector<double> f = anchored_fractions(s.z);
    for (int r = 0; r < s.size(); ++r) {
        const int a = order[r];
        t.add(Row() << r << f[r] << s.p[a] << s.sigma[a] << s.z[a]);
    }
    return t;
}

json residuals_json(const Residuals& r) {
    return {{"max_pdot", r.max_pdot},
            {"max_sigmadot", r.max_sigmadot},
            {"momentum_spread", r.momentum_spread}};
}

json slips_json(const SlipReport& s) {
    return {{"slip_count", s.slip_count()},
            {"group_sizes", s.group_sizes},
            {"boundaries", s.boundaries},
            {"slip_gaps", s.slip_gaps}};
}

void describe(RunWriter& w, const SteadyStateResult& r) {
    w.set_classification(to_string(r.classification));
    w.summary()["residuals"] = residuals_json(r.residuals);
    w.summary()["drift_momentum"] = r.drift_momentum;
    w.summary()["simulated_time"] = r.simulated_time;
    w.summary()["saturation_warning"] = r.saturation_warning;
    w.summary()["polish_count"] = r.polish_count;
    w.summary()["slips"] = slips_json(detect_phase_slips(sorted_positions(r.state)));
}

// Positions with gaps (f_j - f_{j-1}) mod 1 in (0, 1] wavelengths.
std::vector<double> positions_from_fractions(const std::vector<double>& f) {
    ChiralSteadySolution tmp;
    tmp.f = f;
    return tmp.positions();
}

std::vector<double> chirality_path(double target, double step) {
    std::vector<double> path{0.0};
    const double sign = target >= 0.0 ? 1.0 : -1.0;
    for (int k = 1; step > 0.0 && k * step < std::abs(target) - 1e-12; ++k)
        path.push_back(sign * k * step);
    if (target != 0.0) path.push_back(target);
    return path;
}

// Steady state at the configured chirality, reached through a chirality continuation
// from the symmetric chain so that phase-slip branches are followed.
SteadyStateResult slip_state(const RunConfig& cfg) {
    const PhysicalParams p = cfg.physical_params();
    if (p.chi_r == 0.0 || cfg.chi_step <= 0.0)
        return prepare_steady(p, cfg.seed, cfg.anneal_schedule(), cfg.steady_options());
    const std::vector<double> path = chirality_path(p.chi_r, cfg.chi_step);
    auto steps = anneal_chirality(p, path, cfg.seed, cfg.anneal_schedule(), cfg.steady_options());
    return std::move(steps.back().result);
}

int first_slip_atom(const SteadyStateResult& r, int fallback) {
    const SlipReport rep = detect_phase_slips(sorted_positions(r.state));
    return rep.slip_count() > 0 ? rep.boundaries.front() - 1 : fallback;
}

int cmd_simulate(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    SteadyOptions o = cfg.steady_options();
    o.budget = std::max(o.budget, cfg.first_budget);
    const SteadyStateResult r =
        find_steady(random_initial_state(p.n_atoms, cfg.seed, cfg.jitter), p, o);
    w.add_table("", steady_table(r.state));
    describe(w, r);
    return exit_for(r.classification);
}

int cmd_anneal(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    const AnnealResult a = anneal_detuning(p, cfg.anneal_schedule(), cfg.seed, cfg.steady_options());
    w.add_table("", steady_table(a.final.state));
    std::vector<std::string> header{"delta", "classification", "max_pdot", "max_sigmadot",
                                    "momentum_spread", "simulated_time"};
    for (int j = 0; j < p.n_atoms; ++j) header.push_back("f_" + std::to_string(j));
    CsvTable hist(header);
    for (const AnnealStep& s : a.history) {
        Row row;
        row << s.delta << to_string(s.classification) << s.residuals.max_pdot
            << s.residuals.max_sigmadot << s.residuals.momentum_spread << s.simulated_time;
        for (double f : s.fractions) row << f;
        hist.add(row);
    }
    w.add_table("history", hist);
    describe(w, a.final);
    w.summary()["completed"] = a.completed;
    if (a.failed_delta) w.summary()["failed_delta"] = *a.failed_delta;
    if (a.completed) return kOk;
    w.set_classification(to_string(a.last.classification));
    return exit_for(a.last.classification);
}

int cmd_analytic_ws(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    const WsSolution ws = ws_chiral_positions(p.n_atoms, p.gamma_1d_frac);
    CsvTable t({"j", "f_j", "E_j"});
    for (int j = 0; j < p.n_atoms; ++j) t.add(Row() << j << ws.f[j] << ws.energies[j]);
    w.add_table("", t);
    w.summary()["total_energy"] = ws.total_energy;
    w.summary()["energy_units"] = "hbar Gamma_tot s0^2, chi = Gamma_1D";
    if (p.n_atoms >= 2) w.summary()["symmetric_spacing"] = ws_symmetric_spacing(p.n_atoms);
    if (cfg.scaling_n.size() >= 3) {
        std::vector<int> ns;
        for (double n : cfg.scaling_n) {
            if (n != std::round(n) || n < 2) throw ConfigError("scaling_n", 0, "needs integers >= 2");
            ns.push_back(static_cast<int>(n));
        }
        w.summary()["energy_exponent"] = ws_energy_scaling(ns, p.gamma_1d_frac);
    }
    return kOk;
}

int cmd_analytic_chiral(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    const ChiralSteadySolution sol = chiral_steady_any_detuning(p.n_atoms, p);
    const std::vector<double> z = sol.positions();
    CsvTable t({"j", "f_j", "re_sigma_j", "im_sigma_j", "residual_j", "z_j"});
    for (int j = 0; j < p.n_atoms; ++j)
        t.add(Row() << j << sol.f[j] << sol.sigma[j] << sol.residuals[j] << z[j]);
    w.add_table("", t);
    w.summary()["drift_momentum"] = sol.drift_momentum;
    w.summary()["max_residual"] = *std::max_element(sol.residuals.begin(), sol.residuals.end());
    return kOk;
}

int cmd_optics(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    std::vector<double> z;
    if (cfg.optics_source == "steady") {
        const SteadyStateResult r = slip_state(cfg);
        describe(w, r);
        if (r.classification != Classification::Steady) return exit_for(r.classification);
        z = sorted_positions(r.state);
    } else if (cfg.optics_source == "ws-chiral") {
        z = positions_from_fractions(ws_chiral_positions(p.n_atoms).f);
    } else {
        const double d = cfg.optics_source == "lattice" ? 1.0 : ws_symmetric_spacing(p.n_atoms);
        for (int j = 0; j < p.n_atoms; ++j) z.push_back(kWavelength * d * j);
    }
    std::vector<double> grid;
    for (int k = 0; k < cfg.probe_points; ++k)
        grid.push_back(cfg.probe_points == 1
                           ? cfg.probe_min
                           : cfg.probe_min + (cfg.probe_max - cfg.probe_min) * k / (cfg.probe_points - 1));
    const Spectrum s = spectrum(z, grid, p.probe_gamma(), p.probe_loss());
    CsvTable t({"Delta", "re_T_R", "im_T_R", "re_R_L", "im_R_L", "re_R_R", "im_R_R", "re_T_L",
                "im_T_L", "abs_R_L", "abs_R_R"});
    double asym = 0.0;
    for (const OpticalResponse& r : s.points) {
        t.add(Row() << r.detuning << r.t_r << r.r_l << r.r_r << r.t_l << std::abs(r.r_l)
                    << std::abs(r.r_r));
        asym = std::max(asym, std::abs(std::abs(r.r_l) - std::abs(r.r_r)));
    }
    w.add_table("", t);
    w.summary()["fwhm"] = s.fwhm;
    w.summary()["peak_detuning"] = s.peak_detuning;
    w.summary()["peak_abs_R_L"] = s.peak_value;
    w.summary()["max_direction_asymmetry"] = asym;
    w.summary()["source"] = cfg.optics_source;
    return kOk;
}

int cmd_modes(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    const SteadyStateResult r =
        prepare_steady(p, cfg.seed, cfg.anneal_schedule(), cfg.steady_options());
    describe(w, r);
    if (r.classification != Classification::Steady) return exit_for(r.classification);
    ModeOptions mo;
    mo.kick = cfg.kick;
    mo.t_sample = cfg.t_sample;
    mo.sample_interval = cfg.mode_sample_interval;
    const ModeSpectrum ms = mode_spectroscopy(r, mo);
    const int n = p.n_atoms;

    std::vector<std::string> header{"omega"};
    for (int j = 1; j < n; ++j) header.push_back("power_" + std::to_string(j));
    CsvTable spec(header);
    for (std::size_t k = 0; k < ms.frequencies.size(); ++k) {
        Row row;
        row << ms.frequencies[k];
        for (int j = 1; j < n; ++j) row << ms.power[j][k];
        spec.add(row);
    }
    w.add_table("spectrum", spec);

    std::vector<double> theory;
    if (derive_rates(p).chi > 0.0) theory = mode_frequencies(n, p);
    CsvTable peaks({"atom", "omega_peak", "nearest_theory", "offset_bins"});
    json per_atom = json::array();
    for (int j = 1; j < n; ++j) {
        per_atom.push_back(ms.peaks[j]);
        for (double f : ms.peaks[j]) {
            double best = NAN;
            for (double t : theory)
                if (std::isnan(best) || std::abs(t - f) < std::abs(best - f)) best = t;
            peaks.add(Row() << j << f << best << (f - best) / ms.resolution);
        }
    }
    w.add_table("peaks", peaks);
    w.summary()["resolution"] = ms.resolution;
    w.summary()["peaks"] = per_atom;
    w.summary()["theory"] = theory;
    return kOk;
}

int cmd_potential(const RunConfig& cfg, RunWriter& w) {
    const SteadyStateResult r = slip_state(cfg);
    describe(w, r);
    if (r.classification != Classification::Steady) return exit_for(r.classification);
    const int atom = cfg.potential_atom >= 0 ? cfg.potential_atom
                                             : first_slip_atom(r, r.state.size() / 2);
    const PotentialCurve c = effective_potential(r, atom, cfg.potential_points);
    const double z_eq = sorted_positions(r.state)[atom];
    CsvTable t({"z_over_lambda", "dz_over_lambda", "force", "potential"});
    for (std::size_t k = 0; k < c.z.size(); ++k)
        t.add(Row() << c.z[k] / kWavelength << (c.z[k] - z_eq) / kWavelength << c.force[k]
                    << c.potential[k]);
    w.add_table("", t);
    w.summary()["atom"] = atom;
    w.summary()["local_minima"] = c.local_minima();
    w.summary()["raw_local_minima"] = c.raw_local_minima();
    return kOk;
}

int cmd_quench(const RunConfig& cfg, RunWriter& w) {
    const SteadyStateResult r = slip_state(cfg);
    describe(w, r);
    if (r.classification != Classification::Steady) return exit_for(r.classification);
    QuenchOptions qo;
    qo.duration = cfg.quench_duration;
    qo.record_interval = cfg.record_interval;
    qo.integrator = cfg.steady_options().integrator;
    const QuenchResult q = chirality_quench(r, cfg.chi_r_new, qo);
    CsvTable t({"t", "slip_count", "group_sizes"});
    for (const QuenchFrame& f : q.frames) t.add(Row() << f.t << f.slip_count << join(f.group_sizes));
    w.add_table("", t);
    w.add_table("final", steady_table(q.final_state));
    w.summary()["collapsed"] = q.collapsed;
    w.summary()["crossing_order"] = q.crossing_order;
    w.summary()["initial_groups"] = q.frames.front().group_sizes;
    w.summary()["final_groups"] = q.frames.back().group_sizes;
    return kOk;
}

int cmd_transplant(const RunConfig& cfg, RunWriter& w) {
    const SteadyStateResult r = slip_state(cfg);
    if (r.classification != Classification::Steady) {
        describe(w, r);
        return exit_for(r.classification);
    }
    const int atom = cfg.transplant_atom >= 0 ? cfg.transplant_atom : first_slip_atom(r, -1);
    if (atom < 0) throw UsageError("transplant needs a phase slip in the prepared state");
    const TransplantResult t = transplant_across_slip(r, atom, cfg.steady_options());
    w.add_table("", steady_table(t.result.state));
    describe(w, t.result);
    w.summary()["atom"] = t.atom;
    w.summary()["before"] = slips_json(t.before);
    w.summary()["after"] = slips_json(t.after);
    w.summary()["stable_slip"] = t.stable_slip;
    w.summary()["distinct"] = t.distinct;
    return exit_for(t.result.classification);
}

int cmd_equilibration(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    EquilibrationOptions eo;
    eo.steady = cfg.steady_options();
    eo.steady.budget = std::max(eo.steady.budget, cfg.first_budget);
    eo.threshold = cfg.threshold;
    eo.jitter = cfg.equilibration_jitter;
    eo.workers = cfg.workers;
    const EquilibrationStats st = equilibration_times(p, cfg.trials, cfg.seed, eo);
    CsvTable t({"trial", "seed", "atom", "time"});
    for (std::size_t k = 0; k < st.times.size(); ++k)
        for (int a = 0; a < p.n_atoms; ++a)
            t.add(Row() << static_cast<int>(k) << st.trial_seeds[k] << a << st.times[k][a]);
    w.add_table("", t);
    CsvTable m({"atom", "median_time"});
    for (int a = 0; a < p.n_atoms; ++a) m.add(Row() << a << st.median[a]);
    w.add_table("median", m);
    w.summary()["converged_trials"] = st.times.size();
    w.summary()["excluded_trials"] = st.excluded;
    return st.times.empty() ? kNotConverged : kOk;
}

int cmd_sweep(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams base = cfg.physical_params();
    const SweepAxis axis = parse_sweep_axis(cfg.sweep_axis);
    SweepOptions so;
    so.anneal = cfg.sweep_anneal;
    so.schedule = cfg.anneal_schedule();
    so.steady = cfg.steady_options();
    so.workers = cfg.workers;
    const std::vector<SweepPoint> pts = sweep(base, axis, cfg.sweep_values, cfg.sweep_seeds, so);
    int max_n = 0;
    for (const SweepPoint& pt : pts) max_n = std::max(max_n, pt.result.state.size());
    std::vector<std::string> header{cfg.sweep_axis, "seed", "ok", "classification", "slip_count",
                                    "group_sizes", "drift_momentum", "simulated_time", "error"};
    for (int j = 0; j < max_n; ++j) header.push_back("f_" + std::to_string(j));
    CsvTable t(header);
    int failures = 0;
    for (const SweepPoint& pt : pts) {
        Row row;
        row << pt.value << pt.seed << (pt.ok ? "true" : "false")
            << (pt.ok ? to_string(pt.result.classification) : "")
            << pt.slips.slip_count() << join(pt.slips.group_sizes) << pt.result.drift_momentum
            << pt.result.simulated_time << pt.error;
        for (int j = 0; j < max_n; ++j)
            row << (j < static_cast<int>(pt.result.fractions.size()) ? format_double(pt.result.fractions[j])
                                                                    : std::string());
        t.add(row);
        if (!pt.ok) ++failures;
    }
    w.add_table("", t);
    w.summary()["points"] = pts.size();
    w.summary()["failures"] = failures;
    return kOk;
}

int cmd_thermo(const RunConfig& cfg, RunWriter& w) {
    const PhysicalParams p = cfg.physical_params();
    const Temperature t = temperature(p, cfg.atomic_constants());
    const double ratio = stability_ratio(p);
    const double s0sq = weak_scattering_s0_squared(p.rabi(), p.delta);
    const double e1_over_kt = 2.0 * p.gamma_1d_frac * s0sq / t.kt_hbar_gamma;
    w.summary()["T_nK"] = t.kelvin * 1e9;
    w.summary()["T_nK_times_gamma_p"] = t.kelvin_times_gamma_p * 1e9;
    w.summary()["kT_over_hbar_gamma_tot"] = t.kt_hbar_gamma;
    w.summary()["stability_ratio"] = ratio;
    w.summary()["E1_over_kT"] = e1_over_kt;
    w.summary()["gamma_p"] = p.gamma_p;
    w.summary()["omega_r"] = p.omega_r;
    CsvTable tab({"gamma_p", "omega_r", "T_nK", "T_nK_times_gamma_p", "stability_ratio"});
    tab.add(Row() << p.gamma_p << p.omega_r << t.kelvin * 1e9 << t.kelvin_times_gamma_p * 1e9 << ratio);
    w.add_table("", tab);
    return kOk;
}

}  // namespace

int run_command(const std::string& sub, const RunConfig& cfg, std::ostream& out,
                std::ostream& err) {
    static const std::map<std::string, std::function<int(const RunConfig&, RunWriter&)>> table{
        {"simulate", cmd_simulate},
        {"anneal", cmd_anneal},
        {"analytic-ws", cmd_analytic_ws},
        {"analytic-chiral", cmd_analytic_chiral},
        {"optics", cmd_optics},
        {"modes", cmd_modes},
        {"potential", cmd_potential},
        {"quench", cmd_quench},
        {"transplant", cmd_transplant},
        {"equilibration", cmd_equilibration},
        {"sweep", cmd_sweep},
        {"thermo", cmd_thermo},
    };
    auto fail = [&](const std::string& type, const std::string& msg, int code,
                    const std::string& key = {}, int line = 0) {
        err << error_record(type, msg, code, key, line).dump() << "\n";
        return code;
    };
    const auto it = table.find(sub);
    if (it == table.end()) return fail("usage", "unknown subcommand '" + sub + "'", kInvalid);
    const auto start = std::chrono::steady_clock::now();
    try {
        cfg.validate();
        RunWriter writer(cfg, sub);
        IntegratorSettings settings = cfg.steady_options().integrator;
        writer.set_dt(settings.dt > 0.0 ? settings.dt : default_dt(settings, cfg.physical_params()));
        const int code = it->second(cfg, writer);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        writer.summary()["exit_code"] = code;
        const auto path = writer.finish(wall);
        out << writer.manifest(wall).dump(2) << "\n";
        if (code != kOk)
            fail(code == kDiverged ? "divergence" : "not_converged",
                 "run finished without a steady state; see " + path.string(), code);
        return code;
    } catch (const ConfigError& e) {
        return fail("validation", e.what(), kInvalid, e.key(), e.line());
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), kInvalid, e.field());
    } catch (const UsageError& e) {
        return fail("usage", e.what(), kInvalid);
    } catch (const NoSolution& e) {
        return fail("not_converged", e.what(), kNotConverged);
    } catch (const DivergenceError& e) {
        return fail("divergence", e.what(), kDiverged);
    } catch (const NonFiniteError& e) {
        return fail("divergence", e.what(), kDiverged);
    } catch (const SingularSystemError& e) {
        return fail("divergence", e.what(), kDiverged);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kInternal);
    }
}

}  // namespace chiral::shell
