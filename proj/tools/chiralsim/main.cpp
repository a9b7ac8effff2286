#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "chiral/shell/commands.hpp"
#include "chiral/shell/config.hpp"

namespace sh = chiral::shell;

namespace {

std::string kebab(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

std::string usage() {
    std::string s = "usage: chiralsim <subcommand> [--config FILE] [--key value ...]\nsubcommands:";
    for (const std::string& name : sh::subcommands()) s += " " + name;
    return s + "\n";
}

std::string describe(const std::string& name) {
    static const std::map<std::string, std::string> text{
        {"simulate", "find one steady state from a jittered lattice"},
        {"anneal", "step the detuning in from far off resonance"},
        {"analytic-ws", "weak-scattering chiral positions and energies"},
        {"analytic-chiral", "exact fully chiral steady state at any detuning"},
        {"optics", "probe reflection and transmission spectra"},
        {"modes", "kick the chain and Fourier-analyse the motion"},
        {"potential", "effective potential of one atom across a wavelength"},
        {"quench", "sudden chirality change from a phase-slip state"},
        {"transplant", "move an atom across a phase slip and re-converge"},
        {"equilibration", "per-atom settling times over random starts"},
        {"sweep", "independent steady states over one parameter"},
        {"thermo", "temperature and stability ratio"},
    };
    const auto it = text.find(name);
    return it == text.end() ? std::string{} : it->second;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-organization of atoms along a chiral waveguide", "chiralsim"};
    app.require_subcommand(1, 1);
    app.fallthrough(false);

    std::string config_path;
    std::map<std::string, std::string> flags;   // ordered so overrides apply deterministically
    std::map<std::string, CLI::App*> subs;
    for (const std::string& name : sh::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, describe(name));
        sub->add_option("--config", config_path, "structured-text config file (key = value)");
        for (const std::string& key : sh::config_keys()) {
            std::string names = "--" + kebab(key);
            if (key == "n_atoms") names += ",--n";
            sub->add_option_function<std::string>(
                names, [key, &flags](const std::string& v) { flags[key] = v; }, "config key " + key);
        }
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << usage();
        std::cerr << sh::error_record("usage", e.what(), sh::kInvalid).dump() << "\n";
        return sh::kInvalid;
    }

    std::string subcommand;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) subcommand = name;

    sh::RunConfig cfg;
    if (const char* dir = std::getenv("CHIRAL_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
    try {
        if (!config_path.empty()) cfg = sh::parse_config_file(config_path, cfg);
        for (const auto& [key, value] : flags) sh::apply_override(cfg, key, value);
        sh::apply_subcommand_defaults(subcommand, cfg);
    } catch (const sh::ConfigError& e) {
        std::cerr << sh::error_record("validation", e.what(), sh::kInvalid, e.key(), e.line()).dump()
                  << "\n";
        return sh::kInvalid;
    } catch (const std::exception& e) {
        std::cerr << sh::error_record("validation", e.what(), sh::kInvalid).dump() << "\n";
        return sh::kInvalid;
    }
    return sh::run_command(subcommand, cfg, std::cout, std::cerr);
}
