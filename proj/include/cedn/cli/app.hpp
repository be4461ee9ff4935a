#pragma once

// Command-line front end: flag parsing, config resolution, exit codes.
//
// Exit codes: 0 success, 2 configuration error, 3 data error (1 is reserved
// for internal failures). Errors go to stderr as one tab-separated line:
//   ERROR <exit code> <kind> <message>

#include "cedn/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace cedn::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_internal = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_data = 3;

inline constexpr const char* config_env_var = "CEDN_CONFIG";

struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<std::string> state;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::string> timetag_format;
    unsigned threads = 0;
};

/// "name=dB" or "name=dB:side".
inline LossModification parse_modification(const std::string& s)
{
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("--set expects component=dB[:side], got '" + s + "'");
    LossModification m;
    m.component = s.substr(0, eq);
    std::string rest = s.substr(eq + 1);
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
        m.side = parse_side(rest.substr(colon + 1));
        rest = rest.substr(0, colon);
    }
    try {
        std::size_t used = 0;
        m.new_db = std::stod(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(rest);
    }
    catch (const std::exception&) {
        throw config_error("--set " + s + ": '" + rest + "' is not a dB value");
    }
    return m;
}

/// Config file (flag, then environment) or the built-in profile, with flag overrides.
inline Scenario resolve_scenario(const CommonFlags& f, const std::string& command)
{
    std::optional<std::string> path = f.config;
    if (!path)
        if (const char* env = std::getenv(config_env_var); env && *env) path = env;
    Scenario sc = path ? load_scenario_file(*path) : profile_scenario("paper-default");

    if (f.seed) sc.seed = *f.seed;
    if (f.duration) {
        if (!(*f.duration > 0)) throw config_error("--duration must be > 0 s");
        if (command == "qkd" || command == "report") {
            // Entangled links get the full time, the others a third of it.
            sc.qkd.entangled_duration_s = *f.duration;
            sc.qkd.non_entangled_duration_s = *f.duration / 3;
        }
        if (command != "qkd") sc.duration_s = *f.duration;
    }
    if (f.state) {
        const auto name = parse_state_name(*f.state);
        if (name == StateName::custom) throw config_error("--state takes intra, inter or all");
        sc.state = NetworkState::named(name, sc.topology, sc.state.convention);
    }
    if (f.out) sc.out_dir = *f.out;
    if (f.format) sc.format = *f.format;
    if (f.timetag_format) sc.timetag_format = *f.timetag_format;
    resolve(sc);
    return sc;
}

inline int report_error(std::ostream& err, int code, std::string_view kind, std::string msg)
{
    for (auto& c : msg)
        if (c == '\n' || c == '\t') c = ' ';
    err << "ERROR\t" << code << '\t' << kind << '\t' << msg << '\n';
    return code;
}

inline int run_app(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Controllable entanglement distribution network simulator and analysis toolkit", "cedn"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    CommonFlags flags;
    RunOptions opt;
    opt.log = &err;
    std::vector<std::string> sets;
    std::string budget = "direct";
    std::string input;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "Scenario YAML (default: $CEDN_CONFIG, else paper-default)");
        sub->add_option("--seed", flags.seed, "Random seed");
        sub->add_option("--duration", flags.duration, "Simulated time in seconds");
        sub->add_option("--state", flags.state, "Network state")->check(CLI::IsMember({"intra", "inter", "all"}));
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--format", flags.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", flags.threads, "Worker threads (0 = hardware)");
    };

    auto* sim = app.add_subcommand("simulate", "Generate per-user timetag files");
    common(sim);
    sim->add_option("--timetag-format", flags.timetag_format, "Timetag file format")
        ->check(CLI::IsMember({"csv", "bin"}));

    auto* cal = app.add_subcommand("calibrate", "Simulate a heater sweep (or read one) and fit it");
    common(cal);
    cal->add_option("--input", input, "Measured curve CSV (voltage_V,counts) instead of simulating");

    auto* coin = app.add_subcommand("coincidences", "Coincidence matrix and per-class link rates");
    common(coin);
    coin->add_option("--input", input, "Directory of timetag files (default: simulate)");

    auto* qkd = app.add_subcommand("qkd", "Sifting, QBER and secure key rates per link");
    common(qkd);
    qkd->add_option("--input", input, "Directory of timetag files (default: simulate)");

    auto* wi = app.add_subcommand("whatif", "Rate multiplier for modified component losses");
    common(wi);
    wi->add_option("--set", sets, "component=dB[:side], repeatable")->required();
    wi->add_option("--budget", budget, "Loss budget to modify")->check(CLI::IsMember({"direct", "qkd"}));

    auto* rep = app.add_subcommand("report", "State comparison tables from earlier runs");
    common(rep);
    rep->add_option("--input", input, "Directory holding coincidence/qkd summaries (default: --out)");
    rep->add_flag("--simulate-missing", opt.simulate_missing, "Simulate states without stored results");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return exit_ok;
        }
        return report_error(err, exit_config, "usage", e.what());
    }

    try {
        CLI::App* chosen = app.get_subcommands().front();
        const std::string command = chosen->get_name();
        opt.threads = flags.threads;
        if (!input.empty()) opt.input = input;
        for (const auto& s : sets) opt.modifications.push_back(parse_modification(s));
        opt.whatif_budget = parse_setup(budget);

        const Scenario sc = resolve_scenario(flags, command);
        RunManifest m;
        if (command == "simulate") m = run_simulate(sc, opt);
        else if (command == "calibrate") m = run_calibrate(sc, opt);
        else if (command == "coincidences") m = run_coincidences(sc, opt);
        else if (command == "qkd") m = run_qkd(sc, opt);
        else if (command == "whatif") m = run_whatif(sc, opt);
        else m = run_report(sc, opt);
        out << m.summary.dump() << '\n';
        return exit_ok;
    }
    catch (const config_error& e) {
        return report_error(err, exit_config, "config", e.what());
    }
    catch (const topology_error& e) {
        return report_error(err, exit_config, "topology", e.what());
    }
    catch (const calibration_pair_error& e) {
        return report_error(err, exit_config, "calibration_pair", e.what());
    }
    catch (const invalid_input& e) {
        return report_error(err, exit_config, "invalid_input", e.what());
    }
    catch (const range_error& e) {
        return report_error(err, exit_config, "range", e.what());
    }
    catch (const data_error& e) {
        return report_error(err, exit_data, "data", e.what());
    }
    catch (const fit_error& e) {
        return report_error(err, exit_data, "fit", e.what());
    }
    catch (const fs::filesystem_error& e) {
        return report_error(err, exit_data, "io", e.what());
    }
    catch (const std::exception& e) {
        return report_error(err, exit_internal, "internal", e.what());
    }
}

} // namespace cedn::cli
