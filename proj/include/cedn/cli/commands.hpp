#pragma once

// Subcommands. Each takes a resolved Scenario plus per-command options,
// writes its artifacts and a manifest.json into the output directory, and
// returns the manifest.

#include "cedn/cli/output.hpp"
#include "cedn/cli/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cedn::cli {

struct RunOptions {
    unsigned threads = 0;
    std::optional<std::string> input; // directory with earlier results / timetags, or a curve CSV
    std::vector<LossModification> modifications;
    SetupKind whatif_budget = SetupKind::direct;
    bool simulate_missing = false;
    std::ostream* log = &std::cerr;
};

namespace detail {

class Run {
public:
    Run(std::string command, const Scenario& sc)
        : writer_(sc.out_dir), start_(std::chrono::system_clock::now()), steady_(std::chrono::steady_clock::now())
    {
        manifest_.command = std::move(command);
        manifest_.scenario = to_json(sc);
        manifest_.scenario_hash = scenario_hash(sc);
        manifest_.seed = sc.seed;
        manifest_.started_utc = utc_timestamp(start_);
    }

    ArtifactWriter& out() { return writer_; }
    RunManifest& manifest() { return manifest_; }

    void warn(const std::string& w, std::ostream* log)
    {
        manifest_.warnings.push_back(w);
        if (log) *log << "WARN\t" << w << '\n';
    }

    RunManifest finish()
    {
        manifest_.finished_utc = utc_timestamp(std::chrono::system_clock::now());
        manifest_.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - steady_).count();
        manifest_.artifacts = writer_.artifacts();
        const auto path = writer_.dir() / "manifest.json";
        std::ofstream os(path);
        if (!os) throw data_error("cannot write " + path.string());
        os << manifest_.to_json().dump(2) << '\n';
        return manifest_;
    }

private:
    ArtifactWriter writer_;
    RunManifest manifest_;
    std::chrono::system_clock::time_point start_;
    std::chrono::steady_clock::time_point steady_;
};

inline std::string state_label(const NetworkState& s) { return std::string(to_string(s.name)); }

inline std::string user_file(UserId u, const std::string& ext)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "user_%02d.%s", u, ext.c_str());
    return buf;
}

inline void write_streams(ArtifactWriter& out, const std::vector<TimetagStream>& streams, const std::string& format)
{
    for (const auto& s : streams) {
        const std::span<const TimetagStream> one(&s, 1);
        if (format == "bin")
            out.write("timetags/" + user_file(s.user, "bin"), [&](std::ostream& os) { write_timetags_binary(os, one); },
                      true);
        else out.write("timetags/" + user_file(s.user, "csv"), [&](std::ostream& os) { write_timetags_csv(os, one); });
    }
}

/// Stream duration recorded by an earlier simulate run, if any.
inline double recorded_duration(const fs::path& dir)
{
    for (const auto& p : {dir / "manifest.json", dir.parent_path() / "manifest.json"}) {
        std::ifstream is(p);
        if (!is) continue;
        try {
            const auto j = json::parse(is);
            return j.at("scenario").at("source").at("duration_s").get<double>();
        }
        catch (const json::exception&) {
            throw data_error(p.string() + ": unreadable manifest");
        }
    }
    return 0.0;
}

/// Per-user timetag files user_NN.{csv,bin} from `dir` or `dir`/timetags.
inline std::vector<TimetagStream> load_streams(const fs::path& in, const NetworkTopology& topo)
{
    fs::path dir = in;
    if (fs::is_directory(dir / "timetags")) dir /= "timetags";
    if (!fs::is_directory(dir)) throw data_error("timetag directory " + in.string() + " does not exist");
    const double duration = recorded_duration(dir);
    std::vector<TimetagStream> streams;
    for (UserId u = 0; u < topo.user_count(); ++u) {
        const auto csv = dir / user_file(u, "csv"), bin = dir / user_file(u, "bin");
        std::vector<TimetagStream> all;
        if (fs::exists(csv)) {
            std::ifstream is(csv);
            try {
                all = read_timetags_csv(is, topo.user_count(), duration);
            }
            catch (const data_error& e) {
                throw data_error(csv.string() + ": " + e.what());
            }
        }
        else if (fs::exists(bin)) {
            std::ifstream is(bin, std::ios::binary);
            try {
                all = read_timetags_binary(is, topo.user_count(), duration);
            }
            catch (const data_error& e) {
                throw data_error(bin.string() + ": " + e.what());
            }
        }
        else {
            throw data_error("missing timetag file for user " + std::to_string(u) + " in " + dir.string());
        }
        for (UserId v = 0; v < topo.user_count(); ++v)
            if (v != u && !all[static_cast<std::size_t>(v)].empty())
                throw data_error("timetag file of user " + std::to_string(u) + " holds events of user " +
                                 std::to_string(v));
        streams.push_back(std::move(all[static_cast<std::size_t>(u)]));
    }
    // Streams inferred from their last event get a common duration.
    if (duration <= 0) {
        double d = 0;
        for (const auto& s : streams) d = std::max(d, s.duration_s);
        for (auto& s : streams) s.duration_s = d;
    }
    return streams;
}

inline json class_mean_json(const ClassMean& c)
{
    return {{"rate_hz", c.rate_hz}, {"error_hz", c.error_hz}, {"links", c.links}};
}

/// Analytic windowed mean rate over the links the state entangles.
inline double analytic_mean_rate(const GenerationScenario& g, double window_ps)
{
    const auto m = pair_routing_matrix(g.topology, g.state);
    double sum = 0;
    int n = 0;
    for (UserId u = 0; u < g.topology.user_count(); ++u)
        for (UserId v = u + 1; v < g.topology.user_count(); ++v)
            if (m(u, v) > 0) {
                sum += expected_coincidence_rate(g, u, v, window_ps);
                ++n;
            }
    return n ? sum / n : 0.0;
}

} // namespace detail

// ---- simulate ----------------------------------------------------------------

inline RunManifest run_simulate(const Scenario& sc, const RunOptions& opt = {})
{
    const auto seed = sc.require_seed();
    detail::Run run("simulate", sc);
    const auto streams = generate_timetags(sc.generation(seed), opt.threads);
    detail::write_streams(run.out(), streams, sc.timetag_format);
    std::size_t events = 0;
    for (const auto& s : streams) events += s.size();
    run.manifest().summary = {{"streams", streams.size()},
                              {"events", events},
                              {"pair_rate_per_bsgu", sc.pair_rate_per_bsgu},
                              {"duration_s", sc.duration_s},
                              {"state", detail::state_label(sc.state)}};
    return run.finish();
}

// ---- coincidences --------------------------------------------------------------

struct CoincidenceOutcome {
    CoincidenceMatrix matrix;
    LinkRateSummary summary;
    double mean_rate_hz = 0.0; // over the links the state entangles
    double mean_error_hz = 0.0;
    int entangled_links = 0;
    json summary_json;
};

inline CoincidenceOutcome analyse_coincidences(const Scenario& sc, const std::vector<TimetagStream>& streams,
                                               unsigned threads)
{
    const auto window = sc.window_for(sc.state.name);
    auto m = coincidence_matrix(streams, window, threads);
    auto summary = link_rate_summary(m, sc.topology, sc.recorded_users);
    const auto routing = pair_routing_matrix(sc.topology, sc.state);
    const auto g = sc.generation(sc.seed.value_or(0));

    std::size_t sum = 0;
    int n = 0;
    json links = json::array();
    for (const auto& l : summary.links) {
        const bool ent = routing(l.user_a, l.user_b) > 0;
        if (ent) {
            sum += l.count;
            ++n;
        }
        links.push_back({{"user_a", l.user_a},
                         {"user_b", l.user_b},
                         {"class", to_string(l.link_class)},
                         {"entangled", ent},
                         {"count", l.count},
                         {"rate_hz", l.rate_hz},
                         {"error_hz", l.error_hz},
                         {"expected_rate_hz", expected_coincidence_rate(g, l.user_a, l.user_b,
                                                                        static_cast<double>(window.width_ps))}});
    }
    const double denom = n * m.duration_s();
    const double mean = n && denom > 0 ? static_cast<double>(sum) / denom : 0.0;
    const double err = n && denom > 0 ? std::sqrt(static_cast<double>(sum)) / denom : 0.0;
    json sj = {{"state", detail::state_label(sc.state)},
               {"duration_s", m.duration_s()},
               {"window_ps", window.width_ps},
               {"offset_ps", window.offset_ps},
               {"entangled_links", n},
               {"mean_rate_hz", mean},
               {"mean_rate_error_hz", err},
               {"classes",
                {{"intra", detail::class_mean_json(summary.intra)},
                 {"inter", detail::class_mean_json(summary.inter)},
                 {"all", detail::class_mean_json(summary.all)}}},
               {"links", links}};
    return {std::move(m), std::move(summary), mean, err, n, std::move(sj)};
}

inline std::vector<TimetagStream> coincidence_streams(const Scenario& sc, const RunOptions& opt)
{
    if (opt.input) return detail::load_streams(*opt.input, sc.topology);
    return generate_timetags(sc.generation(sc.require_seed()), opt.threads);
}

inline RunManifest run_coincidences(const Scenario& sc, const RunOptions& opt = {})
{
    detail::Run run("coincidences", sc);
    const auto streams = coincidence_streams(sc, opt);
    const auto res = analyse_coincidences(sc, streams, opt.threads);
    const auto label = detail::state_label(sc.state);

    Table links{{"user_a", "user_b", "class", "entangled", "count", "rate_hz", "error_hz", "expected_rate_hz"}, {}};
    for (const auto& l : res.summary_json["links"])
        links.add({l["user_a"], l["user_b"], l["class"], l["entangled"] ? 1 : 0, l["count"], l["rate_hz"],
                   l["error_hz"], l["expected_rate_hz"]});
    run.out().table("links_" + label, links, sc.format);

    if (sc.format == "json") {
        json mat = json::array();
        for (int u = 0; u < res.matrix.user_count(); ++u) {
            json row = json::array();
            for (int v = 0; v < res.matrix.user_count(); ++v) row.push_back(res.matrix.count(u, v));
            mat.push_back(row);
        }
        run.out().json_file("coincidence_matrix_" + label + ".json", mat);
    }
    else {
        run.out().write("coincidence_matrix_" + label + ".csv",
                        [&](std::ostream& os) { write_coincidence_matrix_csv(os, res.matrix); });
    }
    run.out().json_file("coincidence_summary_" + label + ".json", res.summary_json);
    run.manifest().summary = {{"state", label},
                              {"mean_rate_hz", res.mean_rate_hz},
                              {"mean_rate_error_hz", res.mean_error_hz},
                              {"entangled_links", res.entangled_links}};
    return run.finish();
}

// ---- qkd ---------------------------------------------------------------------

inline MeasurementDurations qkd_durations(const Scenario& sc)
{
    return {sc.qkd.entangled_duration_s, sc.qkd.non_entangled_duration_s};
}

inline QkdOptions qkd_options(const Scenario& sc)
{
    QkdOptions o;
    o.secure = sc.qkd.secure;
    o.finite_size = sc.qkd.finite_size;
    o.epsilon = sc.qkd.epsilon;
    return o;
}

inline QkdNetworkReport analyse_qkd(const Scenario& sc, const std::vector<TimetagStream>& streams)
{
    return qkd_network_report(streams, sc.topology, sc.state, sc.frame_for(sc.state.name), sc.qkd.users,
                              qkd_durations(sc), qkd_options(sc));
}

inline json qkd_summary_json(const Scenario& sc, const QkdNetworkReport& rep)
{
    int positive = 0, entangled = 0, positive_entangled = 0;
    json links = json::array();
    for (const auto& l : rep.links) {
        positive += l.secure_rate_bps > 0;
        entangled += l.entangled;
        positive_entangled += l.entangled && l.secure_rate_bps > 0;
        links.push_back({{"user_a", l.user_a},
                         {"user_b", l.user_b},
                         {"class", to_string(l.link_class)},
                         {"entangled", l.entangled},
                         {"sifted", l.sifted},
                         {"raw_bps", l.raw_rate_bps},
                         {"qber", std::isfinite(l.qber) ? json(l.qber) : json()},
                         {"symbol_error", std::isfinite(l.symbol_error_rate) ? json(l.symbol_error_rate) : json()},
                         {"secure_bps", l.secure_rate_bps},
                         {"duration_s", l.duration_s}});
    }
    return {{"state", detail::state_label(sc.state)},
            {"bin_width_ps", rep.frame.bin_width_ps},
            {"mean_secure_bps", rep.mean_entangled_secure_rate()},
            {"links", links.size()},
            {"entangled_links", entangled},
            {"positive_links", positive},
            {"positive_entangled_links", positive_entangled},
            {"link_table", links}};
}

inline std::vector<TimetagStream> qkd_streams(const Scenario& sc, const RunOptions& opt)
{
    if (opt.input) return detail::load_streams(*opt.input, sc.topology);
    return generate_timetags(sc.qkd_generation(sc.require_seed()), opt.threads);
}

inline RunManifest run_qkd(const Scenario& sc, const RunOptions& opt = {})
{
    detail::Run run("qkd", sc);
    const auto streams = qkd_streams(sc, opt);
    const auto rep = analyse_qkd(sc, streams);
    const auto label = detail::state_label(sc.state);
    for (const auto& l : rep.links)
        for (const auto& w : l.warnings)
            run.warn("link " + std::to_string(l.user_a) + "-" + std::to_string(l.user_b) + ": " + w, opt.log);

    Table t{{"user_a", "user_b", "class", "entangled", "sifted", "raw_bps", "qber", "symbol_error", "secure_bps",
             "duration_s"},
            {}};
    for (const auto& l : rep.links)
        t.add({l.user_a, l.user_b, std::string(to_string(l.link_class)), l.entangled ? 1 : 0, l.sifted,
               l.raw_rate_bps, l.qber, l.symbol_error_rate, l.secure_rate_bps, l.duration_s});
    run.out().table("qkd_links_" + label, t, sc.format);
    const auto sj = qkd_summary_json(sc, rep);
    run.out().json_file("qkd_summary_" + label + ".json", sj);
    run.manifest().summary = {{"state", label},
                              {"mean_secure_bps", sj["mean_secure_bps"]},
                              {"positive_links", sj["positive_links"]},
                              {"bin_width_ps", rep.frame.bin_width_ps}};
    return run.finish();
}

// ---- calibrate -----------------------------------------------------------------

inline CalibrationCurve read_curve_csv(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) throw data_error("cannot open calibration curve " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw data_error(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("voltage_V,counts", 0) != 0)
        throw data_error(path.string() + ":1: expected header 'voltage_V,counts[,error]'");
    CalibrationCurve c;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string v, n;
        if (!std::getline(ls, v, ',') || !std::getline(ls, n, ','))
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected voltage_V,counts");
        try {
            const double volts = std::stod(v), counts = std::stod(n);
            c.points.push_back({volts, counts, std::sqrt(std::max(counts, 0.0))});
        }
        catch (const std::exception&) {
            throw data_error(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
        }
    }
    try {
        c.validate();
    }
    catch (const invalid_input& e) {
        throw data_error(path.string() + ": " + e.what());
    }
    return c;
}

inline RunManifest run_calibrate(const Scenario& sc, const RunOptions& opt = {})
{
    detail::Run run("calibrate", sc);
    const auto& cal = sc.calibration;
    CalibrationCurve curve;
    if (opt.input) {
        curve = read_curve_csv(*opt.input);
    }
    else {
        SweepSpec spec;
        spec.bsgu = cal.bsgu;
        spec.heater = cal.heater;
        spec.voltages = linspace(0.0, cal.v_max, static_cast<std::size_t>(cal.points));
        spec.integration_s = cal.integration_s;
        spec.window = sc.window_for(sc.state.name);
        spec.mode = cal.mode;
        const std::uint64_t seed = cal.mode == SweepMode::expected ? sc.seed.value_or(0) : sc.require_seed();
        curve = simulate_sweep(sc.generation(seed), cal.user_a, cal.user_b, spec, opt.threads);
    }

    CalibrationResult res;
    try {
        res = fit_calibration(curve);
    }
    catch (const fit_error& e) {
        throw data_error(std::string("calibration fit failed: ") + e.what());
    }

    Table t{{"voltage_V", "counts", "error", "fit_counts"}, {}};
    for (const auto& p : curve.points) t.add({p.voltage, p.counts, p.error, res.fit(p.voltage)});
    run.out().table("calibration_curve", t, sc.format);

    auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
    json j = {{"alpha_rad_per_V2", res.fit.alpha},
              {"phi0_rad", res.fit.phi0},
              {"amplitude_counts", res.fit.amplitude},
              {"offset_counts", res.fit.offset},
              {"chi2", res.chi2},
              {"reduced_chi2", res.reduced_chi2},
              {"v_split_V", opt_json(res.v_split)},
              {"v_bunch_V", opt_json(res.v_bunch)},
              {"v_mid_V", opt_json(res.v_mid)},
              {"bsgu", cal.bsgu},
              {"users", {cal.user_a, cal.user_b}}};
    if (!opt.input) j["true_model"] = {{"alpha_rad_per_V2", cal.heater.alpha}, {"phi0_rad", cal.heater.phi0}};
    for (const auto& [name, v] : {std::pair{"split", res.v_split}, {"bunch", res.v_bunch}, {"mid", res.v_mid}})
        if (!v) run.warn(std::string("no ") + name + " voltage inside the swept range", opt.log);
    run.out().json_file("calibration.json", j);
    run.manifest().summary = j;
    return run.finish();
}

// ---- whatif ------------------------------------------------------------------

inline RunManifest run_whatif(const Scenario& sc, const RunOptions& opt = {})
{
    if (opt.modifications.empty()) throw config_error("whatif needs at least one --set component=dB");
    detail::Run run("whatif", sc);
    const auto& section = opt.whatif_budget == SetupKind::direct ? sc.loss : sc.qkd.loss;
    const auto budget = section.budget().with(detector_component(sc.detector.efficiency));
    const double mult = what_if(budget, opt.modifications);

    Table mods{{"component", "side", "old_db", "new_db"}, {}};
    for (const auto& m : opt.modifications)
        for (const auto& c : budget.components())
            if (c.name == m.component)
                mods.add({m.component, std::string(to_string(m.side.value_or(c.side))), c.loss_db, m.new_db});
    run.out().table("whatif_modifications", mods, sc.format);

    // Predicted true-coincidence rates scale with the pair transmittance.
    Table rates{{"state", "links", "true_rate_before_hz", "true_rate_after_hz"}, {}};
    auto g = sc.generation(0);
    if (opt.whatif_budget == SetupKind::qkd)
        g.transmittance = TransmittanceTable::uniform(sc.topology.user_count(), link_transmittance(sc.qkd.loss.budget()));
    for (auto s : {StateName::intra, StateName::inter, StateName::all}) {
        g.state = NetworkState::named(s, sc.topology, sc.state.convention);
        const auto m = pair_routing_matrix(g.topology, g.state);
        double sum = 0;
        int n = 0;
        for (UserId u = 0; u < g.topology.user_count(); ++u)
            for (UserId v = u + 1; v < g.topology.user_count(); ++v)
                if (m(u, v) > 0) {
                    sum += expected_true_coincidence_rate(g, m, u, v) *
                           jitter_capture_fraction(static_cast<double>(sc.window_for(s).width_ps),
                                                   g.detector.jitter_sigma_ps);
                    ++n;
                }
        const double before = n ? sum / n : 0.0;
        rates.add({std::string(to_string(s)), n, before, before * mult});
    }
    run.out().table("whatif_rates", rates, sc.format);
    run.manifest().summary = {{"budget", to_string(opt.whatif_budget)}, {"rate_multiplier", mult}};
    run.out().json_file("whatif.json", run.manifest().summary);
    return run.finish();
}

// ---- report ------------------------------------------------------------------

inline std::optional<json> read_json(const fs::path& p)
{
    std::ifstream is(p);
    if (!is) return std::nullopt;
    try {
        return json::parse(is);
    }
    catch (const json::exception& e) {
        throw data_error(p.string() + ": " + e.what());
    }
}

/// State comparison over intra/inter/all. Measured columns come from the
/// coincidence/qkd summaries in the input directory (default: the output
/// directory); with simulate_missing, absent states are simulated here.
inline RunManifest run_report(const Scenario& sc, const RunOptions& opt = {})
{
    detail::Run run("report", sc);
    const fs::path in = opt.input ? fs::path(*opt.input) : fs::path(sc.out_dir);

    Table cmp{{"state", "links", "window_ps", "analytic_mean_rate_hz", "mean_rate_hz", "mean_rate_error_hz",
               "mean_secure_bps", "secure_links", "bin_width_ps"},
              {}};
    Table lng{{"state", "user_a", "user_b", "class", "routing_probability", "expected_rate_hz", "rate_hz",
               "secure_bps"},
              {}};
    json summary = json::object();
    std::vector<std::pair<std::string, double>> measured;

    for (auto s : {StateName::intra, StateName::inter, StateName::all}) {
        Scenario st = sc;
        st.state = NetworkState::named(s, sc.topology, sc.state.convention);
        const auto label = detail::state_label(st.state);
        const auto g = st.generation(0);
        const auto routing = pair_routing_matrix(st.topology, st.state);
        const int links = link_counts(st.topology, st.state);
        const double window_ps = static_cast<double>(st.window_for(s).width_ps);
        const double analytic = detail::analytic_mean_rate(g, window_ps);

        auto coin = read_json(in / ("coincidence_summary_" + label + ".json"));
        auto qkd = read_json(in / ("qkd_summary_" + label + ".json"));
        if (!coin && opt.simulate_missing)
            coin = analyse_coincidences(st, coincidence_streams(st, opt), opt.threads).summary_json;
        if (!qkd && opt.simulate_missing) qkd = qkd_summary_json(st, analyse_qkd(st, qkd_streams(st, opt)));
        if (!coin) run.warn("no coincidence results for state " + label + "; measured columns left empty", opt.log);
        if (!qkd) run.warn("no qkd results for state " + label + "; secure-rate columns left empty", opt.log);

        cmp.add({label, links, st.window_for(s).width_ps, analytic, coin ? (*coin)["mean_rate_hz"] : json(),
                 coin ? (*coin)["mean_rate_error_hz"] : json(), qkd ? (*qkd)["mean_secure_bps"] : json(),
                 qkd ? (*qkd)["positive_links"] : json(), st.frame_for(s).bin_width_ps});
        if (coin) measured.emplace_back(label, (*coin)["mean_rate_hz"].get<double>());

        std::map<std::pair<int, int>, json> rate_of, secure_of;
        if (coin)
            for (const auto& l : (*coin)["links"]) rate_of[{l["user_a"], l["user_b"]}] = l["rate_hz"];
        if (qkd)
            for (const auto& l : (*qkd)["link_table"]) secure_of[{l["user_a"], l["user_b"]}] = l["secure_bps"];
        for (UserId u = 0; u < st.topology.user_count(); ++u)
            for (UserId v = u + 1; v < st.topology.user_count(); ++v) {
                auto find = [&](const std::map<std::pair<int, int>, json>& m) {
                    auto it = m.find({u, v});
                    return it == m.end() ? json() : it->second;
                };
                lng.add({label, u, v, std::string(to_string(classify_link(st.topology, u, v))), routing(u, v),
                         expected_coincidence_rate(g, u, v, window_ps), find(rate_of),
                         find(secure_of)});
            }
        if (sc.format == "json") {
            json mat = json::array();
            for (UserId u = 0; u < routing.user_count(); ++u) {
                json row = json::array();
                for (UserId v = 0; v < routing.user_count(); ++v) row.push_back(routing(u, v));
                mat.push_back(row);
            }
            run.out().json_file("routing_" + label + ".json", mat);
        }
        else {
            run.out().write("routing_" + label + ".csv", [&](std::ostream& os) { write_routing_csv(os, routing); });
        }
        summary[label] = {{"links", links},
                          {"analytic_mean_rate_hz", analytic},
                          {"mean_rate_hz", coin ? (*coin)["mean_rate_hz"] : json()},
                          {"mean_secure_bps", qkd ? (*qkd)["mean_secure_bps"] : json()}};
    }
    run.out().table("state_comparison", cmp, sc.format);
    run.out().table("pairs_long", lng, sc.format);

    if (measured.size() == 3) {
        const bool ordered = measured[0].second > measured[1].second && measured[1].second > measured[2].second;
        summary["rate_ordering_intra_inter_all"] = ordered;
        if (!ordered) run.warn("measured mean rates are not ordered intra > inter > all", opt.log);
    }
    run.manifest().summary = summary;
    return run.finish();
}

} // namespace cedn::cli
