#pragma once

// Scenario configuration: YAML in, fully resolved scenario out.
//
// A config names a base profile (only "paper-default" ships) and overrides
// any subset of its sections. Errors carry the file and line of the node.

#include "cedn/cedn.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cedn::cli {

using json = nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";

struct LossSection {
    SetupKind setup = SetupKind::direct;
    bool base_inventory = true; // false: only the listed components
    std::vector<ComponentLoss> components;

    LinkBudget budget() const
    {
        std::vector<ComponentLoss> list;
        if (base_inventory) list = default_optical_budget(setup).components();
        for (const auto& c : components) {
            auto it = std::find_if(list.begin(), list.end(), [&](const ComponentLoss& x) { return x.name == c.name; });
            if (it != list.end()) *it = c;
            else list.push_back(c);
        }
        return LinkBudget(list);
    }
};

struct QkdSection {
    LossSection loss{SetupKind::qkd, true, {}};
    std::vector<UserId> users{0, 1, 8, 9, 16, 17};
    SecureRateParams secure;
    bool finite_size = true;
    double epsilon = 0.01;
    double entangled_duration_s = 300.0;
    double non_entangled_duration_s = 100.0;
};

struct CalibrationSection {
    int bsgu = 0;
    UserId user_a = 0;
    UserId user_b = 8;
    ThermoOpticModel heater{0.4, 0.05};
    double v_max = 10.0;
    int points = 61;
    double integration_s = 60.0; // ~1e3 peak counts at the default link rate
    SweepMode mode = SweepMode::poisson;
};

struct Scenario {
    std::string profile = "paper-default";
    NetworkTopology topology = NetworkTopology::paper_default();
    NetworkState state = NetworkState::named(StateName::intra, NetworkTopology::paper_default());
    double pair_rate_per_bsgu = 0.0;          // resolved
    std::optional<double> target_link_rate_hz = 43.5;
    double duration_s = 10.0;
    std::optional<std::uint64_t> seed;
    DetectorParams detector{default_detector_efficiency, 100.0, 55.0, 0};
    LossSection loss;
    std::optional<FrameConfig> frame;
    std::optional<timestamp_ps> window_ps; // unset: bin width of the active state
    timestamp_ps offset_ps = 0;
    std::vector<UserId> recorded_users;
    QkdSection qkd;
    CalibrationSection calibration;
    std::string out_dir = "cedn-out";
    std::string format = "csv";
    std::string timetag_format = "csv";

    FrameConfig frame_for(StateName s) const { return frame ? *frame : FrameConfig::for_state(s); }

    /// Coincidence window: the state's bin width unless overridden.
    CoincidenceWindow window_for(StateName s) const
    {
        return {window_ps.value_or(FrameConfig::for_state(s).bin_width_ps), offset_ps};
    }

    /// Generation scenario for the coincidence experiment (direct detection).
    GenerationScenario generation(std::uint64_t use_seed) const
    {
        GenerationScenario g;
        g.topology = topology;
        g.state = state;
        g.source = {pair_rate_per_bsgu, duration_s, use_seed};
        g.detector = detector;
        g.transmittance = TransmittanceTable::uniform(topology.user_count(), link_transmittance(loss.budget()));
        g.recorded_users = recorded_users;
        return g;
    }

    /// Generation scenario for the QKD configuration over the measured users.
    GenerationScenario qkd_generation(std::uint64_t use_seed) const
    {
        auto g = generation(use_seed);
        g.source.duration_s = std::max(qkd.entangled_duration_s, qkd.non_entangled_duration_s);
        g.transmittance = TransmittanceTable::uniform(topology.user_count(), link_transmittance(qkd.loss.budget()));
        g.recorded_users = qkd.users;
        return g;
    }

    std::uint64_t require_seed() const
    {
        if (!seed) throw config_error("a seed is required for simulation (config source.seed or --seed)");
        return *seed;
    }
};

// ---- YAML reading ------------------------------------------------------------

namespace detail {

inline std::string where(const std::string& file, const YAML::Node& n)
{
    const auto m = n.Mark();
    std::string s = file.empty() ? "<config>" : file;
    if (m.line >= 0) s += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
    return s;
}

class Reader {
public:
    explicit Reader(std::string file) : file_(std::move(file)) {}

    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const
    {
        throw config_error(where(file_, n) + ": " + msg);
    }

    void require_map(const YAML::Node& n, const std::string& what) const
    {
        if (!n.IsMap()) fail(n, what + " must be a mapping");
    }

    void known_keys(const YAML::Node& n, const std::string& section, std::initializer_list<const char*> keys) const
    {
        require_map(n, section);
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!ok.count(k)) fail(kv.first, "unknown key '" + k + "' in " + section);
        }
    }

    template <class T>
    T get(const YAML::Node& n, const std::string& what) const
    {
        try {
            return n.as<T>();
        }
        catch (const YAML::Exception&) {
            fail(n, "cannot read " + what);
        }
    }

    template <class T>
    void opt(const YAML::Node& parent, const char* key, T& out) const
    {
        if (const auto n = parent[key]) out = get<T>(n, key);
    }

    const std::string& file() const { return file_; }

private:
    std::string file_;
};

inline ComponentLoss read_component(const Reader& r, const YAML::Node& n)
{
    r.known_keys(n, "loss component", {"name", "db", "count", "side"});
    if (!n["name"] || !n["db"]) r.fail(n, "loss component needs 'name' and 'db'");
    ComponentLoss c;
    c.name = r.get<std::string>(n["name"], "name");
    c.loss_db = r.get<double>(n["db"], "db");
    r.opt(n, "count", c.count);
    if (const auto s = n["side"]) {
        try {
            c.side = parse_side(r.get<std::string>(s, "side"));
        }
        catch (const error& e) {
            r.fail(s, e.what());
        }
    }
    if (!(c.loss_db >= 0) || c.count < 1) r.fail(n, "loss component needs db >= 0 and count >= 1");
    return c;
}

inline void read_loss(const Reader& r, const YAML::Node& n, LossSection& loss,
                      std::initializer_list<const char*> extra_keys = {})
{
    std::vector<const char*> keys{"setup", "components"};
    keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
    r.require_map(n, "loss");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& kv : n)
        if (!ok.count(kv.first.as<std::string>()))
            r.fail(kv.first, "unknown key '" + kv.first.as<std::string>() + "' in loss section");
    if (const auto s = n["setup"]) {
        const auto v = r.get<std::string>(s, "setup");
        if (v == "none") loss.base_inventory = false;
        else {
            try {
                loss.setup = parse_setup(v);
                loss.base_inventory = true;
            }
            catch (const error& e) {
                r.fail(s, e.what());
            }
        }
    }
    if (const auto c = n["components"]) {
        if (!c.IsSequence()) r.fail(c, "components must be a list");
        loss.components.clear();
        for (const auto& item : c) loss.components.push_back(read_component(r, item));
    }
}

inline std::vector<UserId> read_users(const Reader& r, const YAML::Node& n, const NetworkTopology& topo,
                                      const char* what)
{
    if (!n.IsSequence()) r.fail(n, std::string(what) + " must be a list of user ids");
    std::vector<UserId> users;
    for (const auto& u : n) {
        const auto id = r.get<int>(u, what);
        if (!topo.valid_user(id)) r.fail(u, "user " + std::to_string(id) + " does not exist");
        if (std::find(users.begin(), users.end(), id) != users.end()) r.fail(u, "duplicate user " + std::to_string(id));
        users.push_back(id);
    }
    return users;
}

inline SweepMode parse_sweep_mode(std::string_view s)
{
    if (s == "expected") return SweepMode::expected;
    if (s == "poisson") return SweepMode::poisson;
    if (s == "monte_carlo") return SweepMode::monte_carlo;
    throw config_error("unknown sweep mode '" + std::string(s) + "' (expected, poisson, monte_carlo)");
}

inline std::string_view to_string(SweepMode m)
{
    switch (m) {
    case SweepMode::expected: return "expected";
    case SweepMode::poisson: return "poisson";
    default: return "monte_carlo";
    }
}

} // namespace detail

/// Fills in derived quantities and checks cross-section consistency.
inline void resolve(Scenario& sc)
{
    sc.state.phases.validate_for(sc.topology);
    sc.detector.validate();
    if (!(sc.duration_s > 0)) throw config_error("source.duration_s must be > 0");
    if (sc.window_ps && *sc.window_ps <= 0) throw config_error("coincidence.window_ps must be > 0");
    if (sc.frame) sc.frame->validate();
    for (auto u : sc.recorded_users)
        if (!sc.topology.valid_user(u)) throw config_error("recorded user " + std::to_string(u) + " does not exist");
    for (auto u : sc.qkd.users)
        if (!sc.topology.valid_user(u)) throw config_error("qkd user " + std::to_string(u) + " does not exist");
    sc.qkd.secure.validate();
    if (!(sc.qkd.epsilon > 0 && sc.qkd.epsilon < 1)) throw config_error("qkd.epsilon must lie in (0, 1)");
    if (!(sc.qkd.entangled_duration_s > 0 && sc.qkd.non_entangled_duration_s > 0))
        throw config_error("qkd durations must be > 0");
    if (sc.calibration.points < 8) throw config_error("calibration.points must be >= 8");
    if (!(sc.calibration.v_max > 0)) throw config_error("calibration.v_max must be > 0");
    if (!(sc.calibration.integration_s > 0)) throw config_error("calibration.integration_s must be > 0");
    try {
        sc.calibration.heater.validate();
        check_calibration_pair(sc.topology, sc.calibration.bsgu, sc.calibration.user_a, sc.calibration.user_b);
    }
    catch (const invalid_input& e) {
        throw config_error(std::string("calibration: ") + e.what());
    }
    if (sc.format != "csv" && sc.format != "json") throw config_error("output.format must be csv or json");
    if (sc.timetag_format != "csv" && sc.timetag_format != "bin")
        throw config_error("output.timetag_format must be csv or bin");

    (void)sc.loss.budget();
    (void)sc.qkd.loss.budget();

    if (sc.target_link_rate_hz) {
        // The pair rate is pinned by the intra-state mean link rate of the
        // coincidence experiment, whatever state is being simulated.
        GenerationScenario g = sc.generation(0);
        g.state = NetworkState::named(StateName::intra, sc.topology, sc.state.convention);
        g.recorded_users.clear();
        sc.pair_rate_per_bsgu =
            pair_rate_for_link_rate(g, *sc.target_link_rate_hz,
                                    static_cast<double>(sc.window_for(StateName::intra).width_ps));
    }
    if (!(sc.pair_rate_per_bsgu >= 0) || !std::isfinite(sc.pair_rate_per_bsgu))
        throw config_error("pair rate must be finite and >= 0");
}

inline Scenario profile_scenario(const std::string& name)
{
    if (name != "paper-default") throw config_error("unknown profile '" + name + "' (available: paper-default)");
    return Scenario{};
}

/// Applies a YAML document on top of its profile. `file` is only used in messages.
inline Scenario load_scenario(const YAML::Node& root_in, const std::string& file = {})
{
    detail::Reader r(file);
    YAML::Node root = root_in;
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    // A run manifest embeds its resolved scenario and can be fed back directly.
    if (root.IsMap() && root["scenario"] && root["tool_version"]) root = root["scenario"];
    r.known_keys(root, "config", {"profile", "topology", "state", "source", "detector", "loss", "frame", "coincidence",
                                  "recorded_users", "qkd", "calibration", "output"});

    std::string profile = "paper-default";
    r.opt(root, "profile", profile);
    Scenario sc;
    try {
        sc = profile_scenario(profile);
    }
    catch (const config_error& e) {
        r.fail(root["profile"], e.what());
    }

    if (const auto t = root["topology"]) {
        r.known_keys(t, "topology", {"subnets", "users_per_subnet", "wiring"});
        int subnets = sc.topology.subnet_count(), per = sc.topology.users_per_subnet();
        r.opt(t, "subnets", subnets);
        r.opt(t, "users_per_subnet", per);
        std::vector<BsguWiring> wiring;
        if (const auto w = t["wiring"]) {
            if (!w.IsSequence()) r.fail(w, "wiring must be a list of [up, down] subnet pairs");
            for (const auto& pair : w) {
                if (!pair.IsSequence() || pair.size() != 2) r.fail(pair, "each wiring entry must be [up, down]");
                wiring.push_back({r.get<int>(pair[0], "up subnet"), r.get<int>(pair[1], "down subnet")});
            }
        }
        try {
            if (!t["wiring"]) wiring = NetworkTopology::ring(subnets, std::max(per, 1)).wiring();
            sc.topology = NetworkTopology(subnets, per, wiring);
        }
        catch (const error& e) {
            r.fail(t, e.what());
        }
        sc.state = NetworkState::named(StateName::intra, sc.topology, sc.state.convention);
        sc.qkd.users.erase(std::remove_if(sc.qkd.users.begin(), sc.qkd.users.end(),
                                          [&](UserId u) { return !sc.topology.valid_user(u); }),
                           sc.qkd.users.end());
    }

    if (const auto s = root["state"]) {
        r.known_keys(s, "state", {"name", "phases", "convention"});
        auto conv = sc.state.convention;
        if (const auto c = s["convention"]) {
            try {
                conv = parse_phase_convention(r.get<std::string>(c, "convention"));
            }
            catch (const error& e) {
                r.fail(c, e.what());
            }
        }
        StateName name = sc.state.name;
        if (const auto n = s["name"]) {
            try {
                name = parse_state_name(r.get<std::string>(n, "state name"));
            }
            catch (const error& e) {
                r.fail(n, e.what());
            }
        }
        if (const auto p = s["phases"]) {
            if (!p.IsSequence()) r.fail(p, "phases must be a list of radians, one per BSGU");
            PhaseSettings ph;
            for (const auto& v : p) ph.phi.push_back(r.get<double>(v, "phase"));
            try {
                ph.validate_for(sc.topology);
            }
            catch (const error& e) {
                r.fail(p, e.what());
            }
            if (s["name"] && name != StateName::custom) r.fail(s, "give either a named state or explicit phases");
            sc.state = NetworkState::custom(ph, conv);
        }
        else {
            if (name == StateName::custom) r.fail(s, "a custom state needs 'phases'");
            sc.state = NetworkState::named(name, sc.topology, conv);
        }
    }

    if (const auto s = root["source"]) {
        r.known_keys(s, "source", {"pair_rate_per_bsgu", "target_link_rate_hz", "duration_s", "seed"});
        if (s["pair_rate_per_bsgu"] && s["target_link_rate_hz"])
            r.fail(s, "give either pair_rate_per_bsgu or target_link_rate_hz");
        if (const auto p = s["pair_rate_per_bsgu"]) {
            sc.pair_rate_per_bsgu = r.get<double>(p, "pair_rate_per_bsgu");
            sc.target_link_rate_hz.reset();
        }
        if (const auto t = s["target_link_rate_hz"]) {
            sc.target_link_rate_hz = r.get<double>(t, "target_link_rate_hz");
            if (!(*sc.target_link_rate_hz > 0)) r.fail(t, "target_link_rate_hz must be > 0");
        }
        if (const auto d = s["duration_s"]) {
            sc.duration_s = r.get<double>(d, "duration_s");
            if (!(sc.duration_s > 0)) r.fail(d, "duration_s must be > 0");
        }
        if (const auto sd = s["seed"]) sc.seed = r.get<std::uint64_t>(sd, "seed");
    }

    if (const auto d = root["detector"]) {
        r.known_keys(d, "detector", {"efficiency", "dark_rate_hz", "jitter_sigma_ps", "dead_time_ps"});
        r.opt(d, "efficiency", sc.detector.efficiency);
        r.opt(d, "dark_rate_hz", sc.detector.dark_rate_hz);
        r.opt(d, "jitter_sigma_ps", sc.detector.jitter_sigma_ps);
        r.opt(d, "dead_time_ps", sc.detector.dead_time_ps);
        try {
            sc.detector.validate();
        }
        catch (const error& e) {
            r.fail(d, e.what());
        }
    }

    if (const auto l = root["loss"]) detail::read_loss(r, l, sc.loss);

    if (const auto f = root["frame"]) {
        r.known_keys(f, "frame", {"bin_width_ps"});
        if (const auto b = f["bin_width_ps"]) {
            const auto w = r.get<timestamp_ps>(b, "bin_width_ps");
            if (w <= 0) r.fail(b, "bin_width_ps must be > 0");
            sc.frame = FrameConfig{w};
        }
    }

    if (const auto c = root["coincidence"]) {
        r.known_keys(c, "coincidence", {"window_ps", "offset_ps"});
        if (const auto w = c["window_ps"]) {
            sc.window_ps = r.get<timestamp_ps>(w, "window_ps");
            if (*sc.window_ps <= 0) r.fail(w, "window_ps must be > 0");
        }
        r.opt(c, "offset_ps", sc.offset_ps);
    }

    if (const auto u = root["recorded_users"]) sc.recorded_users = detail::read_users(r, u, sc.topology, "recorded_users");

    if (const auto q = root["qkd"]) {
        r.known_keys(q, "qkd", {"loss", "users", "reconciliation_efficiency", "finite_size_deduction", "finite_size",
                                "epsilon", "entangled_duration_s", "non_entangled_duration_s"});
        if (const auto l = q["loss"]) detail::read_loss(r, l, sc.qkd.loss);
        if (const auto u = q["users"]) sc.qkd.users = detail::read_users(r, u, sc.topology, "qkd users");
        r.opt(q, "reconciliation_efficiency", sc.qkd.secure.reconciliation_efficiency);
        r.opt(q, "finite_size_deduction", sc.qkd.secure.finite_size_deduction);
        r.opt(q, "finite_size", sc.qkd.finite_size);
        r.opt(q, "epsilon", sc.qkd.epsilon);
        r.opt(q, "entangled_duration_s", sc.qkd.entangled_duration_s);
        r.opt(q, "non_entangled_duration_s", sc.qkd.non_entangled_duration_s);
        try {
            sc.qkd.secure.validate();
        }
        catch (const error& e) {
            r.fail(q, e.what());
        }
    }

    if (const auto c = root["calibration"]) {
        r.known_keys(c, "calibration",
                     {"bsgu", "users", "phi0", "alpha", "v_max", "points", "integration_s", "mode"});
        r.opt(c, "bsgu", sc.calibration.bsgu);
        if (const auto u = c["users"]) {
            const auto users = detail::read_users(r, u, sc.topology, "calibration users");
            if (users.size() != 2) r.fail(u, "calibration needs exactly two users");
            sc.calibration.user_a = users[0];
            sc.calibration.user_b = users[1];
        }
        r.opt(c, "phi0", sc.calibration.heater.phi0);
        r.opt(c, "alpha", sc.calibration.heater.alpha);
        r.opt(c, "v_max", sc.calibration.v_max);
        r.opt(c, "points", sc.calibration.points);
        r.opt(c, "integration_s", sc.calibration.integration_s);
        if (const auto m = c["mode"]) {
            try {
                sc.calibration.mode = detail::parse_sweep_mode(r.get<std::string>(m, "mode"));
            }
            catch (const error& e) {
                r.fail(m, e.what());
            }
        }
        try {
            check_calibration_pair(sc.topology, sc.calibration.bsgu, sc.calibration.user_a, sc.calibration.user_b);
        }
        catch (const invalid_input& e) {
            r.fail(c, e.what());
        }
    }

    if (const auto o = root["output"]) {
        r.known_keys(o, "output", {"dir", "format", "timetag_format"});
        r.opt(o, "dir", sc.out_dir);
        r.opt(o, "format", sc.format);
        r.opt(o, "timetag_format", sc.timetag_format);
    }
    sc.profile = profile;
    return sc;
}

inline Scenario load_scenario_text(const std::string& text, const std::string& file = {})
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    }
    catch (const YAML::ParserException& e) {
        std::string where = file.empty() ? "<config>" : file;
        if (e.mark.line >= 0) where += ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1);
        throw config_error(where + ": " + e.msg);
    }
    return load_scenario(root, file);
}

inline Scenario load_scenario_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario_text(ss.str(), path);
}

// ---- canonical form --------------------------------------------------------

inline json to_json(const LossSection& l)
{
    json comps = json::array();
    const auto budget = l.budget();
    for (const auto& c : budget.components())
        comps.push_back({{"name", c.name}, {"db", c.loss_db}, {"count", c.count}, {"side", to_string(c.side)}});
    return {{"setup", "none"}, {"components", comps}};
}

/// Resolved scenario in the config schema; feeding it back reproduces the run.
inline json to_json(const Scenario& sc)
{
    json wiring = json::array();
    for (const auto& w : sc.topology.wiring()) wiring.push_back({w.up_subnet, w.down_subnet});
    json state = {{"convention", to_string(sc.state.convention)}};
    if (sc.state.name == StateName::custom) state["phases"] = sc.state.phases.phi;
    else state["name"] = to_string(sc.state.name);
    json source = {{"pair_rate_per_bsgu", sc.pair_rate_per_bsgu}, {"duration_s", sc.duration_s}};
    if (sc.seed) source["seed"] = *sc.seed;
    json j = {
        {"profile", sc.profile},
        {"topology",
         {{"subnets", sc.topology.subnet_count()},
          {"users_per_subnet", sc.topology.users_per_subnet()},
          {"wiring", wiring}}},
        {"state", state},
        {"source", source},
        {"detector",
         {{"efficiency", sc.detector.efficiency},
          {"dark_rate_hz", sc.detector.dark_rate_hz},
          {"jitter_sigma_ps", sc.detector.jitter_sigma_ps},
          {"dead_time_ps", sc.detector.dead_time_ps}}},
        {"loss", to_json(sc.loss)},
        {"coincidence", {{"offset_ps", sc.offset_ps}}},
        {"recorded_users", sc.recorded_users},
        {"qkd",
         {{"loss", to_json(sc.qkd.loss)},
          {"users", sc.qkd.users},
          {"reconciliation_efficiency", sc.qkd.secure.reconciliation_efficiency},
          {"finite_size_deduction", sc.qkd.secure.finite_size_deduction},
          {"finite_size", sc.qkd.finite_size},
          {"epsilon", sc.qkd.epsilon},
          {"entangled_duration_s", sc.qkd.entangled_duration_s},
          {"non_entangled_duration_s", sc.qkd.non_entangled_duration_s}}},
        {"calibration",
         {{"bsgu", sc.calibration.bsgu},
          {"users", {sc.calibration.user_a, sc.calibration.user_b}},
          {"phi0", sc.calibration.heater.phi0},
          {"alpha", sc.calibration.heater.alpha},
          {"v_max", sc.calibration.v_max},
          {"points", sc.calibration.points},
          {"integration_s", sc.calibration.integration_s},
          {"mode", detail::to_string(sc.calibration.mode)}}},
        {"output", {{"dir", sc.out_dir}, {"format", sc.format}, {"timetag_format", sc.timetag_format}}},
    };
    if (sc.frame) j["frame"] = {{"bin_width_ps", sc.frame->bin_width_ps}};
    if (sc.window_ps) j["coincidence"]["window_ps"] = *sc.window_ps;
    return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical (key-sorted) JSON form without the output section;
/// independent of config key order and of where results are written.
inline std::string scenario_hash(const Scenario& sc)
{
    auto j = to_json(sc);
    j.erase("output");
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fnv1a(j.dump());
    return os.str();
}

} // namespace cedn::cli
