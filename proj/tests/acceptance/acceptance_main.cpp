// One PASS/FAIL line per acceptance criterion, tab separated:
//   PASS <n> <title> <seconds> <details>
// Exit status is the number of failed criteria.

#include "cedn/cedn.hpp"
#include "cedn/cli/scenario.hpp"
#include "cedn/cli/commands.hpp"
#include "oracles/routing_oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace cedn;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream details;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            details << "[failed: " << what << "] ";
        }
    }
};

int failures = 0;

void criterion(int n, const std::string& title, double limit_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    }
    catch (const std::exception& e) {
        o.pass = false;
        o.details << "[exception: " << e.what() << "] ";
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0) o.check(s < limit_s, "runtime " + std::to_string(s) + " s over " + std::to_string(limit_s) + " s");
    failures += !o.pass;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2fs", s);
    std::cout << (o.pass ? "PASS" : "FAIL") << '\t' << n << '\t' << title << '\t' << buf << '\t' << o.details.str()
              << std::endl;
}

std::string fmt(double v, int digits = 4)
{
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

cli::Scenario default_scenario(StateName s, std::uint64_t seed)
{
    auto sc = cli::profile_scenario("paper-default");
    sc.seed = seed;
    sc.state = NetworkState::named(s, sc.topology);
    cli::resolve(sc);
    return sc;
}

TimetagStream poisson_stream(std::uint64_t seed, UserId u, double rate_hz, double duration_s)
{
    KeyedRng rng(seed, RngDomain::test, static_cast<std::uint64_t>(u));
    std::exponential_distribution<double> gap(rate_hz);
    TimetagStream s{u, duration_s, {}};
    for (double t = gap(rng); t < duration_s; t += gap(rng))
        s.events.push_back({static_cast<timestamp_ps>(t * ps_per_s), Origin::dark});
    return s;
}

} // namespace

int main()
{
    const auto topo = NetworkTopology::paper_default();
    const StateName states[] = {StateName::intra, StateName::inter, StateName::all};
    const auto suite_start = std::chrono::steady_clock::now();

    criterion(1, "link counts 84/192/276", 1.0, [&](Outcome& o) {
        const int expect[] = {84, 192, 276};
        for (int i = 0; i < 3; ++i) {
            const int n = link_counts(topo, NetworkState::named(states[i], topo));
            o.details << to_string(states[i]) << '=' << n << ' ';
            o.check(n == expect[i], std::string(to_string(states[i])));
        }
    });

    criterion(2, "routing matrix equals brute-force enumeration", 5.0, [&](Outcome& o) {
        std::vector<std::pair<int, int>> wiring;
        for (const auto& w : topo.wiring()) wiring.emplace_back(w.up_subnet, w.down_subnet);
        double worst = 0;
        auto compare = [&](const PhaseSettings& ph) {
            const auto m = pair_routing_matrix(topo, ph);
            const auto ref = oracle::enumerate(3, 8, wiring, ph.phi, false);
            for (UserId u = 0; u < 24; ++u)
                for (UserId v = u; v < 24; ++v) {
                    const auto it = ref.find({u, v});
                    worst = std::max(worst, std::abs(m(u, v) - (it == ref.end() ? 0.0 : it->second)));
                }
        };
        for (auto s : states) compare(NetworkState::named(s, topo).phases);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> phase(0, 2 * pi);
        for (int i = 0; i < 20; ++i) compare(PhaseSettings{{phase(rng), phase(rng), phase(rng)}});
        o.details << "max |diff| = " << worst << " over 3 named + 20 random phase triples";
        o.check(worst <= 1e-12, "entry mismatch");
    });

    criterion(3, "Monte Carlo coincidence matrix within 3 sigma of routing x throughput", 60.0, [&](Outcome& o) {
        // 1e6 pairs per state, lossless and noiseless, exact-time window.
        const double duration = 100.0, rate = 1e6 / (3 * duration);
        int beyond = 0, nonzero = 0, leaked = 0;
        double worst_z = 0;
        for (auto s : states) {
            GenerationScenario g;
            g.state = NetworkState::named(s, topo);
            g.source = {rate, duration, 1};
            const auto streams = generate_timetags(g);
            const auto m = coincidence_matrix(streams, {1, 0});
            const auto routing = pair_routing_matrix(topo, g.state);
            for (UserId u = 0; u < 24; ++u)
                for (UserId v = u + 1; v < 24; ++v) {
                    const double expect = 3 * rate * duration * routing(u, v);
                    const auto c = static_cast<double>(m.count(u, v));
                    if (expect > 0) {
                        ++nonzero;
                        const double z = std::abs(c - expect) / std::sqrt(expect);
                        worst_z = std::max(worst_z, z);
                        beyond += z > 3;
                    }
                    else leaked += c > 0;
                }
        }
        o.details << nonzero << " nonzero entries, " << beyond << " beyond 3 sigma (max z " << fmt(worst_z, 3)
                  << "), " << leaked << " zero-support entries with counts";
        o.check(beyond == 0, "entries beyond 3 sigma");
        o.check(leaked == 0, "counts on zero-support entries");
    });

    criterion(4, "rate ordering and ratios", 120.0, [&](Outcome& o) {
        double mean[3];
        for (int i = 0; i < 3; ++i) mean[i] = mean_active_link_probability(topo, NetworkState::named(states[i], topo));
        const double r_inter = mean[0] / mean[1], r_all = mean[0] / mean[2];
        o.details << "analytic intra:inter " << fmt(r_inter, 5) << ", intra:all " << fmt(r_all, 5) << "; ";
        o.check(std::abs(r_inter - 2.0) <= 1e-3, "intra:inter");
        o.check(std::abs(r_all - 3.067) <= 1e-3, "intra:all");
        const double ref_inter = 43.5 / 16.9, ref_all = 43.5 / 12.6;
        o.details << "measured " << fmt(ref_inter, 3) << " and " << fmt(ref_all, 3) << " vs +-35% bands; ";
        o.check(std::abs(ref_inter / r_inter - 1) <= 0.35, "measured intra:inter outside 35%");
        o.check(std::abs(ref_all / r_all - 1) <= 0.35, "measured intra:all outside 35%");

        double rate[3];
        for (int i = 0; i < 3; ++i) {
            auto sc = default_scenario(states[i], 1);
            sc.duration_s = 10.0;
            const auto streams = generate_timetags(sc.generation(1));
            const auto res = cli::analyse_coincidences(sc, streams, 0);
            rate[i] = res.mean_rate_hz;
            o.details << to_string(states[i]) << ' ' << fmt(res.mean_rate_hz) << "+-" << fmt(res.mean_error_hz, 2)
                      << " Hz ";
        }
        o.details << "(reference 43.5/16.9/12.6 Hz)";
        o.check(rate[0] > rate[1] && rate[1] > rate[2], "simulated ordering intra > inter > all");
    });

    criterion(5, "calibration round trip within 1%", 30.0, [&](Outcome& o) {
        auto sc = default_scenario(StateName::intra, 1);
        const auto& cal = sc.calibration;
        auto g = sc.generation(1);
        // Integration time giving ~1e5 counts at the split voltage.
        auto at_split = g;
        at_split.state = NetworkState::custom(g.state.phases);
        at_split.state.phases.phi[static_cast<std::size_t>(cal.bsgu)] = pi / 2;
        const double window = static_cast<double>(sc.window_for(StateName::intra).width_ps);
        const double peak_rate = expected_coincidence_rate(at_split, cal.user_a, cal.user_b, window);
        SweepSpec spec;
        spec.bsgu = cal.bsgu;
        spec.heater = cal.heater;
        spec.voltages = linspace(0.0, cal.v_max, static_cast<std::size_t>(cal.points));
        spec.integration_s = 1e5 / peak_rate;
        spec.window = {static_cast<timestamp_ps>(window), 0};
        spec.mode = SweepMode::poisson;
        const auto curve = simulate_sweep(g, cal.user_a, cal.user_b, spec);
        double peak = 0;
        for (const auto& p : curve.points) peak = std::max(peak, p.counts);
        const auto r = fit_calibration(curve);
        const double ea = std::abs(r.fit.alpha / cal.heater.alpha - 1), ep = std::abs(r.fit.phi0 / cal.heater.phi0 - 1);
        o.details << "peak " << fmt(peak, 6) << " counts, alpha " << fmt(r.fit.alpha, 6) << " (" << fmt(100 * ea, 2)
                  << "%), phi0 " << fmt(r.fit.phi0, 6) << " (" << fmt(100 * ep, 2) << "%)";
        o.check(peak >= 1000, "peak counts");
        o.check(ea <= 0.01, "alpha");
        o.check(ep <= 0.01, "phi0");
        o.check(r.v_split && r.v_bunch, "extrema inside the sweep");
        if (r.v_split && r.v_bunch) {
            auto off = [](double phi, double target) {
                double d = std::fmod(phi - target, pi);
                if (d < 0) d += pi;
                return std::min(d, pi - d);
            };
            const double ds = off(phase_from_voltage(r.fit.model(), *r.v_split), pi / 2);
            const double db = off(phase_from_voltage(r.fit.model(), *r.v_bunch), 0.0);
            o.details << "; v_split " << fmt(*r.v_split, 5) << " V, v_bunch " << fmt(*r.v_bunch, 5) << " V";
            o.check(ds < 1e-6 && db < 1e-6, "extremum phases");
        }
    });

    criterion(6, "what-if grating couplers 6 dB -> 1 dB gives x10", 1.0, [&](Outcome& o) {
        const auto budget = default_optical_budget(SetupKind::qkd).with(detector_component(default_detector_efficiency));
        const std::vector<LossModification> mods{{"grating_coupler", 1.0, std::nullopt}};
        const double m = what_if(budget, mods);
        o.details << "multiplier " << fmt(m, 6);
        o.check(std::abs(m - 10.0) <= 0.1, "multiplier");
    });

    criterion(7, "QKD secure-key pattern and state averages", 120.0, [&](Outcome& o) {
        const double reference[] = {1.98, 0.53, 0.32};
        double avg[3];
        for (int i = 0; i < 3; ++i) {
            const auto sc = default_scenario(states[i], 1);
            const auto streams = generate_timetags(sc.qkd_generation(1));
            const auto rep = cli::analyse_qkd(sc, streams);
            int positive = 0, wrong = 0;
            for (const auto& l : rep.links) {
                const bool pos = l.secure_rate_bps > 0;
                positive += pos;
                wrong += pos != l.entangled;
            }
            avg[i] = rep.mean_entangled_secure_rate();
            o.details << to_string(states[i]) << ": " << positive << '/' << rep.links.size() << " positive, mean "
                      << fmt(avg[i], 3) << " bps (reference " << reference[i] << "); ";
            o.check(rep.links.size() == 15, "15 links");
            o.check(wrong == 0, std::string(to_string(states[i])) + " pattern");
            o.check(std::abs(avg[i] / reference[i] - 1) <= 0.5, std::string(to_string(states[i])) + " average within 50%");
        }
        o.check(avg[0] > avg[1] && avg[1] > avg[2], "ordering");
    });

    criterion(8, "property suites", 60.0, [&](Outcome& o) {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> phase(0, 2 * pi);
        double worst_norm = 0;
        for (int i = 0; i < 200; ++i) {
            const auto m = pair_routing_matrix(topo, PhaseSettings{{phase(rng), phase(rng), phase(rng)}});
            worst_norm = std::max(worst_norm, std::abs(m.total() - 1));
        }
        o.check(worst_norm < 1e-12, "normalization");

        int window_violations = 0;
        std::uniform_int_distribution<timestamp_ps> t(0, 1'000'000), w(1, 3000);
        for (int i = 0; i < 200; ++i) {
            TimetagStream a{0, 1, {}}, b{1, 1, {}};
            for (int k = 0; k < 300; ++k) a.events.push_back({t(rng), Origin::signal});
            for (int k = 0; k < 300; ++k) b.events.push_back({t(rng), Origin::idler});
            detail::sort_events(a.events);
            detail::sort_events(b.events);
            const timestamp_ps w1 = w(rng);
            window_violations += count_coincidences(a, b, {w1, 0}).coincidences >
                                 count_coincidences(a, b, {w1 + w(rng), 0}).coincidences;
        }
        o.check(window_violations == 0, "window monotonicity");

        int sift_violations = 0;
        for (int i = 0; i < 200; ++i) {
            const timestamp_ps narrow = std::uniform_int_distribution<timestamp_ps>(20, 200)(rng);
            const timestamp_ps wide = narrow * std::uniform_int_distribution<int>(2, 4)(rng);
            std::uniform_int_distribution<timestamp_ps> pos(0, 12 * wide - 1), delta(-2 * narrow, 2 * narrow);
            TimetagStream a{0, 1, {}}, b{1, 1, {}};
            for (int k = 1; k <= 300; ++k) {
                const timestamp_ps x = 2 * k * 12 * wide + pos(rng);
                a.events.push_back({x, Origin::signal});
                b.events.push_back({x + delta(rng), Origin::idler});
            }
            detail::sort_events(b.events);
            sift_violations += sift(a, b, {narrow}).pairs.size() > sift(a, b, {wide}).pairs.size();
        }
        o.check(sift_violations == 0, "sifting monotonicity (nested bins)");

        double worst_order = 0;
        std::uniform_real_distribution<double> db(0, 10);
        for (int i = 0; i < 200; ++i) {
            std::vector<ComponentLoss> c;
            for (int k = 0; k < 8; ++k) c.push_back({"c" + std::to_string(k), db(rng), 1, static_cast<Side>(k % 3)});
            const double ref = link_transmittance(LinkBudget(c)).pair;
            std::shuffle(c.begin(), c.end(), rng);
            worst_order = std::max(worst_order, std::abs(link_transmittance(LinkBudget(c)).pair / ref - 1));
        }
        o.check(worst_order < 1e-12, "dB order independence");

        GenerationScenario g = default_scenario(StateName::all, 5).generation(5);
        g.source.duration_s = 0.05;
        const bool same = generate_timetags(g, 1) == generate_timetags(g, 4);
        o.check(same, "determinism under fixed seed");

        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
        o.details << "normalization " << worst_norm << ", window " << window_violations << ", sifting "
                  << sift_violations << ", order " << worst_order << ", determinism " << (same ? "ok" : "broken")
                  << "; acceptance run so far " << fmt(elapsed, 3) << " s";
        o.check(elapsed < 300, "suite runtime");
    });

    criterion(9, "accidental laws", 60.0, [&](Outcome& o) {
        GenerationScenario g;
        g.source = {0.0, 10.0, 9};
        g.detector = {0.6, 2e5, 0, 0};
        g.recorded_users = {0, 1};
        const auto streams = generate_timetags(g);
        const double r1 = static_cast<double>(streams[0].size()) / 10, r2 = static_cast<double>(streams[1].size()) / 10;
        const double expect = r1 * r2 * 1000e-12 * 10;
        const auto c = static_cast<double>(count_coincidences(streams[0], streams[1], {1000, 0}).coincidences);
        o.details << "coincidences " << c << " vs r1 r2 tau T = " << fmt(expect, 5) << "; ";
        o.check(std::abs(c - expect) <= 3 * std::sqrt(expect), "r1 r2 tau");

        const auto a = poisson_stream(9, 0, 5e7, 0.02), b = poisson_stream(9, 1, 5e7, 0.02);
        const auto s = sift(a, b, {100});
        const auto k = raw_key(s.pairs);
        const auto q = qber(k.a, k.b);
        const double sigma = std::sqrt(0.75 * 0.25 / static_cast<double>(q.symbols));
        o.details << "symbol error " << fmt(q.symbol_error_rate, 5) << " over " << q.symbols << " sifted symbols";
        o.check(std::abs(q.symbol_error_rate - 0.75) <= 3 * sigma, "symbol error 0.75");
    });

    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
    std::cout << "acceptance: " << (9 - failures) << "/9 passed in " << fmt(total, 3) << " s" << std::endl;
    return failures;
}
