#pragma once

// Monte Carlo timetag generation for the c-EDN, plus the closed-form
// expectations (singles, coincidences) that the simulation converges to.

#include "cedn/errors.hpp"
#include "cedn/loss_budget.hpp"
#include "cedn/random.hpp"
#include "cedn/timetag.hpp"
#include "cedn/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <utility>
#include <vector>

namespace cedn {

struct SourceParams {
    double pair_rate_per_bsgu = 0.0; // generated pairs per second per BSGU
    double duration_s = 1.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!std::isfinite(pair_rate_per_bsgu) || pair_rate_per_bsgu < 0)
            throw config_error("pair rate must be finite and >= 0");
        if (!std::isfinite(duration_s) || duration_s <= 0)
            throw config_error("duration must be > 0 s");
    }
};

struct DetectorParams {
    double efficiency = 1.0;
    double dark_rate_hz = 0.0;
    double jitter_sigma_ps = 0.0;
    timestamp_ps dead_time_ps = 0;

    void validate() const
    {
        if (!(efficiency >= 0 && efficiency <= 1))
            throw config_error("detector efficiency must lie in [0, 1]");
        if (!std::isfinite(dark_rate_hz) || dark_rate_hz < 0)
            throw config_error("dark rate must be finite and >= 0");
        if (!std::isfinite(jitter_sigma_ps) || jitter_sigma_ps < 0)
            throw config_error("jitter sigma must be finite and >= 0");
        if (dead_time_ps < 0)
            throw config_error("dead time must be >= 0");
    }
};

/// Optical transmittance (detector excluded) of each user's signal and idler paths.
class TransmittanceTable {
public:
    TransmittanceTable() = default;

    static TransmittanceTable uniform(int users, double signal, double idler)
    {
        TransmittanceTable t;
        t.t_.assign(static_cast<std::size_t>(users), {signal, idler});
        return t;
    }

    static TransmittanceTable uniform(int users, const LinkTransmittance& lt)
    {
        return uniform(users, lt.signal, lt.idler);
    }

    static TransmittanceTable lossless(int users) { return uniform(users, 1.0, 1.0); }

    int user_count() const noexcept { return static_cast<int>(t_.size()); }

    double at(UserId u, Origin photon) const
    {
        return t_.at(static_cast<std::size_t>(u))[photon == Origin::signal ? 0 : 1];
    }

    void set(UserId u, double signal, double idler) { t_.at(static_cast<std::size_t>(u)) = {signal, idler}; }

    void validate(int users) const
    {
        if (user_count() != users)
            throw config_error("transmittance table has " + std::to_string(user_count()) + " users, topology has " +
                               std::to_string(users));
        for (const auto& [s, i] : t_)
            if (!(s >= 0 && s <= 1 && i >= 0 && i <= 1))
                throw config_error("transmittance outside [0, 1]");
    }

private:
    std::vector<std::array<double, 2>> t_;
};

struct GenerationScenario {
    NetworkTopology topology = NetworkTopology::paper_default();
    NetworkState state = NetworkState::named(StateName::intra, NetworkTopology::paper_default());
    SourceParams source;
    DetectorParams detector;
    TransmittanceTable transmittance = TransmittanceTable::lossless(24);
    std::vector<UserId> recorded_users; // empty = every user has a detector

    void validate() const
    {
        state.phases.validate_for(topology);
        source.validate();
        detector.validate();
        transmittance.validate(topology.user_count());
        for (UserId u : recorded_users)
            if (!topology.valid_user(u))
                throw config_error("recorded user " + std::to_string(u) + " does not exist");
    }

    std::vector<bool> recorded_mask() const
    {
        std::vector<bool> m(static_cast<std::size_t>(topology.user_count()), recorded_users.empty());
        for (UserId u : recorded_users) m[static_cast<std::size_t>(u)] = true;
        return m;
    }
};

struct PairOutcome {
    UserId signal_user = 0;
    UserId idler_user = 0;
};

/// Landing users of one pair emitted by `bsgu`.
template <class Rng>
PairOutcome sample_pair_outcome(int bsgu, const BsguOutput& out, const NetworkTopology& topo, Rng& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> landing(0, topo.users_per_subnet() - 1);
    const bool bunch = unit(rng) < out.p_bunch;
    const bool coin = unit(rng) < 0.5;
    int s_sub, i_sub;
    if (bunch) {
        s_sub = i_sub = topo.port_subnet(bsgu, coin ? Port::up : Port::down);
    }
    else {
        s_sub = topo.port_subnet(bsgu, coin ? Port::up : Port::down);
        i_sub = topo.port_subnet(bsgu, coin ? Port::down : Port::up);
    }
    PairOutcome o;
    o.signal_user = topo.first_user(s_sub) + landing(rng);
    o.idler_user = topo.first_user(i_sub) + landing(rng);
    return o;
}

namespace detail {

inline constexpr timestamp_ps generation_block_ps = 10'000'000'000; // 10 ms

struct Detection {
    UserId user;
    Event event;
};

inline unsigned resolve_workers(unsigned workers)
{
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    return workers;
}

/// Runs fn(i) for i in [0, n) over `workers` threads, contiguous chunks.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn)
{
    workers = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
}

inline void sort_events(std::vector<Event>& ev)
{
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
        if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
        return a.origin < b.origin;
    });
}

inline void apply_dead_time(std::vector<Event>& ev, timestamp_ps dead)
{
    if (dead <= 0 || ev.empty()) return;
    std::size_t kept = 1;
    timestamp_ps last = ev.front().time_ps;
    for (std::size_t i = 1; i < ev.size(); ++i)
        if (ev[i].time_ps - last >= dead) {
            last = ev[i].time_ps;
            ev[kept++] = ev[i];
        }
    ev.resize(kept);
}

} // namespace detail

/// Simulated detections for every user of the topology (unrecorded users get
/// empty streams).
///
/// Pairs are generated per BSGU as a Poisson process. Each photon survives
/// with its user's transmittance times the detector efficiency; this is done
/// in two stages (thin by the best transmittance before routing, then accept
/// by the ratio) so only pairs with a chance of detection are materialised.
/// Survivors get independent Gaussian jitter about the pair epoch. Dark counts
/// are uniform per detector; dead time is applied last.
///
/// Work is split into (BSGU, 10 ms block) items, each with its own keyed
/// random stream, so the output is independent of `workers`.
inline std::vector<TimetagStream> generate_timetags(const GenerationScenario& sc, unsigned workers = 0)
{
    sc.validate();
    const auto& topo = sc.topology;
    const int users = topo.user_count();
    const auto recorded = sc.recorded_mask();
    const double eta = sc.detector.efficiency;
    const timestamp_ps duration_ps = static_cast<timestamp_ps>(std::llround(sc.source.duration_s * ps_per_s));

    // First-stage survival: best detection probability over recorded users.
    double t_sig = 0, t_idl = 0;
    for (UserId u = 0; u < users; ++u)
        if (recorded[static_cast<std::size_t>(u)]) {
            t_sig = std::max(t_sig, sc.transmittance.at(u, Origin::signal) * eta);
            t_idl = std::max(t_idl, sc.transmittance.at(u, Origin::idler) * eta);
        }
    const double p_any = 1.0 - (1.0 - t_sig) * (1.0 - t_idl);
    const double p_sig_only = t_sig * (1.0 - t_idl) / (p_any > 0 ? p_any : 1.0);
    const double p_idl_only = (1.0 - t_sig) * t_idl / (p_any > 0 ? p_any : 1.0);
    const double candidate_rate = sc.source.pair_rate_per_bsgu * p_any;

    std::vector<BsguOutput> outputs;
    for (double phi : sc.state.phases.phi) outputs.push_back(bsgu_output(phi, sc.state.convention));

    const auto blocks = static_cast<std::size_t>((duration_ps + detail::generation_block_ps - 1) /
                                                 detail::generation_block_ps);
    const std::size_t items = blocks * static_cast<std::size_t>(topo.bsgu_count());
    std::vector<std::vector<detail::Detection>> per_item(items);

    const double sigma = sc.detector.jitter_sigma_ps;
    auto run_item = [&](std::size_t item) {
        const int bsgu = static_cast<int>(item / blocks);
        const std::size_t block = item % blocks;
        const timestamp_ps start = static_cast<timestamp_ps>(block) * detail::generation_block_ps;
        const timestamp_ps len = std::min(detail::generation_block_ps, duration_ps - start);
        const double mean = candidate_rate * static_cast<double>(len) / ps_per_s;
        if (!(mean > 0)) return;

        KeyedRng rng(sc.source.seed, RngDomain::pairs, static_cast<std::uint64_t>(bsgu), block);
        std::poisson_distribution<long long> count_dist(mean);
        std::normal_distribution<double> jitter(0.0, sigma > 0 ? sigma : 1.0);
        const long long n = count_dist(rng);
        auto& out = per_item[item];
        for (long long i = 0; i < n; ++i) {
            const double epoch = static_cast<double>(start) + rng.uniform() * static_cast<double>(len);
            const double which = rng.uniform();
            const bool sig_alive = which >= p_idl_only;
            const bool idl_alive = which < p_idl_only || which >= p_idl_only + p_sig_only;
            const auto landing = sample_pair_outcome(bsgu, outputs[static_cast<std::size_t>(bsgu)], topo, rng);

            auto emit = [&](bool alive, UserId user, Origin photon, double t_max) {
                const double accept = rng.uniform();
                const double dj = sigma > 0 ? jitter(rng) : 0.0;
                if (!alive || !recorded[static_cast<std::size_t>(user)]) return;
                if (accept * t_max >= sc.transmittance.at(user, photon) * eta) return;
                const auto t = static_cast<timestamp_ps>(std::llround(epoch + dj));
                if (t < 0 || t > duration_ps) return;
                out.push_back({user, {t, photon}});
            };
            emit(sig_alive, landing.signal_user, Origin::signal, t_sig);
            emit(idl_alive, landing.idler_user, Origin::idler, t_idl);
        }
    };
    detail::parallel_for(items, workers, run_item);

    std::vector<TimetagStream> streams;
    for (UserId u = 0; u < users; ++u) streams.push_back({u, sc.source.duration_s, {}});
    for (const auto& item : per_item)
        for (const auto& d : item) streams[static_cast<std::size_t>(d.user)].events.push_back(d.event);

    auto finish_user = [&](std::size_t u) {
        auto& ev = streams[u].events;
        if (recorded[u] && sc.detector.dark_rate_hz > 0) {
            KeyedRng rng(sc.source.seed, RngDomain::dark, u);
            std::poisson_distribution<long long> count_dist(sc.detector.dark_rate_hz * sc.source.duration_s);
            const long long n = count_dist(rng);
            std::uniform_int_distribution<timestamp_ps> when(0, duration_ps);
            for (long long i = 0; i < n; ++i) ev.push_back({when(rng), Origin::dark});
        }
        detail::sort_events(ev);
        detail::apply_dead_time(ev, sc.detector.dead_time_ps);
    };
    detail::parallel_for(streams.size(), workers, finish_user);
    return streams;
}

// ---- closed-form expectations ----------------------------------------------

/// Probability that a single photon (signal or idler, by symmetry equal) of a
/// generated pair lands on `u`.
inline double photon_arrival_probability(const RoutingMatrix& m, UserId u)
{
    double p = 2 * m(u, u);
    for (UserId v = 0; v < m.user_count(); ++v)
        if (v != u) p += m(u, v);
    return p / 2;
}

/// Expected detected singles rate of user `u` in Hz.
inline double expected_singles_rate(const GenerationScenario& sc, UserId u)
{
    const auto m = pair_routing_matrix(sc.topology, sc.state);
    const double pairs = sc.source.pair_rate_per_bsgu * sc.topology.bsgu_count();
    const double p = photon_arrival_probability(m, u);
    return pairs * p * (sc.transmittance.at(u, Origin::signal) + sc.transmittance.at(u, Origin::idler)) *
               sc.detector.efficiency +
           sc.detector.dark_rate_hz;
}

/// Fraction of true coincidences whose detection time difference lies in a
/// window of `width_ps` centred on zero, for independent Gaussian jitter.
inline double jitter_capture_fraction(double width_ps, double jitter_sigma_ps)
{
    if (jitter_sigma_ps <= 0) return 1.0;
    return std::erf(width_ps / (4.0 * jitter_sigma_ps));
}

/// Expected rate (Hz) of pairs with both photons detected on users u and v,
/// before any timing window.
inline double expected_true_coincidence_rate(const GenerationScenario& sc, const RoutingMatrix& m, UserId u, UserId v)
{
    const double pairs = sc.source.pair_rate_per_bsgu * sc.topology.bsgu_count();
    const double eta2 = sc.detector.efficiency * sc.detector.efficiency;
    const double t = 0.5 * (sc.transmittance.at(u, Origin::signal) * sc.transmittance.at(v, Origin::idler) +
                            sc.transmittance.at(u, Origin::idler) * sc.transmittance.at(v, Origin::signal));
    return pairs * m(u, v) * eta2 * t;
}

/// Expected windowed coincidence rate (true + accidental) between u and v.
inline double expected_coincidence_rate(const GenerationScenario& sc, UserId u, UserId v, double window_ps)
{
    const auto m = pair_routing_matrix(sc.topology, sc.state);
    const double truth = expected_true_coincidence_rate(sc, m, u, v) *
                         jitter_capture_fraction(window_ps, sc.detector.jitter_sigma_ps);
    const double acc = expected_singles_rate(sc, u) * expected_singles_rate(sc, v) * window_ps / ps_per_s;
    return truth + acc;
}

/// Pair rate per BSGU at which the mean windowed coincidence rate over the
/// links the state entangles equals `target_hz`. Uses uniform transmittance
/// (that of user 0), so accidentals are the same on every link.
inline double pair_rate_for_link_rate(GenerationScenario sc, double target_hz, double window_ps)
{
    if (!(target_hz > 0)) throw invalid_input("target link rate must be > 0");
    sc.source.pair_rate_per_bsgu = 1.0;
    sc.validate();
    const auto m = pair_routing_matrix(sc.topology, sc.state);
    double sum = 0;
    int links = 0;
    for (UserId u = 0; u < sc.topology.user_count(); ++u)
        for (UserId v = u + 1; v < sc.topology.user_count(); ++v)
            if (m(u, v) > 0) {
                sum += expected_true_coincidence_rate(sc, m, u, v);
                ++links;
            }
    if (links == 0) throw config_error("state entangles no links");
    // rate(R) = a R + tau (d + s R)^2, solved for R > 0.
    const double a = sum / links * jitter_capture_fraction(window_ps, sc.detector.jitter_sigma_ps);
    const double d = sc.detector.dark_rate_hz;
    const double s = expected_singles_rate(sc, 0) - d;
    const double tau = window_ps / ps_per_s;
    const double qa = tau * s * s, qb = a + 2 * tau * d * s, qc = tau * d * d - target_hz;
    if (qc >= 0) throw config_error("dark-count accidentals alone exceed the target link rate");
    if (qa == 0) return -qc / qb;
    return (-qb + std::sqrt(qb * qb - 4 * qa * qc)) / (2 * qa);
}

} // namespace cedn
