#pragma once

// Analytic model of the c-EDN chip: biphoton state generation units (BSGUs)
// feeding passive beam splitting units (PBSUs), one PBSU per subnet.
//
// A BSGU is an MZI whose relative phase steers each generated pair either to
// one output port (bunch) or to both ports (split). Every port feeds one
// PBSU, which scatters a photon uniformly over the users of its subnet.
// Pairs from different BSGUs never interfere (mutually incoherent pumps).

#include "cedn/errors.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cedn {

using UserId = int;

enum class Port : std::uint8_t { up, down };
enum class LinkClass : std::uint8_t { intra, inter };
enum class StateName : std::uint8_t { intra, inter, all, custom };

/// Which trigonometric branch carries the bunch amplitude.
///
/// `equation`: amp_bunch = cos(phi), so bunch at phi = 0 and split at pi/2.
/// `results`:  amp_bunch = sin(phi), so bunch at phi = pi/2 and split at 0.
enum class PhaseConvention : std::uint8_t { equation, results };

inline constexpr PhaseConvention default_phase_convention = PhaseConvention::equation;

inline std::string_view to_string(LinkClass c) { return c == LinkClass::intra ? "intra" : "inter"; }

inline std::string_view to_string(StateName s)
{
    switch (s) {
    case StateName::intra: return "intra";
    case StateName::inter: return "inter";
    case StateName::all: return "all";
    case StateName::custom: return "custom";
    }
    return "custom";
}

inline StateName parse_state_name(std::string_view s)
{
    if (s == "intra") return StateName::intra;
    if (s == "inter") return StateName::inter;
    if (s == "all") return StateName::all;
    if (s == "custom") return StateName::custom;
    throw invalid_input("unknown network state '" + std::string(s) + "' (expected intra|inter|all|custom)");
}

inline PhaseConvention parse_phase_convention(std::string_view s)
{
    if (s == "equation") return PhaseConvention::equation;
    if (s == "results") return PhaseConvention::results;
    throw invalid_input("unknown phase convention '" + std::string(s) + "' (expected equation|results)");
}

inline std::string_view to_string(PhaseConvention c) { return c == PhaseConvention::equation ? "equation" : "results"; }

struct BsguWiring {
    int up_subnet = 0;
    int down_subnet = 0;

    friend bool operator==(const BsguWiring&, const BsguWiring&) = default;
};

class NetworkTopology {
public:
    NetworkTopology(int subnet_count, int users_per_subnet, std::vector<BsguWiring> wiring)
        : subnets_(subnet_count), users_per_subnet_(users_per_subnet), wiring_(std::move(wiring))
    {
        validate();
    }

    /// BSGU k: up port -> subnet k, down port -> subnet (k+1) mod n.
    static NetworkTopology ring(int subnet_count = 3, int users_per_subnet = 8)
    {
        std::vector<BsguWiring> w;
        for (int k = 0; k < subnet_count; ++k)
            w.push_back({k, (k + 1) % subnet_count});
        return NetworkTopology(subnet_count, users_per_subnet, std::move(w));
    }

    static NetworkTopology paper_default() { return ring(3, 8); }

    int subnet_count() const noexcept { return subnets_; }
    int users_per_subnet() const noexcept { return users_per_subnet_; }
    int bsgu_count() const noexcept { return static_cast<int>(wiring_.size()); }
    int user_count() const noexcept { return subnets_ * users_per_subnet_; }
    const std::vector<BsguWiring>& wiring() const noexcept { return wiring_; }

    bool valid_user(UserId u) const noexcept { return u >= 0 && u < user_count(); }

    int subnet_of(UserId u) const
    {
        if (!valid_user(u))
            throw invalid_input("user id " + std::to_string(u) + " out of range [0, " + std::to_string(user_count()) + ")");
        return u / users_per_subnet_;
    }

    UserId first_user(int subnet) const noexcept { return subnet * users_per_subnet_; }

    int port_subnet(int bsgu, Port p) const
    {
        const auto& w = wiring_.at(static_cast<std::size_t>(bsgu));
        return p == Port::up ? w.up_subnet : w.down_subnet;
    }

    friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;

private:
    void validate() const
    {
        if (subnets_ < 2)
            throw topology_error("need at least 2 subnets, got " + std::to_string(subnets_));
        if (users_per_subnet_ < 1)
            throw topology_error("need at least 1 user per subnet, got " + std::to_string(users_per_subnet_));
        if (wiring_.empty())
            throw topology_error("no BSGUs wired");

        std::vector<int> ports_per_subnet(static_cast<std::size_t>(subnets_), 0);
        std::set<std::pair<int, int>> pairs;
        for (std::size_t k = 0; k < wiring_.size(); ++k) {
            const auto [a, b] = wiring_[k];
            const auto tag = "BSGU " + std::to_string(k) + ": ";
            if (a < 0 || a >= subnets_ || b < 0 || b >= subnets_)
                throw topology_error(tag + "port wired to a nonexistent subnet");
            if (a == b)
                throw topology_error(tag + "both ports wired to subnet " + std::to_string(a));
            if (!pairs.insert(std::minmax(a, b)).second)
                throw topology_error(tag + "subnet pair (" + std::to_string(std::min(a, b)) + "," +
                                     std::to_string(std::max(a, b)) + ") already wired by another BSGU");
            ++ports_per_subnet[static_cast<std::size_t>(a)];
            ++ports_per_subnet[static_cast<std::size_t>(b)];
        }
        for (int s = 0; s < subnets_; ++s)
            if (ports_per_subnet[static_cast<std::size_t>(s)] == 0)
                throw topology_error("subnet " + std::to_string(s) + " receives no BSGU port");
    }

    int subnets_;
    int users_per_subnet_;
    std::vector<BsguWiring> wiring_;
};

struct PhaseSettings {
    std::vector<double> phi; // radians, one per BSGU

    void validate_for(const NetworkTopology& topo) const
    {
        if (static_cast<int>(phi.size()) != topo.bsgu_count())
            throw invalid_input("expected " + std::to_string(topo.bsgu_count()) + " phases, got " +
                                std::to_string(phi.size()));
        for (double p : phi)
            if (!std::isfinite(p))
                throw invalid_input("non-finite BSGU phase");
    }

    /// Phases reduced to [0, pi); routing probabilities are pi-periodic.
    PhaseSettings canonical() const
    {
        PhaseSettings out{phi};
        for (auto& p : out.phi) {
            p = std::fmod(p, std::numbers::pi);
            if (p < 0) p += std::numbers::pi;
        }
        return out;
    }
};

struct BsguOutput {
    double amp_bunch = 1.0;
    double amp_split = 0.0;
    double p_bunch = 1.0;
    double p_split = 0.0;
};

/// Output of one BSGU at relative phase `phi`.
///
/// Branch probabilities smaller than 1e-20 are flushed to zero so that the
/// named states hit exact zeros (cos(pi/2) is 6e-17 in binary64); p_split is
/// formed as 1 - p_bunch so the pair sums to exactly 1.
inline BsguOutput bsgu_output(double phi, PhaseConvention conv = default_phase_convention)
{
    if (!std::isfinite(phi))
        throw invalid_input("BSGU phase must be finite");
    constexpr double flush = 1e-20;

    double c = std::cos(phi);
    double s = std::sin(phi);
    if (conv == PhaseConvention::results) std::swap(c, s);

    BsguOutput out;
    out.amp_bunch = c;
    out.amp_split = s;
    out.p_bunch = c * c;
    if (out.p_bunch < flush) {
        out.p_bunch = 0.0;
        out.amp_bunch = 0.0;
    }
    else if (s * s < flush) {
        out.p_bunch = 1.0;
        out.amp_split = 0.0;
    }
    out.p_split = 1.0 - out.p_bunch;
    return out;
}

/// Phase realising a named state. Custom states carry explicit phases.
inline double phase_for_state(StateName s, PhaseConvention conv = default_phase_convention)
{
    constexpr double half_pi = std::numbers::pi / 2;
    switch (s) {
    case StateName::intra: return conv == PhaseConvention::equation ? 0.0 : half_pi;
    case StateName::inter: return conv == PhaseConvention::equation ? half_pi : 0.0;
    case StateName::all: return std::numbers::pi / 4;
    case StateName::custom: break;
    }
    throw invalid_input("custom state has no canonical phase");
}

struct NetworkState {
    StateName name = StateName::custom;
    PhaseSettings phases;
    PhaseConvention convention = default_phase_convention;

    static NetworkState named(StateName name, const NetworkTopology& topo,
                              PhaseConvention conv = default_phase_convention)
    {
        const double phi = phase_for_state(name, conv);
        return {name, PhaseSettings{std::vector<double>(static_cast<std::size_t>(topo.bsgu_count()), phi)}, conv};
    }

    static NetworkState custom(PhaseSettings phases, PhaseConvention conv = default_phase_convention)
    {
        return {StateName::custom, std::move(phases), conv};
    }
};

/// Symmetric user x user matrix of per-generated-pair probabilities.
/// Off-diagonal (u,v): signal on u and idler on v, or the reverse.
/// Diagonal (u,u): both photons on u.
class RoutingMatrix {
public:
    explicit RoutingMatrix(int users) : n_(users), p_(static_cast<std::size_t>(users * users), 0.0) {}

    int user_count() const noexcept { return n_; }
    double operator()(UserId u, UserId v) const { return p_[index(u, v)]; }

    void set(UserId u, UserId v, double value)
    {
        p_[index(u, v)] = value;
        p_[index(v, u)] = value;
    }

    /// Sum over unordered pairs plus the diagonal; 1 for a valid model.
    double total() const
    {
        double t = 0;
        for (int u = 0; u < n_; ++u)
            for (int v = u; v < n_; ++v)
                t += (*this)(u, v);
        return t;
    }

private:
    std::size_t index(UserId u, UserId v) const
    {
        if (u < 0 || v < 0 || u >= n_ || v >= n_)
            throw invalid_input("routing matrix index out of range");
        return static_cast<std::size_t>(u * n_ + v);
    }

    int n_;
    std::vector<double> p_;
};

/// Exact routing probabilities for one generated pair, the emitting BSGU
/// chosen uniformly.
///
/// Evaluated per subnet class: each BSGU deposits p_bunch/2 of "both photons
/// in subnet s" weight on each of its two subnets and p_split of "one photon
/// in each" weight on its subnet pair; a PBSU lands each photon on one of its
/// users with probability 1/users_per_subnet.
inline RoutingMatrix pair_routing_matrix(const NetworkTopology& topo, const PhaseSettings& phases,
                                         PhaseConvention conv = default_phase_convention)
{
    phases.validate_for(topo);
    const int s_count = topo.subnet_count();
    const auto bsgus = static_cast<double>(topo.bsgu_count());

    std::vector<double> intra(static_cast<std::size_t>(s_count), 0.0);
    std::vector<double> inter(static_cast<std::size_t>(s_count * s_count), 0.0);
    for (int k = 0; k < topo.bsgu_count(); ++k) {
        const auto out = bsgu_output(phases.phi[static_cast<std::size_t>(k)], conv);
        const auto [a, b] = topo.wiring()[static_cast<std::size_t>(k)];
        intra[static_cast<std::size_t>(a)] += out.p_bunch / 2 / bsgus;
        intra[static_cast<std::size_t>(b)] += out.p_bunch / 2 / bsgus;
        inter[static_cast<std::size_t>(a * s_count + b)] += out.p_split / bsgus;
        inter[static_cast<std::size_t>(b * s_count + a)] += out.p_split / bsgus;
    }

    const double per_landing = 1.0 / (static_cast<double>(topo.users_per_subnet()) * topo.users_per_subnet());
    RoutingMatrix m(topo.user_count());
    for (UserId u = 0; u < topo.user_count(); ++u) {
        const int su = topo.subnet_of(u);
        m.set(u, u, intra[static_cast<std::size_t>(su)] * per_landing);
        for (UserId v = u + 1; v < topo.user_count(); ++v) {
            const int sv = topo.subnet_of(v);
            const double p = su == sv ? 2 * intra[static_cast<std::size_t>(su)] * per_landing
                                      : inter[static_cast<std::size_t>(su * s_count + sv)] * per_landing;
            m.set(u, v, p);
        }
    }
    return m;
}

inline RoutingMatrix pair_routing_matrix(const NetworkTopology& topo, const NetworkState& state)
{
    return pair_routing_matrix(topo, state.phases, state.convention);
}

inline LinkClass classify_link(const NetworkTopology& topo, UserId u, UserId v)
{
    if (u == v)
        throw invalid_input("a link needs two distinct users, got " + std::to_string(u) + " twice");
    return topo.subnet_of(u) == topo.subnet_of(v) ? LinkClass::intra : LinkClass::inter;
}

/// Unordered user pairs with strictly positive routing probability.
inline int link_counts(const NetworkTopology& topo, const NetworkState& state)
{
    const auto m = pair_routing_matrix(topo, state);
    int n = 0;
    for (UserId u = 0; u < topo.user_count(); ++u)
        for (UserId v = u + 1; v < topo.user_count(); ++v)
            if (m(u, v) > 0) ++n;
    return n;
}

/// Mean routing probability over the links that carry entanglement.
inline double mean_active_link_probability(const NetworkTopology& topo, const NetworkState& state)
{
    const auto m = pair_routing_matrix(topo, state);
    double sum = 0;
    int n = 0;
    for (UserId u = 0; u < topo.user_count(); ++u)
        for (UserId v = u + 1; v < topo.user_count(); ++v)
            if (m(u, v) > 0) {
                sum += m(u, v);
                ++n;
            }
    return n ? sum / n : 0.0;
}

/// CSV with a header row and a leading user column, 12 significant digits.
inline void write_routing_csv(std::ostream& os, const RoutingMatrix& m)
{
    os << "user";
    for (int v = 0; v < m.user_count(); ++v) os << ',' << v;
    os << '\n' << std::setprecision(12);
    for (int u = 0; u < m.user_count(); ++u) {
        os << u;
        for (int v = 0; v < m.user_count(); ++v) os << ',' << m(u, v);
        os << '\n';
    }
}

} // namespace cedn
