#include "cedn/topology.hpp"
#include "oracles/routing_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace cedn;

namespace {

const NetworkTopology topo = NetworkTopology::paper_default();

std::vector<std::pair<int, int>> oracle_wiring(const NetworkTopology& t)
{
    std::vector<std::pair<int, int>> w;
    for (const auto& b : t.wiring()) w.emplace_back(b.up_subnet, b.down_subnet);
    return w;
}

void expect_matches_oracle(const NetworkTopology& t, const PhaseSettings& ph, PhaseConvention conv)
{
    const auto m = pair_routing_matrix(t, ph, conv);
    const auto o =
        oracle::enumerate(t.subnet_count(), t.users_per_subnet(), oracle_wiring(t), ph.phi, conv == PhaseConvention::results);
    for (UserId u = 0; u < t.user_count(); ++u)
        for (UserId v = u; v < t.user_count(); ++v) {
            const auto it = o.find({u, v});
            const double want = it == o.end() ? 0.0 : it->second;
            ASSERT_NEAR(m(u, v), want, 1e-12) << "entry " << u << "," << v;
            ASSERT_EQ(m(u, v), m(v, u));
        }
}

} // namespace

TEST(BsguOutput, NamedPhases)
{
    auto a = bsgu_output(0.0);
    EXPECT_EQ(a.p_bunch, 1.0);
    EXPECT_EQ(a.p_split, 0.0);
    auto b = bsgu_output(std::numbers::pi / 2);
    EXPECT_EQ(b.p_bunch, 0.0);
    EXPECT_EQ(b.p_split, 1.0);
    auto c = bsgu_output(std::numbers::pi / 4);
    EXPECT_NEAR(c.p_bunch, 0.5, 1e-15);
    EXPECT_NEAR(c.p_split, 0.5, 1e-15);
}

TEST(BsguOutput, AmplitudesSquareToProbabilities)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> phi(-10, 10);
    for (int i = 0; i < 1000; ++i) {
        const double p = phi(rng);
        const auto o = bsgu_output(p);
        EXPECT_EQ(o.p_bunch + o.p_split, 1.0);
        EXPECT_NEAR(o.amp_bunch, std::cos(p), 1e-15);
        EXPECT_NEAR(o.amp_split, std::sin(p), 1e-15);
        EXPECT_NEAR(o.p_bunch, o.amp_bunch * o.amp_bunch, 1e-15);
        EXPECT_NEAR(o.p_split, o.amp_split * o.amp_split, 1e-15);
    }
}

TEST(BsguOutput, ResultsConventionSwapsBranches)
{
    EXPECT_EQ(bsgu_output(0.0, PhaseConvention::results).p_split, 1.0);
    EXPECT_EQ(bsgu_output(std::numbers::pi / 2, PhaseConvention::results).p_bunch, 1.0);
    for (auto s : {StateName::intra, StateName::inter, StateName::all})
        for (auto conv : {PhaseConvention::equation, PhaseConvention::results})
            EXPECT_EQ(link_counts(topo, NetworkState::named(s, topo, conv)),
                      link_counts(topo, NetworkState::named(s, topo)));
}

TEST(BsguOutput, NonFiniteRejected)
{
    EXPECT_THROW(bsgu_output(std::numeric_limits<double>::quiet_NaN()), invalid_input);
    EXPECT_THROW(bsgu_output(std::numeric_limits<double>::infinity()), invalid_input);
}

TEST(Topology, RingWiring)
{
    ASSERT_EQ(topo.bsgu_count(), 3);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(topo.port_subnet(k, Port::up), k);
        EXPECT_EQ(topo.port_subnet(k, Port::down), (k + 1) % 3);
    }
    // Every subnet gets exactly two ports; every subnet pair is covered once.
    std::vector<int> ports(3, 0);
    std::set<std::pair<int, int>> pairs;
    for (const auto& w : topo.wiring()) {
        ++ports[static_cast<std::size_t>(w.up_subnet)];
        ++ports[static_cast<std::size_t>(w.down_subnet)];
        pairs.insert({std::min(w.up_subnet, w.down_subnet), std::max(w.up_subnet, w.down_subnet)});
    }
    EXPECT_EQ(ports, (std::vector<int>{2, 2, 2}));
    EXPECT_EQ(pairs.size(), 3u);
}

TEST(Topology, InvalidWiringRejected)
{
    EXPECT_THROW(NetworkTopology(3, 8, {{0, 0}, {1, 2}, {2, 0}}), topology_error);
    EXPECT_THROW(NetworkTopology(3, 8, {{0, 1}, {1, 0}, {2, 0}}), topology_error);
    EXPECT_THROW(NetworkTopology(3, 8, {{0, 1}, {1, 3}, {2, 0}}), topology_error);
    EXPECT_THROW(NetworkTopology(3, 8, {{0, 1}}), topology_error);
    EXPECT_THROW(NetworkTopology(1, 8, {}), topology_error);
}

TEST(Topology, ClassifyLink)
{
    EXPECT_EQ(classify_link(topo, 0, 7), LinkClass::intra);
    EXPECT_EQ(classify_link(topo, 0, 8), LinkClass::inter);
    EXPECT_EQ(classify_link(topo, 23, 16), LinkClass::intra);
    EXPECT_THROW(classify_link(topo, 5, 5), invalid_input);
    EXPECT_THROW(classify_link(topo, 0, 24), invalid_input);
}

TEST(Routing, LinkCounts)
{
    EXPECT_EQ(link_counts(topo, NetworkState::named(StateName::intra, topo)), 84);
    EXPECT_EQ(link_counts(topo, NetworkState::named(StateName::inter, topo)), 192);
    EXPECT_EQ(link_counts(topo, NetworkState::named(StateName::all, topo)), 276);
}

TEST(Routing, IntraStateEntries)
{
    const auto m = pair_routing_matrix(topo, NetworkState::named(StateName::intra, topo));
    double intra_sum = 0;
    for (UserId u = 0; u < 24; ++u) {
        EXPECT_NEAR(m(u, u), 1.0 / 192, 1e-15);
        for (UserId v = u + 1; v < 24; ++v) {
            if (classify_link(topo, u, v) == LinkClass::intra) {
                EXPECT_NEAR(m(u, v), 1.0 / 96, 1e-15);
                intra_sum += m(u, v);
            }
            else {
                EXPECT_EQ(m(u, v), 0.0);
            }
        }
    }
    EXPECT_NEAR(intra_sum, 7.0 / 8, 1e-12);
    EXPECT_NEAR(m.total(), 1.0, 1e-12);
}

TEST(Routing, InterStateEntries)
{
    const auto m = pair_routing_matrix(topo, NetworkState::named(StateName::inter, topo));
    double inter_sum = 0;
    for (UserId u = 0; u < 24; ++u) {
        EXPECT_EQ(m(u, u), 0.0);
        for (UserId v = u + 1; v < 24; ++v) {
            if (classify_link(topo, u, v) == LinkClass::inter) {
                EXPECT_NEAR(m(u, v), 1.0 / 192, 1e-15);
                inter_sum += m(u, v);
            }
            else {
                EXPECT_EQ(m(u, v), 0.0);
            }
        }
    }
    EXPECT_NEAR(inter_sum, 1.0, 1e-12);
}

TEST(Routing, AllStateEntries)
{
    const auto m = pair_routing_matrix(topo, NetworkState::named(StateName::all, topo));
    for (UserId u = 0; u < 24; ++u)
        for (UserId v = u + 1; v < 24; ++v)
            EXPECT_NEAR(m(u, v), classify_link(topo, u, v) == LinkClass::intra ? 1.0 / 192 : 1.0 / 384, 1e-15);
    EXPECT_NEAR(m.total(), 1.0, 1e-12);
}

TEST(Routing, MatchesBruteForceOracleNamedStates)
{
    for (auto s : {StateName::intra, StateName::inter, StateName::all})
        for (auto conv : {PhaseConvention::equation, PhaseConvention::results}) {
            const auto st = NetworkState::named(s, topo, conv);
            expect_matches_oracle(topo, st.phases, conv);
        }
}

TEST(Routing, MatchesBruteForceOracleRandomPhases)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> phi(0, 2 * std::numbers::pi);
    for (int i = 0; i < 20; ++i) expect_matches_oracle(topo, {{phi(rng), phi(rng), phi(rng)}}, PhaseConvention::equation);
}

TEST(Routing, MatchesOracleOnOtherTopologies)
{
    const NetworkTopology four = NetworkTopology::ring(4, 3);
    const NetworkTopology odd(4, 2, {{0, 1}, {2, 3}, {0, 2}, {1, 3}});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> phi(0, std::numbers::pi);
    for (const auto* t : {&four, &odd})
        for (int i = 0; i < 5; ++i) {
            PhaseSettings ph;
            for (int k = 0; k < t->bsgu_count(); ++k) ph.phi.push_back(phi(rng));
            expect_matches_oracle(*t, ph, PhaseConvention::equation);
        }
}

TEST(RoutingProperty, NormalisedNonNegativeAndSubnetSymmetric)
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> phi(-20, 20);
    for (int i = 0; i < 200; ++i) {
        const PhaseSettings ph{{phi(rng), phi(rng), phi(rng)}};
        const auto m = pair_routing_matrix(topo, ph);
        EXPECT_NEAR(m.total(), 1.0, 1e-12);
        for (UserId u = 0; u < 24; ++u)
            for (UserId v = u + 1; v < 24; ++v) {
                ASSERT_GE(m(u, v), 0.0);
                // Representative link of the same subnet class.
                const int su = topo.subnet_of(u), sv = topo.subnet_of(v);
                const double rep = su == sv ? m(8 * su, 8 * su + 1) : m(8 * su, 8 * sv);
                ASSERT_NEAR(m(u, v), rep, 1e-15);
            }
    }
}

TEST(RoutingProperty, PiPeriodicAndCanonical)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> phi(-10, 10);
    for (int i = 0; i < 50; ++i) {
        const PhaseSettings ph{{phi(rng), phi(rng), phi(rng)}};
        const auto c = ph.canonical();
        for (double p : c.phi) {
            EXPECT_GE(p, 0.0);
            EXPECT_LT(p, std::numbers::pi);
        }
        const auto a = pair_routing_matrix(topo, ph), b = pair_routing_matrix(topo, c);
        for (UserId u = 0; u < 24; ++u)
            for (UserId v = u; v < 24; ++v) ASSERT_NEAR(a(u, v), b(u, v), 1e-12);
    }
}

TEST(RoutingProperty, MeanLinkProbabilityOrdering)
{
    const double intra = mean_active_link_probability(topo, NetworkState::named(StateName::intra, topo));
    const double inter = mean_active_link_probability(topo, NetworkState::named(StateName::inter, topo));
    const double all = mean_active_link_probability(topo, NetworkState::named(StateName::all, topo));
    EXPECT_GT(intra, inter);
    EXPECT_GT(inter, all);
    EXPECT_NEAR(intra / inter, 2.0, 1e-12);
}

TEST(Routing, WrongPhaseCount)
{
    EXPECT_THROW(pair_routing_matrix(topo, PhaseSettings{{0.0, 0.0}}), invalid_input);
    EXPECT_THROW(pair_routing_matrix(topo, PhaseSettings{{0.0, 0.0, std::numeric_limits<double>::quiet_NaN()}}),
                 invalid_input);
}

TEST(Routing, CsvExport)
{
    std::ostringstream os;
    write_routing_csv(os, pair_routing_matrix(topo, NetworkState::named(StateName::intra, topo)));
    std::istringstream is(os.str());
    std::string header, row0, row1;
    std::getline(is, header);
    std::getline(is, row0);
    std::getline(is, row1);
    EXPECT_EQ(header.substr(0, 10), "user,0,1,2");
    // 1/192 and 1/96 at 12 significant digits.
    EXPECT_EQ(row0.substr(0, 33), "0,0.00520833333333,0.010416666666");
    std::size_t lines = 0;
    std::istringstream all(os.str());
    for (std::string l; std::getline(all, l);) ++lines;
    EXPECT_EQ(lines, 25u);
}
