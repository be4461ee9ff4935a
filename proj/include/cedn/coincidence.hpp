#pragma once

// Two-fold windowed coincidence counting and user-pair coincidence matrices.

#include "cedn/errors.hpp"
#include "cedn/pair_source.hpp"
#include "cedn/timetag.hpp"
#include "cedn/topology.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace cedn {

struct CoincidenceWindow {
    timestamp_ps width_ps = 300;
    timestamp_ps offset_ps = 0; // expected t_a - t_b

    void validate() const
    {
        if (width_ps <= 0) throw invalid_input("coincidence window width must be > 0 ps");
    }
};

struct PairCount {
    std::size_t coincidences = 0;
    std::size_t singles_a = 0;
    std::size_t singles_b = 0;
    double accidental_estimate = 0.0;
};

/// Counts events with |t_a - t_b - offset| <= width/2, each event used at most once.
///
/// Single sweep: every a-event takes the earliest still-unused b-event inside
/// its window. With equal-width windows this yields a maximum matching, so the
/// count is symmetric in (a, b) and never drops when the window widens.
inline PairCount count_coincidences(const TimetagStream& a, const TimetagStream& b, CoincidenceWindow w)
{
    w.validate();
    a.require_sorted();
    b.require_sorted();

    PairCount r;
    r.singles_a = a.size();
    r.singles_b = b.size();
    const auto& ea = a.events;
    const auto& eb = b.events;
    std::size_t j = 0;
    for (const auto& ev : ea) {
        const timestamp_ps centre = ev.time_ps - w.offset_ps;
        // b is too early for this and every later a-event once 2(centre - b) > width.
        while (j < eb.size() && 2 * (centre - eb[j].time_ps) > w.width_ps) ++j;
        if (j < eb.size() && 2 * (eb[j].time_ps - centre) <= w.width_ps) {
            ++r.coincidences;
            ++j;
        }
    }
    const double duration = std::max(a.duration_s, b.duration_s);
    if (duration > 0)
        r.accidental_estimate = static_cast<double>(r.singles_a) * static_cast<double>(r.singles_b) *
                                (static_cast<double>(w.width_ps) / ps_per_s) / duration;
    return r;
}

struct OffsetScan {
    timestamp_ps best_offset_ps = 0;
    std::size_t best_count = 0;
    std::vector<std::pair<timestamp_ps, std::size_t>> profile;
};

/// Delay scan for externally recorded data: the offset maximising coincidences.
inline OffsetScan scan_offset(const TimetagStream& a, const TimetagStream& b, timestamp_ps width_ps,
                              timestamp_ps min_offset_ps, timestamp_ps max_offset_ps, timestamp_ps step_ps)
{
    if (step_ps <= 0 || max_offset_ps < min_offset_ps)
        throw invalid_input("offset scan needs step > 0 and max >= min");
    OffsetScan s;
    for (timestamp_ps off = min_offset_ps; off <= max_offset_ps; off += step_ps) {
        const auto c = count_coincidences(a, b, {width_ps, off}).coincidences;
        s.profile.emplace_back(off, c);
        if (c > s.best_count) {
            s.best_count = c;
            s.best_offset_ps = off;
        }
    }
    return s;
}

/// Symmetric user x user coincidence counts; the diagonal is always 0.
class CoincidenceMatrix {
public:
    CoincidenceMatrix(int users, double duration_s, CoincidenceWindow w)
        : n_(users), duration_s_(duration_s), window_(w), counts_(static_cast<std::size_t>(users * users), 0),
          singles_(static_cast<std::size_t>(users), 0)
    {
    }

    int user_count() const noexcept { return n_; }
    double duration_s() const noexcept { return duration_s_; }
    const CoincidenceWindow& window() const noexcept { return window_; }

    std::size_t count(UserId u, UserId v) const { return counts_.at(static_cast<std::size_t>(u * n_ + v)); }
    double error(UserId u, UserId v) const { return std::sqrt(static_cast<double>(count(u, v))); }
    double rate_hz(UserId u, UserId v) const { return static_cast<double>(count(u, v)) / duration_s_; }
    std::size_t singles(UserId u) const { return singles_.at(static_cast<std::size_t>(u)); }

    void set(UserId u, UserId v, std::size_t c)
    {
        if (u == v) return;
        counts_.at(static_cast<std::size_t>(u * n_ + v)) = c;
        counts_.at(static_cast<std::size_t>(v * n_ + u)) = c;
    }

    void set_singles(UserId u, std::size_t s) { singles_.at(static_cast<std::size_t>(u)) = s; }

private:
    int n_;
    double duration_s_;
    CoincidenceWindow window_;
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> singles_;
};

/// Pairwise counts over all unordered user pairs. Stream i must belong to user i.
inline CoincidenceMatrix coincidence_matrix(std::span<const TimetagStream> streams, CoincidenceWindow w,
                                            unsigned workers = 0)
{
    w.validate();
    const int n = static_cast<int>(streams.size());
    double duration = 0;
    for (int u = 0; u < n; ++u) {
        const auto& s = streams[static_cast<std::size_t>(u)];
        if (s.user != u)
            throw data_error("stream " + std::to_string(u) + " belongs to user " + std::to_string(s.user));
        s.require_sorted();
        duration = std::max(duration, s.duration_s);
    }
    CoincidenceMatrix m(n, duration, w);
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < n; ++u) {
        m.set_singles(u, streams[static_cast<std::size_t>(u)].size());
        for (int v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
    }
    std::vector<std::size_t> counts(pairs.size());
    detail::parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const auto [u, v] = pairs[i];
        counts[i] = count_coincidences(streams[static_cast<std::size_t>(u)], streams[static_cast<std::size_t>(v)], w)
                        .coincidences;
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) m.set(pairs[i].first, pairs[i].second, counts[i]);
    return m;
}

struct LinkRow {
    UserId user_a = 0;
    UserId user_b = 0;
    LinkClass link_class = LinkClass::intra;
    std::size_t count = 0;
    double rate_hz = 0.0;
    double error_hz = 0.0;
};

struct ClassMean {
    double rate_hz = 0.0;
    double error_hz = 0.0;
    int links = 0;
};

struct LinkRateSummary {
    ClassMean intra;
    ClassMean inter;
    ClassMean all;
    std::vector<LinkRow> links;

    /// Mean over the links a named state entangles (all links for custom states).
    const ClassMean& state_mean(StateName s) const
    {
        switch (s) {
        case StateName::intra: return intra;
        case StateName::inter: return inter;
        default: return all;
        }
    }
};

/// Class means in Hz with Poisson errors, over `users` (all users when empty).
inline LinkRateSummary link_rate_summary(const CoincidenceMatrix& m, const NetworkTopology& topo,
                                         std::span<const UserId> users = {})
{
    std::vector<UserId> sel(users.begin(), users.end());
    if (sel.empty())
        for (UserId u = 0; u < m.user_count(); ++u) sel.push_back(u);

    LinkRateSummary s;
    std::size_t sum_intra = 0, sum_inter = 0;
    for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = i + 1; j < sel.size(); ++j) {
            const UserId a = std::min(sel[i], sel[j]), b = std::max(sel[i], sel[j]);
            LinkRow row{a, b, classify_link(topo, a, b), m.count(a, b), m.rate_hz(a, b), m.error(a, b) / m.duration_s()};
            if (row.link_class == LinkClass::intra) {
                sum_intra += row.count;
                ++s.intra.links;
            }
            else {
                sum_inter += row.count;
                ++s.inter.links;
            }
            s.links.push_back(row);
        }
    s.all.links = s.intra.links + s.inter.links;
    auto fill = [&](ClassMean& c, std::size_t sum) {
        if (c.links == 0) return;
        const double denom = c.links * m.duration_s();
        c.rate_hz = static_cast<double>(sum) / denom;
        c.error_hz = std::sqrt(static_cast<double>(sum)) / denom;
    };
    fill(s.intra, sum_intra);
    fill(s.inter, sum_inter);
    fill(s.all, sum_intra + sum_inter);
    return s;
}

inline void write_coincidence_matrix_csv(std::ostream& os, const CoincidenceMatrix& m)
{
    os << "user";
    for (int v = 0; v < m.user_count(); ++v) os << ',' << v;
    os << '\n';
    for (int u = 0; u < m.user_count(); ++u) {
        os << u;
        for (int v = 0; v < m.user_count(); ++v) os << ',' << m.count(u, v);
        os << '\n';
    }
}

inline void write_link_table_csv(std::ostream& os, const LinkRateSummary& s)
{
    os << "user_a,user_b,class,count,rate_hz,error_hz\n";
    for (const auto& r : s.links)
        os << r.user_a << ',' << r.user_b << ',' << to_string(r.link_class) << ',' << r.count << ',' << r.rate_hz
           << ',' << r.error_hz << '\n';
}

} // namespace cedn
