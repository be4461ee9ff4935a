#pragma once

// Detection timestamp streams and their file formats.
//
// CSV:    header `user_id,time_ps,origin`, one detection per row, origin one
//         of signal|idler|dark.
// Binary: packed little-endian records {u8 user, u64 time_ps, u8 origin},
//         10 bytes each, no header. origin: 0 signal, 1 idler, 2 dark.

#include "cedn/errors.hpp"
#include "cedn/topology.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <limits>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cedn {

using timestamp_ps = std::int64_t;

inline constexpr double ps_per_s = 1e12;

enum class Origin : std::uint8_t { signal = 0, idler = 1, dark = 2 };

inline std::string_view to_string(Origin o)
{
    switch (o) {
    case Origin::signal: return "signal";
    case Origin::idler: return "idler";
    case Origin::dark: return "dark";
    }
    return "dark";
}

inline Origin parse_origin(std::string_view s)
{
    if (s == "signal") return Origin::signal;
    if (s == "idler") return Origin::idler;
    if (s == "dark") return Origin::dark;
    throw data_error("unknown event origin '" + std::string(s) + "'");
}

/// One detection. `origin` is simulation bookkeeping; analysis never reads it.
struct Event {
    timestamp_ps time_ps = 0;
    Origin origin = Origin::dark;

    friend bool operator==(const Event&, const Event&) = default;
};

struct TimetagStream {
    UserId user = 0;
    double duration_s = 0.0;
    std::vector<Event> events;

    std::size_t size() const noexcept { return events.size(); }
    bool empty() const noexcept { return events.empty(); }

    bool is_sorted() const
    {
        return std::is_sorted(events.begin(), events.end(),
                              [](const Event& a, const Event& b) { return a.time_ps < b.time_ps; });
    }

    void require_sorted(std::string_view what = "stream") const
    {
        if (!is_sorted())
            throw data_error(std::string(what) + " for user " + std::to_string(user) +
                             " is not sorted by timestamp");
    }

    /// Events with time < cutoff_s, as a stream of that duration.
    TimetagStream truncated(double cutoff_s) const
    {
        TimetagStream out{user, std::min(duration_s, cutoff_s), {}};
        const auto limit = static_cast<timestamp_ps>(cutoff_s * ps_per_s);
        auto end = std::lower_bound(events.begin(), events.end(), limit,
                                    [](const Event& e, timestamp_ps t) { return e.time_ps < t; });
        out.events.assign(events.begin(), end);
        return out;
    }

    friend bool operator==(const TimetagStream&, const TimetagStream&) = default;
};

struct TaggedEvent {
    UserId user = 0;
    Event event;
};

/// All events of all streams in time order; ties go to the lower user id,
/// then to the original within-stream order.
inline std::vector<TaggedEvent> merge_tagged(std::span<const TimetagStream> streams)
{
    std::vector<TaggedEvent> all;
    std::size_t total = 0;
    for (const auto& s : streams) total += s.size();
    all.reserve(total);
    for (const auto& s : streams)
        for (const auto& e : s.events) all.push_back({s.user, e});
    std::stable_sort(all.begin(), all.end(), [](const TaggedEvent& a, const TaggedEvent& b) {
        if (a.event.time_ps != b.event.time_ps) return a.event.time_ps < b.event.time_ps;
        return a.user < b.user;
    });
    return all;
}

inline constexpr UserId combined_user = -1;

/// Stable time-ordered merge. The result keeps the input user id when all
/// non-empty inputs share one, otherwise it is `combined_user`.
inline TimetagStream merge_streams(std::span<const TimetagStream> streams)
{
    TimetagStream out;
    bool first = true;
    for (const auto& s : streams) {
        out.duration_s = std::max(out.duration_s, s.duration_s);
        if (s.empty()) continue;
        if (first) out.user = s.user;
        else if (out.user != s.user) out.user = combined_user;
        first = false;
    }
    if (first && !streams.empty()) out.user = streams.front().user;
    for (const auto& t : merge_tagged(streams)) out.events.push_back(t.event);
    return out;
}

inline TimetagStream merge_streams(const TimetagStream& a, const TimetagStream& b)
{
    const std::array<TimetagStream, 2> s{a, b};
    return merge_streams(std::span<const TimetagStream>(s));
}

// ---- CSV ------------------------------------------------------------------

inline void write_timetags_csv(std::ostream& os, std::span<const TimetagStream> streams)
{
    os << "user_id,time_ps,origin\n";
    for (const auto& t : merge_tagged(streams))
        os << t.user << ',' << t.event.time_ps << ',' << to_string(t.event.origin) << '\n';
}

namespace detail {

template <class T>
T parse_number(std::string_view s, std::size_t line, std::string_view field)
{
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw data_error("line " + std::to_string(line) + ": bad " + std::string(field) + " '" + std::string(s) + "'");
    return v;
}

/// Streams for users 0..user_count-1 in file order; each must already be time-ordered.
inline std::vector<TimetagStream> finish_streams(std::map<UserId, std::vector<Event>>& by_user, int user_count,
                                                 double duration_s)
{
    timestamp_ps last = 0;
    for (auto& [u, ev] : by_user)
        for (const auto& e : ev) last = std::max(last, e.time_ps);
    if (duration_s <= 0) duration_s = static_cast<double>(last) / ps_per_s;

    std::vector<TimetagStream> out;
    for (UserId u = 0; u < user_count; ++u) {
        TimetagStream s{u, duration_s, std::move(by_user[u])};
        s.require_sorted("timetag file");
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace detail

/// Parses a CSV timetag file into `user_count` streams. A non-positive
/// `duration_s` is replaced by the last timestamp.
inline std::vector<TimetagStream> read_timetags_csv(std::istream& is, int user_count, double duration_s = 0)
{
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line))
        throw data_error("empty timetag file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "user_id,time_ps,origin")
        throw data_error("line 1: expected header 'user_id,time_ps,origin'");

    std::map<UserId, std::vector<Event>> by_user;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string_view v(line);
        const auto c1 = v.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
        if (c2 == std::string_view::npos)
            throw data_error("line " + std::to_string(lineno) + ": expected 3 fields");
        const auto user = detail::parse_number<UserId>(v.substr(0, c1), lineno, "user_id");
        const auto t = detail::parse_number<timestamp_ps>(v.substr(c1 + 1, c2 - c1 - 1), lineno, "time_ps");
        if (user < 0 || user >= user_count)
            throw data_error("line " + std::to_string(lineno) + ": user " + std::to_string(user) + " out of range");
        if (t < 0)
            throw data_error("line " + std::to_string(lineno) + ": negative timestamp");
        Origin o;
        try {
            o = parse_origin(v.substr(c2 + 1));
        }
        catch (const data_error& e) {
            throw data_error("line " + std::to_string(lineno) + ": " + e.what());
        }
        by_user[user].push_back({t, o});
    }
    return detail::finish_streams(by_user, user_count, duration_s);
}

// ---- binary ---------------------------------------------------------------

inline constexpr std::size_t binary_record_size = 10;

inline void write_timetags_binary(std::ostream& os, std::span<const TimetagStream> streams)
{
    std::array<char, binary_record_size> rec{};
    for (const auto& t : merge_tagged(streams)) {
        if (t.user < 0 || t.user > 255)
            throw data_error("binary timetag format holds user ids 0-255 only");
        rec[0] = static_cast<char>(static_cast<std::uint8_t>(t.user));
        auto time = static_cast<std::uint64_t>(t.event.time_ps);
        for (int i = 0; i < 8; ++i) rec[1 + static_cast<std::size_t>(i)] = static_cast<char>((time >> (8 * i)) & 0xff);
        rec[9] = static_cast<char>(static_cast<std::uint8_t>(t.event.origin));
        os.write(rec.data(), rec.size());
    }
}

inline std::vector<TimetagStream> read_timetags_binary(std::istream& is, int user_count, double duration_s = 0)
{
    std::map<UserId, std::vector<Event>> by_user;
    std::array<unsigned char, binary_record_size> rec{};
    std::size_t index = 0;
    while (is.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
        const UserId user = rec[0];
        std::uint64_t time = 0;
        for (int i = 7; i >= 0; --i) time = (time << 8) | rec[1 + static_cast<std::size_t>(i)];
        if (user >= user_count)
            throw data_error("record " + std::to_string(index) + ": user " + std::to_string(user) + " out of range");
        if (rec[9] > 2)
            throw data_error("record " + std::to_string(index) + ": bad origin byte");
        if (time > static_cast<std::uint64_t>(std::numeric_limits<timestamp_ps>::max()))
            throw data_error("record " + std::to_string(index) + ": timestamp overflow");
        by_user[user].push_back({static_cast<timestamp_ps>(time), static_cast<Origin>(rec[9])});
        ++index;
    }
    if (is.gcount() != 0)
        throw data_error("truncated binary timetag record at index " + std::to_string(index));
    return detail::finish_streams(by_user, user_count, duration_s);
}

} // namespace cedn
