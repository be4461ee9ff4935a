#pragma once

// Time-bin key sifting and secure-rate estimation for dispersive-optics QKD.
//
// Arrival times are split into frames of 4 slots x 3 bins. Two users keep an
// event pair when both saw exactly one event in the same frame and those
// events sit in the same bin position; each side's slot label ("00".."11")
// contributes two raw key bits.

#include "cedn/errors.hpp"
#include "cedn/timetag.hpp"
#include "cedn/topology.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cedn {

inline constexpr int bins_per_slot = 3;
inline constexpr int slots_per_frame = 4;
inline constexpr int symbol_count = slots_per_frame;
inline constexpr std::array<std::string_view, slots_per_frame> slot_labels{"00", "01", "10", "11"};

struct FrameConfig {
    timestamp_ps bin_width_ps = 100;

    timestamp_ps slot_length_ps() const noexcept { return bins_per_slot * bin_width_ps; }
    timestamp_ps frame_length_ps() const noexcept { return slots_per_frame * slot_length_ps(); }

    void validate() const
    {
        if (bin_width_ps <= 0) throw invalid_input("bin width must be > 0 ps");
    }

    /// Optimised bin widths of the demonstration: 300/150/100 ps.
    static FrameConfig for_state(StateName s)
    {
        switch (s) {
        case StateName::intra: return {300};
        case StateName::inter: return {150};
        default: return {100};
        }
    }
};

struct BinAssignment {
    std::int64_t frame = 0;
    int slot = 0;
    int bin = 0;

    friend bool operator==(const BinAssignment&, const BinAssignment&) = default;
};

inline BinAssignment assign_bin(timestamp_ps t, const FrameConfig& cfg)
{
    if (t < 0) throw invalid_input("negative timestamp cannot be binned");
    const timestamp_ps pos = t % cfg.frame_length_ps();
    return {t / cfg.frame_length_ps(), static_cast<int>(pos / cfg.slot_length_ps()),
            static_cast<int>((pos / cfg.bin_width_ps) % bins_per_slot)};
}

inline std::vector<BinAssignment> assign_bins(const TimetagStream& s, const FrameConfig& cfg)
{
    cfg.validate();
    std::vector<BinAssignment> out;
    out.reserve(s.size());
    for (const auto& e : s.events) out.push_back(assign_bin(e.time_ps, cfg));
    return out;
}

struct SiftedPair {
    std::int64_t frame = 0;
    int slot_a = 0;
    int bin = 0;
    int slot_b = 0;
};

struct SiftResult {
    std::vector<SiftedPair> pairs;
    double frame_occupancy_a = 0.0; // mean detections per frame
    double frame_occupancy_b = 0.0;
    std::size_t ambiguous_frames_a = 0;
    std::size_t ambiguous_frames_b = 0;
    std::vector<std::string> warnings;
};

inline constexpr double default_sparsity_limit = 0.1;

namespace detail {

/// Assignments of frames holding exactly one event; counts the rest.
inline std::vector<BinAssignment> single_event_frames(const TimetagStream& s, const FrameConfig& cfg,
                                                      std::size_t& ambiguous)
{
    s.require_sorted();
    const auto all = assign_bins(s, cfg);
    std::vector<BinAssignment> out;
    ambiguous = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i + 1;
        while (j < all.size() && all[j].frame == all[i].frame) ++j;
        if (j - i == 1) out.push_back(all[i]);
        else ++ambiguous;
        i = j;
    }
    return out;
}

} // namespace detail

/// Frame and bin sifting. Frames with more than one event on either side are
/// discarded on both sides.
inline SiftResult sift(const TimetagStream& a, const TimetagStream& b, const FrameConfig& cfg,
                       double sparsity_limit = default_sparsity_limit)
{
    cfg.validate();
    SiftResult r;
    const auto fa = detail::single_event_frames(a, cfg, r.ambiguous_frames_a);
    const auto fb = detail::single_event_frames(b, cfg, r.ambiguous_frames_b);

    const double frame_s = static_cast<double>(cfg.frame_length_ps()) / ps_per_s;
    if (a.duration_s > 0) r.frame_occupancy_a = static_cast<double>(a.size()) * frame_s / a.duration_s;
    if (b.duration_s > 0) r.frame_occupancy_b = static_cast<double>(b.size()) * frame_s / b.duration_s;
    for (auto [occ, who] : {std::pair{r.frame_occupancy_a, "a"}, std::pair{r.frame_occupancy_b, "b"}})
        if (occ > sparsity_limit)
            r.warnings.push_back(std::string("side ") + who + ": " + std::to_string(occ) +
                                 " detections per frame, sifting assumes far fewer than 1");

    std::size_t i = 0, j = 0;
    while (i < fa.size() && j < fb.size()) {
        if (fa[i].frame < fb[j].frame) ++i;
        else if (fb[j].frame < fa[i].frame) ++j;
        else {
            if (fa[i].bin == fb[j].bin) r.pairs.push_back({fa[i].frame, fa[i].slot, fa[i].bin, fb[j].slot});
            ++i;
            ++j;
        }
    }
    return r;
}

struct RawKeys {
    std::string a;
    std::string b;
};

inline RawKeys raw_key(std::span<const SiftedPair> sifted)
{
    RawKeys k;
    k.a.reserve(2 * sifted.size());
    k.b.reserve(2 * sifted.size());
    for (const auto& p : sifted) {
        k.a += slot_labels.at(static_cast<std::size_t>(p.slot_a));
        k.b += slot_labels.at(static_cast<std::size_t>(p.slot_b));
    }
    return k;
}

struct QberResult {
    double bit_error_rate = std::numeric_limits<double>::quiet_NaN();
    double symbol_error_rate = std::numeric_limits<double>::quiet_NaN();
    std::size_t bits = 0;
    std::size_t symbols = 0;
};

/// Mismatch fractions at bit and 2-bit symbol granularity; NaN for empty keys.
inline QberResult qber(std::string_view key_a, std::string_view key_b)
{
    if (key_a.size() != key_b.size())
        throw data_error("raw keys differ in length (" + std::to_string(key_a.size()) + " vs " +
                         std::to_string(key_b.size()) + ")");
    if (key_a.size() % 2 != 0)
        throw data_error("raw key length must be a whole number of 2-bit symbols");
    QberResult r;
    r.bits = key_a.size();
    r.symbols = key_a.size() / 2;
    if (r.bits == 0) return r;
    std::size_t bit_err = 0, sym_err = 0;
    for (std::size_t i = 0; i < key_a.size(); i += 2) {
        const int e = (key_a[i] != key_b[i]) + (key_a[i + 1] != key_b[i + 1]);
        bit_err += static_cast<std::size_t>(e);
        sym_err += e > 0;
    }
    r.bit_error_rate = static_cast<double>(bit_err) / static_cast<double>(r.bits);
    r.symbol_error_rate = static_cast<double>(sym_err) / static_cast<double>(r.symbols);
    return r;
}

using ConfusionCounts = std::array<std::array<std::size_t, symbol_count>, symbol_count>;
/// Row-stochastic P(B = column | A = row).
using ConfusionMatrix = std::array<std::array<double, symbol_count>, symbol_count>;

inline ConfusionCounts confusion_counts(std::span<const SiftedPair> sifted)
{
    ConfusionCounts c{};
    for (const auto& p : sifted) ++c.at(static_cast<std::size_t>(p.slot_a)).at(static_cast<std::size_t>(p.slot_b));
    return c;
}

inline std::size_t total(const ConfusionCounts& c)
{
    std::size_t n = 0;
    for (const auto& row : c)
        for (auto v : row) n += v;
    return n;
}

inline std::size_t symbol_errors(const ConfusionCounts& c)
{
    std::size_t e = 0;
    for (std::size_t a = 0; a < symbol_count; ++a)
        for (std::size_t b = 0; b < symbol_count; ++b)
            if (a != b) e += c[a][b];
    return e;
}

/// Symmetric channel: correct with probability 1 - e, otherwise uniform over
/// the three wrong symbols.
inline ConfusionMatrix symmetric_confusion(double symbol_error)
{
    ConfusionMatrix m{};
    for (std::size_t a = 0; a < symbol_count; ++a)
        for (std::size_t b = 0; b < symbol_count; ++b)
            m[a][b] = a == b ? 1.0 - symbol_error : symbol_error / (symbol_count - 1);
    return m;
}

/// Row-normalised counts; rows without data become uniform.
inline ConfusionMatrix empirical_confusion(const ConfusionCounts& c)
{
    ConfusionMatrix m{};
    for (std::size_t a = 0; a < symbol_count; ++a) {
        std::size_t row = 0;
        for (auto v : c[a]) row += v;
        for (std::size_t b = 0; b < symbol_count; ++b)
            m[a][b] = row ? static_cast<double>(c[a][b]) / static_cast<double>(row) : 1.0 / symbol_count;
    }
    return m;
}

/// Upper confidence bound on the symbol error rate (Clopper-Pearson, one-sided,
/// failure probability `epsilon`); 1 without data.
inline double symbol_error_upper_bound(std::size_t errors, std::size_t trials, double epsilon)
{
    if (trials == 0) return 1.0;
    if (errors >= trials) return 1.0;
    return boost::math::binomial_distribution<double>::find_upper_bound_on_p(
        static_cast<double>(trials), static_cast<double>(errors), epsilon);
}

/// Finite-size estimate: symmetric channel at the least favourable error rate
/// inside the confidence interval. H(A|B) of the symmetric channel peaks at
/// e = 3/4 (B carries no information), so the bound is capped there.
inline ConfusionMatrix finite_size_confusion(const ConfusionCounts& c, double epsilon)
{
    constexpr double uninformative = 1.0 - 1.0 / symbol_count;
    return symmetric_confusion(std::min(uninformative, symbol_error_upper_bound(symbol_errors(c), total(c), epsilon)));
}

inline void require_row_stochastic(const ConfusionMatrix& m)
{
    for (const auto& row : m) {
        double s = 0;
        for (double v : row) {
            if (!(v >= 0)) throw invalid_input("confusion matrix has a negative or NaN entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw invalid_input("confusion matrix rows must sum to 1");
    }
}

/// H(A|B) in bits for uniformly distributed A sent through `m`.
inline double conditional_entropy(const ConfusionMatrix& m)
{
    require_row_stochastic(m);
    double h = 0;
    for (std::size_t b = 0; b < symbol_count; ++b) {
        double pb = 0;
        for (std::size_t a = 0; a < symbol_count; ++a) pb += m[a][b] / symbol_count;
        for (std::size_t a = 0; a < symbol_count; ++a) {
            const double pab = m[a][b] / symbol_count;
            if (pab > 0) h -= pab * std::log2(pab / pb);
        }
    }
    return std::max(0.0, h);
}

struct SecureRateParams {
    double reconciliation_efficiency = 1.2; // f >= 1
    double finite_size_deduction = 0.0;     // bits per symbol

    void validate() const
    {
        if (!(reconciliation_efficiency >= 1.0))
            throw config_error("reconciliation efficiency f must be >= 1");
        if (!(finite_size_deduction >= 0.0))
            throw config_error("finite-size deduction must be >= 0");
    }
};

/// Secure bits per sifted symbol.
using SecureFraction = std::function<double(const ConfusionMatrix&, const SecureRateParams&)>;

/// log2(4) - f H(A|B) - delta, clamped at zero.
inline double symbol_entropy_secure_fraction(const ConfusionMatrix& m, const SecureRateParams& p)
{
    return std::max(0.0, std::log2(double(symbol_count)) - p.reconciliation_efficiency * conditional_entropy(m) -
                             p.finite_size_deduction);
}

/// Mean probability that B reports A's symbol.
inline double mean_agreement(const ConfusionMatrix& m)
{
    double d = 0;
    for (std::size_t a = 0; a < symbol_count; ++a) d += m[a][a];
    return d / symbol_count;
}

/// Secure key rate from a raw bit rate (2 bits per sifted symbol). Zero once
/// agreement drops to chance (symbol error >= 3/4).
inline double secure_rate(double raw_rate_bps, const ConfusionMatrix& m, const SecureRateParams& p,
                          const SecureFraction& fraction = symbol_entropy_secure_fraction)
{
    p.validate();
    require_row_stochastic(m);
    if (mean_agreement(m) <= 1.0 / symbol_count + 1e-12) return 0.0;
    return std::max(0.0, raw_rate_bps / 2.0 * fraction(m, p));
}

struct QkdOptions {
    SecureRateParams secure;
    bool finite_size = true;
    double epsilon = 0.01; // failure probability of the error-rate bound
    double sparsity_limit = default_sparsity_limit;
    SecureFraction fraction = symbol_entropy_secure_fraction;
};

struct QkdLinkReport {
    UserId user_a = 0;
    UserId user_b = 0;
    LinkClass link_class = LinkClass::intra;
    bool entangled = false;
    double duration_s = 0.0;
    std::size_t sifted = 0;
    double raw_rate_bps = 0.0;
    double qber = 0.0;
    double symbol_error_rate = 0.0;
    ConfusionCounts counts{};
    ConfusionMatrix confusion{};
    double secure_rate_bps = 0.0;
    bool finite_size_applied = false;
    std::vector<std::string> warnings;
};

inline QkdLinkReport qkd_link_report(const TimetagStream& a, const TimetagStream& b, const FrameConfig& cfg,
                                     const QkdOptions& opt = {})
{
    QkdLinkReport r;
    r.user_a = a.user;
    r.user_b = b.user;
    r.duration_s = std::max(a.duration_s, b.duration_s);
    auto s = sift(a, b, cfg, opt.sparsity_limit);
    r.warnings = std::move(s.warnings);
    r.sifted = s.pairs.size();
    r.raw_rate_bps = r.duration_s > 0 ? 2.0 * static_cast<double>(r.sifted) / r.duration_s : 0.0;
    const auto keys = raw_key(s.pairs);
    const auto q = qber(keys.a, keys.b);
    r.qber = q.bit_error_rate;
    r.symbol_error_rate = q.symbol_error_rate;
    r.counts = confusion_counts(s.pairs);
    r.finite_size_applied = opt.finite_size;
    r.confusion = opt.finite_size ? finite_size_confusion(r.counts, opt.epsilon) : empirical_confusion(r.counts);
    r.secure_rate_bps = secure_rate(r.raw_rate_bps, r.confusion, opt.secure, opt.fraction);
    return r;
}

struct MeasurementDurations {
    double entangled_s = 3 * 3600.0;
    double non_entangled_s = 3600.0;
};

struct QkdNetworkReport {
    StateName state = StateName::custom;
    FrameConfig frame;
    std::vector<QkdLinkReport> links;

    /// Mean secure rate over the links the state entangles.
    double mean_entangled_secure_rate() const
    {
        double s = 0;
        int n = 0;
        for (const auto& l : links)
            if (l.entangled) {
                s += l.secure_rate_bps;
                ++n;
            }
        return n ? s / n : 0.0;
    }
};

/// Per-link reports for every pair of `users` (all users when empty). Each
/// link is analysed over its own measurement duration, capped by the streams.
inline QkdNetworkReport qkd_network_report(std::span<const TimetagStream> streams, const NetworkTopology& topo,
                                           const NetworkState& state, const FrameConfig& cfg,
                                           std::span<const UserId> users = {},
                                           const MeasurementDurations& durations = {}, const QkdOptions& opt = {})
{
    const auto routing = pair_routing_matrix(topo, state);
    std::vector<UserId> sel(users.begin(), users.end());
    if (sel.empty())
        for (UserId u = 0; u < topo.user_count(); ++u) sel.push_back(u);

    auto stream_of = [&](UserId u) -> const TimetagStream& {
        for (const auto& s : streams)
            if (s.user == u) return s;
        throw data_error("no timetag stream for user " + std::to_string(u));
    };

    QkdNetworkReport rep;
    rep.state = state.name;
    rep.frame = cfg;
    for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = i + 1; j < sel.size(); ++j) {
            const UserId a = std::min(sel[i], sel[j]), b = std::max(sel[i], sel[j]);
            const bool entangled = routing(a, b) > 0;
            const double d = entangled ? durations.entangled_s : durations.non_entangled_s;
            auto r = qkd_link_report(stream_of(a).truncated(d), stream_of(b).truncated(d), cfg, opt);
            r.link_class = classify_link(topo, a, b);
            r.entangled = entangled;
            rep.links.push_back(std::move(r));
        }
    return rep;
}

inline void write_qkd_csv(std::ostream& os, const QkdNetworkReport& rep)
{
    os << "user_a,user_b,class,raw_bps,qber,secure_bps,duration_s\n";
    for (const auto& l : rep.links)
        os << l.user_a << ',' << l.user_b << ',' << to_string(l.link_class) << ',' << l.raw_rate_bps << ','
           << l.qber << ',' << l.secure_rate_bps << ',' << l.duration_s << '\n';
}

} // namespace cedn
