#pragma once

// Per-photon and per-link transmittance composed from component losses in dB.

#include "cedn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cedn {

enum class Side : std::uint8_t { signal, idler, both };

inline std::string_view to_string(Side s)
{
    switch (s) {
    case Side::signal: return "signal";
    case Side::idler: return "idler";
    case Side::both: return "both";
    }
    return "both";
}

inline Side parse_side(std::string_view s)
{
    if (s == "signal") return Side::signal;
    if (s == "idler") return Side::idler;
    if (s == "both") return Side::both;
    throw config_error("unknown loss side '" + std::string(s) + "' (expected signal|idler|both)");
}

inline double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }
inline double transmittance_to_db(double t) { return -10.0 * std::log10(t); }

struct ComponentLoss {
    std::string name;
    double loss_db = 0.0; // positive = attenuation
    int count = 1;        // occurrences on each affected photon path
    Side side = Side::both;

    bool applies_to(Side photon) const { return side == Side::both || side == photon; }
};

class LinkBudget {
public:
    LinkBudget() = default;
    explicit LinkBudget(std::vector<ComponentLoss> components) : components_(std::move(components)) { validate(); }

    const std::vector<ComponentLoss>& components() const noexcept { return components_; }

    LinkBudget with(ComponentLoss c) const
    {
        auto v = components_;
        v.push_back(std::move(c));
        return LinkBudget(std::move(v));
    }

    bool contains(std::string_view name) const
    {
        return std::any_of(components_.begin(), components_.end(), [&](const auto& c) { return c.name == name; });
    }

    /// Total attenuation seen by one photon, `photon` is signal or idler.
    double photon_db(Side photon) const
    {
        double db = 0;
        for (const auto& c : components_)
            if (c.applies_to(photon)) db += c.loss_db * c.count;
        return db;
    }

private:
    void validate() const
    {
        for (const auto& c : components_) {
            if (!std::isfinite(c.loss_db) || c.loss_db < 0)
                throw config_error("component '" + c.name + "': loss must be a finite, non-negative dB value");
            if (c.count < 0)
                throw config_error("component '" + c.name + "': negative count");
        }
    }

    std::vector<ComponentLoss> components_;
};

struct LinkTransmittance {
    double signal = 1.0;
    double idler = 1.0;
    double pair = 1.0;
    double signal_db = 0.0;
    double idler_db = 0.0;
    double total_db = 0.0;
};

inline LinkTransmittance link_transmittance(const LinkBudget& budget)
{
    LinkTransmittance t;
    t.signal_db = budget.photon_db(Side::signal);
    t.idler_db = budget.photon_db(Side::idler);
    t.total_db = t.signal_db + t.idler_db;
    t.signal = db_to_transmittance(t.signal_db);
    t.idler = db_to_transmittance(t.idler_db);
    t.pair = t.signal * t.idler;
    return t;
}

struct LossModification {
    std::string component;
    double new_db = 0.0;
    std::optional<Side> side; // restrict to one photon; unset = wherever the component applies
};

/// Pair-rate multiplier when the named components take new dB values.
inline double what_if(const LinkBudget& budget, std::span<const LossModification> mods)
{
    std::vector<ComponentLoss> modified;
    for (const auto& m : mods) {
        if (!budget.contains(m.component))
            throw config_error("what-if: unknown component '" + m.component + "'");
        if (!std::isfinite(m.new_db) || m.new_db < 0)
            throw config_error("what-if: component '" + m.component + "' needs a non-negative dB value");
    }

    for (const auto& c : budget.components()) {
        // Apply modifications per photon so a one-sided change can split a two-sided component.
        for (Side photon : {Side::signal, Side::idler}) {
            if (!c.applies_to(photon)) continue;
            double db = c.loss_db;
            for (const auto& m : mods)
                if (m.component == c.name && (!m.side || *m.side == Side::both || *m.side == photon))
                    db = m.new_db;
            modified.push_back({c.name, db, c.count, photon});
        }
    }
    const double before = link_transmittance(budget).pair;
    const double after = link_transmittance(LinkBudget(std::move(modified))).pair;
    return after / before;
}

/// Detector efficiency folded into the chain as an equivalent dB component.
inline ComponentLoss detector_component(double efficiency)
{
    if (!(efficiency > 0 && efficiency <= 1))
        throw config_error("detector efficiency must lie in (0, 1]");
    return {"detector", transmittance_to_db(efficiency), 1, Side::both};
}

enum class SetupKind : std::uint8_t {
    direct, // chip -> filters -> SNSPDs (coincidence measurements)
    qkd     // chip -> 6.15 km fibre -> 50:50 coupler -> dispersion -> SNSPD
};

inline SetupKind parse_setup(std::string_view s)
{
    if (s == "direct") return SetupKind::direct;
    if (s == "qkd") return SetupKind::qkd;
    throw config_error("unknown setup '" + std::string(s) + "' (expected direct|qkd)");
}

inline std::string_view to_string(SetupKind s) { return s == SetupKind::direct ? "direct" : "qkd"; }

/// Optical components of the demonstrated chip and setups, per photon.
/// The detector is not included; see detector_component().
inline LinkBudget default_optical_budget(SetupKind setup)
{
    std::vector<ComponentLoss> c{
        {"grating_coupler", 6.0, 1, Side::both},
        {"pbsu_mmi", 3.0, 1, Side::both},      // 2x2 MMI
        {"pbsu_splitter", 6.0, 1, Side::both}, // 1x4 MMI splitter
        {"filter", 2.0, 1, Side::both},
    };
    if (setup == SetupKind::qkd) {
        c.push_back({"fiber", 1.25, 1, Side::both}); // 6.15 km each side, 12.3 km ~ 2.5 dB per link
        c.push_back({"fiber_coupler", 3.0, 1, Side::both});
        c.push_back({"dispersion", 3.0, 1, Side::both});
    }
    return LinkBudget(std::move(c));
}

inline constexpr double default_detector_efficiency = 0.6;

/// Wavelength of an ITU 100 GHz grid channel, C<n> at (190 + n/10) THz.
inline double itu_channel_wavelength_nm(int channel)
{
    constexpr double c = 299792458.0;
    return c / ((190.0 + 0.1 * channel) * 1e12) * 1e9;
}

/// Grating coupler loss vs wavelength, linear interpolation between knots.
class CouplingCurve {
public:
    CouplingCurve(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots))
    {
        if (knots_.size() < 2)
            throw config_error("coupling curve needs at least two knots");
        for (std::size_t i = 1; i < knots_.size(); ++i)
            if (!(knots_[i].first > knots_[i - 1].first))
                throw config_error("coupling curve wavelengths must be strictly increasing");
    }

    /// Signal (C35) and idler (C27) at ~6 dB, peak coupling 4.5 dB at 1580 nm.
    static CouplingCurve paper_default()
    {
        return CouplingCurve({{itu_channel_wavelength_nm(35), 6.0},
                              {itu_channel_wavelength_nm(27), 6.0},
                              {1580.0, 4.5}});
    }

    const std::vector<std::pair<double, double>>& knots() const noexcept { return knots_; }

    double coupling_at(double wavelength_nm) const
    {
        if (!(wavelength_nm >= knots_.front().first && wavelength_nm <= knots_.back().first))
            throw range_error("wavelength " + std::to_string(wavelength_nm) + " nm outside coupling table [" +
                              std::to_string(knots_.front().first) + ", " + std::to_string(knots_.back().first) +
                              "] nm");
        auto hi = std::lower_bound(knots_.begin(), knots_.end(), wavelength_nm,
                                   [](const auto& k, double w) { return k.first < w; });
        if (hi->first == wavelength_nm) return hi->second;
        auto lo = std::prev(hi);
        const double f = (wavelength_nm - lo->first) / (hi->first - lo->first);
        return lo->second + f * (hi->second - lo->second);
    }

private:
    std::vector<std::pair<double, double>> knots_;
};

inline double coupling_at(const CouplingCurve& curve, double wavelength_nm) { return curve.coupling_at(wavelength_nm); }

} // namespace cedn
