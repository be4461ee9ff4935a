#pragma once

// Thermo-optic phase shifter model and the voltage calibration procedure:
// sweep one BSGU's heater, record coincidences on an inter-subnet pair it
// feeds, fit a sinusoid in V^2, and read off the operating voltages.

#include "cedn/coincidence.hpp"
#include "cedn/errors.hpp"
#include "cedn/pair_source.hpp"
#include "cedn/random.hpp"
#include "cedn/topology.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace cedn {

/// Heater phase, affine in electrical power: phi = phi0 + alpha V^2.
struct ThermoOpticModel {
    double phi0 = 0.0;  // rad
    double alpha = 0.0; // rad / V^2

    void validate() const
    {
        if (!std::isfinite(phi0)) throw invalid_input("phi0 must be finite");
        if (!(alpha > 0) || !std::isfinite(alpha)) throw invalid_input("alpha must be > 0");
    }
};

inline double phase_from_voltage(const ThermoOpticModel& m, double volts)
{
    if (!(volts >= 0)) throw invalid_input("heater voltage must be >= 0");
    return m.phi0 + m.alpha * volts * volts;
}

/// Lowest voltage producing phase `phi` (mod nothing), if reachable.
inline std::optional<double> voltage_for_phase(const ThermoOpticModel& m, double phi)
{
    const double v2 = (phi - m.phi0) / m.alpha;
    if (v2 < 0) return std::nullopt;
    return std::sqrt(v2);
}

struct CalibrationPoint {
    double voltage = 0.0;
    double counts = 0.0;
    double error = 0.0; // sqrt(counts)
};

struct CalibrationCurve {
    std::vector<CalibrationPoint> points;
    double integration_s = 1.0;

    void validate() const
    {
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            if (!(p.voltage >= 0) || !std::isfinite(p.voltage)) throw invalid_input("voltages must be >= 0");
            if (!(p.counts >= 0) || !std::isfinite(p.counts)) throw invalid_input("counts must be >= 0");
            if (i > 0 && !(p.voltage > points[i - 1].voltage))
                throw invalid_input("voltages must be strictly increasing");
        }
    }
};

inline void write_curve_csv(std::ostream& os, const CalibrationCurve& c)
{
    os << "voltage_V,counts,error\n";
    for (const auto& p : c.points) os << p.voltage << ',' << p.counts << ',' << p.error << '\n';
}

/// y = offset - amplitude cos(2 (phi0 + alpha V^2)), amplitude > 0, so the
/// maxima sit at phi = pi/2 (mod pi), the split setting.
struct FittedSinusoid {
    double offset = 0.0;
    double amplitude = 0.0;
    double alpha = 0.0;
    double phi0 = 0.0; // in [0, pi)

    double operator()(double volts) const
    {
        return offset - amplitude * std::cos(2 * (phi0 + alpha * volts * volts));
    }

    ThermoOpticModel model() const { return {phi0, alpha}; }
};

struct CalibrationResult {
    std::optional<double> v_split; // coincidence maximum, inter-subnet setting
    std::optional<double> v_bunch; // minimum, intra-subnet setting
    std::optional<double> v_mid;   // equal superposition, all-subnet setting
    FittedSinusoid fit;
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
};

struct FitOptions {
    /// Minimum chi-square improvement of the sinusoid over a constant.
    double min_delta_chi2 = 30.0;
    /// Grid oversampling of the frequency scan.
    int oversample = 16;
};

namespace detail {

struct ProfileFit {
    double chi2 = std::numeric_limits<double>::infinity();
    double offset = 0, cos_coef = 0, sin_coef = 0;
};

/// Weighted linear least squares of y on [1, cos(2 alpha x), sin(2 alpha x)].
inline ProfileFit profile_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& sw,
                              double alpha)
{
    const Eigen::Index n = x.size();
    Eigen::MatrixXd a(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = sw(i);
        a(i, 1) = sw(i) * std::cos(2 * alpha * x(i));
        a(i, 2) = sw(i) * std::sin(2 * alpha * x(i));
    }
    const Eigen::VectorXd b = sw.cwiseProduct(y);
    const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
    ProfileFit f;
    f.chi2 = (a * c - b).squaredNorm();
    f.offset = c(0);
    f.cos_coef = c(1);
    f.sin_coef = c(2);
    return f;
}

/// Lowest voltage in [lo, hi] where phi0 + alpha V^2 = target (mod period).
inline std::optional<double> first_crossing(const ThermoOpticModel& m, double target, double period, double lo,
                                            double hi)
{
    const double phi_lo = m.phi0 + m.alpha * lo * lo;
    const double k = std::ceil((phi_lo - target) / period - 1e-12);
    const auto v = voltage_for_phase(m, target + k * period);
    if (!v) return std::nullopt;
    const double tol = 1e-12 * std::max(1.0, hi);
    if (*v < lo - tol || *v > hi + tol) return std::nullopt;
    return std::clamp(*v, lo, hi);
}

} // namespace detail

/// Least-squares fit of the sweep to a sinusoid in V^2.
///
/// The model is linear in (offset, amplitude quadratures) for fixed alpha, so
/// alpha is found by a periodogram-style scan of the profiled chi-square over
/// all frequencies the sampling resolves, then refined with Brent's method.
/// Points are weighted by their Poisson variance.
inline CalibrationResult fit_calibration(const CalibrationCurve& curve, const FitOptions& opt = {})
{
    curve.validate();
    const auto n = static_cast<Eigen::Index>(curve.points.size());
    if (n < 8) throw fit_error("calibration fit needs at least 8 points, got " + std::to_string(n));

    Eigen::VectorXd x(n), y(n), sw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = curve.points[static_cast<std::size_t>(i)];
        x(i) = p.voltage * p.voltage;
        y(i) = p.counts;
        sw(i) = 1.0 / std::sqrt(std::max(p.counts, 1.0));
    }
    const double ymax = y.maxCoeff(), ymin = y.minCoeff();
    if (ymax - ymin <= 1e-12 * std::max(1.0, ymax))
        throw fit_error("flat calibration curve: counts do not vary with voltage");

    const double span = x(n - 1) - x(0);
    double max_gap = 0;
    for (Eigen::Index i = 1; i < n; ++i) max_gap = std::max(max_gap, x(i) - x(i - 1));
    const double alpha_min = std::numbers::pi / (4 * span);
    const double alpha_max = std::max(std::numbers::pi / (2 * max_gap), 4 * alpha_min);
    const double step = std::numbers::pi / (2 * span * opt.oversample);

    double best_alpha = alpha_min;
    double best_chi2 = std::numeric_limits<double>::infinity();
    for (double a = alpha_min; a <= alpha_max; a += step) {
        const double c2 = detail::profile_fit(x, y, sw, a).chi2;
        if (c2 < best_chi2) {
            best_chi2 = c2;
            best_alpha = a;
        }
    }
    const auto refined = boost::math::tools::brent_find_minima(
        [&](double a) { return detail::profile_fit(x, y, sw, a).chi2; }, std::max(alpha_min / 2, best_alpha - step),
        best_alpha + step, std::numeric_limits<double>::digits / 2);
    const double alpha = refined.first;
    const auto pf = detail::profile_fit(x, y, sw, alpha);

    // Chi-square of the best constant, for the significance test.
    const double wsum = sw.squaredNorm();
    const double ybar = sw.cwiseProduct(sw).cwiseProduct(y).sum() / wsum;
    const double chi2_const = (sw.cwiseProduct(y.array().matrix() - Eigen::VectorXd::Constant(n, ybar))).squaredNorm();
    if (chi2_const - pf.chi2 < opt.min_delta_chi2)
        throw fit_error("no significant sinusoidal signal (chi2 improvement " + std::to_string(chi2_const - pf.chi2) +
                        " < " + std::to_string(opt.min_delta_chi2) + ")");

    CalibrationResult r;
    r.fit.offset = pf.offset;
    r.fit.amplitude = std::hypot(pf.cos_coef, pf.sin_coef);
    r.fit.alpha = alpha;
    double phi0 = std::atan2(pf.sin_coef, -pf.cos_coef) / 2;
    phi0 = std::fmod(phi0, std::numbers::pi);
    if (phi0 < 0) phi0 += std::numbers::pi;
    r.fit.phi0 = phi0;
    if (!(r.fit.amplitude > 0)) throw fit_error("fitted amplitude is zero");
    if (alpha * span < std::numbers::pi / 2)
        throw fit_error("sweep covers less than half a period of the fitted sinusoid");

    r.chi2 = pf.chi2;
    r.reduced_chi2 = n > 4 ? pf.chi2 / static_cast<double>(n - 4) : 0.0;

    const auto model = r.fit.model();
    const double lo = curve.points.front().voltage, hi = curve.points.back().voltage;
    constexpr double pi = std::numbers::pi;
    r.v_split = detail::first_crossing(model, pi / 2, pi, lo, hi);
    r.v_bunch = detail::first_crossing(model, 0.0, pi, lo, hi);
    r.v_mid = detail::first_crossing(model, pi / 4, pi / 2, lo, hi);
    return r;
}

enum class SweepMode : std::uint8_t {
    expected,   // analytic expectation x integration time, no noise
    poisson,    // expectation with Poisson-sampled counts
    monte_carlo // full timetag generation and coincidence counting per point
};

struct SweepSpec {
    int bsgu = 0;
    ThermoOpticModel heater;
    std::vector<double> voltages;
    double integration_s = 1.0;
    CoincidenceWindow window{300, 0};
    SweepMode mode = SweepMode::poisson;
};

/// Requires (u, v) to be an inter-subnet pair fed by both ports of the swept BSGU.
inline void check_calibration_pair(const NetworkTopology& topo, int bsgu, UserId u, UserId v)
{
    if (bsgu < 0 || bsgu >= topo.bsgu_count()) throw invalid_input("no BSGU " + std::to_string(bsgu));
    if (classify_link(topo, u, v) == LinkClass::intra)
        throw calibration_pair_error("calibration needs users in different subnets; users " + std::to_string(u) +
                                     " and " + std::to_string(v) + " share subnet " +
                                     std::to_string(topo.subnet_of(u)));
    const auto [a, b] = topo.wiring()[static_cast<std::size_t>(bsgu)];
    const auto su = topo.subnet_of(u), sv = topo.subnet_of(v);
    if (!((su == a && sv == b) || (su == b && sv == a)))
        throw calibration_pair_error("users " + std::to_string(u) + " and " + std::to_string(v) +
                                     " are not fed by the two ports of BSGU " + std::to_string(bsgu));
}

/// Coincidences on (u, v) versus the heater voltage of one BSGU; the other
/// BSGUs keep the scenario's phases. Each point has its own random stream.
inline CalibrationCurve simulate_sweep(const GenerationScenario& sc, UserId u, UserId v, const SweepSpec& spec,
                                       unsigned workers = 0)
{
    sc.validate();
    spec.heater.validate();
    spec.window.validate();
    check_calibration_pair(sc.topology, spec.bsgu, u, v);
    if (!(spec.integration_s > 0)) throw invalid_input("integration time must be > 0");

    CalibrationCurve curve;
    curve.integration_s = spec.integration_s;
    curve.points.resize(spec.voltages.size());
    detail::parallel_for(spec.voltages.size(), workers, [&](std::size_t i) {
        const double volts = spec.voltages[i];
        GenerationScenario point = sc;
        point.state = NetworkState::custom(sc.state.phases, sc.state.convention);
        point.state.phases.phi[static_cast<std::size_t>(spec.bsgu)] = phase_from_voltage(spec.heater, volts);
        point.source.duration_s = spec.integration_s;

        double counts = 0;
        switch (spec.mode) {
        case SweepMode::expected:
            counts = expected_coincidence_rate(point, u, v, static_cast<double>(spec.window.width_ps)) *
                     spec.integration_s;
            break;
        case SweepMode::poisson: {
            const double mean = expected_coincidence_rate(point, u, v, static_cast<double>(spec.window.width_ps)) *
                                spec.integration_s;
            KeyedRng rng(sc.source.seed, RngDomain::sweep, i);
            counts = mean > 0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(rng)) : 0.0;
            break;
        }
        case SweepMode::monte_carlo: {
            KeyedRng derive(sc.source.seed, RngDomain::sweep, i);
            point.source.seed = derive();
            point.recorded_users = {u, v};
            const auto streams = generate_timetags(point, 1);
            counts = static_cast<double>(count_coincidences(streams[static_cast<std::size_t>(u)],
                                                            streams[static_cast<std::size_t>(v)], spec.window)
                                             .coincidences);
            break;
        }
        }
        curve.points[i] = {volts, counts, std::sqrt(counts)};
    });
    curve.validate();
    return curve;
}

/// Evenly spaced voltages over [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

} // namespace cedn
