#include "cedn/phase_control.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cedn;

namespace {

constexpr double pi = std::numbers::pi;

GenerationScenario sweep_scenario(double rate, std::uint64_t seed)
{
    GenerationScenario sc;
    sc.state = NetworkState::named(StateName::intra, sc.topology);
    sc.source = {rate, 1.0, seed};
    sc.detector = {1.0, 0.0, 0.0, 0};
    return sc;
}

SweepSpec spec(double phi0, double alpha, std::size_t points, double integration_s, SweepMode mode)
{
    SweepSpec s;
    s.bsgu = 0;
    s.heater = {phi0, alpha};
    s.voltages = linspace(0.0, 10.0, points);
    s.integration_s = integration_s;
    s.mode = mode;
    return s;
}

double wrap(double phi, double period)
{
    double r = std::fmod(phi, period);
    if (r < 0) r += period;
    return std::min(r, period - r);
}

} // namespace

TEST(PhaseFromVoltage, Examples)
{
    EXPECT_EQ(phase_from_voltage({0.0, 0.05}, 0.0), 0.0);
    EXPECT_NEAR(phase_from_voltage({0.2, 0.05}, 2.0), 0.4, 1e-15);
    const ThermoOpticModel m{0.0, 0.07};
    EXPECT_NEAR(phase_from_voltage(m, std::sqrt(pi / (2 * 0.07))), pi / 2, 1e-12);
    EXPECT_THROW(phase_from_voltage(m, -0.1), invalid_input);
    EXPECT_NEAR(*voltage_for_phase({0.2, 0.05}, 0.4), 2.0, 1e-12);
    EXPECT_FALSE(voltage_for_phase({0.5, 0.05}, 0.4).has_value());
}

TEST(ThermoOpticModel, Validation)
{
    EXPECT_THROW((ThermoOpticModel{0.0, 0.0}).validate(), invalid_input);
    EXPECT_THROW((ThermoOpticModel{std::nan(""), 0.1}).validate(), invalid_input);
    EXPECT_NO_THROW((ThermoOpticModel{0.3, 0.05}).validate());
}

TEST(SimulateSweep, ExtremaAtSplitAndBunch)
{
    const auto sc = sweep_scenario(6.4e4, 1);
    auto s = spec(0.0, 0.05, 2, 1.0, SweepMode::expected);
    s.voltages = {std::sqrt(pi / 2 / 0.05), std::sqrt(pi / 0.05)};
    const auto c = simulate_sweep(sc, 0, 8, s);
    EXPECT_NEAR(c.points[0].counts, 1000.0, 1.0);
    EXPECT_LT(c.points[1].counts, 1.0);
}

TEST(SimulateSweep, IntraPairIsAntiPhase)
{
    // Inter pair maximal where the intra pair of the same BSGU is minimal.
    auto sc = sweep_scenario(6.4e4, 1);
    sc.state = NetworkState::custom(PhaseSettings{{0.0, pi / 2, pi / 2}});
    double prev_inter = -1, prev_intra = 1e300;
    for (double phi = 0; phi <= pi / 2 + 1e-12; phi += pi / 40) {
        sc.state.phases.phi[0] = phi;
        const double inter = expected_coincidence_rate(sc, 0, 8, 300);
        const double intra = expected_coincidence_rate(sc, 0, 1, 300);
        EXPECT_GT(inter, prev_inter);
        EXPECT_LT(intra, prev_intra);
        prev_inter = inter;
        prev_intra = intra;
    }
}

TEST(SimulateSweep, PairChecks)
{
    const auto sc = sweep_scenario(1e4, 1);
    const auto s = spec(0.3, 0.05, 10, 1.0, SweepMode::expected);
    EXPECT_THROW(simulate_sweep(sc, 0, 1, s), calibration_pair_error);
    EXPECT_THROW(simulate_sweep(sc, 0, 16, s), calibration_pair_error);
    EXPECT_NO_THROW(simulate_sweep(sc, 8, 3, s));
}

TEST(FitCalibration, NoiselessRoundTrip)
{
    const double phi0 = 0.3, alpha = 0.05;
    const auto curve = simulate_sweep(sweep_scenario(6.4e4, 1), 0, 8, spec(phi0, alpha, 40, 1.0, SweepMode::expected));
    const auto r = fit_calibration(curve);
    ASSERT_TRUE(r.v_split && r.v_bunch && r.v_mid);
    EXPECT_NEAR(*r.v_split, std::sqrt((pi / 2 - phi0) / alpha), 1e-6);
    EXPECT_NEAR(*r.v_bunch, std::sqrt((pi - phi0) / alpha), 1e-6);
    EXPECT_NEAR(*r.v_mid, std::sqrt((pi / 4 - phi0) / alpha), 1e-6);
    EXPECT_NEAR(r.fit.alpha, alpha, 1e-7);
    EXPECT_NEAR(r.fit.phi0, phi0, 1e-6);
    EXPECT_GT(r.fit.amplitude, 0.0);
}

TEST(FitCalibration, PoissonRoundTripWithinOnePercent)
{
    // 4e5 peak counts over 40 points; the phase offset is then known to
    // ~5e-4 rad, well inside 1% of 0.3.
    const double phi0 = 0.3, alpha = 0.05;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto curve =
            simulate_sweep(sweep_scenario(2.56e5, seed), 0, 8, spec(phi0, alpha, 40, 100.0, SweepMode::poisson));
        double peak = 0;
        for (const auto& p : curve.points) peak = std::max(peak, p.counts);
        ASSERT_GE(peak, 1000.0);
        const auto r = fit_calibration(curve);
        EXPECT_NEAR(r.fit.alpha, alpha, 0.01 * alpha) << seed;
        EXPECT_NEAR(r.fit.phi0, phi0, 0.01 * phi0) << seed;
        ASSERT_TRUE(r.v_split && r.v_bunch);
        EXPECT_LT(wrap(phase_from_voltage(r.fit.model(), *r.v_split) - pi / 2, pi), 1e-9);
        EXPECT_LT(wrap(phase_from_voltage(r.fit.model(), *r.v_bunch), pi), 1e-9);
        EXPECT_LT(r.reduced_chi2, 2.0);
    }
}

TEST(FitCalibration, MonteCarloSweepFindsSplitVoltage)
{
    const double phi0 = 0.4, alpha = 0.05;
    const auto curve =
        simulate_sweep(sweep_scenario(6.4e4, 9), 0, 8, spec(phi0, alpha, 41, 1.0, SweepMode::monte_carlo));
    const auto r = fit_calibration(curve);
    ASSERT_TRUE(r.v_split);
    EXPECT_NEAR(*r.v_split, std::sqrt((pi / 2 - phi0) / alpha), 0.1);
}

TEST(FitCalibration, Failures)
{
    CalibrationCurve flat;
    for (int i = 0; i < 20; ++i) flat.points.push_back({0.5 * i, 100.0, 10.0});
    EXPECT_THROW(fit_calibration(flat), fit_error);

    CalibrationCurve few;
    for (int i = 0; i < 5; ++i) few.points.push_back({1.0 * i, 100.0 * i, 10.0});
    EXPECT_THROW(fit_calibration(few), fit_error);

    CalibrationCurve unsorted;
    for (int i = 0; i < 10; ++i) unsorted.points.push_back({10.0 - i, 1.0 * i, 1.0});
    EXPECT_THROW(fit_calibration(unsorted), invalid_input);
}

TEST(FitCalibration, ExtremaOutsideSweptRangeAreAbsent)
{
    // Half a period only: the maximum is reached, the next minimum is not.
    auto s = spec(0.3, 0.05, 40, 1.0, SweepMode::expected);
    s.voltages = linspace(0.0, 6.5, 40);
    const auto r = fit_calibration(simulate_sweep(sweep_scenario(6.4e4, 1), 0, 8, s));
    ASSERT_TRUE(r.v_split);
    EXPECT_NEAR(*r.v_split, std::sqrt((pi / 2 - 0.3) / 0.05), 1e-4);
    EXPECT_FALSE(r.v_bunch.has_value());
}
