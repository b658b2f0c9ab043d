#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "colddamp/fitting.hpp"
#include "colddamp/transient.hpp"
#include "oracles.hpp"

using namespace colddamp;
using Catch::Approx;

namespace {
const OscillatorMode si_mode(230e-6, 2.0 * M_PI * 1858.6e3, 2.0 * M_PI * 43.0, 300.0);
}

TEST_CASE("schedule validation") {
    REQUIRE_NOTHROW(validate_schedule({{0.0, SwitchEvent::Kind::LoopOn},
                                       {1.0, SwitchEvent::Kind::LoopOff}}));
    REQUIRE_THROWS_AS(validate_schedule({{1.0, SwitchEvent::Kind::LoopOn},
                                         {1.0, SwitchEvent::Kind::LoopOff}}),
                      std::domain_error);
    REQUIRE_THROWS_AS(validate_schedule({{-0.5, SwitchEvent::Kind::LoopOn}}), std::domain_error);
    REQUIRE_THROWS_AS(MonochromaticDrive(-1.0, 1.0), std::domain_error);
}

TEST_CASE("variance relaxation when the loop closes") {
    const FeedbackGain g(5.2);
    const double var_t = si_mode.thermal_variance();
    REQUIRE(variance_after_loop_on(si_mode, g, 0.0) == Approx(var_t).epsilon(1e-12));
    REQUIRE(variance_after_loop_on(si_mode, g, 1e3) == Approx(var_t / 6.2).epsilon(1e-9));

    // decaying part loses 1/e at t = 1/Gamma_fb ~ 0.6 ms
    const double gamma_fb = effective_damping(si_mode.gamma, g);
    const double tau_on = 1.0 / gamma_fb;
    REQUIRE(tau_on == Approx(0.597e-3).epsilon(1e-3));
    const double excess0 = variance_after_loop_on(si_mode, g, 0.0) - var_t / 6.2;
    const double excess1 = variance_after_loop_on(si_mode, g, tau_on) - var_t / 6.2;
    REQUIRE(excess1 / excess0 == Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("variance relaxation when the loop opens") {
    const FeedbackGain g(5.2);
    const double var_t = si_mode.thermal_variance();
    REQUIRE(variance_after_loop_off(si_mode, g, 0.0) == Approx(var_t / 6.2).epsilon(1e-12));
    REQUIRE(variance_after_loop_off(si_mode, g, 10.0) == Approx(var_t).epsilon(1e-9));

    const double tau_off = 1.0 / si_mode.gamma;
    REQUIRE(tau_off == Approx(3.70e-3).epsilon(1e-2));
    REQUIRE(tau_off / (1.0 / effective_damping(si_mode.gamma, g)) == Approx(6.2).epsilon(1e-12));
}

TEST_CASE("relaxation continuity across a switch pair") {
    const FeedbackGain g(3.7);
    const double cooled = variance_after_loop_on(si_mode, g, 1e3);  // settled cooled state
    REQUIRE(variance_after_loop_off(si_mode, g, 0.0) == Approx(cooled).epsilon(1e-9));
    const double hot = variance_after_loop_off(si_mode, g, 1e3);
    REQUIRE(variance_after_loop_on(si_mode, g, 0.0) == Approx(hot).epsilon(1e-9));
}

TEST_CASE("fitted time-constant ratio equals 1+g") {
    const FeedbackGain g(5.2);
    const OscillatorMode mode = natural_mode(50.0);
    const double gamma_fb = effective_damping(mode.gamma, g);

    std::vector<double> t_on, v_on, t_off, v_off;
    for (int i = 0; i <= 400; ++i) {
        const double ta = 6.0 / gamma_fb * i / 400.0;
        t_on.push_back(ta);
        v_on.push_back(variance_after_loop_on(mode, g, ta));
        const double tb = 6.0 / mode.gamma * i / 400.0;
        t_off.push_back(tb);
        v_off.push_back(variance_after_loop_off(mode, g, tb));
    }
    const ExponentialFit fit_on = fit_exponential(t_on, v_on);
    const ExponentialFit fit_off = fit_exponential(t_off, v_off);
    REQUIRE(fit_on.converged);
    REQUIRE(fit_off.converged);
    REQUIRE(fit_on.rate == Approx(gamma_fb).epsilon(1e-9));
    REQUIRE(fit_off.rate == Approx(mode.gamma).epsilon(1e-9));
    REQUIRE(fit_off.time_constant() / fit_on.time_constant() ==
            Approx(1.0 + g.g).epsilon(1e-9));
}

TEST_CASE("impulse response") {
    const OscillatorMode mode = natural_mode(5000.0);
    const FeedbackGain g(3.0);
    REQUIRE(impulse_response(mode, g, 0.0) == 0.0);

    // slope at zero is 1/M (Richardson finite difference)
    const double h = 1e-7;
    const double d1 = (impulse_response(mode, g, h) - impulse_response(mode, g, 0.0)) / h;
    const double d2 =
        (impulse_response(mode, g, 2.0 * h) - impulse_response(mode, g, 0.0)) / (2.0 * h);
    const double slope = 2.0 * d1 - d2;
    REQUIRE(slope == Approx(1.0 / mode.mass_eff).epsilon(1e-6));

    // envelope: at the quarter-phase instant closest to 2/Gamma_fb the
    // response touches exp(-Gamma_fb t / 2) / (M Omega_M) ~ 1/e of the start
    const double gamma_fb = effective_damping(mode.gamma, g);
    const double target = 2.0 / gamma_fb;
    const double k = std::round((target * mode.omega_m - 0.5 * M_PI) / (2.0 * M_PI));
    const double t_star = (0.5 * M_PI + 2.0 * M_PI * k) / mode.omega_m;
    const double envelope = std::exp(-0.5 * gamma_fb * t_star) / (mode.mass_eff * mode.omega_m);
    REQUIRE(impulse_response(mode, g, t_star) == Approx(envelope).epsilon(1e-9));
    REQUIRE(envelope * mode.mass_eff * mode.omega_m == Approx(std::exp(-1.0)).epsilon(2e-3));
}

TEST_CASE("impulse response transforms to the closed-loop susceptibility") {
    const OscillatorMode mode = natural_mode(50.0);
    const FeedbackGain g(1.0);
    const double gamma_fb = effective_damping(mode.gamma, g);
    const auto [re, im] = oracles::fourier_integral(
        [&](double t) { return impulse_response(mode, g, t); }, mode.omega_m, 40.0 / gamma_fb,
        200000);
    const auto chi = closed_loop_susceptibility(mode, g, mode.omega_m);
    REQUIRE(re == Approx(chi.real()).margin(0.01 * std::abs(chi)));
    REQUIRE(im == Approx(chi.imag()).epsilon(0.01));
}

TEST_CASE("forced response envelopes") {
    const OscillatorMode mode = si_mode;
    const MonochromaticDrive drive(1e-12, mode.omega_m, 0.3);
    const double steady = drive.amplitude / (mode.mass_eff * mode.omega_m * mode.gamma);

    SECTION("build-up saturates at the resonant steady state") {
        REQUIRE(forced_response_on(mode, FeedbackGain(0.0), drive, 1.0) ==
                Approx(steady).epsilon(1e-9));
        REQUIRE(forced_response_on(mode, FeedbackGain(0.0), drive, 0.0) == 0.0);
        // amplitude time constant 2/Gamma ~ 7.4 ms; power fitted scale 2.8-3.7 ms
        const double a1 = forced_response_on(mode, FeedbackGain(0.0), drive, 2.0 / mode.gamma);
        REQUIRE(a1 / steady == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    }

    SECTION("cold damped build-up is faster by 1+g") {
        const FeedbackGain g(5.2);
        const double gamma_fb = effective_damping(mode.gamma, g);
        REQUIRE(2.0 / gamma_fb == Approx(2.0 / (6.2 * mode.gamma)).epsilon(1e-12));
        REQUIRE(2.0 / gamma_fb == Approx(1.19e-3).epsilon(1e-2));  // ~ the 0.5-0.6 ms pattern x2
        const double a = forced_response_on(mode, g, drive, 5.0);
        REQUIRE(a == Approx(steady / 6.2).epsilon(1e-9));
    }

    SECTION("decay continues from the forced steady state and halves on time") {
        const FeedbackGain g(0.0);
        REQUIRE(forced_response_off(mode, g, drive, 0.0) == Approx(steady).epsilon(1e-12));
        const double t_half = std::log(2.0) / mode.gamma;
        REQUIRE(forced_power_off(mode, g, drive, t_half) ==
                Approx(0.5 * forced_power_off(mode, g, drive, 0.0)).epsilon(1e-12));
    }

    SECTION("power decay rate fits 1/Gamma") {
        std::vector<double> t, p;
        for (int i = 0; i <= 300; ++i) {
            t.push_back(6.0 / mode.gamma * i / 300.0);
            p.push_back(forced_power_off(mode, FeedbackGain(0.0), drive, t.back()));
        }
        const double rate = oracles::log_linear_decay_rate(t, p);
        REQUIRE(rate == Approx(mode.gamma).epsilon(1e-6));
        REQUIRE(1.0 / rate == Approx(3.7e-3).epsilon(1e-2));
    }

    SECTION("off-resonance drive is rejected") {
        const MonochromaticDrive detuned(1e-12, 1.001 * mode.omega_m, 0.0);
        REQUIRE_THROWS_AS(forced_response_on(mode, FeedbackGain(0.0), detuned, 1.0),
                          UnsupportedModelError);
        REQUIRE_THROWS_AS(forced_response_off(mode, FeedbackGain(0.0), detuned, 1.0),
                          UnsupportedModelError);
    }
}

TEST_CASE("forced power build-up matches the quarter-square of the envelope") {
    const OscillatorMode mode = natural_mode(50.0);
    const MonochromaticDrive drive(0.01, mode.omega_m, 0.0);
    for (double g : {0.0, 5.2}) {
        for (double t : {0.1, 1.0, 30.0, 400.0}) {
            const double a = forced_response_on(mode, FeedbackGain(g), drive, t);
            REQUIRE(forced_power_on(mode, FeedbackGain(g), drive, t) ==
                    Approx(0.25 * a * a).epsilon(1e-12));
        }
    }
}

TEST_CASE("cyclic cooling steady cycle") {
    const OscillatorMode mode = natural_mode(200.0);
    const double var_t = mode.thermal_variance();

    SECTION("degenerate limits") {
        const auto always_on = cyclic_cooling_average(mode, FeedbackGain(9.0), 1.0, 0.0);
        REQUIRE(always_on.average_variance == Approx(var_t / 10.0).epsilon(1e-9));
        REQUIRE(always_on.duty_fraction == 1.0);

        const auto always_off = cyclic_cooling_average(mode, FeedbackGain(9.0), 0.0, 1.0);
        REQUIRE(always_off.average_variance == Approx(var_t).epsilon(1e-9));
        REQUIRE(always_off.duty_fraction == 0.0);

        REQUIRE_THROWS_AS(cyclic_cooling_average(mode, FeedbackGain(1.0), 0.0, 0.0),
                          std::domain_error);
    }

    SECTION("independent fixed-point iteration oracle") {
        const FeedbackGain g(100.0);
        const double gamma_fb = effective_damping(mode.gamma, g);
        const double t_cool = 5.0 / gamma_fb;
        const double t_free = 0.2 / mode.gamma;

        // iterate the two-phase map numerically and integrate by Simpson
        const double v_cold = var_t / (1.0 + g.g);
        double v = var_t;
        for (int cycle = 0; cycle < 400; ++cycle) {
            const double v1 = v_cold + (v - v_cold) * std::exp(-gamma_fb * t_cool);
            v = var_t + (v1 - var_t) * std::exp(-mode.gamma * t_free);
        }
        auto cool_phase = [&](double t) {
            return v_cold + (v - v_cold) * std::exp(-gamma_fb * t);
        };
        const double v1 = cool_phase(t_cool);
        auto free_phase = [&](double t) { return var_t + (v1 - var_t) * std::exp(-mode.gamma * t); };
        const double mean = (oracles::adaptive_simpson(cool_phase, 0.0, t_cool, 1e-14) +
                             oracles::adaptive_simpson(free_phase, 0.0, t_free, 1e-14)) /
                            (t_cool + t_free);

        const auto result = cyclic_cooling_average(mode, g, t_cool, t_free);
        REQUIRE(result.average_variance == Approx(mean).epsilon(1e-9));
        REQUIRE(result.cycle_start_variance == Approx(v).epsilon(1e-9));
        REQUIRE(result.average_variance < 0.25 * var_t);  // well below equilibrium
        REQUIRE(result.duty_fraction < 0.2);

        // a slightly longer free phase brings the duty below 15% and stays cold
        const auto longer = cyclic_cooling_average(mode, g, t_cool, 0.3 / mode.gamma);
        REQUIRE(longer.duty_fraction < 0.15);
        REQUIRE(longer.average_variance < 0.3 * var_t);
    }
}
