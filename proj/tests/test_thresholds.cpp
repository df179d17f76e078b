#include "cvqkd/thresholds.hpp"

#include "doctest.h"

#include <cmath>
#include <vector>

using namespace cvqkd;

namespace {

double rate_at(ProtocolSpec spec, double T, CorrelationRule rule, double N) {
    const double omega = omega_from_excess(T, N);
    const auto p = correlations_for(rule, omega);
    return key_rate(spec, {T, omega, p.g, p.gp}).rate;
}

}  // namespace

TEST_CASE("solver postcondition: the rate vanishes at the threshold") {
    for (auto det : {Detection::heterodyne, Detection::homodyne})
        for (auto circ : {Circuit::on, Circuit::off, Circuit::one_way}) {
            const ProtocolSpec spec{det, Reconciliation::reverse, circ};
            const auto rule =
                circ == Circuit::off ? CorrelationRule::max_entangled : CorrelationRule::collective;
            const auto res = solve_threshold(spec, 0.3, rule);
            REQUIRE(res.status == "ok");
            CHECK(std::abs(rate_at(spec, 0.3, rule, res.N_star)) <= 1e-6);
            CHECK(res.omega_star == doctest::Approx(omega_from_excess(0.3, res.N_star)).epsilon(1e-12));
            // just inside the threshold the rate is positive
            CHECK(rate_at(spec, 0.3, rule, 0.99 * res.N_star) > 0.0);
        }
}

TEST_CASE("threshold statuses") {
    // direct reconciliation beyond the 3 dB point: no key even at N = 0
    const ProtocolSpec dr{Detection::heterodyne, Reconciliation::direct, Circuit::one_way};
    const auto res = solve_threshold(dr, 0.2, CorrelationRule::collective);
    CHECK(res.status == "insecure-at-zero");
    CHECK(res.N_star == 0.0);

    // OFF against the strongest entangled ancillas tolerates several units of
    // excess noise; with a small cap the bracket escapes and the result is open
    const ProtocolSpec rr{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
    const auto open = solve_threshold(rr, 0.3, CorrelationRule::max_entangled, 1e-8, 2.0);
    CHECK(open.status == "open");
    CHECK(open.N_star == 2.0);
}

TEST_CASE("reference thresholds at T = 0.3, heterodyne, reverse") {
    const double T = 0.3;
    const auto at = [&](Circuit c, CorrelationRule rule) {
        return solve_threshold({Detection::heterodyne, Reconciliation::reverse, c}, T, rule).N_star;
    };
    CHECK(at(Circuit::on, CorrelationRule::collective) == doctest::Approx(0.3156).epsilon(2e-3));
    CHECK(at(Circuit::one_way, CorrelationRule::collective) == doctest::Approx(0.2242).epsilon(2e-3));
    CHECK(at(Circuit::off, CorrelationRule::max_entangled) == doctest::Approx(4.6555).epsilon(2e-3));
    CHECK(at(Circuit::off, CorrelationRule::max_separable) == doctest::Approx(0.2902).epsilon(2e-3));
    CHECK(at(Circuit::off, CorrelationRule::anti_separable) == doctest::Approx(0.2341).epsilon(2e-3));
    CHECK(at(Circuit::off, CorrelationRule::collective) == doctest::Approx(0.2242).epsilon(2e-3));
}

TEST_CASE("parallel curve matches the serial one bit for bit") {
    std::vector<double> grid;
    for (int i = 1; i <= 24; ++i) grid.push_back(i / 25.0);
    const ProtocolSpec spec{Detection::homodyne, Reconciliation::reverse, Circuit::off};
    const auto par = threshold_curve(spec, grid, CorrelationRule::max_entangled);
    const auto ser = threshold_curve_serial(spec, grid, CorrelationRule::max_entangled);
    REQUIRE(par.results.size() == ser.results.size());
    for (size_t i = 0; i < par.results.size(); ++i) {
        CHECK(par.results[i].N_star == ser.results[i].N_star);
        CHECK(par.results[i].omega_star == ser.results[i].omega_star);
        CHECK(par.results[i].status == ser.results[i].status);
    }
}

TEST_CASE("correlations_for matches the boundary construction") {
    const double omega = 1.3;
    const double e = std::sqrt(omega * omega - 1.0);
    CHECK(correlations_for(CorrelationRule::collective, omega).g == 0.0);
    CHECK(correlations_for(CorrelationRule::max_separable, omega).g ==
          doctest::Approx(omega - 1.0).epsilon(1e-15));
    CHECK(correlations_for(CorrelationRule::max_separable, omega).gp ==
          doctest::Approx(omega - 1.0).epsilon(1e-15));
    CHECK(correlations_for(CorrelationRule::anti_separable, omega).gp ==
          doctest::Approx(-(omega - 1.0)).epsilon(1e-15));
    CHECK(correlations_for(CorrelationRule::max_entangled, omega).g == doctest::Approx(e).epsilon(1e-15));
    CHECK(correlations_for(CorrelationRule::max_entangled, omega).gp ==
          doctest::Approx(-e).epsilon(1e-15));

    CHECK(to_string(CorrelationRule::collective) == "collective");
    CHECK(to_string(CorrelationRule::max_separable) == "max-separable");
    CHECK(to_string(CorrelationRule::anti_separable) == "anti-separable");
    CHECK(to_string(CorrelationRule::max_entangled) == "max-entangled");
}

TEST_CASE("post-selection picks the circuit by attack class") {
    const double T = 0.3, omega = 1.097;
    const double e = std::sqrt(omega * omega - 1.0);

    const auto col = postselect(Detection::heterodyne, Reconciliation::reverse, {T, omega, 0, 0});
    CHECK(col.attack_class == AttackClass::collective);
    CHECK(col.choice == Circuit::on);
    CHECK(col.rate.rate ==
          key_rate({Detection::heterodyne, Reconciliation::reverse, Circuit::on}, {T, omega, 0, 0})
              .rate);

    const auto ent =
        postselect(Detection::heterodyne, Reconciliation::reverse, {T, omega, e, -e});
    CHECK(ent.attack_class == AttackClass::entangled);
    CHECK(ent.choice == Circuit::off);

    const auto sep = postselect(Detection::heterodyne, Reconciliation::reverse,
                                {T, omega, omega - 1.0, omega - 1.0});
    CHECK(sep.attack_class == AttackClass::separable_correlated);
    CHECK(sep.choice == Circuit::off);

    // within tau_g the correlations are treated as noise on a collective attack
    const auto near = postselect(Detection::heterodyne, Reconciliation::reverse,
                                 {T, omega, 1e-3, -1e-3}, 1e-2);
    CHECK(near.choice == Circuit::on);
}

TEST_CASE("superadditivity scan stays above the one-way rate") {
    std::vector<double> Ts{0.15, 0.3, 0.5, 0.7}, omegas{1.0, 1.05, 1.097, 1.2};
    const auto rep =
        superadditivity_scan(Detection::heterodyne, Reconciliation::reverse, Ts, omegas, 8);
    CHECK(rep.violations.empty());
    CHECK(rep.min_margin >= -1e-9);
    CHECK(rep.points.size() >= Ts.size() * omegas.size());

    const auto ser =
        superadditivity_scan_serial(Detection::heterodyne, Reconciliation::reverse, Ts, omegas, 8);
    REQUIRE(ser.points.size() == rep.points.size());
    CHECK(ser.min_margin == rep.min_margin);
    for (size_t i = 0; i < rep.points.size(); ++i) {
        CHECK(rep.points[i].R_post == ser.points[i].R_post);
        CHECK(rep.points[i].R_oneway == ser.points[i].R_oneway);
    }
}
