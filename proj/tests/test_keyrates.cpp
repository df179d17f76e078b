#include "cvqkd/keyrates.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace cvqkd;

namespace {

const std::vector<ProtocolSpec> kAllSpecs = [] {
    std::vector<ProtocolSpec> v;
    for (auto det : {Detection::heterodyne, Detection::homodyne})
        for (auto rec : {Reconciliation::direct, Reconciliation::reverse})
            for (auto circ : {Circuit::on, Circuit::off, Circuit::one_way})
                v.push_back({det, rec, circ});
    return v;
}();

AttackParams for_spec(const ProtocolSpec& s, const AttackParams& a) {
    if (s.circuit == Circuit::on) return {a.T, a.omega, 0.0, 0.0};
    return a;
}

// rejection-sample a strictly physical correlated attack
AttackParams random_attack(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uT(0.05, 0.95), uw(1.0, 1.6), u(-1.0, 1.0);
    for (;;) {
        const double T = uT(rng), w = uw(rng);
        const double e = std::sqrt(std::max(0.0, w * w - 1.0));
        const AttackParams a{T, w, 0.95 * e * u(rng), 0.95 * e * u(rng)};
        if (validate(a).ok) return a;
    }
}

}  // namespace

TEST_CASE("divergent log(mu) parts of I and chi cancel exactly") {
    const AttackParams a{0.3, 1.097, 0.2, -0.15};
    for (const auto& spec : kAllSpecs) {
        const auto rb = key_rate(spec, for_spec(spec, a));
        CHECK(rb.mutual_information.mu_coeff == rb.holevo_bound.mu_coeff);
        CHECK(rb.rate ==
              doctest::Approx(rb.mutual_information.constant - rb.holevo_bound.constant)
                  .epsilon(1e-15));
    }
}

TEST_CASE("rate is invariant under a global sign flip of the correlations") {
    const double T = 0.3, w = 1.097;
    for (auto det : {Detection::heterodyne, Detection::homodyne})
        for (auto rec : {Reconciliation::direct, Reconciliation::reverse}) {
            const ProtocolSpec spec{det, rec, Circuit::off};
            const double r1 = key_rate(spec, {T, w, 0.3, -0.2}).rate;
            const double r2 = key_rate(spec, {T, w, -0.3, 0.2}).rate;
            CHECK(r1 == doctest::Approx(r2).epsilon(1e-14));
        }
}

TEST_CASE("OFF with uncorrelated ancillas degenerates to the one-way rate") {
    for (const auto& [T, w] : std::vector<std::pair<double, double>>{{0.3, 1.097}, {0.2, 1.049}})
        for (auto det : {Detection::heterodyne, Detection::homodyne})
            for (auto rec : {Reconciliation::direct, Reconciliation::reverse}) {
                const AttackParams a{T, w, 0.0, 0.0};
                const auto off = key_rate({det, rec, Circuit::off}, a);
                const auto ow = key_rate({det, rec, Circuit::one_way}, a);
                CHECK(off.rate == doctest::Approx(ow.rate).epsilon(1e-12));
                CHECK(off.mutual_information.constant ==
                      doctest::Approx(ow.mutual_information.constant).epsilon(1e-12));
                CHECK(off.holevo_bound.constant ==
                      doctest::Approx(ow.holevo_bound.constant).epsilon(1e-12));
            }
}

TEST_CASE("closed forms agree with the finite-mu Gaussian model") {
    std::mt19937_64 rng(42);
    const double mu = 1e8;
    for (int trial = 0; trial < 100; ++trial) {
        const AttackParams a = random_attack(rng);
        for (const auto& spec : kAllSpecs) {
            const AttackParams ap = for_spec(spec, a);
            const double closed = key_rate(spec, ap).rate;
            const double numeric = key_rate_numeric(spec, ap, mu);
            CHECK(std::abs(closed - numeric) < 1e-3);
        }
    }
}

TEST_CASE("rate is non-increasing in the ancilla variance") {
    for (const auto& spec : kAllSpecs) {
        double prev = std::numeric_limits<double>::infinity();
        for (double w = 1.0; w <= 1.5 + 1e-12; w += 0.05) {
            const double r = key_rate(spec, {0.3, w, 0.0, 0.0}).rate;
            CHECK(r <= prev + 1e-12);
            prev = r;
        }
    }
}

TEST_CASE("Holevo constants at a reference point") {
    const double T = 0.3, w = 1.097;
    const AttackParams a{T, w, 0.0, 0.0};
    const double e = std::exp(1.0);

    SUBCASE("heterodyne, direct, ON") {
        const auto chi = holevo({Detection::heterodyne, Reconciliation::direct, Circuit::on}, a);
        CHECK(chi.constant ==
              doctest::Approx(std::log2(e * (1 - T) / (2 * (1 + T))) + entropy_h(w)).epsilon(1e-12));
        CHECK(chi.mu_coeff == 1.0);
    }

    SUBCASE("homodyne, reverse, ON") {
        const double K = T * T + w + T * T * T * (w - 1.0);
        const double nu_t = std::sqrt(w * (1 + T * T * w - T * T * T * (w - 1.0)) / K);
        const auto chi = holevo({Detection::homodyne, Reconciliation::reverse, Circuit::on}, a);
        CHECK(chi.constant ==
              doctest::Approx(0.5 * std::log2(T * (1 - T) / K) + entropy_h(w) - entropy_h(nu_t))
                  .epsilon(1e-12));
        CHECK(chi.mu_coeff == 0.5);
    }

    SUBCASE("one-way heterodyne, reverse") {
        const auto chi =
            holevo({Detection::heterodyne, Reconciliation::reverse, Circuit::one_way}, a);
        CHECK(chi.constant == doctest::Approx(std::log2(e * (1 - T) / 2) + entropy_h(w) -
                                              entropy_h((1 + (1 - T) * w) / T))
                                  .epsilon(1e-12));
    }
}

TEST_CASE("ON state constructions") {
    const AttackParams a{0.3, 1.097, 0.0, 0.0};
    const double mu = 1e8;

    SUBCASE("no modulation, no noise leaves Eve with vacuum") {
        const auto v = build_eve_on_cm({0.5, 1.0, 0.0, 0.0}, 1.0, 0.0);
        for (double nu : symplectic_spectrum(v).values) CHECK(nu == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("direct-reconciliation conditional spectrum") {
        // Eve's state given Alice's displacement: {1, 1, omega, (1 - T^2) mu}
        const auto nus = symplectic_spectrum(build_eve_on_cm(a, mu + 1.0, 0.0)).values;
        REQUIRE(nus.size() == 4);
        std::vector<double> s(nus.begin(), nus.end());
        std::sort(s.begin(), s.end());
        CHECK(std::abs(s[0] - 1.0) < 1e-6);
        CHECK(std::abs(s[1] - 1.0) < 1e-6);
        CHECK(s[2] == doctest::Approx(a.omega).epsilon(1e-7));
        CHECK(s[3] == doctest::Approx((1 - a.T * a.T) * mu).epsilon(1e-6));
    }

    SUBCASE("reverse-reconciliation conditional spectrum carries nu-tilde") {
        const double T = a.T, w = a.omega;
        const double K = T * T + w + T * T * T * (w - 1.0);
        const double nu_t = std::sqrt(w * (1 + T * T * w - T * T * T * (w - 1.0)) / K);
        const auto vb = build_eve_on_rr_cm(a, mu);
        REQUIRE(vb.n_modes() == 5);
        for (auto quad : {Quadrature::q, Quadrature::p}) {
            const auto nus = symplectic_spectrum(condition_homodyne(vb, 4, quad)).values;
            std::vector<double> s(nus.begin(), nus.end());
            std::sort(s.begin(), s.end());
            CHECK(s[0] == doctest::Approx(nu_t).epsilon(1e-4));
            CHECK(s[1] == doctest::Approx(w).epsilon(1e-6));
        }
    }

    SUBCASE("stable heterodyne conditional eigenvalues and their product") {
        const double T = a.T, w = a.omega;
        const auto s = on_rr_conditional_spectrum(a, mu);
        double prod = s[0] * s[1] * s[2];
        const double closed =
            (1 + T * T * T + (1 - T) * (1 + T * T) * w) * w / (T * (1 + T));
        CHECK(prod == doctest::Approx(closed).epsilon(2e-4));
        for (double nu : s) CHECK(nu >= 1.0 - 1e-9);
    }
}

TEST_CASE("finite-mu mutual information approaches the asymptote") {
    const AttackParams a{0.3, 1.097, 0.2, -0.15};
    for (const auto& spec : kAllSpecs) {
        const AttackParams ap = for_spec(spec, a);
        const auto asym = mutual_info(spec, ap);
        double prev_gap = std::numeric_limits<double>::infinity();
        for (double mu : {1e2, 1e4, 1e6}) {
            const double gap = std::abs(finite_mu_mutual_info(spec, ap, mu) - asym.eval(mu));
            CHECK(gap < prev_gap + 1e-15);
            prev_gap = gap;
        }
        CHECK(prev_gap < 1e-4);
    }
}

TEST_CASE("domain errors") {
    // ON only covers uncorrelated ancillas
    CHECK_THROWS_AS(
        key_rate({Detection::heterodyne, Reconciliation::reverse, Circuit::on},
                 AttackParams{0.3, 1.2, 0.1, -0.1}),
        unsupported_combination);

    // transmissivity outside the clamp
    CHECK_THROWS_AS(key_rate({Detection::heterodyne, Reconciliation::reverse, Circuit::off},
                             AttackParams{1e-5, 1.2, 0.0, 0.0}),
                    std::domain_error);
    CHECK_THROWS_AS(key_rate({Detection::heterodyne, Reconciliation::reverse, Circuit::off},
                             AttackParams{1.0 - 1e-5, 1.2, 0.0, 0.0}),
                    std::domain_error);

    // unphysical correlations
    CHECK_THROWS_AS(key_rate({Detection::heterodyne, Reconciliation::reverse, Circuit::off},
                             AttackParams{0.3, 1.2, 1.0, 1.0}),
                    std::domain_error);

    // one-way ignores the correlations instead of rejecting them
    const double r0 = key_rate({Detection::homodyne, Reconciliation::direct, Circuit::one_way},
                               AttackParams{0.3, 1.2, 0.0, 0.0})
                          .rate;
    const double r1 = key_rate({Detection::homodyne, Reconciliation::direct, Circuit::one_way},
                               AttackParams{0.3, 1.2, 0.3, -0.3})
                          .rate;
    CHECK(r0 == r1);
}
