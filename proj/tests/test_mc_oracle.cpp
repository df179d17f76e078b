#include "cvqkd/mc_oracle.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace cvqkd;

namespace {

double sample_var(const std::vector<double>& x) {
    double s = 0.0, s2 = 0.0;
    for (double v : x) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(x.size());
    const double m = s / n;
    return s2 / n - m * m;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("counter RNG is a pure function of (seed, round, stream)") {
    const auto a = CounterRng::normal_pair(12, 345, 6);
    const auto b = CounterRng::normal_pair(12, 345, 6);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(CounterRng::normal_pair(12, 345, 7).first != a.first);
    CHECK(CounterRng::normal_pair(12, 346, 6).first != a.first);
    CHECK(CounterRng::normal_pair(13, 345, 6).first != a.first);
    const double u = CounterRng::uniform(1, 2, 3);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}

TEST_CASE("parallel sampler is bit-identical to the serial one") {
    const AttackParams a{0.3, 1.097, 0.2, -0.2};

    SUBCASE("heterodyne OFF") {
        const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
        const auto p = sample_protocol_run(spec, a, 20.0, 5000, 99);
        const auto s = sample_protocol_run_serial(spec, a, 20.0, 5000, 99);
        REQUIRE(p.n_rounds == s.n_rounds);
        for (int i = 0; i < p.n_rounds; ++i) {
            CHECK(p.beta_q[i] == s.beta_q[i]);
            CHECK(p.alice_out_p[i] == s.alice_out_p[i]);
            CHECK(p.alpha_q[i] == s.alpha_q[i]);
            CHECK(p.bob_out_q[i] == s.bob_out_q[i]);
            CHECK(p.bob_out_p[i] == s.bob_out_p[i]);
        }
    }

    SUBCASE("homodyne ON") {
        const ProtocolSpec spec{Detection::homodyne, Reconciliation::reverse, Circuit::on};
        const AttackParams col{0.3, 1.097, 0.0, 0.0};
        const auto p = sample_protocol_run(spec, col, 15.0, 5000, 7);
        const auto s = sample_protocol_run_serial(spec, col, 15.0, 5000, 7);
        for (int i = 0; i < p.n_rounds; ++i) {
            CHECK(p.hom_quad[i] == s.hom_quad[i]);
            CHECK(p.d_q[i] == s.d_q[i]);
            if (p.hom_quad[i] == 0)
                CHECK(p.bob_out_q[i] == s.bob_out_q[i]);
            else
                CHECK(p.bob_out_p[i] == s.bob_out_p[i]);
        }
    }
}

TEST_CASE("ON readout variance matches the preparation picture") {
    // Var(B) for B = gamma - T beta: T^2 + T mu + (1 - T^2) omega, plus one
    // unit of heterodyne noise
    const double T = 0.3, w = 1.097, mu = 100.0;
    const int n = 200000;
    const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::on};
    const auto b = sample_protocol_run(spec, {T, w, 0.0, 0.0}, mu, n, 2024);

    const double expect = T * T + T * mu + (1 - T * T) * w + 1.0;
    const double se = expect * std::sqrt(2.0 / n);
    CHECK(std::abs(sample_var(b.bob_out_q) - expect) < 4.0 * se);
    CHECK(std::abs(sample_var(b.bob_out_p) - expect) < 4.0 * se);
}

TEST_CASE("lossless noiseless round trip leaves two units of shot noise") {
    // At T -> 1, omega = 1 the residual gamma - beta - d carries exactly the
    // preparation and detection vacuums: variance 2 in consistent shot-noise
    // units (the heterodyne unit does not absorb the preparation one).
    const double T = 1.0 - 1e-6;
    const int n = 100000;
    const ProtocolSpec spec{Detection::heterodyne, Reconciliation::direct, Circuit::on};
    const auto b = sample_protocol_run(spec, {T, 1.0, 0.0, 0.0}, 4.0, n, 5);

    std::vector<double> res_q(n), res_p(n);
    for (int i = 0; i < n; ++i) {
        // bob_out already subtracts T beta, so gamma - beta - d is
        // bob_out - (1 - T) beta - d
        res_q[i] = b.bob_out_q[i] - (1.0 - T) * b.beta_q[i] - b.d_q[i];
        res_p[i] = b.bob_out_p[i] - (1.0 - T) * b.beta_p[i] - b.d_p[i];
    }
    const double se = 2.0 * std::sqrt(2.0 / n);
    CHECK(std::abs(sample_var(res_q) - 2.0) < 4.0 * se);
    CHECK(std::abs(sample_var(res_p) - 2.0) < 4.0 * se);
}

TEST_CASE("empirical mutual information matches the finite-mu closed form") {
    const int n = 200000;
    const double mu = 20.0;

    SUBCASE("heterodyne OFF, correlated attack") {
        const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
        const AttackParams a{0.3, 1.097, 0.2, -0.2};
        const auto mi = empirical_mutual_info(sample_protocol_run(spec, a, mu, n, 31));
        const double closed = finite_mu_mutual_info(spec, a, mu);
        CHECK(mi.std_error > 0.0);
        CHECK(std::abs(mi.bits_per_use - closed) < 6.0 * std::max(mi.std_error, 1e-4));
    }

    SUBCASE("homodyne OFF") {
        const ProtocolSpec spec{Detection::homodyne, Reconciliation::direct, Circuit::off};
        const AttackParams a{0.4, 1.2, 0.1, 0.1};
        const auto mi = empirical_mutual_info(sample_protocol_run(spec, a, mu, n, 32));
        const double closed = finite_mu_mutual_info(spec, a, mu);
        CHECK(std::abs(mi.bits_per_use - closed) < 6.0 * std::max(mi.std_error, 1e-4));
    }

    SUBCASE("heterodyne ON") {
        const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::on};
        const AttackParams a{0.3, 1.097, 0.0, 0.0};
        const auto mi = empirical_mutual_info(sample_protocol_run(spec, a, mu, n, 33));
        const double closed = finite_mu_mutual_info(spec, a, mu);
        CHECK(std::abs(mi.bits_per_use - closed) < 6.0 * std::max(mi.std_error, 1e-4));
    }

    SUBCASE("homodyne one-way") {
        const ProtocolSpec spec{Detection::homodyne, Reconciliation::reverse, Circuit::one_way};
        const AttackParams a{0.5, 1.1, 0.0, 0.0};
        const auto mi = empirical_mutual_info(sample_protocol_run(spec, a, mu, n, 34));
        const double closed = finite_mu_mutual_info(spec, a, mu);
        CHECK(std::abs(mi.bits_per_use - closed) < 6.0 * std::max(mi.std_error, 1e-4));
    }
}

TEST_CASE("zero modulation carries zero information") {
    const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
    const auto mi = empirical_mutual_info(sample_protocol_run(spec, {0.3, 1.2, 0, 0}, 0.0, 2000, 1));
    CHECK(mi.bits_per_use == 0.0);
}

TEST_CASE("channel estimator recovers the attack parameters") {
    const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
    const AttackParams a{0.3, 1.097, 0.2, -0.2};
    const auto b = sample_protocol_run(spec, a, 20.0, 200000, 404);
    const auto est = estimate_channel(b);

    REQUIRE(est.correlations_available);
    CHECK(est.se_T > 0.0);
    CHECK(est.se_omega > 0.0);
    CHECK(std::abs(est.T - a.T) < 6.0 * est.se_T);
    CHECK(std::abs(est.omega - a.omega) < 6.0 * est.se_omega);
    CHECK(std::abs(est.g - a.g) < 6.0 * est.se_g);
    CHECK(std::abs(est.gp - a.gp) < 6.0 * est.se_gp);

    SUBCASE("homodyne batches estimate without detection noise correction") {
        const ProtocolSpec hspec{Detection::homodyne, Reconciliation::reverse, Circuit::off};
        const auto hb = sample_protocol_run(hspec, a, 20.0, 200000, 405);
        const auto hest = estimate_channel(hb);
        CHECK(std::abs(hest.T - a.T) < 6.0 * hest.se_T);
        CHECK(std::abs(hest.omega - a.omega) < 6.0 * hest.se_omega);
        CHECK(std::abs(hest.g - a.g) < 6.0 * hest.se_g);
        CHECK(std::abs(hest.gp - a.gp) < 6.0 * hest.se_gp);
    }

    SUBCASE("rejects batches it cannot estimate from") {
        const ProtocolSpec on{Detection::heterodyne, Reconciliation::reverse, Circuit::on};
        CHECK_THROWS_AS(
            estimate_channel(sample_protocol_run(on, {0.3, 1.1, 0, 0}, 20.0, 2000, 1)),
            std::domain_error);
        CHECK_THROWS_AS(estimate_channel(sample_protocol_run(spec, a, 0.0, 2000, 1)),
                        std::domain_error);
        CHECK_THROWS_AS(estimate_channel(sample_protocol_run(spec, a, 20.0, 999, 1)),
                        std::domain_error);
    }
}

TEST_CASE("finite-mu spectra converge to the asymptotic catalog") {
    const AttackParams off_attack{0.3, 1.097, 0.2, -0.15};
    const AttackParams col{0.3, 1.097, 0.0, 0.0};
    const std::vector<ProtocolSpec> specs = {
        {Detection::heterodyne, Reconciliation::reverse, Circuit::off},
        {Detection::heterodyne, Reconciliation::direct, Circuit::off},
        {Detection::homodyne, Reconciliation::reverse, Circuit::off},
        {Detection::homodyne, Reconciliation::direct, Circuit::off},
        {Detection::heterodyne, Reconciliation::reverse, Circuit::on},
        {Detection::heterodyne, Reconciliation::direct, Circuit::on},
        {Detection::homodyne, Reconciliation::reverse, Circuit::on},
        {Detection::heterodyne, Reconciliation::reverse, Circuit::one_way},
        {Detection::homodyne, Reconciliation::direct, Circuit::one_way},
    };
    for (const auto& spec : specs) {
        const AttackParams& a = spec.circuit == Circuit::off ? off_attack : col;
        const auto rows = asymptotic_convergence_check(spec, a);
        REQUIRE(rows.size() == 4);
        for (size_t i = 1; i < rows.size(); ++i)
            CHECK(rows[i].max_rel_err < rows[i - 1].max_rel_err * 1.01);
        CHECK(rows.back().max_rel_err < 1e-4);
    }
}

TEST_CASE("sample export shape") {
    const AttackParams a{0.3, 1.097, 0.0, 0.0};

    SUBCASE("heterodyne OFF: two directions, two quadratures per round") {
        const auto b = sample_protocol_run(
            {Detection::heterodyne, Reconciliation::reverse, Circuit::off}, a, 5.0, 3, 1);
        std::ostringstream os;
        export_csv(b, os);
        const std::string s = os.str();
        CHECK(count_lines(s) == 1 + 3 * 4);
        CHECK(s.rfind("round,direction,quadrature,input,outcome\n", 0) == 0);
        CHECK(s.find("0,forward,q,") != std::string::npos);
        CHECK(s.find("0,backward,p,") != std::string::npos);
    }

    SUBCASE("homodyne ON: one roundtrip row per round") {
        const auto b = sample_protocol_run(
            {Detection::homodyne, Reconciliation::reverse, Circuit::on}, a, 5.0, 3, 1);
        std::ostringstream os;
        export_csv(b, os);
        CHECK(count_lines(os.str()) == 1 + 3);
        CHECK(os.str().find("roundtrip") != std::string::npos);
    }

    SUBCASE("heterodyne one-way: forward rows only") {
        const auto b = sample_protocol_run(
            {Detection::heterodyne, Reconciliation::direct, Circuit::one_way}, a, 5.0, 2, 1);
        std::ostringstream os;
        export_csv(b, os);
        CHECK(count_lines(os.str()) == 1 + 2 * 2);
        CHECK(os.str().find("backward") == std::string::npos);
    }
}

TEST_CASE("sampler input validation") {
    const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
    CHECK_THROWS_AS(sample_protocol_run(spec, {0.3, 1.2, 0, 0}, -1.0, 100, 1), std::domain_error);
    CHECK_THROWS_AS(sample_protocol_run(spec, {0.3, 1.2, 0, 0}, 5.0, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_protocol_run(spec, {0.3, 1.2, 2.0, 2.0}, 5.0, 100, 1),
                    std::domain_error);
    CHECK_THROWS_AS(empirical_mutual_info(sample_protocol_run(spec, {0.3, 1.2, 0, 0}, 5.0, 999, 1)),
                    std::domain_error);
}
