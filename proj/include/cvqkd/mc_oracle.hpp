#pragma once

// Shot-level Monte Carlo of the protocol against the two-mode attack, used
// as an end-to-end oracle for the analytic machinery: sampled correlations
// must reproduce the channel parameters and the sampled mutual information
// must approach its closed form.
//
// Randomness is counter-based: every draw is a pure function of
// (seed, round, stream), so parallel sharding over rounds is bit-identical
// to the serial path and any round can be replayed in isolation.

#include "cvqkd/keyrates.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cvqkd {

// Stateless Gaussian/uniform draws from (seed, round, stream) via a
// splitmix64-style mixer feeding a Box-Muller pair.
struct CounterRng {
    static std::pair<double, double> normal_pair(std::uint64_t seed, std::uint64_t round,
                                                 std::uint32_t stream);
    static double uniform(std::uint64_t seed, std::uint64_t round, std::uint32_t stream);
};

// One protocol run.  Vectors not applicable to the sampled circuit or
// detection stay empty; all others have n_rounds entries.
struct SampleBatch {
    ProtocolSpec spec;
    AttackParams attack;
    double mu = 0.0;
    std::uint64_t seed = 0;
    int n_rounds = 0;

    std::vector<double> beta_q, beta_p;        // Bob's forward modulation
    std::vector<double> alice_out_q, alice_out_p;  // OFF: Alice's measurement
    std::vector<double> alpha_q, alpha_p;      // OFF: Alice's re-preparation modulation
    std::vector<double> d_q, d_p;              // ON: Alice's displacement
    std::vector<double> bob_out_q, bob_out_p;  // OFF: Bob's measurement; ON: B = gamma - T beta
    std::vector<std::uint8_t> hom_quad;        // homodyne: 0 = q, 1 = p per round
};

SampleBatch sample_protocol_run(ProtocolSpec spec, const AttackParams& a, double mu, int n_rounds,
                                std::uint64_t seed);
SampleBatch sample_protocol_run_serial(ProtocolSpec spec, const AttackParams& a, double mu,
                                       int n_rounds, std::uint64_t seed);

struct MiEstimate {
    double bits_per_use;
    double std_error;  // deterministic block bootstrap
};

// Gaussian mutual-information estimate from sample correlations, averaged
// over directions (OFF) and quadratures exactly as the protocol keys are.
// Requires n_rounds >= 1000; throws std::domain_error on a batch whose
// outcomes are degenerate.
MiEstimate empirical_mutual_info(const SampleBatch& batch);

struct ChannelEstimate {
    double T, omega, g, gp;
    double se_T, se_omega, se_g, se_gp;
    bool correlations_available;  // false when 1 - T_hat is too small to divide by
};

// Regression estimates of (T, omega, g, g') from a circuit-OFF batch with
// both legs' disclosed modulations.  ON batches have no forward measurement
// record and are rejected.
ChannelEstimate estimate_channel(const SampleBatch& batch);

struct ConvergenceRow {
    double mu;
    double max_rel_err;  // numeric finite-mu spectra vs asymptotic closed forms
};

// Finite-mu Gaussian spectra compared against the asymptotic catalog along a
// mu ladder; the error must shrink as mu grows.
std::vector<ConvergenceRow> asymptotic_convergence_check(ProtocolSpec spec, const AttackParams& a,
                                                         const std::vector<double>& mu_ladder = {
                                                             1e2, 1e4, 1e6, 1e8});

// One row per (round, direction, quadrature) with the disclosed input and
// the measured outcome.
void export_csv(const SampleBatch& batch, std::ostream& os);

}  // namespace cvqkd
