#pragma once

// Asymptotic secret-key rates for the two-way Gaussian protocol and the
// one-way reduction, against the two-mode correlated attack.
//
// Protocol in brief: Bob sends a modulated coherent state through the
// forward pass; Alice either measures and re-prepares (circuit OFF, the key
// lives on the separate forward and backward legs) or applies a random
// displacement and reflects (circuit ON, the key is Bob's round-trip readout
// B = gamma - T beta against Alice's displacement).  Rates are bits per
// protocol use, Devetak-Winter R = I_shared - chi_Eve, in the large-
// modulation limit mu -> infinity.
//
// Every asymptotic quantity is an affine function of log2(mu); LogTerm keeps
// the two coefficients separate so the divergent parts of I and chi can be
// checked to cancel exactly instead of numerically.

#include "cvqkd/attack_model.hpp"
#include "cvqkd/gaussian_core.hpp"

#include <array>

namespace cvqkd {

enum class Detection { heterodyne, homodyne };
enum class Reconciliation { direct, reverse };
enum class Circuit { on, off, one_way };

struct ProtocolSpec {
    Detection det;
    Reconciliation rec;
    Circuit circuit;
};

// ON asks for uncorrelated ancillas; anything else is not a protocol the
// closed forms cover.
class unsupported_combination : public std::domain_error {
public:
    explicit unsupported_combination(const std::string& what) : std::domain_error(what) {}
};

// value(mu) = mu_coeff * log2(mu) + constant, the mu -> infinity expansion
// with o(1) dropped.
struct LogTerm {
    double mu_coeff = 0.0;
    double constant = 0.0;

    double eval(double mu) const;
};

// Channel combinations that recur across the closed forms.
struct DerivedScalars {
    double Lambda;        // T^2 + (1 - T^2) omega
    double Lambda_tilde;  // T + (1 - T) omega
    // Eve pair, labeled by branch (not by size): nu_minus = sqrt((omega - g)
    // (omega - g')), nu_plus = sqrt((omega + g)(omega + g'))
    double nu_minus, nu_plus;
};

struct RateBreakdown {
    ProtocolSpec spec;
    AttackParams attack;
    LogTerm mutual_information;
    LogTerm holevo_bound;
    double rate;  // mutual_information.constant - holevo_bound.constant
    // mu-independent parts of the relevant symplectic spectra, for audit
    std::vector<double> total_spectrum;
    std::vector<double> conditional_spectrum;
    DerivedScalars scalars;
};

// T is clamped to [1e-4, 1 - 1e-4]: outside that the asymptotic expressions
// are numerically meaningless.  Throws std::domain_error beyond the clamp.
inline constexpr double kMinT = 1e-4;

LogTerm mutual_info(ProtocolSpec spec, const AttackParams& a);
LogTerm holevo(ProtocolSpec spec, const AttackParams& a);
RateBreakdown key_rate(ProtocolSpec spec, const AttackParams& a);

// Eve's output state for circuit ON in the preparation picture: modes
// (P1, e1, P2, e2), where P1/P2 purify the per-pass ancillas and e1/e2 are
// the channel leakages.  mu_B = variance of Bob's prepared state (modulation
// + shot), mu_on = Alice's displacement variance.  Requires g = g' = 0.
CovarianceMatrix build_eve_on_cm(const AttackParams& a, double mu_B, double mu_on);

// Same state extended by Bob's post-processed readout B = gamma - T beta as
// a fifth, classical mode (its "p quadrature" is the p readout).  Used for
// reverse reconciliation: conditioning on mode 4 with the detection model
// yields Eve's state given Bob's key variable.
CovarianceMatrix build_eve_on_rr_cm(const AttackParams& a, double mu);

// Entanglement-based OFF state before either party measures: modes
// (B1, A2, A1, B2) = (Bob's retained half, Alice's retained half, forward
// channel output at Alice, backward channel output at Bob), with per-party
// source variances mu_B and mu_A.
CovarianceMatrix build_eb_off_cm(const AttackParams& a, double mu_A, double mu_B);

// Finite-mu rate from the Gaussian state directly (numeric entropies, no
// closed forms); approaches key_rate(...).rate as mu -> infinity.  The
// workhorse behind the convergence checks.
double key_rate_numeric(ProtocolSpec spec, const AttackParams& a, double mu);

// Shared information at finite modulation variance mu, closed form; tends to
// mutual_info(...).eval(mu) as mu grows.
double finite_mu_mutual_info(ProtocolSpec spec, const AttackParams& a, double mu);

// Finite-mu conditional spectrum behind the ON/reverse Holevo bound: the
// three bounded eigenvalues of Eve's state given B, identified by refitting
// at mu and 10 mu and discarding the one that scales with mu.  The product
// of the three is checked against its closed form to 1e-4 relative.
std::array<double, 3> on_rr_conditional_spectrum(const AttackParams& a, double mu = 1e8);

}  // namespace cvqkd
