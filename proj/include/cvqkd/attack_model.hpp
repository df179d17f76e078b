#pragma once

// Two-mode correlated attack on the round trip.  Eve injects one ancilla per
// channel pass, drawn from a zero-mean Gaussian pair with covariance
//   [[omega I, G], [G, omega I]],  G = diag(g, g').
// The pair is a physical state iff
//   |g| <= omega,  |g'| <= omega,  omega^2 + g g' - 1 >= omega |g + g'|,
// which carves out a convex region in the (g, g') plane for fixed omega.

#include "cvqkd/gaussian_core.hpp"

#include <string>
#include <vector>

namespace cvqkd {

// Correlations at or beyond the physicality boundary by less than this slack
// still validate; classification of g ~ 0 as collective uses it too.
inline constexpr double kAttackSlack = 1e-9;

struct AttackParams {
    double T;      // channel transmissivity per pass, in (0,1)
    double omega;  // ancilla variance, >= 1
    double g;      // q-quadrature correlation
    double gp;     // p-quadrature correlation
};

struct ValidationReport {
    bool ok;
    std::string violation;  // which inequality failed; empty when ok
};

enum class AttackClass { collective, separable_correlated, entangled };

struct BoundaryPoint {
    double g;
    double gp;
};

// Physicality boundary of the correlation plane for fixed omega, plus the
// named points the threshold rules refer to.  `points` is a closed polyline
// sampled by polar angle; the maximally-entangled and maximally-separable
// points are inserted exactly.  For omega = 1 the region degenerates to the
// origin.
struct AttackPlaneBoundary {
    double omega;
    std::vector<BoundaryPoint> points;
    BoundaryPoint max_entangled_pos;   // ( sqrt(omega^2-1), -sqrt(omega^2-1))
    BoundaryPoint max_entangled_neg;   // (-sqrt(omega^2-1),  sqrt(omega^2-1))
    BoundaryPoint max_separable_pos;   // ( omega-1,  omega-1)
    BoundaryPoint max_separable_neg;   // (-(omega-1), -(omega-1))
    BoundaryPoint anti_separable_pos;  // ( omega-1, -(omega-1)), interior
    BoundaryPoint anti_separable_neg;  // (-(omega-1),  omega-1), interior
    BoundaryPoint collective;          // (0, 0)
};

// Checks T and omega domains and the three physicality inequalities, then
// cross-checks against the symplectic spectrum of the ancilla pair.  If the
// two tests disagree the library is inconsistent: std::runtime_error.
ValidationReport validate(const AttackParams& a);

// validate() or throw std::domain_error with the violated inequality.
void require_valid(const AttackParams& a);

// Round-trip excess noise referred to channel input: N = (1-T)(omega-1)/T.
double excess_noise(double T, double omega);
double omega_from_excess(double T, double N);

// collective: g = g' = 0 (within tau_g); otherwise PPT decides whether the
// ancilla pair is separable or entangled.  Invalid params throw.
AttackClass classify(const AttackParams& a, double tau_g = kAttackSlack);

// Holevo information between Eve's two ancillas, in bits:
//   I_E = 2 h(omega) - h(nu_-) - h(nu_+),  nu_pm = sqrt((omega±g)(omega±g')).
double eve_mutual_information(const AttackParams& a);

AttackPlaneBoundary attack_plane_boundary(double omega, int n_points = 256);

}  // namespace cvqkd
