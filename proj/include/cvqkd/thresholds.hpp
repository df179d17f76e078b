#pragma once

// Security thresholds in round-trip excess noise N, and the circuit
// post-selection logic that makes the two-way protocol beat its one-way
// reduction: run ON when channel estimation reports uncorrelated ancillas,
// fall back to OFF otherwise.

#include "cvqkd/attack_model.hpp"
#include "cvqkd/keyrates.hpp"

#include <string>
#include <vector>

namespace cvqkd {

// How Eve's correlations scale with omega along a threshold curve.
enum class CorrelationRule {
    collective,      // g = g' = 0
    max_separable,   // g = g' = omega - 1
    anti_separable,  // g = -g' = omega - 1
    max_entangled,   // g = -g' = sqrt(omega^2 - 1)
};

BoundaryPoint correlations_for(CorrelationRule rule, double omega);
std::string to_string(CorrelationRule rule);

struct ThresholdResult {
    double N_star;       // largest tolerable excess noise
    double omega_star;   // the same point in ancilla variance
    std::string status;  // "ok", "insecure-at-zero", or "open"
};

// Largest N with R(N) > 0 along the rule's curve, by bisection to absolute
// tolerance `tol` after doubling an initial bracket of 1 up to `cap`.
// R(0) <= 0 reports "insecure-at-zero" with N* = 0; a bracket escaping the
// cap reports "open" with N* = cap.  For "ok" results |R(N*)| <= 1e-6.
ThresholdResult solve_threshold(ProtocolSpec spec, double T, CorrelationRule rule,
                                double tol = 1e-8, double cap = 100.0);

struct ThresholdCurve {
    ProtocolSpec spec;
    CorrelationRule rule;
    std::vector<double> T;
    std::vector<ThresholdResult> results;
};

// solve_threshold over a T grid; the parallel version shards the grid over
// OpenMP threads and is bit-identical to the serial one.
ThresholdCurve threshold_curve(ProtocolSpec spec, const std::vector<double>& T_grid,
                               CorrelationRule rule);
ThresholdCurve threshold_curve_serial(ProtocolSpec spec, const std::vector<double>& T_grid,
                                      CorrelationRule rule);

struct PostselectResult {
    AttackClass attack_class;
    Circuit choice;  // on or off
    RateBreakdown rate;
};

// The protocol decision: classify the estimated attack, run ON against
// collective ancillas (evaluated at g = g' = 0) and OFF otherwise.
PostselectResult postselect(Detection det, Reconciliation rec, const AttackParams& a,
                            double tau_g = kAttackSlack);

struct ScanPoint {
    double T, omega, g, gp;
    Circuit choice;
    double R_post;    // post-selected two-way rate
    double R_oneway;  // one-way reduction at the same (T, omega)
    double margin;    // R_post - R_oneway
};

struct ScanReport {
    double min_margin;
    ScanPoint worst;
    std::vector<ScanPoint> points;
    std::vector<ScanPoint> violations;  // margin < -1e-9
};

// Sweep a (T, omega) grid; at each cell sample the correlation-plane
// boundary (plus the collective point) and compare the post-selected rate
// with the one-way reduction.  Superadditivity holds when no margin is
// negative beyond slack.  OpenMP over grid cells, bit-identical to the
// serial version.
ScanReport superadditivity_scan(Detection det, Reconciliation rec,
                                const std::vector<double>& T_grid,
                                const std::vector<double>& omega_grid, int n_boundary = 16);
ScanReport superadditivity_scan_serial(Detection det, Reconciliation rec,
                                       const std::vector<double>& T_grid,
                                       const std::vector<double>& omega_grid,
                                       int n_boundary = 16);

}  // namespace cvqkd
