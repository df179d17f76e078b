#include "cvqkd/thresholds.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace cvqkd {

namespace {

double rate_at_noise(ProtocolSpec spec, double T, CorrelationRule rule, double N) {
    const double omega = omega_from_excess(T, N);
    const auto c = correlations_for(rule, omega);
    return key_rate(spec, {T, omega, c.g, c.gp}).rate;
}

ScanPoint scan_one(Detection det, Reconciliation rec, double T, double omega,
                   const BoundaryPoint& c) {
    const AttackParams a{T, omega, c.g, c.gp};
    const auto post = postselect(det, rec, a);
    const double r_ow = key_rate({det, rec, Circuit::one_way}, a).rate;
    ScanPoint p;
    p.T = T;
    p.omega = omega;
    p.g = c.g;
    p.gp = c.gp;
    p.choice = post.choice;
    p.R_post = post.rate.rate;
    p.R_oneway = r_ow;
    p.margin = p.R_post - r_ow;
    return p;
}

std::vector<BoundaryPoint> scan_points_for_cell(double omega, int n_boundary) {
    std::vector<BoundaryPoint> pts;
    pts.push_back({0.0, 0.0});
    if (omega > 1.0) {
        const auto b = attack_plane_boundary(omega, n_boundary);
        pts.insert(pts.end(), b.points.begin(), b.points.end());
    }
    return pts;
}

ScanReport assemble_scan(Detection det, Reconciliation rec, const std::vector<double>& T_grid,
                         const std::vector<double>& omega_grid, int n_boundary, bool parallel) {
    if (T_grid.empty() || omega_grid.empty())
        throw std::invalid_argument("superadditivity_scan: empty grid");
    const int n_cells = static_cast<int>(T_grid.size() * omega_grid.size());
    std::vector<std::vector<ScanPoint>> per_cell(n_cells);

    // exceptions cannot leave an OpenMP region; carry the first one out by hand
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int cell = 0; cell < n_cells; ++cell) {
        try {
            const double T = T_grid[cell / omega_grid.size()];
            const double omega = omega_grid[cell % omega_grid.size()];
            auto& out = per_cell[cell];
            for (const auto& c : scan_points_for_cell(omega, n_boundary))
                out.push_back(scan_one(det, rec, T, omega, c));
        } catch (...) {
#pragma omp critical
            {
                if (!err) err = std::current_exception();
            }
        }
    }
    if (err) std::rethrow_exception(err);

    ScanReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& cell : per_cell) {
        for (const auto& p : cell) {
            rep.points.push_back(p);
            if (p.margin < rep.min_margin) {
                rep.min_margin = p.margin;
                rep.worst = p;
            }
            if (p.margin < -1e-9) rep.violations.push_back(p);
        }
    }
    return rep;
}

}  // namespace

BoundaryPoint correlations_for(CorrelationRule rule, double omega) {
    if (!(omega >= 1.0))
        throw std::domain_error("correlations_for: omega must be >= 1, got " +
                                std::to_string(omega));
    switch (rule) {
        case CorrelationRule::collective: return {0.0, 0.0};
        case CorrelationRule::max_separable: return {omega - 1.0, omega - 1.0};
        case CorrelationRule::anti_separable: return {omega - 1.0, -(omega - 1.0)};
        case CorrelationRule::max_entangled: {
            const double e = std::sqrt(omega * omega - 1.0);
            return {e, -e};
        }
    }
    throw std::logic_error("correlations_for: unknown rule");
}

std::string to_string(CorrelationRule rule) {
    switch (rule) {
        case CorrelationRule::collective: return "collective";
        case CorrelationRule::max_separable: return "max-separable";
        case CorrelationRule::anti_separable: return "anti-separable";
        case CorrelationRule::max_entangled: return "max-entangled";
    }
    throw std::logic_error("to_string: unknown rule");
}

ThresholdResult solve_threshold(ProtocolSpec spec, double T, CorrelationRule rule, double tol,
                                double cap) {
    if (!(tol > 0.0) || !(cap > 0.0))
        throw std::invalid_argument("solve_threshold: tol and cap must be positive");
    const auto rate = [&](double N) { return rate_at_noise(spec, T, rule, N); };

    if (!(rate(0.0) > 0.0)) return {0.0, omega_from_excess(T, 0.0), "insecure-at-zero"};

    double lo = 0.0, hi = 1.0;
    while (rate(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > cap) return {cap, omega_from_excess(T, cap), "open"};
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (rate(mid) > 0.0 ? lo : hi) = mid;
    }
    const double n_star = 0.5 * (lo + hi);
    return {n_star, omega_from_excess(T, n_star), "ok"};
}

ThresholdCurve threshold_curve_serial(ProtocolSpec spec, const std::vector<double>& T_grid,
                                      CorrelationRule rule) {
    ThresholdCurve c;
    c.spec = spec;
    c.rule = rule;
    c.T = T_grid;
    c.results.resize(T_grid.size());
    for (size_t i = 0; i < T_grid.size(); ++i) c.results[i] = solve_threshold(spec, T_grid[i], rule);
    return c;
}

ThresholdCurve threshold_curve(ProtocolSpec spec, const std::vector<double>& T_grid,
                               CorrelationRule rule) {
    ThresholdCurve c;
    c.spec = spec;
    c.rule = rule;
    c.T = T_grid;
    c.results.resize(T_grid.size());
    const int n = static_cast<int>(T_grid.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            c.results[i] = solve_threshold(spec, T_grid[i], rule);
        } catch (...) {
#pragma omp critical
            {
                if (!err) err = std::current_exception();
            }
        }
    }
    if (err) std::rethrow_exception(err);
    return c;
}

PostselectResult postselect(Detection det, Reconciliation rec, const AttackParams& a,
                            double tau_g) {
    PostselectResult r;
    r.attack_class = classify(a, tau_g);
    if (r.attack_class == AttackClass::collective) {
        r.choice = Circuit::on;
        // the estimate says uncorrelated; the ON rate is evaluated there
        r.rate = key_rate({det, rec, Circuit::on}, {a.T, a.omega, 0.0, 0.0});
    } else {
        r.choice = Circuit::off;
        r.rate = key_rate({det, rec, Circuit::off}, a);
    }
    return r;
}

ScanReport superadditivity_scan(Detection det, Reconciliation rec,
                                const std::vector<double>& T_grid,
                                const std::vector<double>& omega_grid, int n_boundary) {
    return assemble_scan(det, rec, T_grid, omega_grid, n_boundary, true);
}

ScanReport superadditivity_scan_serial(Detection det, Reconciliation rec,
                                       const std::vector<double>& T_grid,
                                       const std::vector<double>& omega_grid, int n_boundary) {
    return assemble_scan(det, rec, T_grid, omega_grid, n_boundary, false);
}

}  // namespace cvqkd
