#include "cvqkd/attack_model.hpp"

#include <algorithm>
#include <cmath>

namespace cvqkd {

namespace {

// nu_pm^2 = (omega ± g)(omega ± g'); valid params keep both factors >= 0.
double nu_squared(const AttackParams& a, int sign) {
    return (a.omega + sign * a.g) * (a.omega + sign * a.gp);
}

// nu_squared cancels to ~eps * omega^2 on the extremal rays where the exact
// value is 1; sub-1 results inside that band are roundoff.  Same convention
// as the closed forms in keyrates.
double nu_noise_band(double omega) { return kNuSlack * (1.0 + 1e-4 * omega * omega); }

// Partial transposition flips the sign of one mode's p quadrature, which maps
// diag(g, g') -> diag(g, -g'); physicality of the transposed pair is the PPT
// separability test.
bool ppt_separable(const AttackParams& a) {
    return check_physical(make_eve_cm(a.omega, a.g, -a.gp)).physical;
}

// Intersection of the ray (r cos, r sin) with the boundary
// omega^2 + g g' - 1 = omega |g + g'|, i.e. the smallest positive root of
// cs r^2 - b r + q = 0 with cs = cos sin, b = omega|cos + sin|, q = omega^2-1.
// The form 2q / (b + sqrt(disc)) is that root for every quadrant (for cs < 0
// the other root is negative, for cs = 0 the equation is linear) and stays
// stable when cs -> 0.
double boundary_radius(double omega, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double cs = c * s;
    const double b = omega * std::abs(c + s);
    const double q = omega * omega - 1.0;
    const double disc = b * b - 4.0 * cs * q;
    return 2.0 * q / (b + std::sqrt(disc));
}

}  // namespace

ValidationReport validate(const AttackParams& a) {
    if (!(a.T > 0.0 && a.T < 1.0))
        return {false, "T must lie in (0,1), got " + std::to_string(a.T)};
    if (!(a.omega >= 1.0))
        return {false, "omega must be >= 1, got " + std::to_string(a.omega)};

    ValidationReport rep{true, ""};
    if (!(std::abs(a.g) <= a.omega + kAttackSlack))
        rep = {false, "|g| <= omega violated: |" + std::to_string(a.g) + "| > " +
                          std::to_string(a.omega)};
    else if (!(std::abs(a.gp) <= a.omega + kAttackSlack))
        rep = {false, "|g'| <= omega violated: |" + std::to_string(a.gp) + "| > " +
                          std::to_string(a.omega)};
    else {
        const double lhs = a.omega * a.omega + a.g * a.gp - 1.0;
        const double rhs = a.omega * std::abs(a.g + a.gp);
        // lhs itself carries ~eps * omega^2 of cancellation noise, so the
        // slack scales the same way
        if (!(lhs >= rhs - kAttackSlack * (1.0 + 1e-4 * a.omega * a.omega)))
            rep = {false, "omega^2 + g g' - 1 >= omega|g + g'| violated: " +
                              std::to_string(lhs) + " < " + std::to_string(rhs)};
    }

    // Cross-check: the inequalities are exactly physicality of the ancilla
    // pair, so the spectral test must agree.
    const bool spectral_ok =
        a.omega >= 1.0 && check_physical(make_eve_cm(a.omega, a.g, a.gp)).physical;
    if (spectral_ok != rep.ok) {
        // Allow an honest disagreement only within roundoff of the boundary.
        const double margin =
            a.omega * a.omega + a.g * a.gp - 1.0 - a.omega * std::abs(a.g + a.gp);
        if (std::abs(margin) > 1e-6 * (1.0 + 1e-4 * a.omega * a.omega))
            throw std::runtime_error(
                "attack validate: inequality test and spectral test disagree at g=" +
                std::to_string(a.g) + " g'=" + std::to_string(a.gp) +
                " omega=" + std::to_string(a.omega));
    }
    return rep;
}

void require_valid(const AttackParams& a) {
    const auto rep = validate(a);
    if (!rep.ok) throw std::domain_error("invalid attack parameters: " + rep.violation);
}

double excess_noise(double T, double omega) {
    if (!(T > 0.0 && T < 1.0))
        throw std::domain_error("excess_noise: T must lie in (0,1), got " + std::to_string(T));
    if (!(omega >= 1.0))
        throw std::domain_error("excess_noise: omega must be >= 1, got " + std::to_string(omega));
    return (1.0 - T) * (omega - 1.0) / T;
}

double omega_from_excess(double T, double N) {
    if (!(T > 0.0 && T < 1.0))
        throw std::domain_error("omega_from_excess: T must lie in (0,1), got " + std::to_string(T));
    if (!(N >= 0.0))
        throw std::domain_error("omega_from_excess: N must be >= 0, got " + std::to_string(N));
    return 1.0 + N * T / (1.0 - T);
}

AttackClass classify(const AttackParams& a, double tau_g) {
    require_valid(a);
    if (std::abs(a.g) <= tau_g && std::abs(a.gp) <= tau_g) return AttackClass::collective;
    return ppt_separable(a) ? AttackClass::separable_correlated : AttackClass::entangled;
}

double eve_mutual_information(const AttackParams& a) {
    require_valid(a);
    const double band = nu_noise_band(a.omega);
    const auto nu = [&a, band](int sign) {
        const double n = std::sqrt(std::max(0.0, nu_squared(a, sign)));
        return n < 1.0 && n >= 1.0 - band ? 1.0 : n;
    };
    const double ie = 2.0 * entropy_h(a.omega) - entropy_h(nu(-1)) - entropy_h(nu(+1));
    return std::max(0.0, ie);
}

AttackPlaneBoundary attack_plane_boundary(double omega, int n_points) {
    if (!(omega >= 1.0))
        throw std::domain_error("attack_plane_boundary: omega must be >= 1, got " +
                                std::to_string(omega));
    if (n_points < 8)
        throw std::invalid_argument("attack_plane_boundary: need at least 8 points");

    AttackPlaneBoundary b;
    b.omega = omega;
    b.collective = {0.0, 0.0};
    if (omega == 1.0) {
        // zero-noise attack admits no correlations at all
        b.points = {{0.0, 0.0}};
        b.max_entangled_pos = b.max_entangled_neg = {0.0, 0.0};
        b.max_separable_pos = b.max_separable_neg = {0.0, 0.0};
        b.anti_separable_pos = b.anti_separable_neg = {0.0, 0.0};
        return b;
    }

    const double e = std::sqrt(omega * omega - 1.0);
    b.max_entangled_pos = {e, -e};
    b.max_entangled_neg = {-e, e};
    b.max_separable_pos = {omega - 1.0, omega - 1.0};
    b.max_separable_neg = {-(omega - 1.0), -(omega - 1.0)};
    b.anti_separable_pos = {omega - 1.0, -(omega - 1.0)};
    b.anti_separable_neg = {-(omega - 1.0), omega - 1.0};

    struct Polar {
        double theta;
        bool labeled;
        BoundaryPoint p;
    };
    std::vector<Polar> pts;
    pts.reserve(n_points + 4);
    constexpr double kTwoPi = 6.283185307179586;
    for (int k = 0; k < n_points; ++k) {
        const double theta = kTwoPi * k / n_points;
        const double r = boundary_radius(omega, theta);
        pts.push_back({theta, false, {r * std::cos(theta), r * std::sin(theta)}});
    }
    // Exact labeled boundary points (the anti-separable pair is interior).
    const BoundaryPoint labeled[] = {b.max_separable_pos, b.max_entangled_neg,
                                     b.max_separable_neg, b.max_entangled_pos};
    for (const auto& p : labeled) {
        double theta = std::atan2(p.gp, p.g);
        if (theta < 0.0) theta += kTwoPi;
        pts.push_back({theta, true, p});
    }
    std::sort(pts.begin(), pts.end(),
              [](const Polar& x, const Polar& y) { return x.theta < y.theta; });
    b.points.clear();
    b.points.reserve(pts.size());
    for (const auto& pp : pts) {
        if (!b.points.empty() && std::abs(pp.p.g - b.points.back().g) < 1e-12 &&
            std::abs(pp.p.gp - b.points.back().gp) < 1e-12) {
            // a sampled ray hit a labeled point; keep the exact coordinates
            if (pp.labeled) b.points.back() = pp.p;
            continue;
        }
        b.points.push_back(pp.p);
    }
    return b;
}

}  // namespace cvqkd
