#include "cvqkd/keyrates.hpp"

#include <cmath>
#include <string>

namespace cvqkd {

namespace {

constexpr double kE = 2.718281828459045;

// The products behind the closed-form eigenvalues cancel to ~eps * w^2 on the
// extremal correlation rays, where many of the exact values sit at 1; the
// validated parameter region keeps them >= 1, so a sub-1 result inside this
// band is roundoff and clamps to 1.  Anything further below still throws in
// entropy_h.
double noise_band(double w) { return kNuSlack * (1.0 + 1e-4 * w * w); }

double clamp_nu(double nu, double band) { return nu < 1.0 && nu >= 1.0 - band ? 1.0 : nu; }

// Channel combinations shared across the closed forms.
struct Alg {
    double T, w, g, gp;
    double Lam;       // T^2 + (1 - T^2) w
    double Lt;        // T + (1 - T) w
    double nu_m, nu_p;  // Eve pair: sqrt((w -+ g)(w -+ g'))
};

Alg algebra(const AttackParams& a) {
    Alg x;
    x.T = a.T;
    x.w = a.omega;
    x.g = a.g;
    x.gp = a.gp;
    x.Lam = a.T * a.T + (1.0 - a.T * a.T) * a.omega;
    x.Lt = a.T + (1.0 - a.T) * a.omega;
    const double band = noise_band(a.omega);
    x.nu_m = clamp_nu(std::sqrt(std::max(0.0, (a.omega - a.g) * (a.omega - a.gp))), band);
    x.nu_p = clamp_nu(std::sqrt(std::max(0.0, (a.omega + a.g) * (a.omega + a.gp))), band);
    return x;
}

// lambda_pm(x) = T + (w ± x)(1 - T): leg output variance for correlation x.
double lam(const Alg& x, int s, double corr) { return x.T + (x.w + s * corr) * (1.0 - x.T); }

// Gamma_pm(x) = 1 - T + T (w ± x).
double gam(const Alg& x, int s, double corr) { return 1.0 - x.T + x.T * (x.w + s * corr); }

void check_domain(const AttackParams& a) {
    if (!(a.T >= kMinT && a.T <= 1.0 - kMinT))
        throw std::domain_error("key rates: T must lie in [" + std::to_string(kMinT) + ", " +
                                std::to_string(1.0 - kMinT) + "], got " + std::to_string(a.T));
    require_valid(a);
}

// ON closed forms exist for uncorrelated ancillas only.
AttackParams sanitize_for_circuit(ProtocolSpec spec, const AttackParams& a) {
    AttackParams out = a;
    if (spec.circuit == Circuit::one_way) {
        out.g = 0.0;  // one-way channel sees each ancilla once; correlations are moot
        out.gp = 0.0;
    } else if (spec.circuit == Circuit::on) {
        if (std::abs(a.g) > kAttackSlack || std::abs(a.gp) > kAttackSlack)
            throw unsupported_combination(
                "circuit ON against correlated ancillas (g=" + std::to_string(a.g) +
                ", g'=" + std::to_string(a.gp) +
                ") has no coherent-detection closed form; use circuit OFF");
        out.g = 0.0;
        out.gp = 0.0;
    }
    return out;
}

struct HolevoParts {
    LogTerm chi;
    std::vector<double> total;  // mu-free eigenvalues entering the bound with + sign
    std::vector<double> cond;   // and with - sign
};

HolevoParts holevo_parts(ProtocolSpec spec, const AttackParams& a) {
    const Alg x = algebra(a);
    const double T = x.T, w = x.w;
    const double band = noise_band(w);
    const auto h = [band](double nu) { return entropy_h(clamp_nu(nu, band)); };
    HolevoParts out;

    if (spec.circuit == Circuit::on) {
        if (spec.det == Detection::heterodyne) {
            out.chi.mu_coeff = 1.0;
            const double base = std::log2(kE * (1.0 - T) / (2.0 * (1.0 + T)));
            if (spec.rec == Reconciliation::direct) {
                out.chi.constant = base + h(w);
                out.total = {w};
            } else {
                const auto nb = on_rr_conditional_spectrum(a);
                out.chi.constant = base + 2.0 * h(w) - h(nb[0]) - h(nb[1]) - h(nb[2]);
                out.total = {w, w};
                out.cond = {nb[0], nb[1], nb[2]};
            }
        } else {
            out.chi.mu_coeff = 0.5;
            if (spec.rec == Reconciliation::direct) {
                out.chi.constant = 0.5 * std::log2((1.0 - T) / ((1.0 + T) * w)) + h(w);
                out.total = {w};
            } else {
                const double K = T * T + w + T * T * T * (w - 1.0);
                const double nt =
                    std::sqrt(w * (1.0 + T * T * w - T * T * T * (w - 1.0)) / K);
                out.chi.constant = 0.5 * std::log2(T * (1.0 - T) / K) + h(w) - h(nt);
                out.total = {w};
                out.cond = {nt};
            }
        }
        return out;
    }

    if (spec.circuit == Circuit::off) {
        const double hsum = h(x.nu_m) + h(x.nu_p);
        if (spec.det == Detection::heterodyne) {
            out.chi.mu_coeff = 1.0;
            const double base = std::log2(kE * (1.0 - T) / 2.0);
            if (spec.rec == Reconciliation::direct) {
                // conditional spectrum given both senders' symbols
                const double nb_m = std::sqrt(lam(x, -1, x.g) * lam(x, -1, x.gp));
                const double nb_p = std::sqrt(lam(x, +1, x.g) * lam(x, +1, x.gp));
                out.chi.constant = base + 0.5 * (hsum - h(nb_m) - h(nb_p));
                out.total = {x.nu_m, x.nu_p};
                out.cond = {nb_m, nb_p};
            } else {
                const double nb_m =
                    std::sqrt((lam(x, -1, x.g) + 1.0 - T) * (lam(x, -1, x.gp) + 1.0 - T)) / T;
                const double nb_p =
                    std::sqrt((lam(x, +1, x.g) + 1.0 - T) * (lam(x, +1, x.gp) + 1.0 - T)) / T;
                out.chi.constant = base + 0.5 * (hsum - h(nb_m) - h(nb_p));
                out.total = {x.nu_m, x.nu_p};
                out.cond = {nb_m, nb_p};
            }
        } else {
            out.chi.mu_coeff = 0.5;
            if (spec.rec == Reconciliation::direct) {
                // A(x) = Gamma_+(x) Gamma_-(x) = (1 + T(w-1))^2 - T^2 x^2
                const double Ag = gam(x, +1, x.g) * gam(x, -1, x.g);
                const double Agp = gam(x, +1, x.gp) * gam(x, -1, x.gp);
                // conditional eigenvalues given the sender's measured-quadrature
                // symbol; the q round mixes g in the radial factors with g' in
                // the leg variance, the p round swaps the two
                const double eq_m = std::sqrt((w - x.g) * lam(x, -1, x.gp) / gam(x, -1, x.g));
                const double eq_p = std::sqrt((w + x.g) * lam(x, +1, x.gp) / gam(x, +1, x.g));
                const double ep_m = std::sqrt((w - x.gp) * lam(x, -1, x.g) / gam(x, -1, x.gp));
                const double ep_p = std::sqrt((w + x.gp) * lam(x, +1, x.g) / gam(x, +1, x.gp));
                out.chi.constant = 0.5 * std::log2(1.0 - T) - 0.125 * std::log2(Ag * Agp) +
                                   0.5 * hsum -
                                   0.25 * (h(eq_m) + h(eq_p) + h(ep_m) + h(ep_p));
                out.total = {x.nu_m, x.nu_p};
                out.cond = {eq_m, eq_p, ep_m, ep_p};
            } else {
                const double root = std::sqrt(x.nu_m * x.nu_p);
                out.chi.constant = 0.5 * std::log2(T * (1.0 - T) / root) + 0.5 * hsum;
                out.total = {x.nu_m, x.nu_p};
            }
        }
        return out;
    }

    // one-way reduction: single pass, correlations ignored
    if (spec.det == Detection::heterodyne) {
        out.chi.mu_coeff = 1.0;
        const double base = std::log2(kE * (1.0 - T) / 2.0);
        const double nu_cond =
            spec.rec == Reconciliation::reverse ? (1.0 + (1.0 - T) * w) / T : x.Lt;
        out.chi.constant = base + h(w) - h(nu_cond);
        out.total = {w};
        out.cond = {nu_cond};
    } else {
        out.chi.mu_coeff = 0.5;
        if (spec.rec == Reconciliation::reverse) {
            out.chi.constant = 0.5 * std::log2(T * (1.0 - T) / w) + h(w);
            out.total = {w};
        } else {
            const double G0 = 1.0 - T + T * w;
            const double nu_cond = std::sqrt(w * x.Lt / G0);
            out.chi.constant = 0.5 * std::log2((1.0 - T) / G0) + h(w) - h(nu_cond);
            out.total = {w};
            out.cond = {nu_cond};
        }
    }
    return out;
}

}  // namespace

double LogTerm::eval(double mu) const {
    if (!(mu > 0.0)) throw std::domain_error("LogTerm::eval: mu must be positive");
    return mu_coeff * std::log2(mu) + constant;
}

LogTerm mutual_info(ProtocolSpec spec, const AttackParams& a_in) {
    check_domain(a_in);
    const AttackParams a = sanitize_for_circuit(spec, a_in);
    const Alg x = algebra(a);
    LogTerm I;
    if (spec.det == Detection::heterodyne) {
        I.mu_coeff = 1.0;
        I.constant = spec.circuit == Circuit::on ? std::log2(x.T / (1.0 + x.Lam))
                                                 : std::log2(x.T / (1.0 + x.Lt));
    } else {
        I.mu_coeff = 0.5;
        I.constant = spec.circuit == Circuit::on ? 0.5 * std::log2(x.T / x.Lam)
                                                 : 0.5 * std::log2(x.T / x.Lt);
    }
    return I;
}

LogTerm holevo(ProtocolSpec spec, const AttackParams& a_in) {
    check_domain(a_in);
    const AttackParams a = sanitize_for_circuit(spec, a_in);
    return holevo_parts(spec, a).chi;
}

RateBreakdown key_rate(ProtocolSpec spec, const AttackParams& a_in) {
    check_domain(a_in);
    const AttackParams a = sanitize_for_circuit(spec, a_in);
    const Alg x = algebra(a);

    RateBreakdown rb;
    rb.spec = spec;
    rb.attack = a_in;
    rb.mutual_information = mutual_info(spec, a_in);
    const HolevoParts hp = holevo_parts(spec, a);
    rb.holevo_bound = hp.chi;
    if (rb.mutual_information.mu_coeff != rb.holevo_bound.mu_coeff)
        throw std::runtime_error(
            "key_rate: divergent parts of I and chi fail to cancel (coefficients " +
            std::to_string(rb.mutual_information.mu_coeff) + " vs " +
            std::to_string(rb.holevo_bound.mu_coeff) + ")");
    rb.rate = rb.mutual_information.constant - rb.holevo_bound.constant;
    rb.total_spectrum = hp.total;
    rb.conditional_spectrum = hp.cond;
    rb.scalars = {x.Lam, x.Lt, x.nu_m, x.nu_p};
    return rb;
}

namespace {

// build_eve_on_cm with independent displacement variances per quadrature;
// the homodyne-keyed direct bound conditions on one quadrature at a time.
CovarianceMatrix build_eve_on_cm_split(const AttackParams& a, double mu_B, double mu_on_q,
                                       double mu_on_p) {
    check_domain(a);
    if (std::abs(a.g) > kAttackSlack || std::abs(a.gp) > kAttackSlack)
        throw unsupported_combination("build_eve_on_cm: requires uncorrelated ancillas (g = g' = 0)");
    if (!(mu_B >= 1.0))
        throw std::domain_error("build_eve_on_cm: mu_B must be >= 1, got " + std::to_string(mu_B));
    if (!(mu_on_q >= 0.0 && mu_on_p >= 0.0))
        throw std::domain_error("build_eve_on_cm: displacement variance must be >= 0");

    const double T = a.T, w = a.omega;
    const double zeta = std::sqrt(T * (w * w - 1.0));      // ancilla/leak q-p pair, sign flips on p
    const double psi = (1.0 - T) * mu_B + T * w;           // first-pass leak variance
    const double xi = -(1.0 - T) * std::sqrt(w * w - 1.0);  // P1 <-> e2
    const double phi = (1.0 - T) * std::sqrt(T) * (mu_B - w);  // e1 <-> e2

    // modes (P1, e1, P2, e2)
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(8, 8);
    auto set_pair = [&v](int mi, int mj, double qval, double pval) {
        v(2 * mi, 2 * mj) = v(2 * mj, 2 * mi) = qval;
        v(2 * mi + 1, 2 * mj + 1) = v(2 * mj + 1, 2 * mi + 1) = pval;
    };
    set_pair(0, 0, w, w);
    set_pair(1, 1, psi, psi);
    set_pair(2, 2, w, w);
    // second-pass leak: the displacement enters here and nowhere else
    const double psit_base = T * w + (1.0 - T) * (1.0 - T) * w + T * (1.0 - T) * mu_B;
    set_pair(3, 3, psit_base + (1.0 - T) * mu_on_q, psit_base + (1.0 - T) * mu_on_p);
    set_pair(0, 1, zeta, -zeta);
    set_pair(2, 3, zeta, -zeta);
    set_pair(0, 3, xi, -xi);
    set_pair(1, 3, phi, phi);
    return CovarianceMatrix(std::move(v));
}

}  // namespace

CovarianceMatrix build_eve_on_cm(const AttackParams& a, double mu_B, double mu_on) {
    return build_eve_on_cm_split(a, mu_B, mu_on, mu_on);
}

CovarianceMatrix build_eve_on_rr_cm(const AttackParams& a, double mu) {
    if (!(mu >= 0.0))
        throw std::domain_error("build_eve_on_rr_cm: mu must be >= 0, got " + std::to_string(mu));
    const CovarianceMatrix ve = build_eve_on_cm(a, mu + 1.0, mu);
    const double T = a.T, w = a.omega;

    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(10, 10);
    v.topLeftCorner(8, 8) = ve.mat();
    // Bob's readout B = gamma - T beta before detection noise
    const double varB = T * T + T * mu + (1.0 - T * T) * w;
    v(8, 8) = v(9, 9) = varB;
    const double root1mT = std::sqrt(1.0 - T);
    // covariance of B with (P1, e1, P2, e2); p entries flip sign on the
    // TMSV-purified rows (Z pattern) and keep it on the leak rows
    const double cq[4] = {root1mT * std::sqrt(T * (w * w - 1.0)), root1mT * T * (w - 1.0),
                          root1mT * std::sqrt(w * w - 1.0),
                          root1mT * std::sqrt(T) * (T * (w - 1.0) - mu)};
    const double psign[4] = {-1.0, 1.0, -1.0, 1.0};
    for (int m = 0; m < 4; ++m) {
        v(2 * m, 8) = v(8, 2 * m) = cq[m];
        v(2 * m + 1, 9) = v(9, 2 * m + 1) = psign[m] * cq[m];
    }
    return CovarianceMatrix(std::move(v));
}

CovarianceMatrix build_eb_off_cm(const AttackParams& a, double mu_A, double mu_B) {
    check_domain(a);
    if (!(mu_A >= 1.0 && mu_B >= 1.0))
        throw std::domain_error("build_eb_off_cm: source variances must be >= 1");
    const double T = a.T, w = a.omega;
    const double tauB = (1.0 - T) * w + T * mu_B;  // forward output variance
    const double tauA = (1.0 - T) * w + T * mu_A;  // backward output variance
    const double dB = std::sqrt(T * (mu_B * mu_B - 1.0));
    const double dA = std::sqrt(T * (mu_A * mu_A - 1.0));

    // modes (B1, A2, A1, B2)
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(8, 8);
    auto set_pair = [&v](int mi, int mj, double qval, double pval) {
        v(2 * mi, 2 * mj) = v(2 * mj, 2 * mi) = qval;
        v(2 * mi + 1, 2 * mj + 1) = v(2 * mj + 1, 2 * mi + 1) = pval;
    };
    set_pair(0, 0, mu_B, mu_B);
    set_pair(1, 1, mu_A, mu_A);
    set_pair(2, 2, tauB, tauB);
    set_pair(3, 3, tauA, tauA);
    set_pair(0, 2, dB, -dB);  // B1 <-> A1, two-mode squeezing through the channel
    set_pair(1, 3, dA, -dA);  // A2 <-> B2
    set_pair(2, 3, (1.0 - T) * a.g, (1.0 - T) * a.gp);  // Eve's cross-pass correlations
    return CovarianceMatrix(std::move(v));
}

std::array<double, 3> on_rr_conditional_spectrum(const AttackParams& a, double mu) {
    if (!(mu >= 1e2))
        throw std::domain_error("on_rr_conditional_spectrum: mu must be >= 1e2 for a stable refit");
    const auto spectrum_at = [&a](double m) {
        return symplectic_spectrum(condition_heterodyne(build_eve_on_rr_cm(a, m), 4)).values;
    };
    const auto s1 = spectrum_at(mu);
    const auto s2 = spectrum_at(10.0 * mu);
    int growing = -1;
    for (int i = 0; i < 4; ++i) {
        if (s2[i] > 3.0 * s1[i]) {
            if (growing >= 0)
                throw std::runtime_error(
                    "on_rr_conditional_spectrum: more than one eigenvalue scales with mu");
            growing = i;
        }
    }
    if (growing < 0)
        throw std::runtime_error("on_rr_conditional_spectrum: no eigenvalue scales with mu");

    std::array<double, 3> out{};
    int j = 0;
    for (int i = 0; i < 4; ++i)
        if (i != growing) out[j++] = s1[i];

    // closed-form product of the three bounded eigenvalues
    const double T = a.T, w = a.omega;
    const double closed =
        (1.0 + T * T * T + (1.0 - T) * (1.0 + T * T) * w) * w / (T * (1.0 + T));
    const double prod = out[0] * out[1] * out[2];
    // finite-mu corrections are O(1/(T mu)); loosen the guard accordingly
    const double rtol = std::max(1e-4, 50.0 / (T * mu));
    if (std::abs(prod / closed - 1.0) > rtol)
        throw std::runtime_error(
            "on_rr_conditional_spectrum: eigenvalue product " + std::to_string(prod) +
            " disagrees with closed form " + std::to_string(closed));
    return out;
}

namespace {

// Single-leg entanglement-based state, modes (sender's retained half,
// channel output): the one-way protocol and both OFF legs look like this.
CovarianceMatrix build_oneway_leg_cm(double T, double w, double mu_src) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
    const double tau = (1.0 - T) * w + T * mu_src;
    const double d = std::sqrt(T * (mu_src * mu_src - 1.0));
    v(0, 0) = v(1, 1) = mu_src;
    v(2, 2) = v(3, 3) = tau;
    v(0, 2) = v(2, 0) = d;
    v(1, 3) = v(3, 1) = -d;
    return CovarianceMatrix(std::move(v));
}

// Replace mode `mode` by its transmitted half after a balanced splitter with
// vacuum; the reflected half lands in a fresh last mode.
CovarianceMatrix split_mode(const CovarianceMatrix& v, int mode) {
    return apply_beamsplitter(append_vacuum_mode(v), 0.5, mode, v.n_modes());
}

double finite_mu_holevo(ProtocolSpec spec, const AttackParams& a, double mu) {
    if (spec.circuit == Circuit::on) {
        const double s_tot = von_neumann_entropy(build_eve_on_cm(a, mu + 1.0, mu));
        double s_cond = 0.0;
        if (spec.rec == Reconciliation::direct) {
            if (spec.det == Detection::heterodyne) {
                s_cond = von_neumann_entropy(build_eve_on_cm(a, mu + 1.0, 0.0));
            } else {
                // conditioning on the measured quadrature's displacement only
                s_cond =
                    0.5 * (von_neumann_entropy(build_eve_on_cm_split(a, mu + 1.0, 0.0, mu)) +
                           von_neumann_entropy(build_eve_on_cm_split(a, mu + 1.0, mu, 0.0)));
            }
        } else {
            const CovarianceMatrix vrr = build_eve_on_rr_cm(a, mu);
            if (spec.det == Detection::heterodyne) {
                s_cond = von_neumann_entropy(condition_heterodyne(vrr, 4));
            } else {
                s_cond = 0.5 * (von_neumann_entropy(condition_homodyne(vrr, 4, Quadrature::q)) +
                                von_neumann_entropy(condition_homodyne(vrr, 4, Quadrature::p)));
            }
        }
        return s_tot - s_cond;
    }

    if (spec.circuit == Circuit::off) {
        const CovarianceMatrix v = build_eb_off_cm(a, mu + 1.0, mu + 1.0);
        const double s_tot = von_neumann_entropy(v);
        // key holders: direct = the two senders (modes B1, A2),
        // reverse = the two receivers (modes A1, B2)
        const int hi = spec.rec == Reconciliation::direct ? 1 : 3;
        const int lo = spec.rec == Reconciliation::direct ? 0 : 2;
        double s_cond = 0.0;
        if (spec.det == Detection::heterodyne) {
            s_cond = von_neumann_entropy(condition_heterodyne(condition_heterodyne(v, hi), lo));
        } else if (spec.rec == Reconciliation::reverse) {
            for (auto quad : {Quadrature::q, Quadrature::p})
                s_cond += 0.5 * von_neumann_entropy(
                                    condition_homodyne(condition_homodyne(v, hi, quad), lo, quad));
        } else {
            // senders' key symbol is one quadrature of the modulation; model
            // the partial knowledge by splitting each retained half in two
            // and homodyning one half
            const CovarianceMatrix vsplit = split_mode(split_mode(v, 0), 1);
            for (auto quad : {Quadrature::q, Quadrature::p})
                s_cond += 0.5 * von_neumann_entropy(condition_homodyne(
                                    condition_homodyne(vsplit, 1, quad), 0, quad));
        }
        return (s_tot - s_cond) / 2.0;
    }

    // one-way: single leg, receiver at the channel output
    const CovarianceMatrix v = build_oneway_leg_cm(a.T, a.omega, mu + 1.0);
    const double s_tot = von_neumann_entropy(v);
    double s_cond = 0.0;
    if (spec.det == Detection::heterodyne) {
        const int mode = spec.rec == Reconciliation::direct ? 0 : 1;
        s_cond = von_neumann_entropy(condition_heterodyne(v, mode));
    } else if (spec.rec == Reconciliation::reverse) {
        // the receiver's key is the homodyne outcome itself
        for (auto quad : {Quadrature::q, Quadrature::p})
            s_cond += 0.5 * von_neumann_entropy(condition_homodyne(v, 1, quad));
    } else {
        // the sender's key is one quadrature of the modulation; split the
        // retained half and homodyne one part, as in the OFF recipe
        const CovarianceMatrix vs = split_mode(v, 0);
        for (auto quad : {Quadrature::q, Quadrature::p})
            s_cond += 0.5 * von_neumann_entropy(condition_homodyne(vs, 0, quad));
    }
    return s_tot - s_cond;
}

}  // namespace

double finite_mu_mutual_info(ProtocolSpec spec, const AttackParams& a_in, double mu) {
    check_domain(a_in);
    if (!(mu >= 0.0))
        throw std::domain_error("finite_mu_mutual_info: mu must be >= 0");
    const AttackParams a = sanitize_for_circuit(spec, a_in);
    const Alg x = algebra(a);
    if (spec.circuit == Circuit::on) {
        const double b0 = x.T * x.T + (1.0 - x.T * x.T) * x.w;  // = Lambda
        const double bmu = b0 + x.T * mu;
        return spec.det == Detection::heterodyne ? std::log2((bmu + 1.0) / (b0 + 1.0))
                                                 : 0.5 * std::log2(bmu / b0);
    }
    // OFF and one-way share the single-leg expressions
    return spec.det == Detection::heterodyne
               ? std::log2((x.T * mu + 1.0 + x.Lt) / (1.0 + x.Lt))
               : 0.5 * std::log2((x.T * mu + x.Lt) / x.Lt);
}

double key_rate_numeric(ProtocolSpec spec, const AttackParams& a_in, double mu) {
    check_domain(a_in);
    if (!(mu >= 1.0))
        throw std::domain_error("key_rate_numeric: mu must be >= 1, got " + std::to_string(mu));
    const AttackParams a = sanitize_for_circuit(spec, a_in);
    return finite_mu_mutual_info(spec, a, mu) - finite_mu_holevo(spec, a, mu);
}

}  // namespace cvqkd
