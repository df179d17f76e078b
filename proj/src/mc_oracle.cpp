#include "cvqkd/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace cvqkd {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-round draw streams; every random number in a run is addressed by
// (seed, round, stream) and nothing else.
enum Stream : std::uint32_t {
    kStreamBeta = 0,       // Bob's modulation
    kStreamFwdVacuum = 1,  // forward preparation shot noise
    kStreamEveQ = 2,       // Eve's correlated q pair
    kStreamEveP = 3,       // Eve's correlated p pair
    kStreamAliceDet = 4,   // Alice's heterodyne noise (OFF)
    kStreamAlpha = 5,      // Alice's re-preparation modulation (OFF)
    kStreamBwdVacuum = 6,  // backward preparation shot noise (OFF)
    kStreamBobDet = 7,     // Bob's heterodyne noise
    kStreamDisplace = 8,   // Alice's displacement (ON)
    kStreamQuadChoice = 9, // homodyne basis pick
    kStreamBootstrap = 10, // block resampling in the estimators
};

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t counter_key(std::uint64_t seed, std::uint64_t round, std::uint32_t stream) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (round + 0x2545f4914f6cdd1dULL));
    return mix64(h ^ (stream * 0xda942042e4dd58b5ULL + 1));
}

double to_unit(std::uint64_t k) { return static_cast<double>(k >> 11) * 0x1.0p-53; }

struct RoundState {
    double beta_q, beta_p;
    double alice_q = kNaN, alice_p = kNaN;
    double alpha_q = kNaN, alpha_p = kNaN;
    double d_q = kNaN, d_p = kNaN;
    double bob_q = kNaN, bob_p = kNaN;
    std::uint8_t quad = 0;
};

RoundState sample_round(ProtocolSpec spec, const AttackParams& a, double mu, std::uint64_t seed,
                        int i) {
    const double T = a.T, w = a.omega;
    const double st = std::sqrt(T), rt = std::sqrt(1.0 - T);
    const double smu = std::sqrt(mu);
    const bool hom = spec.det == Detection::homodyne;

    RoundState r;
    const auto [nb_q, nb_p] = CounterRng::normal_pair(seed, i, kStreamBeta);
    r.beta_q = smu * nb_q;
    r.beta_p = smu * nb_p;
    const auto [v1_q, v1_p] = CounterRng::normal_pair(seed, i, kStreamFwdVacuum);
    // Eve's pair per quadrature: e1 = sqrt(w) z1, e2 = Cholesky completion
    const auto [zq1, zq2] = CounterRng::normal_pair(seed, i, kStreamEveQ);
    const auto [zp1, zp2] = CounterRng::normal_pair(seed, i, kStreamEveP);
    const double sw = std::sqrt(w);
    const double e1_q = sw * zq1, e2_q = a.g / sw * zq1 + std::sqrt(w - a.g * a.g / w) * zq2;
    const double e1_p = sw * zp1, e2_p = a.gp / sw * zp1 + std::sqrt(w - a.gp * a.gp / w) * zp2;

    // forward pass
    const double y1_q = st * (r.beta_q + v1_q) + rt * e1_q;
    const double y1_p = st * (r.beta_p + v1_p) + rt * e1_p;

    if (hom) r.quad = CounterRng::uniform(seed, i, kStreamQuadChoice) < 0.5 ? 0 : 1;

    if (spec.circuit == Circuit::one_way) {
        if (hom) {
            (r.quad == 0 ? r.alice_q : r.alice_p) = r.quad == 0 ? y1_q : y1_p;
        } else {
            const auto [na_q, na_p] = CounterRng::normal_pair(seed, i, kStreamAliceDet);
            r.alice_q = y1_q + na_q;
            r.alice_p = y1_p + na_p;
        }
        return r;
    }

    if (spec.circuit == Circuit::off) {
        if (hom) {
            (r.quad == 0 ? r.alice_q : r.alice_p) = r.quad == 0 ? y1_q : y1_p;
        } else {
            const auto [na_q, na_p] = CounterRng::normal_pair(seed, i, kStreamAliceDet);
            r.alice_q = y1_q + na_q;
            r.alice_p = y1_p + na_p;
        }
        // fresh preparation for the backward pass
        const auto [ma_q, ma_p] = CounterRng::normal_pair(seed, i, kStreamAlpha);
        r.alpha_q = smu * ma_q;
        r.alpha_p = smu * ma_p;
        const auto [v2_q, v2_p] = CounterRng::normal_pair(seed, i, kStreamBwdVacuum);
        const double y2_q = st * (r.alpha_q + v2_q) + rt * e2_q;
        const double y2_p = st * (r.alpha_p + v2_p) + rt * e2_p;
        if (hom) {
            (r.quad == 0 ? r.bob_q : r.bob_p) = r.quad == 0 ? y2_q : y2_p;
        } else {
            const auto [nb2_q, nb2_p] = CounterRng::normal_pair(seed, i, kStreamBobDet);
            r.bob_q = y2_q + nb2_q;
            r.bob_p = y2_p + nb2_p;
        }
        return r;
    }

    // circuit ON: reflect with displacement, then post-process B = gamma - T beta
    const auto [nd_q, nd_p] = CounterRng::normal_pair(seed, i, kStreamDisplace);
    r.d_q = smu * nd_q;
    r.d_p = smu * nd_p;
    const double x2_q = y1_q + r.d_q;
    const double x2_p = y1_p + r.d_p;
    const double y2_q = st * x2_q + rt * e2_q;
    const double y2_p = st * x2_p + rt * e2_p;
    if (hom) {
        if (r.quad == 0)
            r.bob_q = y2_q - T * r.beta_q;
        else
            r.bob_p = y2_p - T * r.beta_p;
    } else {
        const auto [nb2_q, nb2_p] = CounterRng::normal_pair(seed, i, kStreamBobDet);
        r.bob_q = y2_q + nb2_q - T * r.beta_q;
        r.bob_p = y2_p + nb2_p - T * r.beta_p;
    }
    return r;
}

SampleBatch make_batch(ProtocolSpec spec, const AttackParams& a, double mu, int n_rounds,
                       std::uint64_t seed) {
    require_valid(a);
    if (!(mu >= 0.0))
        throw std::domain_error("sample_protocol_run: mu must be >= 0, got " + std::to_string(mu));
    if (n_rounds < 1) throw std::invalid_argument("sample_protocol_run: need at least one round");

    SampleBatch b;
    b.spec = spec;
    b.attack = a;
    b.mu = mu;
    b.seed = seed;
    b.n_rounds = n_rounds;
    b.beta_q.resize(n_rounds);
    b.beta_p.resize(n_rounds);
    const bool hom = spec.det == Detection::homodyne;
    if (hom) b.hom_quad.resize(n_rounds);
    if (spec.circuit != Circuit::on) {
        b.alice_out_q.resize(n_rounds);
        b.alice_out_p.resize(n_rounds);
    }
    if (spec.circuit == Circuit::off) {
        b.alpha_q.resize(n_rounds);
        b.alpha_p.resize(n_rounds);
    }
    if (spec.circuit == Circuit::on) {
        b.d_q.resize(n_rounds);
        b.d_p.resize(n_rounds);
    }
    if (spec.circuit != Circuit::one_way) {
        b.bob_out_q.resize(n_rounds);
        b.bob_out_p.resize(n_rounds);
    }
    return b;
}

void store_round(SampleBatch& b, int i, const RoundState& r) {
    b.beta_q[i] = r.beta_q;
    b.beta_p[i] = r.beta_p;
    if (!b.hom_quad.empty()) b.hom_quad[i] = r.quad;
    if (!b.alice_out_q.empty()) {
        b.alice_out_q[i] = r.alice_q;
        b.alice_out_p[i] = r.alice_p;
    }
    if (!b.alpha_q.empty()) {
        b.alpha_q[i] = r.alpha_q;
        b.alpha_p[i] = r.alpha_p;
    }
    if (!b.d_q.empty()) {
        b.d_q[i] = r.d_q;
        b.d_p[i] = r.d_p;
    }
    if (!b.bob_out_q.empty()) {
        b.bob_out_q[i] = r.bob_q;
        b.bob_out_p[i] = r.bob_p;
    }
}

// Centered second moments of an (input, outcome) stream.
struct Moments {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;

    void add(double x, double y) {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    void merge(const Moments& o) {
        n += o.n;
        sx += o.sx;
        sy += o.sy;
        sxx += o.sxx;
        syy += o.syy;
        sxy += o.sxy;
    }
    double var_x() const { return (sxx - sx * sx / n) / n; }
    double var_y() const { return (syy - sy * sy / n) / n; }
    double cov() const { return (sxy - sx * sy / n) / n; }

    double mi_bits() const {
        if (n < 2.0) throw std::domain_error("mutual information: group has fewer than 2 samples");
        const double vx = var_x(), vy = var_y();
        if (!(vy > 0.0))
            throw std::domain_error("mutual information: degenerate batch, outcome variance is zero");
        if (!(vx > 0.0)) return 0.0;  // no modulation carries no information
        const double rho2 = cov() * cov() / (vx * vy);
        if (!(rho2 < 1.0))
            throw std::domain_error("mutual information: degenerate batch, perfect correlation");
        return -0.5 * std::log2(1.0 - rho2);
    }
};

// The (input, outcome) groups a batch decomposes into: OFF has one per
// direction and quadrature, ON and one-way have one per quadrature.
struct GroupDef {
    const std::vector<double>* x;
    const std::vector<double>* y;
    int quad_filter;  // -1 = all rounds, 0/1 = homodyne rounds of that basis
};

std::vector<GroupDef> mi_groups(const SampleBatch& b) {
    const bool hom = b.spec.det == Detection::homodyne;
    std::vector<GroupDef> g;
    if (b.spec.circuit == Circuit::on) {
        g.push_back({&b.d_q, &b.bob_out_q, hom ? 0 : -1});
        g.push_back({&b.d_p, &b.bob_out_p, hom ? 1 : -1});
    } else {
        g.push_back({&b.beta_q, &b.alice_out_q, hom ? 0 : -1});
        g.push_back({&b.beta_p, &b.alice_out_p, hom ? 1 : -1});
        if (b.spec.circuit == Circuit::off) {
            g.push_back({&b.alpha_q, &b.bob_out_q, hom ? 0 : -1});
            g.push_back({&b.alpha_p, &b.bob_out_p, hom ? 1 : -1});
        }
    }
    return g;
}

// Accumulate each group's moments per contiguous block of rounds.
std::vector<std::vector<Moments>> block_moments(const SampleBatch& b,
                                                const std::vector<GroupDef>& groups, int n_blocks) {
    std::vector<std::vector<Moments>> m(groups.size(), std::vector<Moments>(n_blocks));
    for (int i = 0; i < b.n_rounds; ++i) {
        const int blk = static_cast<int>(static_cast<long long>(i) * n_blocks / b.n_rounds);
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& gd = groups[gi];
            if (gd.quad_filter >= 0 && b.hom_quad[i] != gd.quad_filter) continue;
            m[gi][blk].add((*gd.x)[i], (*gd.y)[i]);
        }
    }
    return m;
}

// Combine per-group mutual informations into bits per protocol use, matching
// the weighting in the closed forms: heterodyne sums the two quadratures,
// homodyne weights by basis counts, OFF averages the two directions.
double combine_mi(const SampleBatch& b, const std::vector<Moments>& totals) {
    const bool hom = b.spec.det == Detection::homodyne;
    const auto direction_mi = [&](const Moments& mq, const Moments& mp) {
        if (!hom) return mq.mi_bits() + mp.mi_bits();
        const double n = mq.n + mp.n;
        if (!(n > 0.0)) throw std::domain_error("mutual information: empty direction");
        double acc = 0.0;
        if (mq.n >= 2.0) acc += mq.n * mq.mi_bits();
        if (mp.n >= 2.0) acc += mp.n * mp.mi_bits();
        return acc / n;
    };
    if (b.spec.circuit == Circuit::off)
        return 0.5 * (direction_mi(totals[0], totals[1]) + direction_mi(totals[2], totals[3]));
    return direction_mi(totals[0], totals[1]);
}

double rel_err(double numeric, double closed) {
    return std::abs(numeric - closed) / std::max(1.0, std::abs(closed));
}

}  // namespace

std::pair<double, double> CounterRng::normal_pair(std::uint64_t seed, std::uint64_t round,
                                                  std::uint32_t stream) {
    const std::uint64_t k1 = counter_key(seed, round, stream);
    const std::uint64_t k2 = mix64(k1 ^ 0xd1b54a32d192ed03ULL);
    // u1 in (0,1] keeps the log finite, u2 in [0,1)
    const double u1 = (static_cast<double>(k1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = to_unit(k2);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return {radius * std::cos(kTwoPi * u2), radius * std::sin(kTwoPi * u2)};
}

double CounterRng::uniform(std::uint64_t seed, std::uint64_t round, std::uint32_t stream) {
    return to_unit(counter_key(seed, round, stream));
}

SampleBatch sample_protocol_run(ProtocolSpec spec, const AttackParams& a, double mu, int n_rounds,
                                std::uint64_t seed) {
    SampleBatch b = make_batch(spec, a, mu, n_rounds, seed);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_rounds; ++i) store_round(b, i, sample_round(spec, a, mu, seed, i));
    return b;
}

SampleBatch sample_protocol_run_serial(ProtocolSpec spec, const AttackParams& a, double mu,
                                       int n_rounds, std::uint64_t seed) {
    SampleBatch b = make_batch(spec, a, mu, n_rounds, seed);
    for (int i = 0; i < n_rounds; ++i) store_round(b, i, sample_round(spec, a, mu, seed, i));
    return b;
}

MiEstimate empirical_mutual_info(const SampleBatch& b) {
    if (b.n_rounds < 1000)
        throw std::domain_error("empirical_mutual_info: need at least 1000 rounds, got " +
                                std::to_string(b.n_rounds));
    const auto groups = mi_groups(b);
    constexpr int kBlocks = 100;
    constexpr int kResamples = 200;
    const auto blocks = block_moments(b, groups, kBlocks);

    std::vector<Moments> totals(groups.size());
    for (size_t gi = 0; gi < groups.size(); ++gi)
        for (const auto& m : blocks[gi]) totals[gi].merge(m);
    const double point = combine_mi(b, totals);

    // block bootstrap with counter-based, seed-reproducible resampling
    double acc = 0.0, acc2 = 0.0;
    for (int r = 0; r < kResamples; ++r) {
        std::vector<Moments> resampled(groups.size());
        for (int k = 0; k < kBlocks; ++k) {
            const double u =
                CounterRng::uniform(b.seed, static_cast<std::uint64_t>(r) * kBlocks + k,
                                    kStreamBootstrap);
            const int pick = std::min(kBlocks - 1, static_cast<int>(u * kBlocks));
            for (size_t gi = 0; gi < groups.size(); ++gi) resampled[gi].merge(blocks[gi][pick]);
        }
        const double v = combine_mi(b, resampled);
        acc += v;
        acc2 += v * v;
    }
    const double mean = acc / kResamples;
    const double var = std::max(0.0, acc2 / kResamples - mean * mean);
    return {point, std::sqrt(var)};
}

ChannelEstimate estimate_channel(const SampleBatch& b) {
    if (b.spec.circuit != Circuit::off)
        throw std::domain_error(
            "estimate_channel: needs a circuit-OFF batch with both directions disclosed");
    if (b.n_rounds < 1000)
        throw std::domain_error("estimate_channel: need at least 1000 rounds, got " +
                                std::to_string(b.n_rounds));
    if (!(b.mu > 0.0))
        throw std::domain_error("estimate_channel: zero modulation carries no channel information");

    const bool hom = b.spec.det == Detection::homodyne;
    const double det_noise = hom ? 0.0 : 1.0;
    constexpr int kBlocks = 50;
    const auto groups = mi_groups(b);  // same four (input, outcome) streams
    const auto blocks = block_moments(b, groups, kBlocks);

    // residual cross moments between the directions, per quadrature and block
    struct Cross {
        Moments fwd, bwd;   // regression moments restricted to paired rounds
        std::vector<double> fx, fy, bx, by;  // paired samples for the residual product
    };
    std::vector<Cross> cross(2 * kBlocks);
    for (int i = 0; i < b.n_rounds; ++i) {
        const int blk = static_cast<int>(static_cast<long long>(i) * kBlocks / b.n_rounds);
        for (int quad = 0; quad < 2; ++quad) {
            if (hom && b.hom_quad[i] != quad) continue;
            auto& c = cross[quad * kBlocks + blk];
            const double fx = quad == 0 ? b.beta_q[i] : b.beta_p[i];
            const double fy = quad == 0 ? b.alice_out_q[i] : b.alice_out_p[i];
            const double bx = quad == 0 ? b.alpha_q[i] : b.alpha_p[i];
            const double by = quad == 0 ? b.bob_out_q[i] : b.bob_out_p[i];
            c.fwd.add(fx, fy);
            c.bwd.add(bx, by);
            c.fx.push_back(fx);
            c.fy.push_back(fy);
            c.bx.push_back(bx);
            c.by.push_back(by);
        }
    }

    // Plug-in estimator from a set of blocks: slopes per (direction, quad),
    // T = mean slope squared, omega from the residual variance, g and g'
    // from the cross-direction residual covariance.
    const auto estimate_from = [&](const std::vector<int>& blk_ids, ChannelEstimate& out) {
        Moments m[4];
        Cross xq, xp;
        for (int id : blk_ids) {
            for (int gi = 0; gi < 4; ++gi) m[gi].merge(blocks[gi][id]);
            const auto& cq = cross[id];
            const auto& cp = cross[kBlocks + id];
            xq.fwd.merge(cq.fwd);
            xq.bwd.merge(cq.bwd);
            xp.fwd.merge(cp.fwd);
            xp.bwd.merge(cp.bwd);
            xq.fx.insert(xq.fx.end(), cq.fx.begin(), cq.fx.end());
            xq.fy.insert(xq.fy.end(), cq.fy.begin(), cq.fy.end());
            xq.bx.insert(xq.bx.end(), cq.bx.begin(), cq.bx.end());
            xq.by.insert(xq.by.end(), cq.by.begin(), cq.by.end());
            xp.fx.insert(xp.fx.end(), cp.fx.begin(), cp.fx.end());
            xp.fy.insert(xp.fy.end(), cp.fy.begin(), cp.fy.end());
            xp.bx.insert(xp.bx.end(), cp.bx.begin(), cp.bx.end());
            xp.by.insert(xp.by.end(), cp.by.begin(), cp.by.end());
        }
        double slope_sum = 0.0, res_var_sum = 0.0;
        int n_groups = 0;
        double slopes[4];
        for (int gi = 0; gi < 4; ++gi) {
            if (!(m[gi].n >= 2.0) || !(m[gi].var_x() > 0.0))
                throw std::domain_error("estimate_channel: degenerate regression group");
            slopes[gi] = m[gi].cov() / m[gi].var_x();
            slope_sum += slopes[gi];
            res_var_sum += m[gi].var_y() - m[gi].cov() * m[gi].cov() / m[gi].var_x();
            ++n_groups;
        }
        const double c_bar = slope_sum / n_groups;
        out.T = c_bar * c_bar;
        out.omega = (res_var_sum / n_groups - out.T - det_noise) / (1.0 - out.T);
        // residual covariance between the legs, per quadrature
        const auto residual_cov = [&](const Cross& x, double slope_f, double slope_b) {
            const double mfx = x.fwd.sx / x.fwd.n, mfy = x.fwd.sy / x.fwd.n;
            const double mbx = x.bwd.sx / x.bwd.n, mby = x.bwd.sy / x.bwd.n;
            double s = 0.0;
            for (size_t i = 0; i < x.fx.size(); ++i)
                s += ((x.fy[i] - mfy) - slope_f * (x.fx[i] - mfx)) *
                     ((x.by[i] - mby) - slope_b * (x.bx[i] - mbx));
            return s / static_cast<double>(x.fx.size());
        };
        out.correlations_available = 1.0 - out.T >= 1e-6;
        if (out.correlations_available) {
            out.g = residual_cov(xq, slopes[0], slopes[2]) / (1.0 - out.T);
            out.gp = residual_cov(xp, slopes[1], slopes[3]) / (1.0 - out.T);
        } else {
            out.g = 0.0;
            out.gp = 0.0;
        }
    };

    ChannelEstimate est{};
    std::vector<int> all(kBlocks);
    for (int k = 0; k < kBlocks; ++k) all[k] = k;
    estimate_from(all, est);

    // jackknife-style spread over single blocks for the standard errors
    double mT = 0, m2T = 0, mw = 0, m2w = 0, mg = 0, m2g = 0, mgp = 0, m2gp = 0;
    int used = 0;
    for (int k = 0; k < kBlocks; ++k) {
        ChannelEstimate blk{};
        estimate_from({k}, blk);
        mT += blk.T;
        m2T += blk.T * blk.T;
        mw += blk.omega;
        m2w += blk.omega * blk.omega;
        mg += blk.g;
        m2g += blk.g * blk.g;
        mgp += blk.gp;
        m2gp += blk.gp * blk.gp;
        ++used;
    }
    const auto spread = [used](double s, double s2) {
        const double mean = s / used;
        return std::sqrt(std::max(0.0, s2 / used - mean * mean) / used);
    };
    est.se_T = spread(mT, m2T);
    est.se_omega = spread(mw, m2w);
    est.se_g = est.correlations_available ? spread(mg, m2g) : kNaN;
    est.se_gp = est.correlations_available ? spread(mgp, m2gp) : kNaN;
    return est;
}

std::vector<ConvergenceRow> asymptotic_convergence_check(ProtocolSpec spec, const AttackParams& a,
                                                         const std::vector<double>& mu_ladder) {
    if (mu_ladder.empty())
        throw std::invalid_argument("asymptotic_convergence_check: empty mu ladder");
    const RateBreakdown rb = key_rate(spec, a);  // also rejects unsupported combos
    const double T = a.T, w = a.omega;

    std::vector<ConvergenceRow> rows;
    for (const double mu : mu_ladder) {
        std::vector<double> errs;
        errs.push_back(std::abs(key_rate_numeric(spec, a, mu) - rb.rate) /
                       std::max(1.0, std::abs(rb.rate)));

        if (spec.circuit == Circuit::off) {
            const CovarianceMatrix v = build_eb_off_cm(a, mu + 1.0, mu + 1.0);
            const auto s = symplectic_spectrum(v).values;
            // the scalars are branch-labeled, the numeric spectrum is sorted
            double nlo = rb.scalars.nu_minus, nhi = rb.scalars.nu_plus;
            if (nlo > nhi) std::swap(nlo, nhi);
            errs.push_back(rel_err(s[0], nlo));
            errs.push_back(rel_err(s[1], nhi));
            if (spec.det == Detection::heterodyne) {
                const int hi = spec.rec == Reconciliation::direct ? 1 : 3;
                const int lo = spec.rec == Reconciliation::direct ? 0 : 2;
                const auto sc =
                    symplectic_spectrum(condition_heterodyne(condition_heterodyne(v, hi), lo))
                        .values;
                auto closed = rb.conditional_spectrum;
                std::sort(closed.begin(), closed.end());
                errs.push_back(rel_err(sc[0], closed[0]));
                errs.push_back(rel_err(sc[1], closed[1]));
            } else if (spec.rec == Reconciliation::reverse) {
                for (int quad = 0; quad < 2; ++quad) {
                    const auto qq = quad == 0 ? Quadrature::q : Quadrature::p;
                    const double corr = quad == 0 ? a.g : a.gp;
                    const auto sc = symplectic_spectrum(condition_homodyne(
                                                            condition_homodyne(v, 3, qq), 2, qq))
                                        .values;
                    double lo = std::sqrt((1.0 - T) * (w - corr) * mu / T);
                    double hi = std::sqrt((1.0 - T) * (w + corr) * mu / T);
                    if (lo > hi) std::swap(lo, hi);
                    errs.push_back(rel_err(sc[0], lo));
                    errs.push_back(rel_err(sc[1], hi));
                }
            } else {
                // senders' symbols: halve each retained mode and homodyne
                const CovarianceMatrix vs = apply_beamsplitter(
                    append_vacuum_mode(apply_beamsplitter(append_vacuum_mode(v), 0.5, 0, 4)), 0.5,
                    1, 5);
                for (int quad = 0; quad < 2; ++quad) {
                    const auto qq = quad == 0 ? Quadrature::q : Quadrature::p;
                    const double corr = quad == 0 ? a.g : a.gp;
                    const double other = quad == 0 ? a.gp : a.g;
                    const auto sc = symplectic_spectrum(condition_homodyne(
                                                            condition_homodyne(vs, 1, qq), 0, qq))
                                        .values;
                    const double gm = 1.0 - T + T * (w - corr), gp2 = 1.0 - T + T * (w + corr);
                    double lo = std::sqrt((w - corr) * (T + (w - other) * (1.0 - T)) / gm);
                    double hi = std::sqrt((w + corr) * (T + (w + other) * (1.0 - T)) / gp2);
                    if (lo > hi) std::swap(lo, hi);
                    errs.push_back(rel_err(sc[0], lo));
                    errs.push_back(rel_err(sc[1], hi));
                    // the two unbounded ones grow with a known coefficient
                    const double big = (1.0 - T) * std::sqrt(gm * gp2) * mu;
                    errs.push_back(rel_err(sc[2] * sc[3], big));
                }
            }
        } else if (spec.circuit == Circuit::on) {
            if (spec.rec == Reconciliation::direct && spec.det == Detection::heterodyne) {
                // with the modulation off, Eve keeps two vacua, the probe at
                // omega, and one mode amplified by the two passes
                const auto sc =
                    symplectic_spectrum(build_eve_on_cm(a, mu + 1.0, 0.0)).values;
                errs.push_back(rel_err(sc[0], 1.0));
                errs.push_back(rel_err(sc[1], 1.0));
                errs.push_back(rel_err(sc[2], w));
                errs.push_back(rel_err(sc[3], (1.0 - T * T) * mu));
            }
            if (spec.rec == Reconciliation::reverse && spec.det == Detection::heterodyne) {
                const auto nb = on_rr_conditional_spectrum(a, mu);
                const double closed =
                    (1.0 + T * T * T + (1.0 - T) * (1.0 + T * T) * w) * w / (T * (1.0 + T));
                errs.push_back(rel_err(nb[0] * nb[1] * nb[2], closed));
            }
            if (spec.rec == Reconciliation::reverse && spec.det == Detection::homodyne) {
                // homodyning gamma pins one conditional eigenvalue at omega
                // and drives the smallest to sqrt(omega (1 + T^2 omega
                // - T^3 (omega - 1)) / (T^2 + omega + T^3 (omega - 1)))
                const CovarianceMatrix vrr = build_eve_on_rr_cm(a, mu);
                const double kk = T * T + w + T * T * T * (w - 1.0);
                const double nt =
                    std::sqrt(w * (1.0 + T * T * w - T * T * T * (w - 1.0)) / kk);
                for (auto qq : {Quadrature::q, Quadrature::p}) {
                    const auto sc =
                        symplectic_spectrum(condition_homodyne(vrr, 4, qq)).values;
                    errs.push_back(rel_err(sc[0], nt));
                    errs.push_back(rel_err(sc[1], w));
                }
            }
        } else {
            // one-way leg
            Eigen::MatrixXd leg = Eigen::MatrixXd::Zero(4, 4);
            const double mu_src = mu + 1.0;
            const double tau = (1.0 - T) * w + T * mu_src;
            const double dd = std::sqrt(T * (mu_src * mu_src - 1.0));
            leg(0, 0) = leg(1, 1) = mu_src;
            leg(2, 2) = leg(3, 3) = tau;
            leg(0, 2) = leg(2, 0) = dd;
            leg(1, 3) = leg(3, 1) = -dd;
            const CovarianceMatrix v{std::move(leg)};
            const auto s = symplectic_spectrum(v).values;
            errs.push_back(rel_err(s[0], w));
            if (spec.det == Detection::heterodyne) {
                const int mode = spec.rec == Reconciliation::direct ? 0 : 1;
                const auto sc = symplectic_spectrum(condition_heterodyne(v, mode)).values;
                const double closed = spec.rec == Reconciliation::direct
                                          ? T + (1.0 - T) * w
                                          : (1.0 + (1.0 - T) * w) / T;
                errs.push_back(rel_err(sc[0], closed));
            } else if (spec.rec == Reconciliation::reverse) {
                const auto sc =
                    symplectic_spectrum(condition_homodyne(v, 1, Quadrature::q)).values;
                errs.push_back(rel_err(sc[0], std::sqrt((1.0 - T) * w * mu / T)));
            } else {
                // sender's symbols: halve the retained mode and homodyne one
                // part, leaving sqrt(w lt / g0) and a diverging partner
                const CovarianceMatrix vs =
                    apply_beamsplitter(append_vacuum_mode(v), 0.5, 0, 2);
                const double g0 = 1.0 - T + T * w, lt = T + (1.0 - T) * w;
                for (auto qq : {Quadrature::q, Quadrature::p}) {
                    const auto sc =
                        symplectic_spectrum(condition_homodyne(vs, 0, qq)).values;
                    errs.push_back(rel_err(sc[0], std::sqrt(w * lt / g0)));
                    errs.push_back(rel_err(sc[1], std::sqrt((1.0 - T) * g0 * mu)));
                }
            }
        }
        rows.push_back({mu, *std::max_element(errs.begin(), errs.end())});
    }
    return rows;
}

void export_csv(const SampleBatch& b, std::ostream& os) {
    os << "round,direction,quadrature,input,outcome\n";
    const bool hom = b.spec.det == Detection::homodyne;
    char line[160];
    const auto emit = [&](int i, const char* dir, int quad, double x, double y) {
        std::snprintf(line, sizeof line, "%d,%s,%c,%.17g,%.17g\n", i, dir, quad == 0 ? 'q' : 'p',
                      x, y);
        os << line;
    };
    for (int i = 0; i < b.n_rounds; ++i) {
        if (b.spec.circuit == Circuit::on) {
            if (hom) {
                const int r = b.hom_quad[i];
                emit(i, "roundtrip", r, r == 0 ? b.d_q[i] : b.d_p[i],
                     r == 0 ? b.bob_out_q[i] : b.bob_out_p[i]);
            } else {
                emit(i, "roundtrip", 0, b.d_q[i], b.bob_out_q[i]);
                emit(i, "roundtrip", 1, b.d_p[i], b.bob_out_p[i]);
            }
            continue;
        }
        if (hom) {
            const int r = b.hom_quad[i];
            emit(i, "forward", r, r == 0 ? b.beta_q[i] : b.beta_p[i],
                 r == 0 ? b.alice_out_q[i] : b.alice_out_p[i]);
            if (b.spec.circuit == Circuit::off)
                emit(i, "backward", r, r == 0 ? b.alpha_q[i] : b.alpha_p[i],
                     r == 0 ? b.bob_out_q[i] : b.bob_out_p[i]);
        } else {
            emit(i, "forward", 0, b.beta_q[i], b.alice_out_q[i]);
            emit(i, "forward", 1, b.beta_p[i], b.alice_out_p[i]);
            if (b.spec.circuit == Circuit::off) {
                emit(i, "backward", 0, b.alpha_q[i], b.bob_out_q[i]);
                emit(i, "backward", 1, b.alpha_p[i], b.bob_out_p[i]);
            }
        }
    }
}

}  // namespace cvqkd
