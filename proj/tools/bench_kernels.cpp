// Compares the OpenMP kernels against their serial reference implementations
// and reports wall-clock speedups.  The serial versions are the ground truth
// the tests check bit-for-bit; this tool exists to show the parallel paths
// actually pay for themselves before anyone trusts a long scan to them.

#include "cvqkd/mc_oracle.hpp"
#include "cvqkd/thresholds.hpp"

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double time_once(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return seconds(t0, std::chrono::steady_clock::now());
}

void report(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s %10.3f s %10.3f s %8.2fx\n", name, serial_s, parallel_s,
                serial_s / parallel_s);
}

}  // namespace

int main() {
    using namespace cvqkd;

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled in this build; both columns run serially\n");
#endif
    std::printf("%-28s %12s %12s %9s\n", "kernel", "serial", "parallel", "speedup");

    {  // threshold curves: 100 transmissivities x 4 correlation rules
        std::vector<double> grid;
        for (int i = 1; i <= 100; ++i) grid.push_back(0.0098 * i);
        const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
        const CorrelationRule rules[] = {CorrelationRule::collective, CorrelationRule::max_separable,
                                         CorrelationRule::anti_separable,
                                         CorrelationRule::max_entangled};

        double checksum_s = 0.0, checksum_p = 0.0;
        const double ts = time_once([&] {
            for (auto r : rules)
                for (const auto& res : threshold_curve_serial(spec, grid, r).results)
                    checksum_s += res.N_star;
        });
        const double tp = time_once([&] {
            for (auto r : rules)
                for (const auto& res : threshold_curve(spec, grid, r).results)
                    checksum_p += res.N_star;
        });
        report("threshold_curve", ts, tp);
        if (checksum_s != checksum_p) {
            std::printf("MISMATCH: serial checksum %.17g != parallel %.17g\n", checksum_s,
                        checksum_p);
            return 1;
        }
    }

    {  // shot sampler: 2e6 rounds of the heaviest circuit
        const ProtocolSpec spec{Detection::heterodyne, Reconciliation::reverse, Circuit::off};
        const AttackParams a{0.3, 1.097, 0.2, -0.2};
        const std::size_t n = 2'000'000;

        SampleBatch bs, bp;
        const double ts = time_once([&] { bs = sample_protocol_run_serial(spec, a, 20.0, n, 7); });
        const double tp = time_once([&] { bp = sample_protocol_run(spec, a, 20.0, n, 7); });
        report("sample_protocol_run", ts, tp);
        for (std::size_t i = 0; i < n; ++i) {
            if (bs.bob_out_q[i] != bp.bob_out_q[i] || bs.bob_out_p[i] != bp.bob_out_p[i]) {
                std::printf("MISMATCH: round %zu differs between serial and parallel\n", i);
                return 1;
            }
        }
    }

    {  // superadditivity scan: the all-in-one consumer of the rate machinery
        std::vector<double> Ts, omegas;
        for (int i = 1; i <= 12; ++i) Ts.push_back(i / 13.0);
        for (int i = 0; i < 6; ++i) omegas.push_back(1.0 + 0.05 * i);

        ScanReport rs, rp;
        const double ts = time_once([&] {
            rs = superadditivity_scan_serial(Detection::heterodyne, Reconciliation::reverse, Ts,
                                             omegas, 16);
        });
        const double tp = time_once([&] {
            rp = superadditivity_scan(Detection::heterodyne, Reconciliation::reverse, Ts, omegas,
                                      16);
        });
        report("superadditivity_scan", ts, tp);
        if (rs.min_margin != rp.min_margin) {
            std::printf("MISMATCH: serial min margin %.17g != parallel %.17g\n", rs.min_margin,
                        rp.min_margin);
            return 1;
        }
    }

    return 0;
}
