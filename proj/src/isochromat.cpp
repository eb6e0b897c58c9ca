#include "perk/isochromat.hpp"

#include <cmath>
#include <complex>
#include <mutex>

namespace perk {

std::vector<double> simulate_steady_state(const LatentParams& x, const KnownParams& nu,
                                          const ScanSpec& scan, const IsochromatConfig& cfg,
                                          std::uint64_t seed) {
    require(cfg.n_spins >= 1 && cfg.n_reps >= 1, "isochromat: invalid config");
    if (scan.kind == ScanKind::Toy) {
        // no steady-state dynamics: equilibrium magnetization decays to TE
        return {x.m0 * std::exp(-scan.te_ms / x.t2)};
    }
    const bool ideal = scan.kind == ScanKind::Spgr ? true : (cfg.spoiling == Spoiling::Ideal);
    const int n = ideal ? 1 : cfg.n_spins;
    const int n_echoes = scan.signal_count();

    const double a = nu.kappa * scan.flip_deg * kPi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double e1 = std::exp(-scan.tr_ms / x.t1);
    const double e2 = std::exp(-scan.tr_ms / x.t2);
    const double dec1 = std::exp(-scan.te_ms / x.t2);
    const double dec2 = std::exp(-(scan.tr_ms - scan.te_ms) / x.t2);

    // per-TR spoiler phases, cell-centered over [0, 2pi), optionally jittered
    std::vector<std::complex<double>> spoil(n);
    Rng rng(seed);
    for (int j = 0; j < n; ++j) {
        const double frac = cfg.jitter_phases ? rng.uniform() : 0.5;
        const double theta = 2.0 * kPi * (j + frac) / n;
        spoil[j] = std::polar(1.0, theta);
    }

    std::vector<std::complex<double>> mt(n, 0.0);  // transverse, M0-normalized
    std::vector<double> mz(n, 1.0);

    std::vector<double> prev(n_echoes, 0.0), cur(n_echoes, 0.0);
    for (int rep = 0; rep < cfg.n_reps; ++rep) {
        prev = cur;
        // RF pulse about x: rotates (My, Mz) by the flip angle
        std::complex<double> sum1(0.0, 0.0), sum2(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
            const double mx = mt[j].real(), my = mt[j].imag();
            const double my2 = my * ca + mz[j] * sa;
            mz[j] = -my * sa + mz[j] * ca;
            mt[j] = {mx, my2};
            sum1 += mt[j];
            sum2 += mt[j] * spoil[j];
        }
        cur[0] = std::abs(sum1) / n * dec1;
        if (n_echoes == 2) cur[1] = std::abs(sum2) / n * dec2;
        // carry to the next excitation: full-TR relaxation plus spoiling
        for (int j = 0; j < n; ++j) {
            mt[j] = ideal ? 0.0 : mt[j] * spoil[j] * e2;
            mz[j] = 1.0 + (mz[j] - 1.0) * e1;
        }
    }
    for (int e = 0; e < n_echoes; ++e) {
        const double rel =
            std::abs(cur[e] - prev[e]) / std::max(std::abs(cur[e]), 1e-300);
        require(rel <= cfg.convergence_tol,
                "isochromat: steady state not reached within n_reps");
    }
    for (auto& v : cur) v *= x.m0;
    return cur;
}

OracleGridResult oracle_grid_check(const Acquisition& acq, const std::vector<double>& t1_grid,
                                   const std::vector<double>& t2_grid,
                                   const std::vector<double>& kappa_grid,
                                   const IsochromatConfig& cfg) {
    require(!t1_grid.empty() && !t2_grid.empty() && !kappa_grid.empty(),
            "oracle_grid_check: empty grid");
    struct Point {
        double t1, t2, kappa;
    };
    std::vector<Point> pts;
    for (double t1 : t1_grid)
        for (double t2 : t2_grid)
            for (double k : kappa_grid) pts.push_back({t1, t2, k});

    const int d_count = acq.dataset_count();
    std::vector<std::vector<OracleGridResult::Row>> rows(pts.size());
    std::exception_ptr first_err;
    std::mutex err_mu;
    parallel_chunks(static_cast<Index>(pts.size()), 1, [&](Index c, Index b, Index) {
        (void)c;
        const auto& pt = pts[static_cast<size_t>(b)];
        LatentParams x{1.0, pt.t1, pt.t2};
        KnownParams nu{pt.kappa};
        try {
            Vec ana = acquisition_signal(acq, x, nu);
            Vec sim(d_count);
            Index d = 0;
            for (const auto& scan : acq.scans) {
                auto amps = simulate_steady_state(x, nu, scan, cfg);
                for (double v : amps) sim[d++] = v;
            }
            auto& out = rows[static_cast<size_t>(b)];
            for (Index i = 0; i < d_count; ++i) {
                const double rel = std::abs(ana[i] - sim[i]) / std::max(std::abs(sim[i]), 1e-300);
                out.push_back({pt.t1, pt.t2, pt.kappa, ana[i], sim[i], rel});
            }
        } catch (...) {
            std::scoped_lock lk(err_mu);
            if (!first_err) first_err = std::current_exception();
        }
    });
    if (first_err) std::rethrow_exception(first_err);

    OracleGridResult res;
    for (const auto& point_rows : rows)
        for (const auto& r : point_rows) {
            res.rows.push_back(r);
            if (r.rel_err > res.max_rel_err) {
                res.max_rel_err = r.rel_err;
                res.worst_x = {1.0, r.t1, r.t2};
                res.worst_nu = {r.kappa};
            }
        }
    return res;
}

}  // namespace perk
