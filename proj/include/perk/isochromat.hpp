#pragma once

#include "perk/common.hpp"
#include "perk/signal_models.hpp"

namespace perk {

enum class Spoiling { Ideal, Gradient };

struct IsochromatConfig {
    int n_spins = 256;
    int n_reps = 4000;
    Spoiling spoiling = Spoiling::Gradient;
    bool jitter_phases = false;  // adds seeded jitter to the equispaced phases
    double convergence_tol = 1e-6;
};

// Magnitude of the complex isochromat-average transverse magnetization,
// sampled at TE after excitation (echo 1) and at TR - TE (echo 2, DESS only).
// SPGR forces ideal spoiling; DESS uses per-TR gradient dephasing with
// phases equispaced over [0, 2pi). Errors if the echo amplitudes still move
// by more than convergence_tol (relative) between the last two repetitions.
std::vector<double> simulate_steady_state(const LatentParams& x, const KnownParams& nu,
                                          const ScanSpec& scan, const IsochromatConfig& cfg,
                                          std::uint64_t seed = 0);

struct OracleGridResult {
    double max_rel_err = 0.0;
    LatentParams worst_x;
    KnownParams worst_nu;
    struct Row {
        double t1, t2, kappa, analytic, simulated, rel_err;
    };
    std::vector<Row> rows;
};

// Worst-case relative error of the analytic SPGR/DESS amplitudes against the
// simulator over a (T1, T2, kappa) grid at fixed M0 = 1.
OracleGridResult oracle_grid_check(const Acquisition& acq, const std::vector<double>& t1_grid,
                                   const std::vector<double>& t2_grid,
                                   const std::vector<double>& kappa_grid,
                                   const IsochromatConfig& cfg);

}  // namespace perk
