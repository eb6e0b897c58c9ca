#pragma once

#include "perk/estimator.hpp"

namespace perk {

struct HoldoutConfig {
    Vec lambda_grid;  // sorted, positive
    Vec rho_grid;     // sorted, positive
    Index t = 10000;  // holdout test count
    Vec w;            // length-L nonnegative weights summing to 1
};

struct HoldoutSurface {
    Mat cost;  // |lambda_grid| x |rho_grid|
    Index argmin_lambda = 0;
    Index argmin_rho = 0;
    double lambda_hat = 0.0;
    double rho_hat = 0.0;
    double min_cost = 0.0;
};

// Psi = sqrt((1/T) sum_t ||diag(x_t)^-1 (x_hat(p_t) - x_t)||^2_W)
double holdout_cost(const RffPerk& est, const Mat& test_x, const Mat& test_p, const Vec& w);

// Exhaustive sweep: per cell, a fresh-but-seed-fixed training set and feature
// draw; one shared holdout set; failures score +infinity; ties break toward
// smaller lambda then smaller rho. Seeds derive from `seed` per cell.
// bandwidth_means is the unscaled bandwidth diagonal (test-data means, size
// P); pass empty to fall back to the holdout set's own regressor means.
HoldoutSurface holdout_search(const HoldoutConfig& cfg, const PriorSpec& priors,
                              const Acquisition& acq, const NoiseModel& noise, Index train_n,
                              Index z, std::uint64_t seed, const Vec& bandwidth_means = Vec());

HoldoutConfig default_holdout_config(Index latent_count = kNumLatent);

}  // namespace perk
