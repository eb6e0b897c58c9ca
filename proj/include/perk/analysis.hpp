#pragma once

#include "perk/estimator.hpp"
#include "perk/signal_models.hpp"

namespace perk {

struct FisherResult {
    Mat f;          // L x L, symmetrized
    Vec crlb_diag;  // diag(F^-1); +inf when F is numerically singular
    double cond = 0.0;
};

enum class BiasCovMethod { ClosedForm, MonteCarlo };

struct BiasCovReport {
    Vec bias;  // L
    Mat cov;   // L x L, symmetric
    BiasCovMethod method = BiasCovMethod::ClosedForm;
    double min_snr = 0.0;  // min_d |s_d| / sigma_d at the evaluation point
    Vec bias_se;           // Monte-Carlo only
    Mat cov_se;            // Monte-Carlo only
};

struct WorstCaseCrlb {
    Vec max_crlb_diag;  // elementwise max over the grid
    double max_cond = 0.0;
    LatentParams worst_x;  // location of the largest CRLB entry
    KnownParams worst_nu;
    bool any_singular = false;
};

// F = G' Sigma^-1 G with Sigma = diag(sigma_d^2) as given in the noise model.
FisherResult fisher(const Acquisition& acq, const LatentParams& x, const KnownParams& nu,
                    const NoiseModel& noise);

// Exhaustive scan over the (t1, t2, kappa) grid at fixed m0; singular Fisher
// points score +inf rather than aborting.
WorstCaseCrlb worst_case_crlb(const Acquisition& acq, const Vec& t1_grid, const Vec& t2_grid,
                              const Vec& kappa_grid, const NoiseModel& noise, double m0 = 1.0);

// Closed-form E[k_p] under magnitude measurements: mu_d = rician_mean(s_d,
// sigma_d), per-magnitude variance sigma_d^2/2 (each complex channel carries
// half the total variance). Valid because Sigma and Lambda are diagonal by
// construction; warns when any |s_d|/sigma_d < 5.
Vec expected_kernel_vector(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                           const KnownParams& nu, const NoiseModel& noise);

// bias = R (E[k] - m_k) + (m_x - x)
BiasCovReport conditional_bias(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                               const KnownParams& nu, const NoiseModel& noise);

// cov = R E[ktilde ktilde'] R'
BiasCovReport conditional_cov(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                              const KnownParams& nu, const NoiseModel& noise);

BiasCovReport monte_carlo_bias_cov(const ExactPerk& est, const Acquisition& acq,
                                   const LatentParams& x, const KnownParams& nu,
                                   const NoiseModel& noise, Index trials, std::uint64_t seed);

}  // namespace perk
