#pragma once

#include "perk/common.hpp"
#include "perk/priors.hpp"
#include "perk/signal_models.hpp"

#include <string>

namespace perk {

struct TrainingSet {
    Mat regressands;  // L x N, columns x_n
    Mat regressors;   // P x N, columns [|y_n|; nu_n], P = D + K
    NoiseModel noise;
    std::uint64_t seed = 0;

    Index n() const { return regressands.cols(); }
};

struct KernelConfig {
    double lambda = 1.0;
    Vec Lambda;  // diagonal of the P x P bandwidth matrix, entries > 0
};

struct ExactPerk {
    Mat regressors;  // P x N
    Vec m_x;         // L
    Mat R;           // L x N, row l = x_tilde_l' M (M K M + N rho_l I)^-1
    Vec m_k;         // N, (1/N) K 1
    Vec r_mk;        // L, R m_k
    Vec rho;         // per-l regularization
    KernelConfig cfg;
};

struct FeatureMap {
    Mat V;  // P x Z, columns v_z ~ N(0, (2 pi Lambda)^-2)
    Vec s;  // Z phases in [0, 1)
    std::uint64_t seed = 0;
    KernelConfig cfg;  // the kernel V was drawn from

    Index z() const { return V.cols(); }
    Index p() const { return V.rows(); }
};

struct RffPerk {
    Vec m_x;   // L
    Vec m_z;   // Z
    Mat c_zx;  // Z x L
    Mat c_zz;  // Z x Z sample covariance of features
    Eigen::LLT<Mat> chol;  // factorization of (c_zz + rho I)
    Mat w;     // Z x L, (c_zz + rho I)^-1 c_zx (prediction fast path)
    double rho = 0.0;
    FeatureMap fm;
    KernelConfig cfg;

    Index z() const { return m_z.size(); }
    Index l() const { return m_x.size(); }
};

// Draw (x, kappa) from the priors, push through the acquisition, corrupt with
// complex Gaussian noise (real/imag each N(0, sigma_d^2/2)), take magnitudes.
TrainingSet generate_training_set(const PriorSpec& priors, const Acquisition& acq,
                                  const NoiseModel& noise, Index n, std::uint64_t seed);

// Lambda = lambda * diag([per-dataset voxel means; known-parameter means]);
// dataset_mags holds the masked voxel magnitudes per dataset, known_vals is
// K x n_voxel over the same voxels.
KernelConfig bandwidth_from_test_data(const std::vector<Vec>& dataset_mags, const Mat& known_vals,
                                      double lambda);

double gaussian_kernel(const Vec& p, const Vec& p_prime, const KernelConfig& cfg);

// Gram-form PERK. N is capped (default 2e4): the exact path is a validation
// tool. Shared-rho inputs factorize once; per-l rho factorizes per row.
ExactPerk train_exact(const TrainingSet& ts, const KernelConfig& cfg, const Vec& rho_per_l,
                      Index max_n = 20000);

// x_hat = m_x + R (k_p - m_k); subtracting the training-mean kernel vector
// m_k keeps the exact path identical to the RFF/Woodbury affine form.
Vec predict_exact(const ExactPerk& est, const Vec& p);

FeatureMap rff_draw(const KernelConfig& cfg, Index z, std::uint64_t seed);

Vec featurize(const FeatureMap& fm, const Vec& p);
// Columns of p_block featurized at once; the building block of streaming
// training and map prediction.
Mat featurize_block(const FeatureMap& fm, const Mat& p_block);

// Two-pass streaming accumulation (means, then centered second moments) in
// fixed chunk order; bitwise reproducible for any thread count.
RffPerk train_rff(const TrainingSet& ts, const FeatureMap& fm, double rho);

Vec predict(const RffPerk& est, const Vec& p);

// datasets: D images flattened row-major (n_voxel entries each); known_map:
// K x n_voxel; mask: n_voxel flags. Voxels outside the mask get zeros.
Mat predict_map(const RffPerk& est, const std::vector<Vec>& datasets, const Mat& known_map,
                const std::vector<unsigned char>& mask);

void save_rff(const RffPerk& est, const std::string& path);
RffPerk load_rff(const std::string& path);

}  // namespace perk
