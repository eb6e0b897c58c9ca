#include "perk/model_selection.hpp"

#include <cmath>
#include <limits>

namespace perk {

namespace {

void validate(const HoldoutConfig& cfg) {
    require(cfg.lambda_grid.size() > 0 && cfg.rho_grid.size() > 0, "empty hyperparameter grid");
    require((cfg.lambda_grid.array() > 0.0).all() && (cfg.rho_grid.array() > 0.0).all(),
            "hyperparameter grids must be positive");
    for (Index i = 1; i < cfg.lambda_grid.size(); ++i)
        require(cfg.lambda_grid[i] > cfg.lambda_grid[i - 1], "lambda grid must be sorted");
    for (Index j = 1; j < cfg.rho_grid.size(); ++j)
        require(cfg.rho_grid[j] > cfg.rho_grid[j - 1], "rho grid must be sorted");
    require(cfg.t >= 1, "holdout test count must be at least 1");
    require(cfg.w.size() > 0 && (cfg.w.array() >= 0.0).all(), "weights must be non-negative");
    require(std::abs(cfg.w.sum() - 1.0) < 1e-12, "weights must sum to 1");
}

}  // namespace

double holdout_cost(const RffPerk& est, const Mat& test_x, const Mat& test_p, const Vec& w) {
    const Index t = test_x.cols();
    require(t >= 1, "holdout cost needs at least one test point");
    require(test_p.cols() == t, "regressand/regressor test counts differ");
    require(test_x.rows() == w.size(), "weight length must match latent count");
    for (Index l = 0; l < w.size(); ++l)
        if (w[l] > 0.0)
            require((test_x.row(l).array() != 0.0).all(), "zero regressand with nonzero weight");

    const Vec offset = est.m_x - est.w.transpose() * est.m_z;
    double acc = 0.0;
    const Index block = 8192;
    for (Index begin = 0; begin < t; begin += block) {
        const Index m = std::min(block, t - begin);
        Mat xh = (est.w.transpose() * featurize_block(est.fm, test_p.middleCols(begin, m)))
                     .colwise() +
                 offset;
        Mat rel = (xh - test_x.middleCols(begin, m)).array() /
                  test_x.middleCols(begin, m).array();
        acc += (w.transpose() * rel.array().square().matrix()).sum();
    }
    return std::sqrt(acc / static_cast<double>(t));
}

HoldoutSurface holdout_search(const HoldoutConfig& cfg, const PriorSpec& priors,
                              const Acquisition& acq, const NoiseModel& noise, Index train_n,
                              Index z, std::uint64_t seed, const Vec& bandwidth_means) {
    validate(cfg);
    const Index nl = cfg.lambda_grid.size();
    const Index nr = cfg.rho_grid.size();

    // One shared holdout set, drawn exactly like a training set.
    const TrainingSet holdout = generate_training_set(priors, acq, noise, cfg.t, derive_seed(seed, 0));
    const Vec base_means =
        bandwidth_means.size() > 0 ? bandwidth_means : Vec(holdout.regressors.rowwise().mean());
    require(base_means.size() == holdout.regressors.rows(),
            "bandwidth means size does not match regressor size");

    HoldoutSurface surf;
    surf.cost.resize(nl, nr);
    parallel_chunks(nl * nr, 1, [&](Index cell, Index, Index) {
        const Index i = cell / nr;
        const Index j = cell % nr;
        double psi = std::numeric_limits<double>::infinity();
        try {
            KernelConfig kc;
            kc.lambda = cfg.lambda_grid[i];
            kc.Lambda = kc.lambda * base_means;
            const std::uint64_t c = static_cast<std::uint64_t>(cell);
            const TrainingSet ts =
                generate_training_set(priors, acq, noise, train_n, derive_seed(seed, 1 + 2 * c));
            const FeatureMap fm = rff_draw(kc, z, derive_seed(seed, 2 + 2 * c));
            const RffPerk est = train_rff(ts, fm, cfg.rho_grid[j]);
            const double v = holdout_cost(est, holdout.regressands, holdout.regressors, cfg.w);
            if (std::isfinite(v)) psi = v;
        } catch (const std::exception&) {
            // ill-conditioned cell; keep +inf and move on
        }
        surf.cost(i, j) = psi;
    });

    surf.min_cost = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < nl; ++i)
        for (Index j = 0; j < nr; ++j)
            if (surf.cost(i, j) < surf.min_cost) {
                surf.min_cost = surf.cost(i, j);
                surf.argmin_lambda = i;
                surf.argmin_rho = j;
            }
    surf.lambda_hat = cfg.lambda_grid[surf.argmin_lambda];
    surf.rho_hat = cfg.rho_grid[surf.argmin_rho];
    return surf;
}

HoldoutConfig default_holdout_config(Index latent_count) {
    HoldoutConfig cfg;
    cfg.lambda_grid.resize(11);
    for (Index i = 0; i < 11; ++i) cfg.lambda_grid[i] = std::exp2(-2.0 + 0.5 * static_cast<double>(i));
    cfg.rho_grid.resize(11);
    for (Index j = 0; j < 11; ++j) cfg.rho_grid[j] = std::exp2(-50.0 + 3.0 * static_cast<double>(j));
    cfg.t = 10000;
    cfg.w = Vec::Zero(latent_count);
    if (latent_count == kNumLatent) {
        cfg.w[1] = 0.5;
        cfg.w[2] = 0.5;
    } else {
        cfg.w.setConstant(1.0 / static_cast<double>(latent_count));
    }
    return cfg;
}

}  // namespace perk
