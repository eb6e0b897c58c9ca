#include "perk/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

namespace perk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSingularRel = 1e-14;

void crlb_from_fisher(FisherResult& r) {
    Eigen::SelfAdjointEigenSolver<Mat> es(r.f);
    require(es.info() == Eigen::Success, "Fisher eigendecomposition failed");
    const Vec ev = es.eigenvalues();
    const double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    const Index l = r.f.rows();
    if (hi <= 0.0 || lo <= hi * kSingularRel) {
        r.cond = kInf;
        r.crlb_diag = Vec::Constant(l, kInf);
        return;
    }
    r.cond = hi / lo;
    r.crlb_diag.setZero(l);
    for (Index i = 0; i < l; ++i)
        for (Index k = 0; k < l; ++k)
            r.crlb_diag[i] += es.eigenvectors()(i, k) * es.eigenvectors()(i, k) / ev[k];
}

double min_snr_at(const Vec& s, const Vec& sigmas) {
    double m = kInf;
    for (Index d = 0; d < s.size(); ++d)
        if (sigmas[d] > 0.0) m = std::min(m, std::abs(s[d]) / sigmas[d]);
    return m;
}

void warn_low_snr(double snr) {
    if (snr < 5.0)
        std::fprintf(stderr,
                     "warning: |s|/sigma = %.3g < 5; the Gaussian magnitude approximation "
                     "behind the closed forms degrades at low SNR\n",
                     snr);
}

}  // namespace

FisherResult fisher(const Acquisition& acq, const LatentParams& x, const KnownParams& nu,
                    const NoiseModel& noise) {
    const Index d = acq.dataset_count();
    require(noise.sigmas.size() == d, "noise sigma count must match dataset count");
    require((noise.sigmas.array() > 0.0).all(), "Fisher information needs positive noise sigmas");
    const Mat g = signal_gradient(acq, x, nu);
    FisherResult r;
    Mat f = g.transpose() * noise.sigmas.array().square().inverse().matrix().asDiagonal() * g;
    r.f = 0.5 * (f + f.transpose());
    crlb_from_fisher(r);
    return r;
}

WorstCaseCrlb worst_case_crlb(const Acquisition& acq, const Vec& t1_grid, const Vec& t2_grid,
                              const Vec& kappa_grid, const NoiseModel& noise, double m0) {
    require(t1_grid.size() > 0 && t2_grid.size() > 0 && kappa_grid.size() > 0,
            "support grid must be nonempty");
    WorstCaseCrlb w;
    w.max_crlb_diag = Vec::Zero(kNumLatent);
    double worst_score = -1.0;
    for (Index a = 0; a < t1_grid.size(); ++a)
        for (Index b = 0; b < t2_grid.size(); ++b)
            for (Index c = 0; c < kappa_grid.size(); ++c) {
                const LatentParams x{m0, t1_grid[a], t2_grid[b]};
                const KnownParams nu{kappa_grid[c]};
                const FisherResult r = fisher(acq, x, nu, noise);
                w.max_cond = std::max(w.max_cond, r.cond);
                if (!r.crlb_diag.allFinite()) w.any_singular = true;
                w.max_crlb_diag = w.max_crlb_diag.cwiseMax(r.crlb_diag);
                const double score = r.crlb_diag.maxCoeff();
                if (score > worst_score) {
                    worst_score = score;
                    w.worst_x = x;
                    w.worst_nu = nu;
                }
            }
    return w;
}

namespace {

struct ClosedFormCtx {
    Vec mu;       // D expected magnitudes
    Vec sig_m2;   // D per-magnitude variances sigma_d^2 / 2
    Vec ly2;      // D magnitude bandwidths squared
    Vec lnu;     // K known bandwidths
    Mat y_tilde;  // D x N, mu - alpha_n
    Vec nu_fac;   // N kappa-distance factors
    double snr = 0.0;
};

ClosedFormCtx closed_form_ctx(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                              const KnownParams& nu, const NoiseModel& noise) {
    const Index d = acq.dataset_count();
    const Index k = est.cfg.Lambda.size() - d;
    require(k == kNumKnown, "estimator feature size does not match the acquisition");
    require(noise.sigmas.size() == d, "noise sigma count must match dataset count");
    require((noise.sigmas.array() >= 0.0).all(), "noise sigmas must be non-negative");

    ClosedFormCtx ctx;
    const Vec s = acquisition_signal(acq, x, nu);
    ctx.snr = min_snr_at(s, noise.sigmas);
    warn_low_snr(ctx.snr);
    ctx.mu.resize(d);
    for (Index i = 0; i < d; ++i) ctx.mu[i] = rician_mean(s[i], noise.sigmas[i]);
    ctx.sig_m2 = noise.sigmas.array().square() / 2.0;
    ctx.ly2 = est.cfg.Lambda.head(d).array().square();
    ctx.lnu = est.cfg.Lambda.tail(k);
    ctx.y_tilde = (-est.regressors.topRows(d)).colwise() + ctx.mu;
    const Index n = est.regressors.cols();
    ctx.nu_fac.resize(n);
    for (Index j = 0; j < n; ++j) {
        const double dk = (nu.kappa - est.regressors(d, j)) / ctx.lnu[0];
        ctx.nu_fac[j] = std::exp(-0.5 * dk * dk);
    }
    return ctx;
}

Vec expected_kernel_from_ctx(const ClosedFormCtx& ctx) {
    // log-domain per-coordinate: E_n = nu_fac_n * exp(-q_n/2 - logdet/2)
    const Vec w = (ctx.ly2 + ctx.sig_m2).cwiseInverse();
    double logdet = 0.0;
    for (Index i = 0; i < ctx.sig_m2.size(); ++i) logdet += std::log1p(ctx.sig_m2[i] / ctx.ly2[i]);
    const Index n = ctx.y_tilde.cols();
    Vec e(n);
    for (Index j = 0; j < n; ++j) {
        const double q = (ctx.y_tilde.col(j).array().square() * w.array()).sum();
        e[j] = ctx.nu_fac[j] * std::exp(-0.5 * q - 0.5 * logdet);
    }
    return e;
}

}  // namespace

Vec expected_kernel_vector(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                           const KnownParams& nu, const NoiseModel& noise) {
    return expected_kernel_from_ctx(closed_form_ctx(est, acq, x, nu, noise));
}

BiasCovReport conditional_bias(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                               const KnownParams& nu, const NoiseModel& noise) {
    const ClosedFormCtx ctx = closed_form_ctx(est, acq, x, nu, noise);
    BiasCovReport rep;
    rep.method = BiasCovMethod::ClosedForm;
    rep.min_snr = ctx.snr;
    Vec truth(kNumLatent);
    truth << x.m0, x.t1, x.t2;
    rep.bias = est.R * (expected_kernel_from_ctx(ctx) - est.m_k) + (est.m_x - truth);
    rep.cov = Mat::Zero(kNumLatent, kNumLatent);
    return rep;
}

BiasCovReport conditional_cov(const ExactPerk& est, const Acquisition& acq, const LatentParams& x,
                              const KnownParams& nu, const NoiseModel& noise) {
    const ClosedFormCtx ctx = closed_form_ctx(est, acq, x, nu, noise);
    const Index n = ctx.y_tilde.cols();

    // Delta_t = (1/2)(t Ly^-2 Sigma + I)^-1 Ly^-2, diagonal
    const Vec d0 = (2.0 * ctx.ly2).cwiseInverse();
    const Vec d1 = (2.0 * (ctx.ly2 + ctx.sig_m2)).cwiseInverse();
    const Vec d2 = (2.0 * (ctx.ly2 + 2.0 * ctx.sig_m2)).cwiseInverse();
    double logdet2 = 0.0, logdet1 = 0.0;
    for (Index i = 0; i < ctx.sig_m2.size(); ++i) {
        logdet2 += 0.5 * std::log1p(2.0 * ctx.sig_m2[i] / ctx.ly2[i]);
        logdet1 += std::log1p(ctx.sig_m2[i] / ctx.ly2[i]);
    }

    Mat ekk(n, n);
    for (Index jj = 0; jj < n; ++jj) {
        for (Index ii = 0; ii <= jj; ++ii) {
            const auto dif = (ctx.y_tilde.col(ii) - ctx.y_tilde.col(jj)).array();
            const auto sum = (ctx.y_tilde.col(ii) + ctx.y_tilde.col(jj)).array();
            const double q1 = (dif.square() * d0.array()).sum() + (sum.square() * d2.array()).sum();
            const double q2 = (dif.square() * d1.array()).sum() + (sum.square() * d1.array()).sum();
            const double v = ctx.nu_fac[ii] * ctx.nu_fac[jj] *
                             (std::exp(-0.5 * q1 - logdet2) - std::exp(-0.5 * q2 - logdet1));
            ekk(ii, jj) = v;
            ekk(jj, ii) = v;
        }
    }

    BiasCovReport rep;
    rep.method = BiasCovMethod::ClosedForm;
    rep.min_snr = ctx.snr;
    Mat cov = est.R * ekk * est.R.transpose();
    rep.cov = 0.5 * (cov + cov.transpose());
    rep.bias = Vec::Zero(kNumLatent);
    return rep;
}

BiasCovReport monte_carlo_bias_cov(const ExactPerk& est, const Acquisition& acq,
                                   const LatentParams& x, const KnownParams& nu,
                                   const NoiseModel& noise, Index trials, std::uint64_t seed) {
    require(trials >= 1, "need at least one trial");
    const Index d = acq.dataset_count();
    require(noise.sigmas.size() == d, "noise sigma count must match dataset count");
    const Vec s = acquisition_signal(acq, x, nu);
    const Vec chan = noise.sigmas / std::sqrt(2.0);
    const Index l = est.m_x.size();

    const Index chunk = 4096;
    const Index n_chunks = (trials + chunk - 1) / chunk;
    std::vector<Vec> sum1(static_cast<std::size_t>(n_chunks));
    std::vector<Mat> sum2(static_cast<std::size_t>(n_chunks));
    Rng base(seed);
    parallel_chunks(trials, chunk, [&](Index c, Index begin, Index end) {
        Rng rng = base.stream(static_cast<std::uint64_t>(c));
        const Index m = end - begin;
        Mat p(d + kNumKnown, m);
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < d; ++i) {
                const double re = s[i] + chan[i] * rng.normal();
                const double im = chan[i] * rng.normal();
                p(i, j) = std::hypot(re, im);
            }
            p(d, j) = nu.kappa;
        }
        Mat xh(l, m);
        for (Index j = 0; j < m; ++j) xh.col(j) = predict_exact(est, p.col(j));
        sum1[static_cast<std::size_t>(c)] = xh.rowwise().sum();
        sum2[static_cast<std::size_t>(c)] = xh * xh.transpose();
    });

    Vec s1 = Vec::Zero(l);
    Mat s2 = Mat::Zero(l, l);
    for (Index c = 0; c < n_chunks; ++c) {
        s1 += sum1[static_cast<std::size_t>(c)];
        s2 += sum2[static_cast<std::size_t>(c)];
    }
    const double t = static_cast<double>(trials);
    const Vec mean = s1 / t;

    BiasCovReport rep;
    rep.method = BiasCovMethod::MonteCarlo;
    rep.min_snr = min_snr_at(s, noise.sigmas);
    Vec truth(kNumLatent);
    truth << x.m0, x.t1, x.t2;
    rep.bias = mean - truth;
    if (trials > 1) {
        Mat cov = (s2 - t * mean * mean.transpose()) / (t - 1.0);
        rep.cov = 0.5 * (cov + cov.transpose());
        // rounding can leave tiny negative diagonals on zero-noise runs
        for (Index i = 0; i < l; ++i) rep.cov(i, i) = std::max(0.0, rep.cov(i, i));
    } else {
        rep.cov = Mat::Zero(l, l);
    }
    rep.bias_se = (rep.cov.diagonal() / t).cwiseSqrt();
    rep.cov_se.resize(l, l);
    for (Index i = 0; i < l; ++i)
        for (Index j = 0; j < l; ++j)
            rep.cov_se(i, j) = std::sqrt(std::max(
                0.0, (rep.cov(i, i) * rep.cov(j, j) + rep.cov(i, j) * rep.cov(i, j)) /
                         std::max(1.0, t - 1.0)));
    return rep;
}

}  // namespace perk
