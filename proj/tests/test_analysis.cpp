#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perk/analysis.hpp"

#include <cmath>
#include <limits>

using namespace perk;

namespace {

PriorSpec test_priors() {
    PriorSpec p;
    p.m0 = Uniform{0.1, 1.2};
    p.t1 = LogUniform{400.0, 2000.0};
    p.t2 = LogUniform{40.0, 200.0};
    p.kappa = Uniform{0.9, 1.1};
    return p;
}

NoiseModel const_noise(Index d, double sigma) {
    NoiseModel n;
    n.sigmas = Vec::Constant(d, sigma);
    return n;
}

// Exact estimator on paper-acquisition training data with bandwidths set to
// the training-regressor means.
ExactPerk make_exact(Index n, double sigma, double rho, std::uint64_t seed) {
    const Acquisition acq = paper_acquisition();
    const TrainingSet ts = generate_training_set(test_priors(), acq, const_noise(4, sigma), n, seed);
    KernelConfig cfg;
    cfg.lambda = 1.0;
    cfg.Lambda = ts.regressors.rowwise().mean();
    return train_exact(ts, cfg, Vec::Constant(3, rho));
}

Acquisition toy_acq(double te) {
    Acquisition acq;
    acq.scans = {ScanSpec{ScanKind::Toy, 90.0, 100.0, te}};
    return acq;
}

}  // namespace

TEST_CASE("fisher information") {
    SUBCASE("toy model with unit noise") {
        const Acquisition acq = toy_acq(20.0);
        const LatentParams x{1.0, 600.0, 80.0};
        const FisherResult r = fisher(acq, x, {1.0}, const_noise(1, 1.0));
        const double a = std::exp(-20.0 / 80.0);
        CHECK(r.f(0, 0) == doctest::Approx(a * a).epsilon(1e-9));
        // T1 never enters the toy signal: that row/column vanishes and the
        // matrix is singular
        CHECK(r.f(1, 1) == 0.0);
        CHECK(r.f(0, 1) == 0.0);
        CHECK(std::isinf(r.cond));
        CHECK(std::isinf(r.crlb_diag[0]));
    }

    SUBCASE("white-matter point is well posed") {
        const Acquisition acq = paper_acquisition();
        const FisherResult r =
            fisher(acq, {0.9, 832.0, 79.6}, {1.0}, const_noise(4, 0.004));
        CHECK((r.f - r.f.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(r.crlb_diag.allFinite());
        CHECK((r.crlb_diag.array() > 0.0).all());
        CHECK(r.cond > 1.0);
        CHECK(r.cond < 1e13);
    }

    SUBCASE("crlb scales with the noise variance") {
        const Acquisition acq = paper_acquisition();
        const FisherResult r1 =
            fisher(acq, {0.9, 832.0, 79.6}, {1.0}, const_noise(4, 0.004));
        const FisherResult r2 =
            fisher(acq, {0.9, 832.0, 79.6}, {1.0}, const_noise(4, 0.008));
        for (Index i = 0; i < 3; ++i)
            CHECK(r2.crlb_diag[i] == doctest::Approx(4.0 * r1.crlb_diag[i]).epsilon(1e-10));
    }

    SUBCASE("psd at random support points") {
        const Acquisition acq = paper_acquisition();
        Rng rng(5);
        for (int t = 0; t < 100; ++t) {
            const LatentParams x{rng.uniform(0.1, 1.2),
                                 std::exp(rng.uniform(std::log(400.0), std::log(2000.0))),
                                 std::exp(rng.uniform(std::log(40.0), std::log(200.0)))};
            const KnownParams nu{rng.uniform(0.9, 1.1)};
            const FisherResult r = fisher(acq, x, nu, const_noise(4, 0.01));
            Eigen::SelfAdjointEigenSolver<Mat> es(r.f);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
        }
    }

    SUBCASE("dataset order does not matter") {
        Acquisition fwd;
        fwd.scans = {ScanSpec{ScanKind::Spgr, 5.0, 12.2, 4.67},
                     ScanSpec{ScanKind::Spgr, 15.0, 12.2, 4.67},
                     ScanSpec{ScanKind::Dess, 30.0, 17.5, 4.67}};
        Acquisition rev;
        rev.scans = {fwd.scans[2], fwd.scans[1], fwd.scans[0]};
        NoiseModel n_fwd, n_rev;
        n_fwd.sigmas = Vec(4);
        n_fwd.sigmas << 0.01, 0.02, 0.03, 0.04;  // spgr5 spgr15 dess1 dess2
        n_rev.sigmas = Vec(4);
        n_rev.sigmas << 0.03, 0.04, 0.02, 0.01;  // dess1 dess2 spgr15 spgr5
        const FisherResult a = fisher(fwd, {0.9, 832.0, 79.6}, {1.0}, n_fwd);
        const FisherResult b = fisher(rev, {0.9, 832.0, 79.6}, {1.0}, n_rev);
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 3; ++j)
                CHECK(a.f(i, j) == doctest::Approx(b.f(i, j)).epsilon(1e-12));
    }

    SUBCASE("input validation") {
        const Acquisition acq = paper_acquisition();
        CHECK_THROWS(fisher(acq, {0.9, 832.0, 79.6}, {1.0}, const_noise(3, 0.01)));
        CHECK_THROWS(fisher(acq, {0.9, 832.0, 79.6}, {1.0}, const_noise(4, 0.0)));
    }
}

TEST_CASE("worst-case crlb scan") {
    const Acquisition acq = paper_acquisition();
    const NoiseModel noise = const_noise(4, 0.004);

    SUBCASE("single point reduces to fisher") {
        const Vec t1 = Vec::Constant(1, 832.0);
        const Vec t2 = Vec::Constant(1, 79.6);
        const Vec kap = Vec::Constant(1, 1.0);
        const WorstCaseCrlb w = worst_case_crlb(acq, t1, t2, kap, noise, 0.9);
        const FisherResult r = fisher(acq, {0.9, 832.0, 79.6}, {1.0}, noise);
        CHECK((w.max_crlb_diag - r.crlb_diag).cwiseAbs().maxCoeff() == 0.0);
        CHECK(w.max_cond == r.cond);
        CHECK(w.worst_x.t1 == 832.0);
        CHECK(w.worst_nu.kappa == 1.0);
        CHECK_FALSE(w.any_singular);
    }

    SUBCASE("degenerate acquisition is flagged, not fatal") {
        // TE far beyond any T2: every signal and gradient underflows
        const Vec t1 = Vec::Constant(2, 800.0);
        Vec t2(2);
        t2 << 50.0, 80.0;
        const Vec kap = Vec::Constant(1, 1.0);
        const WorstCaseCrlb w = worst_case_crlb(toy_acq(1e6), t1, t2, kap, const_noise(1, 1.0));
        CHECK(w.any_singular);
        CHECK(std::isinf(w.max_cond));
        CHECK(std::isinf(w.max_crlb_diag.maxCoeff()));
    }

    SUBCASE("support grid scan stays finite") {
        Vec t1(8), t2(8), kap(3);
        for (Index i = 0; i < 8; ++i) {
            t1[i] = 400.0 * std::pow(2000.0 / 400.0, i / 7.0);
            t2[i] = 40.0 * std::pow(200.0 / 40.0, i / 7.0);
        }
        kap << 0.9, 1.0, 1.1;
        const WorstCaseCrlb w = worst_case_crlb(acq, t1, t2, kap, noise, 0.9);
        CHECK_FALSE(w.any_singular);
        CHECK(w.max_crlb_diag.allFinite());
        CHECK((w.max_crlb_diag.array() > 0.0).all());
        CHECK(w.max_cond < 1e13);
        CHECK(w.worst_x.t1 >= 400.0);
        CHECK(w.worst_x.t1 <= 2000.0);

        CHECK_THROWS(worst_case_crlb(acq, Vec(), t2, kap, noise));
    }
}

TEST_CASE("expected kernel vector") {
    const Acquisition acq = paper_acquisition();
    const LatentParams x{0.9, 832.0, 79.6};
    const KnownParams nu{1.0};

    SUBCASE("zero noise reduces to the plain kernel") {
        const ExactPerk est = make_exact(30, 0.01, 1e-6, 40);
        const Vec s = acquisition_signal(acq, x, nu);
        const Vec e = expected_kernel_vector(est, acq, x, nu, const_noise(4, 0.0));
        Vec p(5);
        p << s[0], s[1], s[2], s[3], nu.kappa;
        for (Index j = 0; j < est.regressors.cols(); ++j) {
            const double k = gaussian_kernel(p, est.regressors.col(j), est.cfg);
            CHECK(std::abs(e[j] - k) <= 1e-14);
        }
    }

    SUBCASE("matched bandwidth prefactor") {
        // Lambda_y = sigma_d / sqrt(2) doubles each quadratic denominator, so
        // a training column sitting exactly at the expected magnitudes scores
        // 2^(-D/2)
        const Vec s = acquisition_signal(acq, x, nu);
        NoiseModel noise;
        noise.sigmas = s / 10.0;
        TrainingSet ts = generate_training_set(test_priors(), acq, noise, 6, 41);
        for (Index d = 0; d < 4; ++d)
            ts.regressors(d, 0) = rician_mean(s[d], noise.sigmas[d]);
        ts.regressors(4, 0) = nu.kappa;
        KernelConfig cfg;
        cfg.Lambda = Vec(5);
        cfg.Lambda << noise.sigmas[0] / std::sqrt(2.0), noise.sigmas[1] / std::sqrt(2.0),
            noise.sigmas[2] / std::sqrt(2.0), noise.sigmas[3] / std::sqrt(2.0), 0.1;
        const ExactPerk est = train_exact(ts, cfg, Vec::Constant(3, 1e-6));
        const Vec e = expected_kernel_vector(est, acq, x, nu, noise);
        CHECK(e[0] == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("farther kappa scores strictly lower") {
        const Vec s = acquisition_signal(acq, x, nu);
        NoiseModel noise;
        noise.sigmas = s / 10.0;
        TrainingSet ts = generate_training_set(test_priors(), acq, noise, 4, 42);
        ts.regressors.col(1) = ts.regressors.col(0);
        ts.regressors(4, 0) = 1.0;
        ts.regressors(4, 1) = 1.3;
        KernelConfig cfg;
        cfg.Lambda = ts.regressors.rowwise().mean();
        const ExactPerk est = train_exact(ts, cfg, Vec::Constant(3, 1e-6));
        const Vec e = expected_kernel_vector(est, acq, x, nu, noise);
        CHECK(e[0] > e[1]);
        CHECK(e[1] > 0.0);
    }

    SUBCASE("monte-carlo agreement") {
        const ExactPerk est = make_exact(5, 0.01, 1e-6, 43);
        const Vec s = acquisition_signal(acq, x, nu);
        NoiseModel noise;
        noise.sigmas = s / 10.0;
        const Vec closed = expected_kernel_vector(est, acq, x, nu, noise);

        const Index trials = 200000;
        Rng rng(44);
        Vec acc = Vec::Zero(est.regressors.cols());
        Vec p(5);
        p[4] = nu.kappa;
        for (Index t = 0; t < trials; ++t) {
            for (Index d = 0; d < 4; ++d) {
                const double c = noise.sigmas[d] / std::sqrt(2.0);
                p[d] = std::hypot(s[d] + c * rng.normal(), c * rng.normal());
            }
            for (Index j = 0; j < acc.size(); ++j)
                acc[j] += gaussian_kernel(p, est.regressors.col(j), est.cfg);
        }
        acc /= static_cast<double>(trials);
        for (Index j = 0; j < acc.size(); ++j)
            CHECK(std::abs(acc[j] - closed[j]) <= 0.01 * std::max(closed[j], 0.01));
    }

    SUBCASE("estimator/acquisition mismatch") {
        const ExactPerk est = make_exact(5, 0.01, 1e-6, 45);
        CHECK_THROWS(
            expected_kernel_vector(est, toy_acq(20.0), x, nu, const_noise(1, 0.01)));
        CHECK_THROWS(expected_kernel_vector(est, acq, x, nu, const_noise(3, 0.01)));
    }
}

TEST_CASE("conditional bias and covariance") {
    const Acquisition acq = paper_acquisition();
    const LatentParams x{0.9, 832.0, 79.6};
    const KnownParams nu{1.0};

    SUBCASE("zero-noise bias equals the deterministic error") {
        const ExactPerk est = make_exact(40, 0.01, 1e-6, 50);
        const BiasCovReport rep = conditional_bias(est, acq, x, nu, const_noise(4, 0.0));
        CHECK(rep.method == BiasCovMethod::ClosedForm);
        const Vec s = acquisition_signal(acq, x, nu);
        Vec p(5);
        p << s[0], s[1], s[2], s[3], nu.kappa;
        const Vec xh = predict_exact(est, p);
        Vec truth(3);
        truth << x.m0, x.t1, x.t2;
        const Vec want = xh - truth;
        for (Index l = 0; l < 3; ++l)
            CHECK(rep.bias[l] == doctest::Approx(want[l]).epsilon(1e-8));
        CHECK(rep.cov.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("single training sample pins the bias") {
        const Acquisition toy = toy_acq(20.0);
        PriorSpec priors = test_priors();
        const TrainingSet ts =
            generate_training_set(priors, toy, const_noise(1, 0.0), 1, 51);
        KernelConfig cfg;
        cfg.Lambda = Vec::Constant(2, 0.5);
        const ExactPerk est = train_exact(ts, cfg, Vec::Constant(3, 1e-4));
        const BiasCovReport rep =
            conditional_bias(est, toy, {0.7, 700.0, 60.0}, {1.0}, const_noise(1, 0.001));
        Vec want(3);
        want << ts.regressands(0, 0) - 0.7, ts.regressands(1, 0) - 700.0,
            ts.regressands(2, 0) - 60.0;
        CHECK((rep.bias - want).cwiseAbs().maxCoeff() <= 1e-9 * 2000.0);
    }

    SUBCASE("zero-noise covariance vanishes exactly") {
        const ExactPerk est = make_exact(40, 0.01, 1e-6, 52);
        const BiasCovReport rep = conditional_cov(est, acq, x, nu, const_noise(4, 0.0));
        CHECK(rep.cov.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("covariance is symmetric with non-negative diagonal") {
        const ExactPerk est = make_exact(60, 0.01, 1e-4, 53);
        Rng rng(54);
        for (int t = 0; t < 20; ++t) {
            const LatentParams xt{rng.uniform(0.3, 1.1),
                                  std::exp(rng.uniform(std::log(400.0), std::log(2000.0))),
                                  std::exp(rng.uniform(std::log(40.0), std::log(200.0)))};
            const Vec s = acquisition_signal(acq, xt, nu);
            NoiseModel noise;
            noise.sigmas = Vec::Constant(4, s.minCoeff() / 20.0);
            const BiasCovReport rep = conditional_cov(est, acq, xt, nu, noise);
            CHECK((rep.cov - rep.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
            const double scale = rep.cov.diagonal().cwiseAbs().maxCoeff();
            CHECK(rep.cov.diagonal().minCoeff() >= -1e-12 * std::max(scale, 1.0));
        }
    }

    SUBCASE("closed forms match monte carlo") {
        const ExactPerk est = make_exact(50, 0.01, 1e-4, 55);
        const Vec s = acquisition_signal(acq, x, nu);
        NoiseModel noise;
        noise.sigmas = Vec::Constant(4, s.minCoeff() / 25.0);
        const BiasCovReport cf_bias = conditional_bias(est, acq, x, nu, noise);
        const BiasCovReport cf_cov = conditional_cov(est, acq, x, nu, noise);
        const BiasCovReport mc = monte_carlo_bias_cov(est, acq, x, nu, noise, 200000, 56);
        CHECK(mc.method == BiasCovMethod::MonteCarlo);
        CHECK(mc.min_snr >= 20.0);

        Vec truth(3);
        truth << x.m0, x.t1, x.t2;
        CHECK((cf_bias.bias - mc.bias).norm() <= 0.05 * truth.norm());
        CHECK((cf_cov.cov - mc.cov).norm() <= 0.05 * std::max(mc.cov.norm(), 1e-12));
    }

    SUBCASE("monte carlo is deterministic and honors zero noise") {
        const ExactPerk est = make_exact(30, 0.01, 1e-4, 57);
        NoiseModel noise;
        noise.sigmas = Vec::Constant(4, 0.002);
        const BiasCovReport a = monte_carlo_bias_cov(est, acq, x, nu, noise, 5000, 58);
        const BiasCovReport b = monte_carlo_bias_cov(est, acq, x, nu, noise, 5000, 58);
        CHECK((a.bias - b.bias).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() == 0.0);
        const BiasCovReport c = monte_carlo_bias_cov(est, acq, x, nu, noise, 5000, 59);
        CHECK((a.bias - c.bias).cwiseAbs().maxCoeff() > 0.0);

        const BiasCovReport z =
            monte_carlo_bias_cov(est, acq, x, nu, const_noise(4, 0.0), 1000, 60);
        CHECK(z.cov.cwiseAbs().maxCoeff() <= 1e-6);
        CHECK((z.cov.diagonal().array() >= 0.0).all());
        CHECK_THROWS(monte_carlo_bias_cov(est, acq, x, nu, noise, 0, 61));
    }

    SUBCASE("standard errors shrink like one over root trials") {
        const ExactPerk est = make_exact(30, 0.01, 1e-4, 62);
        NoiseModel noise;
        noise.sigmas = Vec::Constant(4, 0.002);
        const BiasCovReport small_run = monte_carlo_bias_cov(est, acq, x, nu, noise, 10000, 63);
        const BiasCovReport big_run = monte_carlo_bias_cov(est, acq, x, nu, noise, 1000000, 63);
        for (Index l = 0; l < 3; ++l) {
            const double ratio = small_run.bias_se[l] / big_run.bias_se[l];
            CHECK(ratio > 7.0);
            CHECK(ratio < 13.0);
        }
    }
}
