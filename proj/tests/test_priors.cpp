#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perk/priors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace perk;

namespace {

// one-sample KS distance of mapped-to-[0,1] samples against U(0,1)
double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
        d = std::max(d, std::abs(u[i] - static_cast<double>(i + 1) / n));
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("uniform sampling hits its mean") {
    Rng rng(11);
    const Vec s = sample(Uniform{0.0, 1.0}, 100000, rng);
    const double mean = s.mean();
    CHECK(mean > 0.49);
    CHECK(mean < 0.51);
    CHECK((s.array() >= 0.0).all());
    CHECK((s.array() < 1.0).all());
}

TEST_CASE("loguniform is uniform in log") {
    Rng rng(12);
    const Vec s = sample(LogUniform{400.0, 2000.0}, 100000, rng);
    std::vector<double> u(static_cast<std::size_t>(s.size()));
    const double lo = std::log(400.0), hi = std::log(2000.0);
    for (Index i = 0; i < s.size(); ++i) u[static_cast<std::size_t>(i)] = (std::log(s[i]) - lo) / (hi - lo);
    CHECK(ks_uniform(u) < 0.01);
}

TEST_CASE("loguniform equals exponentiated uniform in distribution") {
    Rng r1(13), r2(14);
    const Vec a = sample(LogUniform{40.0, 200.0}, 100000, r1);
    Vec b = sample(Uniform{std::log(40.0), std::log(200.0)}, 100000, r2);
    b = b.array().exp();
    CHECK(ks_two_sample(to_std(a), to_std(b)) < 0.01);
}

TEST_CASE("clipped kde respects its support") {
    ClippedKde kde{{0.6, 1.0, 1.4, 1.9}, 0.3, 0.5, 2.0};
    Rng rng(15);
    const Vec s = sample(kde, 20000, rng);
    CHECK((s.array() >= 0.5).all());
    CHECK((s.array() <= 2.0).all());
}

TEST_CASE("every distribution kind samples inside its support") {
    Rng rng(16);
    const std::vector<ScalarDistribution> dists = {
        Uniform{0.1, 1.2}, LogUniform{31.6, 3162.0}, ClippedKde{{0.9, 1.0, 1.1}, 0.05, 0.5, 2.0}};
    for (std::size_t di = 0; di < dists.size(); ++di) {
        const auto& dist = dists[di];
        Rng local = rng.stream(di);
        const Vec s = sample(dist, 5000, local);
        const auto [lo, hi] = support(dist);
        for (Index i = 0; i < s.size(); ++i) {
            CHECK(s[i] >= lo);
            CHECK(s[i] <= hi);
            CHECK(in_support(dist, s[i]));
        }
    }
}

TEST_CASE("sampling is deterministic under the seed") {
    Rng a(99), b(99);
    const Vec sa = sample(LogUniform{40.0, 200.0}, 100, a);
    const Vec sb = sample(LogUniform{40.0, 200.0}, 100, b);
    CHECK((sa - sb).cwiseAbs().maxCoeff() == 0.0);
    Rng c(99);
    CHECK_THROWS(sample(Uniform{0.0, 1.0}, 0, c));
}

TEST_CASE("kde fit resamples around the source mean") {
    Rng rng(17);
    const Vec src = sample(Uniform{0.8, 1.2}, 10000, rng);
    const ClippedKde kde = fit_kde(to_std(src), 0.5, 2.0);
    CHECK(kde.bandwidth > 0.0);
    Rng rng2(18);
    const Vec out = sample(kde, 10000, rng2);
    CHECK(out.mean() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("degenerate kde collapses to a point mass") {
    const ClippedKde kde = fit_kde(std::vector<double>(50, 1.0), 0.5, 2.0);
    CHECK(kde.bandwidth == 0.0);
    Rng rng(19);
    const Vec s = sample(kde, 100, rng);
    CHECK((s.array() == 1.0).all());
    CHECK_THROWS(fit_kde({}, 0.5, 2.0));
}

TEST_CASE("m0 support from data") {
    const Uniform u = m0_support_from_data({0.2, 1.0, 0.7});
    CHECK(u.lo == doctest::Approx(2.2e-16).epsilon(1e-12));
    CHECK(u.hi == doctest::Approx(6.67).epsilon(1e-12));
    CHECK(m0_support_from_data({0.15}).hi == doctest::Approx(1.0005).epsilon(1e-12));
    CHECK_THROWS(m0_support_from_data({}));
    CHECK_THROWS(m0_support_from_data({0.0, 0.0}));
}

TEST_CASE("paper default priors") {
    const std::vector<double> mags = {0.1, 0.4, 0.3};
    const std::vector<double> kappa(200, 1.0);

    const PriorSpec tight = paper_default_priors(mags, kappa);
    CHECK(support(tight.t1).first == doctest::Approx(400.0));
    CHECK(support(tight.t1).second == doctest::Approx(2000.0));
    CHECK(support(tight.t2).first == doctest::Approx(40.0));
    CHECK(support(tight.t2).second == doctest::Approx(200.0));
    CHECK(support(tight.m0).second == doctest::Approx(6.67 * 0.4));

    const PriorSpec broad = paper_default_priors(mags, kappa, true);
    CHECK(support(broad.t1).first == doctest::Approx(std::pow(10.0, 1.5)));
    CHECK(support(broad.t1).second == doctest::Approx(std::pow(10.0, 3.5)));
    CHECK(support(broad.t2).first == doctest::Approx(std::pow(10.0, 0.5)));
    CHECK(support(broad.t2).second == doctest::Approx(std::pow(10.0, 3.5)));

    // constant kappa map degenerates to a point mass at 1
    Rng rng(20);
    const Vec ks = sample(tight.kappa, 50, rng);
    CHECK((ks.array() == 1.0).all());
}
