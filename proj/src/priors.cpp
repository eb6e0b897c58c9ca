#include "perk/priors.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace perk {

namespace {

double kde_draw(const ClippedKde& k, Rng& rng) {
    require(!k.points.empty(), "ClippedKde: no sample points");
    if (k.bandwidth == 0.0) return k.points[rng.integer(k.points.size())];
    for (;;) {
        const double v =
            k.points[rng.integer(k.points.size())] + k.bandwidth * rng.normal();
        if (v >= k.lo && v <= k.hi) return v;
    }
}

}  // namespace

double sample_one(const ScalarDistribution& dist, Rng& rng) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return rng.uniform(d.lo, d.hi);
            } else if constexpr (std::is_same_v<T, LogUniform>) {
                return std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
            } else {
                return kde_draw(d, rng);
            }
        },
        dist);
}

Vec sample(const ScalarDistribution& dist, Index n, Rng& rng) {
    require(n >= 1, "sample: n must be positive");
    Vec out(n);
    for (Index i = 0; i < n; ++i) out[i] = sample_one(dist, rng);
    return out;
}

bool in_support(const ScalarDistribution& dist, double v) {
    auto [lo, hi] = support(dist);
    return v >= lo && v <= hi;
}

std::pair<double, double> support(const ScalarDistribution& dist) {
    return std::visit(
        [](const auto& d) -> std::pair<double, double> { return {d.lo, d.hi}; }, dist);
}

ClippedKde fit_kde(const std::vector<double>& samples, double lo, double hi) {
    require(samples.size() >= 2, "fit_kde: need at least 2 samples");
    require(lo < hi, "fit_kde: empty support");
    for (double s : samples) require(std::isfinite(s), "fit_kde: non-finite sample");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    double bw = 1.06 * sd * std::pow(n, -0.2);
    if (bw == 0.0)
        std::cerr << "fit_kde: identical samples, falling back to a point mass\n";
    return ClippedKde{samples, bw, lo, hi};
}

Uniform m0_support_from_data(const std::vector<double>& magnitudes) {
    require(!magnitudes.empty(), "m0_support_from_data: empty data");
    const double mx = *std::max_element(magnitudes.begin(), magnitudes.end());
    require(mx > 0.0, "m0_support_from_data: all-zero data");
    return Uniform{2.2e-16, 6.67 * mx};
}

PriorSpec paper_default_priors(const std::vector<double>& test_magnitudes,
                               const std::vector<double>& kappa_map, bool broad) {
    PriorSpec p;
    p.m0 = m0_support_from_data(test_magnitudes);
    if (broad) {
        p.t1 = LogUniform{std::pow(10.0, 1.5), std::pow(10.0, 3.5)};
        p.t2 = LogUniform{std::pow(10.0, 0.5), std::pow(10.0, 3.5)};
    } else {
        p.t1 = LogUniform{400.0, 2000.0};
        p.t2 = LogUniform{40.0, 200.0};
    }
    p.kappa = fit_kde(kappa_map, 0.5, 2.0);
    return p;
}

}  // namespace perk
