#pragma once

#include "perk/common.hpp"

#include <variant>

namespace perk {

struct Uniform {
    double lo, hi;
};

struct LogUniform {
    double lo, hi;
};

// Gaussian-kernel KDE sampled by pick-a-point-then-jitter with rejection
// outside [lo, hi]. bandwidth == 0 degenerates to an empirical point mass.
struct ClippedKde {
    std::vector<double> points;
    double bandwidth;
    double lo, hi;
};

using ScalarDistribution = std::variant<Uniform, LogUniform, ClippedKde>;

double sample_one(const ScalarDistribution& dist, Rng& rng);
Vec sample(const ScalarDistribution& dist, Index n, Rng& rng);

bool in_support(const ScalarDistribution& dist, double v);
std::pair<double, double> support(const ScalarDistribution& dist);

// Silverman bandwidth 1.06 * sd * n^(-1/5); identical samples fall back to a
// point mass (bandwidth 0) with a warning on stderr.
ClippedKde fit_kde(const std::vector<double>& samples, double lo, double hi);

// Uniform(2.2e-16, 6.67 * max magnitude)
Uniform m0_support_from_data(const std::vector<double>& magnitudes);

struct PriorSpec {
    ScalarDistribution m0;
    ScalarDistribution t1;
    ScalarDistribution t2;
    ScalarDistribution kappa;
};

// Tight: T1 ~ LogUniform(400, 2000) ms, T2 ~ LogUniform(40, 200) ms.
// Broad: T1 ~ LogUniform(10^1.5, 10^3.5), T2 ~ LogUniform(10^0.5, 10^3.5).
// kappa ~ fit_kde(kappa map, [0.5, 2]); M0 via m0_support_from_data.
PriorSpec paper_default_priors(const std::vector<double>& test_magnitudes,
                               const std::vector<double>& kappa_map, bool broad = false);

}  // namespace perk
