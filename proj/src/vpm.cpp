#include "perk/vpm.hpp"

#include "perk/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace perk {

namespace {

Vec log10space(double lo, double hi, Index count) {
    require(count >= 1, "grid count must be at least 1");
    require(lo > 0.0 && hi >= lo, "invalid grid support");
    Vec v(count);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (Index i = 0; i < count; ++i) {
        const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        v[i] = std::pow(10.0, a + f * (b - a));
    }
    return v;
}

std::vector<double> distinct_sorted(const Vec& values) {
    std::vector<double> u(values.data(), values.data() + values.size());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

Index nearest_center(const Vec& centers, double v) {
    Index best = 0;
    double bd = std::abs(v - centers[0]);
    for (Index c = 1; c < centers.size(); ++c) {
        const double d = std::abs(v - centers[c]);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

VpmGridConfig paper_vpm_grid() {
    VpmGridConfig cfg;
    cfg.t1_count = 500;
    cfg.t2_count = 500;
    return cfg;
}

KappaClusters kmeanspp(const Vec& values, Index k, std::uint64_t seed, Index max_iters) {
    const Index n = values.size();
    require(k >= 1, "cluster count must be at least 1");
    require(static_cast<Index>(distinct_sorted(values).size()) >= k,
            "fewer distinct values than clusters");

    Rng rng(seed);
    Vec centers(k);
    centers[0] = values[static_cast<Index>(rng.integer(static_cast<std::uint64_t>(n)))];
    Vec d2 = (values.array() - centers[0]).square();
    for (Index c = 1; c < k; ++c) {
        const double total = d2.sum();
        Index pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            double acc = 0.0;
            for (Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc || i == n - 1) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Index>(rng.integer(static_cast<std::uint64_t>(n)));
        }
        centers[c] = values[pick];
        d2 = d2.cwiseMin((values.array() - centers[c]).square().matrix());
    }

    std::vector<Index> labels(static_cast<std::size_t>(n), 0);
    for (Index it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            const Index c = nearest_center(centers, values[i]);
            if (c != labels[static_cast<std::size_t>(i)]) {
                labels[static_cast<std::size_t>(i)] = c;
                changed = true;
            }
        }
        if (!changed && it > 0) break;
        Vec sums = Vec::Zero(k);
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
        for (Index i = 0; i < n; ++i) {
            sums[labels[static_cast<std::size_t>(i)]] += values[i];
            counts[static_cast<int>(labels[static_cast<std::size_t>(i)])] += 1;
        }
        for (Index c = 0; c < k; ++c)
            if (counts[static_cast<int>(c)] > 0)
                centers[c] = sums[c] / counts[static_cast<int>(c)];
        if (!changed) break;
    }

    // canonical ascending order
    std::vector<Index> order(static_cast<std::size_t>(k));
    for (Index c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return centers[a] < centers[b]; });
    std::vector<Index> inv(static_cast<std::size_t>(k));
    KappaClusters out;
    out.centers.resize(k);
    for (Index c = 0; c < k; ++c) {
        out.centers[c] = centers[order[static_cast<std::size_t>(c)]];
        inv[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;
    }
    out.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        out.labels[static_cast<std::size_t>(i)] = inv[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    return out;
}

Dictionary build_dictionary(const Acquisition& acq, double kappa, Index t1_count, Index t2_count,
                            std::pair<double, double> t1_support,
                            std::pair<double, double> t2_support) {
    Dictionary dict;
    dict.kappa = kappa;
    dict.t1_grid = log10space(t1_support.first, t1_support.second, t1_count);
    dict.t2_grid = log10space(t2_support.first, t2_support.second, t2_count);
    const Index d = acq.dataset_count();
    dict.atoms.resize(d, t1_count * t2_count);
    KnownParams nu{kappa};
    for (Index i1 = 0; i1 < t1_count; ++i1)
        for (Index i2 = 0; i2 < t2_count; ++i2) {
            LatentParams x{1.0, dict.t1_grid[i1], dict.t2_grid[i2]};
            dict.atoms.col(i1 * t2_count + i2) = acquisition_signal(acq, x, nu);
        }
    dict.atom_norms2 = dict.atoms.colwise().squaredNorm();
    return dict;
}

LatentParams vpm_estimate(const Vec& y_mag, const Dictionary& dict) {
    require(y_mag.size() == dict.atoms.rows(), "measurement size does not match dictionary");
    require((y_mag.array() >= 0.0).all(), "magnitude data must be non-negative");
    const Index a = dict.a();
    require(a > 0, "empty dictionary");
    const Vec dots = dict.atoms.transpose() * y_mag;
    const Vec norms2 =
        dict.atom_norms2.size() == a ? dict.atom_norms2 : Vec(dict.atoms.colwise().squaredNorm());
    const double y2 = y_mag.squaredNorm();
    Index best = -1;
    double best_r = 0.0;
    double best_m = 0.0;
    for (Index i = 0; i < a; ++i) {
        require(norms2[i] > 0.0, "all-zero dictionary atom");
        const double m = std::max(0.0, dots[i] / norms2[i]);
        const double r = y2 - 2.0 * m * dots[i] + m * m * norms2[i];
        if (best < 0 || r < best_r) {
            best = i;
            best_r = r;
            best_m = m;
        }
    }
    const Index n2 = dict.t2_grid.size();
    return {best_m, dict.t1_grid[best / n2], dict.t2_grid[best % n2]};
}

Mat vpm_map(const std::vector<Vec>& datasets, const Vec& kappa_map,
            const std::vector<unsigned char>& mask, Index k_clusters, const VpmGridConfig& cfg,
            const Acquisition& acq) {
    require(!datasets.empty(), "no datasets given");
    const Index d = static_cast<Index>(datasets.size());
    const Index n_vox = datasets[0].size();
    for (const Vec& img : datasets) require(img.size() == n_vox, "dataset sizes differ");
    require(kappa_map.size() == n_vox, "kappa map size does not match datasets");
    require(static_cast<Index>(mask.size()) == n_vox, "mask size does not match datasets");
    require(k_clusters >= 1, "cluster count must be at least 1");

    std::vector<Index> keep;
    for (Index v = 0; v < n_vox; ++v)
        if (mask[static_cast<std::size_t>(v)]) keep.push_back(v);
    Mat out = Mat::Zero(kNumLatent, n_vox);
    if (keep.empty()) return out;

    Vec kvals(static_cast<Index>(keep.size()));
    for (Index i = 0; i < kvals.size(); ++i) kvals[i] = kappa_map[keep[static_cast<std::size_t>(i)]];

    // Duplicate kappa values collapse: never ask for more clusters than
    // distinct values, so constant maps yield a single dictionary.
    const std::vector<double> uniq = distinct_sorted(kvals);
    KappaClusters clusters;
    if (static_cast<Index>(uniq.size()) <= k_clusters) {
        clusters.centers = Eigen::Map<const Vec>(uniq.data(), static_cast<Index>(uniq.size()));
        clusters.labels.resize(static_cast<std::size_t>(kvals.size()));
        for (Index i = 0; i < kvals.size(); ++i)
            clusters.labels[static_cast<std::size_t>(i)] = nearest_center(clusters.centers, kvals[i]);
    } else {
        clusters = kmeanspp(kvals, k_clusters, cfg.seed, cfg.max_iters);
    }

    for (Index c = 0; c < clusters.centers.size(); ++c) {
        std::vector<Index> members;
        for (Index i = 0; i < kvals.size(); ++i)
            if (clusters.labels[static_cast<std::size_t>(i)] == c)
                members.push_back(keep[static_cast<std::size_t>(i)]);
        if (members.empty()) continue;
        const Dictionary dict = build_dictionary(acq, clusters.centers[c], cfg.t1_count,
                                                 cfg.t2_count, cfg.t1_support, cfg.t2_support);
        parallel_chunks(static_cast<Index>(members.size()), 256, [&](Index, Index begin, Index end) {
            Vec y(d);
            for (Index i = begin; i < end; ++i) {
                const Index v = members[static_cast<std::size_t>(i)];
                for (Index q = 0; q < d; ++q) y[q] = datasets[static_cast<std::size_t>(q)][v];
                const LatentParams x = vpm_estimate(y, dict);
                out(0, v) = x.m0;
                out(1, v) = x.t1;
                out(2, v) = x.t2;
            }
        });
    }
    return out;
}

}  // namespace perk
