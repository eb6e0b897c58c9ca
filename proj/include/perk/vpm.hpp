#pragma once

#include "perk/signal_models.hpp"

#include <utility>
#include <vector>

namespace perk {

struct Dictionary {
    Mat atoms;  // D x A, unit-M0 signal vectors, column a = (i1, i2) pair a = i1*|t2|+i2
    Vec t1_grid;
    Vec t2_grid;
    double kappa = 1.0;
    Vec atom_norms2;  // cached squared norms (derived, filled by build_dictionary)

    Index a() const { return atoms.cols(); }
};

struct KappaClusters {
    Vec centers;  // k, ascending
    std::vector<Index> labels;
};

struct VpmGridConfig {
    Index t1_count = 100;
    Index t2_count = 100;
    std::pair<double, double> t1_support{31.622776601683793, 3162.2776601683795};  // 10^[1.5,3.5]
    std::pair<double, double> t2_support{3.1622776601683795, 1000.0};              // 10^[0.5,3]
    std::uint64_t seed = 0;
    Index max_iters = 100;
};

VpmGridConfig paper_vpm_grid();  // 500 x 500 axes

// k-means++ seeding then Lloyd to an assignment fixpoint; centers returned
// ascending with labels remapped to match.
KappaClusters kmeanspp(const Vec& values, Index k, std::uint64_t seed, Index max_iters = 100);

Dictionary build_dictionary(const Acquisition& acq, double kappa, Index t1_count, Index t2_count,
                            std::pair<double, double> t1_support = VpmGridConfig{}.t1_support,
                            std::pair<double, double> t2_support = VpmGridConfig{}.t2_support);

// Variable projection: M0_a = max(0, <d_a,y>/<d_a,d_a>), argmin residual;
// ties break toward the smaller (t1, t2) grid index pair.
LatentParams vpm_estimate(const Vec& y_mag, const Dictionary& dict);

// Cluster the kappa map (duplicate values collapse, so a constant map yields
// one dictionary for any k), then per-cluster dictionary + per-voxel search.
Mat vpm_map(const std::vector<Vec>& datasets, const Vec& kappa_map,
            const std::vector<unsigned char>& mask, Index k_clusters, const VpmGridConfig& cfg,
            const Acquisition& acq = paper_acquisition());

}  // namespace perk
