#pragma once

#include "perk/signal_models.hpp"

#include <map>
#include <string>
#include <vector>

namespace perk {

struct PhantomScene {
    Index rows = 0;
    Index cols = 0;
    std::vector<int> class_map;  // 0 = background
    Mat truth;                   // L x n_voxel, zero outside tissue
    Vec kappa_map;               // n_voxel
    std::map<std::string, std::vector<unsigned char>> roi_masks;

    Index n_voxels() const { return rows * cols; }
};

struct RoiStats {
    Index n = 0;
    double mean = 0.0;
    double std = 0.0;  // n-1 denominator
    double rmse = 0.0;
    double se_mean = 0.0;
    double se_std = 0.0;
};

std::vector<unsigned char> class_mask(const PhantomScene& scene, int cls);
std::vector<unsigned char> tissue_mask(const PhantomScene& scene);

// Concentric tissue disks: inner WM disk with a small CSF-like core, outer GM
// annulus, background outside. "WM"/"GM"/"CSF" ROI masks are eroded by one
// voxel (8-neighborhood).
PhantomScene brain_phantom(Index rows, Index cols, double kappa_amplitude = 0.2);

// Five-vial pentagon inside a water-bath disk; masks "V4".."V8".
PhantomScene vial_phantom(Index rows, Index cols, double kappa_amplitude = 0.1);

// kappa(r) = (1 + a) - 2 a (r / r_max)^2, r_max = center-to-corner distance
Vec kappa_bump(Index rows, Index cols, double amplitude);

// Signal + complex Gaussian noise (sigma_d^2 split evenly between real and
// imaginary parts) + magnitude; background voxels carry pure Rayleigh noise.
std::vector<Vec> synthesize(const PhantomScene& scene, const Acquisition& acq,
                            const NoiseModel& noise, std::uint64_t seed);

// ||y_roi|| / ||eps_roi||
double snr(const Vec& y_roi, const Vec& eps_roi);

// Rayleigh second-moment estimator sqrt(mean(r^2)/2): the per-channel noise
// std, i.e. sigma_d / sqrt(2) under this toolkit's total-variance convention.
double estimate_sigma(const Vec& background_magnitudes);

RoiStats roi_stats(const Vec& map, double truth, const std::vector<unsigned char>& mask);

// Rounds value to the decimal place of se's leading digit.
std::string round_to_se(double value, double se);

}  // namespace perk
