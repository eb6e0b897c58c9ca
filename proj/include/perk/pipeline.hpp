#pragma once

#include "perk/estimator.hpp"
#include "perk/io.hpp"
#include "perk/phantom.hpp"

namespace perk {

// One synthesized experiment: scene, acquisition, the noise actually applied.
struct SceneData {
    PhantomScene scene;
    Acquisition acq;
    NoiseModel noise;
    std::vector<Vec> data;  // D noisy magnitude images
};

// Reference ROI for sigma calibration and SNR reporting ("WM" or "V6").
const std::string& reference_roi(const std::string& kind);

// Builds the phantom, calibrates sigma when requested (worst-dataset RMS over
// the reference ROI divided by snr_target), and synthesizes noisy data.
SceneData make_scene_data(const PhantomConfig& cfg, std::uint64_t seed);

std::vector<double> masked_values(const Vec& img, const std::vector<unsigned char>& mask);

// Per-dataset ||y_roi|| / ||eps_roi|| with both voxel sets truncated to a
// common count (the ratio is count-sensitive).
Vec dataset_snrs(const std::vector<Vec>& data, const std::vector<unsigned char>& signal_roi,
                 const std::vector<unsigned char>& background);

// Rayleigh fit per dataset over background voxels; the sqrt(2) converts the
// per-channel estimate to this toolkit's total complex std convention.
NoiseModel noise_from_background(const std::vector<Vec>& data,
                                 const std::vector<unsigned char>& tissue);

PriorSpec priors_from_data(const std::vector<Vec>& data, const Vec& kappa_map,
                           const std::vector<unsigned char>& mask, bool broad);

KernelConfig bandwidth_from_data(const std::vector<Vec>& data, const Vec& kappa_map,
                                 const std::vector<unsigned char>& mask, double lambda);

}  // namespace perk
