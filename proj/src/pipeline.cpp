#include "perk/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace perk {

const std::string& reference_roi(const std::string& kind) {
    static const std::string wm = "WM", v6 = "V6";
    require(kind == "brain" || kind == "vial", "unknown phantom kind: " + kind);
    return kind == "brain" ? wm : v6;
}

SceneData make_scene_data(const PhantomConfig& cfg, std::uint64_t seed) {
    SceneData sd;
    sd.acq = paper_acquisition();
    if (cfg.kind == "brain")
        sd.scene = brain_phantom(cfg.rows, cfg.cols,
                                 cfg.kappa_amplitude < 0.0 ? 0.2 : cfg.kappa_amplitude);
    else if (cfg.kind == "vial")
        sd.scene = vial_phantom(cfg.rows, cfg.cols,
                                cfg.kappa_amplitude < 0.0 ? 0.1 : cfg.kappa_amplitude);
    else
        throw DataError("unknown phantom kind: " + cfg.kind);

    const Index d = sd.acq.dataset_count();
    double sigma = cfg.sigma;
    if (sigma < 0.0) {
        require(cfg.snr_target > 0.0, "snr_target must be positive");
        // worst-dataset RMS of the noiseless signal over the reference ROI
        const auto& roi = sd.scene.roi_masks.at(reference_roi(cfg.kind));
        Vec ss = Vec::Zero(d);
        Index n = 0;
        for (Index v = 0; v < sd.scene.n_voxels(); ++v)
            if (roi[static_cast<std::size_t>(v)]) {
                const LatentParams x{sd.scene.truth(0, v), sd.scene.truth(1, v),
                                     sd.scene.truth(2, v)};
                const KnownParams nu{sd.scene.kappa_map[v]};
                ss += acquisition_signal(sd.acq, x, nu).array().square().matrix();
                ++n;
            }
        require(n > 0, "empty reference ROI");
        sigma = std::sqrt(ss.maxCoeff() / static_cast<double>(n)) / cfg.snr_target;
    }
    sd.noise.sigmas = Vec::Constant(d, sigma);
    sd.data = synthesize(sd.scene, sd.acq, sd.noise, seed);
    return sd;
}

std::vector<double> masked_values(const Vec& img, const std::vector<unsigned char>& mask) {
    require(static_cast<Index>(mask.size()) == img.size(), "mask size does not match image");
    std::vector<double> out;
    for (Index v = 0; v < img.size(); ++v)
        if (mask[static_cast<std::size_t>(v)]) out.push_back(img[v]);
    return out;
}

Vec dataset_snrs(const std::vector<Vec>& data, const std::vector<unsigned char>& signal_roi,
                 const std::vector<unsigned char>& background) {
    require(!data.empty(), "no datasets given");
    Vec out(static_cast<Index>(data.size()));
    for (std::size_t q = 0; q < data.size(); ++q) {
        std::vector<double> y = masked_values(data[q], signal_roi);
        std::vector<double> e = masked_values(data[q], background);
        const std::size_t n = std::min(y.size(), e.size());
        require(n > 0, "empty SNR voxel set");
        const Vec yv = Eigen::Map<const Vec>(y.data(), static_cast<Index>(n));
        const Vec ev = Eigen::Map<const Vec>(e.data(), static_cast<Index>(n));
        out[static_cast<Index>(q)] = snr(yv, ev);
    }
    return out;
}

NoiseModel noise_from_background(const std::vector<Vec>& data,
                                 const std::vector<unsigned char>& tissue) {
    std::vector<unsigned char> bg(tissue.size());
    for (std::size_t v = 0; v < tissue.size(); ++v) bg[v] = tissue[v] ? 0 : 1;
    NoiseModel noise;
    noise.sigmas.resize(static_cast<Index>(data.size()));
    for (std::size_t q = 0; q < data.size(); ++q) {
        const std::vector<double> r = masked_values(data[q], bg);
        require(!r.empty(), "no background voxels to estimate noise from");
        const Vec rv = Eigen::Map<const Vec>(r.data(), static_cast<Index>(r.size()));
        // estimate_sigma returns the per-channel std; store the total std
        noise.sigmas[static_cast<Index>(q)] = std::sqrt(2.0) * estimate_sigma(rv);
    }
    return noise;
}

PriorSpec priors_from_data(const std::vector<Vec>& data, const Vec& kappa_map,
                           const std::vector<unsigned char>& mask, bool broad) {
    std::vector<double> mags;
    for (const Vec& img : data) {
        const std::vector<double> m = masked_values(img, mask);
        mags.insert(mags.end(), m.begin(), m.end());
    }
    return paper_default_priors(mags, masked_values(kappa_map, mask), broad);
}

KernelConfig bandwidth_from_data(const std::vector<Vec>& data, const Vec& kappa_map,
                                 const std::vector<unsigned char>& mask, double lambda) {
    std::vector<Vec> per_dataset;
    for (const Vec& img : data) {
        const std::vector<double> m = masked_values(img, mask);
        require(!m.empty(), "empty mask");
        per_dataset.push_back(Eigen::Map<const Vec>(m.data(), static_cast<Index>(m.size())));
    }
    const std::vector<double> kv = masked_values(kappa_map, mask);
    Mat known(1, static_cast<Index>(kv.size()));
    known.row(0) = Eigen::Map<const Vec>(kv.data(), static_cast<Index>(kv.size())).transpose();
    return bandwidth_from_test_data(per_dataset, known, lambda);
}

}  // namespace perk
