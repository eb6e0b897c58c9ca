#include "perk/phantom.hpp"

#include "perk/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace perk {

namespace {

struct VialSpec {
    double t1, t2;
};
constexpr VialSpec kVials[5] = {
    {1604.0, 190.94}, {1332.0, 133.27}, {1044.0, 96.89}, {801.7, 64.07}, {608.6, 46.42}};

// keep a voxel only when all 8 neighbors share its membership
std::vector<unsigned char> erode8(const std::vector<unsigned char>& m, Index rows, Index cols) {
    std::vector<unsigned char> e(m.size(), 0);
    for (Index i = 1; i + 1 < rows; ++i)
        for (Index j = 1; j + 1 < cols; ++j) {
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (!m[static_cast<std::size_t>((i + dy) * cols + (j + dx))]) {
                        keep = false;
                        break;
                    }
            e[static_cast<std::size_t>(i * cols + j)] = keep ? 1 : 0;
        }
    return e;
}

void paint_disk(PhantomScene& scene, double cy, double cx, double radius, int cls, double m0,
                double t1, double t2) {
    for (Index i = 0; i < scene.rows; ++i)
        for (Index j = 0; j < scene.cols; ++j)
            if (std::hypot(static_cast<double>(i) - cy, static_cast<double>(j) - cx) < radius) {
                const Index v = i * scene.cols + j;
                scene.class_map[static_cast<std::size_t>(v)] = cls;
                scene.truth(0, v) = m0;
                scene.truth(1, v) = t1;
                scene.truth(2, v) = t2;
            }
}

PhantomScene blank_scene(Index rows, Index cols, double kappa_amplitude) {
    PhantomScene scene;
    scene.rows = rows;
    scene.cols = cols;
    scene.class_map.assign(static_cast<std::size_t>(rows * cols), 0);
    scene.truth = Mat::Zero(kNumLatent, rows * cols);
    scene.kappa_map = kappa_bump(rows, cols, kappa_amplitude);
    return scene;
}

}  // namespace

std::vector<unsigned char> class_mask(const PhantomScene& scene, int cls) {
    std::vector<unsigned char> m(scene.class_map.size());
    for (std::size_t v = 0; v < m.size(); ++v) m[v] = scene.class_map[v] == cls ? 1 : 0;
    return m;
}

std::vector<unsigned char> tissue_mask(const PhantomScene& scene) {
    std::vector<unsigned char> m(scene.class_map.size());
    for (std::size_t v = 0; v < m.size(); ++v) m[v] = scene.class_map[v] != 0 ? 1 : 0;
    return m;
}

PhantomScene brain_phantom(Index rows, Index cols, double kappa_amplitude) {
    require(rows >= 16 && cols >= 16, "brain phantom needs at least 16x16 voxels");
    PhantomScene scene = blank_scene(rows, cols, kappa_amplitude);
    const double cy = static_cast<double>(rows - 1) / 2.0;
    const double cx = static_cast<double>(cols - 1) / 2.0;
    const double unit = static_cast<double>(std::min(rows, cols));
    paint_disk(scene, cy, cx, 0.45 * unit, 2, 0.86, 1331.0, 110.0);  // GM annulus (outer disk)
    paint_disk(scene, cy, cx, 0.28 * unit, 1, 0.77, 832.0, 79.6);    // WM disk
    paint_disk(scene, cy, cx, 0.10 * unit, 3, 1.0, 4000.0, 2000.0);  // CSF-like core
    scene.roi_masks["WM"] = erode8(class_mask(scene, 1), rows, cols);
    scene.roi_masks["GM"] = erode8(class_mask(scene, 2), rows, cols);
    scene.roi_masks["CSF"] = erode8(class_mask(scene, 3), rows, cols);
    return scene;
}

PhantomScene vial_phantom(Index rows, Index cols, double kappa_amplitude) {
    require(rows >= 64 && cols >= 64, "vial phantom needs at least 64x64 voxels");
    PhantomScene scene = blank_scene(rows, cols, kappa_amplitude);
    const double cy = static_cast<double>(rows - 1) / 2.0;
    const double cx = static_cast<double>(cols - 1) / 2.0;
    const double unit = static_cast<double>(std::min(rows, cols));
    paint_disk(scene, cy, cx, 0.45 * unit, 6, 1.0, 3000.0, 1500.0);  // water bath
    const double ring = 0.30 * unit;
    const double rad = 0.09 * unit;
    for (int v = 0; v < 5; ++v) {
        const double ang = 2.0 * kPi * v / 5.0 - kPi / 2.0;
        paint_disk(scene, cy + ring * std::sin(ang), cx + ring * std::cos(ang), rad, v + 1, 1.0,
                   kVials[v].t1, kVials[v].t2);
    }
    for (int v = 0; v < 5; ++v)
        scene.roi_masks["V" + std::to_string(v + 4)] = erode8(class_mask(scene, v + 1), rows, cols);
    return scene;
}

Vec kappa_bump(Index rows, Index cols, double amplitude) {
    require(amplitude >= 0.0 && amplitude <= 0.5, "kappa amplitude must be in [0, 0.5]");
    const double cy = static_cast<double>(rows - 1) / 2.0;
    const double cx = static_cast<double>(cols - 1) / 2.0;
    const double rmax = std::hypot(cy, cx);
    Vec k(rows * cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            const double r = std::hypot(static_cast<double>(i) - cy, static_cast<double>(j) - cx);
            const double f = rmax > 0.0 ? r / rmax : 0.0;
            k[i * cols + j] = (1.0 + amplitude) - 2.0 * amplitude * f * f;
        }
    return k;
}

std::vector<Vec> synthesize(const PhantomScene& scene, const Acquisition& acq,
                            const NoiseModel& noise, std::uint64_t seed) {
    const Index d = acq.dataset_count();
    require(noise.sigmas.size() == d, "noise sigma count must match dataset count");
    require((noise.sigmas.array() >= 0.0).all(), "noise sigmas must be non-negative");
    const Index n_vox = scene.n_voxels();
    require(scene.truth.cols() == n_vox && scene.kappa_map.size() == n_vox,
            "inconsistent phantom scene");

    std::vector<Vec> out(static_cast<std::size_t>(d), Vec::Zero(n_vox));
    const Vec chan = noise.sigmas / std::sqrt(2.0);
    Rng base(seed);
    parallel_chunks(n_vox, 4096, [&](Index chunk, Index begin, Index end) {
        Rng rng = base.stream(static_cast<std::uint64_t>(chunk));
        for (Index v = begin; v < end; ++v) {
            Vec s = Vec::Zero(d);
            if (scene.class_map[static_cast<std::size_t>(v)] != 0) {
                const LatentParams x{scene.truth(0, v), scene.truth(1, v), scene.truth(2, v)};
                const KnownParams nu{scene.kappa_map[v]};
                s = acquisition_signal(acq, x, nu);
            }
            for (Index q = 0; q < d; ++q) {
                const double re = s[q] + chan[q] * rng.normal();
                const double im = chan[q] * rng.normal();
                out[static_cast<std::size_t>(q)][v] = std::hypot(re, im);
            }
        }
    });
    return out;
}

double snr(const Vec& y_roi, const Vec& eps_roi) {
    const double denom = eps_roi.norm();
    require(denom > 0.0, "noise region is all zero");
    return y_roi.norm() / denom;
}

double estimate_sigma(const Vec& background_magnitudes) {
    require(background_magnitudes.size() > 0, "empty background region");
    return std::sqrt(background_magnitudes.squaredNorm() /
                     (2.0 * static_cast<double>(background_magnitudes.size())));
}

RoiStats roi_stats(const Vec& map, double truth, const std::vector<unsigned char>& mask) {
    require(static_cast<Index>(mask.size()) == map.size(), "mask size does not match map");
    RoiStats st;
    double sum = 0.0;
    for (Index v = 0; v < map.size(); ++v)
        if (mask[static_cast<std::size_t>(v)]) {
            st.n += 1;
            sum += map[v];
        }
    require(st.n >= 2, "ROI needs at least two voxels");
    st.mean = sum / static_cast<double>(st.n);
    double ss = 0.0;
    double se = 0.0;
    for (Index v = 0; v < map.size(); ++v)
        if (mask[static_cast<std::size_t>(v)]) {
            ss += (map[v] - st.mean) * (map[v] - st.mean);
            se += (map[v] - truth) * (map[v] - truth);
        }
    const double n = static_cast<double>(st.n);
    st.std = std::sqrt(ss / (n - 1.0));
    st.rmse = std::sqrt(se / n);
    st.se_mean = st.std / std::sqrt(n);
    st.se_std = st.std / std::sqrt(2.0 * (n - 1.0));
    return st;
}

std::string round_to_se(double value, double se) {
    if (!std::isfinite(value) || !std::isfinite(se) || se <= 0.0) {
        // nothing to round against (exact or degenerate): full precision
        char full[64];
        std::snprintf(full, sizeof full, "%.17g", value);
        return full;
    }
    const int place = static_cast<int>(std::floor(std::log10(se)));
    char buf[64];
    if (place >= 1) {
        const double scale = std::pow(10.0, place);
        std::snprintf(buf, sizeof buf, "%.0f", std::round(value / scale) * scale);
    } else {
        std::snprintf(buf, sizeof buf, "%.*f", -place, value);
    }
    return buf;
}

}  // namespace perk
