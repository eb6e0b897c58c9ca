#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "perk/phantom.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

using namespace perk;

namespace {

NoiseModel const_noise(Index d, double sigma) {
    NoiseModel n;
    n.sigmas = Vec::Constant(d, sigma);
    return n;
}

// all-8-neighbor membership for an eroded-mask voxel
bool interior_of(const std::vector<int>& cls, Index rows, Index cols, Index v, int want) {
    const Index i = v / cols;
    const Index j = v % cols;
    if (i == 0 || j == 0 || i + 1 >= rows || j + 1 >= cols) return false;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (cls[static_cast<std::size_t>((i + dy) * cols + (j + dx))] != want) return false;
    return true;
}

}  // namespace

TEST_CASE("brain phantom") {
    const PhantomScene scene = brain_phantom(64, 64);
    REQUIRE(scene.rows == 64);
    REQUIRE(scene.n_voxels() == 64 * 64);
    REQUIRE(scene.roi_masks.count("WM") == 1);
    REQUIRE(scene.roi_masks.count("GM") == 1);
    REQUIRE(scene.roi_masks.count("CSF") == 1);

    SUBCASE("roi truths and erosion") {
        const struct {
            const char* name;
            int cls;
            double m0, t1, t2;
        } want[] = {{"WM", 1, 0.77, 832.0, 79.6},
                    {"GM", 2, 0.86, 1331.0, 110.0},
                    {"CSF", 3, 1.0, 4000.0, 2000.0}};
        for (const auto& w : want) {
            const auto& mask = scene.roi_masks.at(w.name);
            Index n = 0;
            for (Index v = 0; v < scene.n_voxels(); ++v) {
                if (!mask[static_cast<std::size_t>(v)]) continue;
                ++n;
                CHECK(scene.truth(0, v) == w.m0);
                CHECK(scene.truth(1, v) == w.t1);
                CHECK(scene.truth(2, v) == w.t2);
                CHECK(interior_of(scene.class_map, scene.rows, scene.cols, v, w.cls));
            }
            CHECK(n >= 10);
        }
    }

    SUBCASE("background carries zero truth") {
        for (Index v = 0; v < scene.n_voxels(); ++v)
            if (scene.class_map[static_cast<std::size_t>(v)] == 0)
                CHECK(scene.truth.col(v).cwiseAbs().maxCoeff() == 0.0);
        // some background must exist outside the outer disk
        Index bg = 0;
        for (int c : scene.class_map) bg += c == 0 ? 1 : 0;
        CHECK(bg > 500);
    }

    SUBCASE("roi masks are pairwise disjoint") {
        const auto& wm = scene.roi_masks.at("WM");
        const auto& gm = scene.roi_masks.at("GM");
        const auto& csf = scene.roi_masks.at("CSF");
        for (std::size_t v = 0; v < wm.size(); ++v)
            CHECK(static_cast<int>(wm[v]) + gm[v] + csf[v] <= 1);
    }

    SUBCASE("tissue and class masks") {
        const auto tissue = tissue_mask(scene);
        const auto wm = class_mask(scene, 1);
        for (Index v = 0; v < scene.n_voxels(); ++v) {
            CHECK(tissue[static_cast<std::size_t>(v)] ==
                  (scene.class_map[static_cast<std::size_t>(v)] != 0 ? 1 : 0));
            if (wm[static_cast<std::size_t>(v)])
                CHECK(scene.class_map[static_cast<std::size_t>(v)] == 1);
        }
    }

    SUBCASE("size validation") { CHECK_THROWS(brain_phantom(8, 8)); }
}

TEST_CASE("vial phantom") {
    const PhantomScene scene = vial_phantom(96, 96);
    const struct {
        const char* name;
        double t1, t2;
    } vials[] = {{"V4", 1604.0, 190.94},
                 {"V5", 1332.0, 133.27},
                 {"V6", 1044.0, 96.89},
                 {"V7", 801.7, 64.07},
                 {"V8", 608.6, 46.42}};

    SUBCASE("vial truths sit inside the tight support") {
        for (const auto& w : vials) {
            REQUIRE(scene.roi_masks.count(w.name) == 1);
            const auto& mask = scene.roi_masks.at(w.name);
            Index n = 0;
            for (Index v = 0; v < scene.n_voxels(); ++v) {
                if (!mask[static_cast<std::size_t>(v)]) continue;
                ++n;
                CHECK(scene.truth(0, v) == 1.0);
                CHECK(scene.truth(1, v) == w.t1);
                CHECK(scene.truth(2, v) == w.t2);
            }
            CHECK(n >= 10);
            CHECK(w.t1 >= 400.0);
            CHECK(w.t1 <= 2000.0);
            CHECK(w.t2 >= 40.0);
            CHECK(w.t2 <= 200.0);
        }
    }

    SUBCASE("vial masks are pairwise disjoint") {
        for (Index v = 0; v < scene.n_voxels(); ++v) {
            int hits = 0;
            for (const auto& w : vials) hits += scene.roi_masks.at(w.name)[static_cast<std::size_t>(v)];
            CHECK(hits <= 1);
        }
    }

    SUBCASE("bath surrounds the vials") {
        Index bath = 0;
        for (int c : scene.class_map) bath += c == 6 ? 1 : 0;
        CHECK(bath > 1000);
        CHECK_THROWS(vial_phantom(32, 32));
    }
}

TEST_CASE("kappa bump") {
    SUBCASE("zero amplitude is flat") {
        const Vec k = kappa_bump(20, 30, 0.0);
        CHECK((k.array() == 1.0).all());
    }

    SUBCASE("even grid spans (1 - a, 1 + a)") {
        const Vec k = kappa_bump(64, 64, 0.2);
        CHECK(k.minCoeff() == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(k[0] == k.minCoeff());  // corners sit at r_max
        CHECK(k.maxCoeff() < 1.2);
        CHECK(k.maxCoeff() > 1.19);
    }

    SUBCASE("odd grid hits the peak exactly") {
        const Vec k = kappa_bump(65, 65, 0.2);
        CHECK(k[32 * 65 + 32] == 1.2);
        CHECK(k.maxCoeff() == 1.2);
    }

    SUBCASE("amplitude validation") {
        CHECK_THROWS(kappa_bump(16, 16, 0.6));
        CHECK_THROWS(kappa_bump(16, 16, -0.1));
    }
}

TEST_CASE("synthesis") {
    const Acquisition acq = paper_acquisition();
    const PhantomScene scene = brain_phantom(32, 32);

    SUBCASE("zero noise reproduces the signal model") {
        const std::vector<Vec> data = synthesize(scene, acq, const_noise(4, 0.0), 5);
        REQUIRE(data.size() == 4);
        for (Index v = 0; v < scene.n_voxels(); ++v) {
            if (scene.class_map[static_cast<std::size_t>(v)] == 0) {
                for (Index d = 0; d < 4; ++d) CHECK(data[static_cast<std::size_t>(d)][v] == 0.0);
                continue;
            }
            const LatentParams x{scene.truth(0, v), scene.truth(1, v), scene.truth(2, v)};
            const Vec s = acquisition_signal(acq, x, {scene.kappa_map[v]});
            for (Index d = 0; d < 4; ++d)
                CHECK(data[static_cast<std::size_t>(d)][v] == s[d]);
        }
    }

    SUBCASE("deterministic under the seed") {
        const std::vector<Vec> a = synthesize(scene, acq, const_noise(4, 0.01), 6);
        const std::vector<Vec> b = synthesize(scene, acq, const_noise(4, 0.01), 6);
        const std::vector<Vec> c = synthesize(scene, acq, const_noise(4, 0.01), 7);
        for (Index d = 0; d < 4; ++d) {
            CHECK((a[static_cast<std::size_t>(d)] - b[static_cast<std::size_t>(d)])
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
        CHECK((a[0] - c[0]).cwiseAbs().maxCoeff() > 0.0);
    }

    SUBCASE("background magnitudes are rayleigh") {
        const PhantomScene big = brain_phantom(180, 180);
        const double sigma_d = 0.01;
        const std::vector<Vec> data = synthesize(big, acq, const_noise(4, sigma_d), 8);
        const auto tissue = tissue_mask(big);
        double sum = 0.0;
        Index n = 0;
        for (Index v = 0; v < big.n_voxels(); ++v)
            if (!tissue[static_cast<std::size_t>(v)]) {
                sum += data[0][v];
                ++n;
            }
        REQUIRE(n >= 10000);
        const double chan = sigma_d / std::sqrt(2.0);
        const double want = chan * std::sqrt(kPi / 2.0);
        CHECK(sum / static_cast<double>(n) == doctest::Approx(want).epsilon(0.02));
    }

    SUBCASE("noise model validation") {
        CHECK_THROWS(synthesize(scene, acq, const_noise(3, 0.01), 1));
        NoiseModel neg;
        neg.sigmas = Vec::Constant(4, -0.01);
        CHECK_THROWS(synthesize(scene, acq, neg, 1));
    }
}

TEST_CASE("snr and sigma estimation") {
    SUBCASE("snr is a norm ratio") {
        const Vec y = Vec::Constant(4, 10.0);
        const Vec eps = Vec::Ones(4);
        CHECK(snr(y, eps) == doctest::Approx(10.0).epsilon(1e-15));
        CHECK_THROWS(snr(y, Vec::Zero(4)));
    }

    SUBCASE("sigma from an exact pair") {
        Vec r(2);
        r << 1.0, 1.0;
        CHECK(estimate_sigma(r) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
        CHECK_THROWS(estimate_sigma(Vec()));
    }

    SUBCASE("scale equivariance") {
        Rng rng(3);
        Vec r(100);
        for (Index i = 0; i < 100; ++i) r[i] = std::hypot(rng.normal(), rng.normal());
        CHECK(estimate_sigma(3.0 * r) == doctest::Approx(3.0 * estimate_sigma(r)).epsilon(1e-12));
    }

    SUBCASE("consistent on rayleigh draws") {
        Rng rng(4);
        Vec r(100000);
        for (Index i = 0; i < r.size(); ++i) r[i] = std::hypot(rng.normal(), rng.normal());
        const double s = estimate_sigma(r);
        CHECK(s > 0.99);
        CHECK(s < 1.01);
    }
}

TEST_CASE("roi statistics") {
    SUBCASE("two-voxel closed form") {
        Vec map(4);
        map << 1.0, 99.0, 3.0, -50.0;
        std::vector<unsigned char> mask = {1, 0, 1, 0};
        const RoiStats st = roi_stats(map, 2.0, mask);
        CHECK(st.n == 2);
        CHECK(st.mean == 2.0);
        CHECK(st.std == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
        CHECK(st.rmse == 1.0);
        CHECK(st.se_mean == 1.0);
        CHECK(st.se_std == 1.0);
    }

    SUBCASE("perfect map has zero error") {
        const Vec map = Vec::Constant(10, 7.25);
        std::vector<unsigned char> mask(10, 1);
        const RoiStats st = roi_stats(map, 7.25, mask);
        CHECK(st.mean == 7.25);
        CHECK(st.std == 0.0);
        CHECK(st.rmse == 0.0);
        CHECK(st.se_mean == 0.0);
    }

    SUBCASE("input validation") {
        Vec map(3);
        map << 1.0, 2.0, 3.0;
        CHECK_THROWS(roi_stats(map, 1.0, {1, 0, 0}));  // n = 1
        CHECK_THROWS(roi_stats(map, 1.0, {1, 1}));     // size mismatch
    }
}

TEST_CASE("rounding to the standard error") {
    CHECK(round_to_se(831.94, 0.7) == "831.9");
    CHECK(round_to_se(831.94, 7.0) == "832");
    CHECK(round_to_se(831.94, 70.0) == "830");
    CHECK(round_to_se(0.76937, 0.0004) == "0.7694");
    CHECK(round_to_se(-831.94, 0.7) == "-831.9");

    // degenerate se: full precision, round-trippable
    const std::string exact = round_to_se(79.6, 0.0);
    CHECK(std::strtod(exact.c_str(), nullptr) == 79.6);
    CHECK_FALSE(round_to_se(1.0, std::nan("")).empty());
}
