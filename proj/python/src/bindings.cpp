#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "perk/analysis.hpp"
#include "perk/isochromat.hpp"
#include "perk/model_selection.hpp"
#include "perk/pipeline.hpp"
#include "perk/vpm.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace py = pybind11;
using namespace perk;

namespace {

NoiseModel noise_from(const Vec& sigmas) {
    NoiseModel n;
    n.sigmas = sigmas;
    return n;
}

std::vector<Vec> rows_of(const Mat& datasets) {
    std::vector<Vec> v;
    v.reserve(static_cast<std::size_t>(datasets.rows()));
    for (Index d = 0; d < datasets.rows(); ++d) v.push_back(datasets.row(d).transpose());
    return v;
}

KernelConfig kernel_from(const TrainingSet& ts, double lam, const std::optional<Vec>& bandwidth) {
    KernelConfig kc;
    kc.lambda = lam;
    kc.Lambda = bandwidth ? *bandwidth : Vec(lam * ts.regressors.rowwise().mean());
    return kc;
}

Vec latent_vec(const LatentParams& x) {
    Vec out(3);
    out << x.m0, x.t1, x.t2;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dictionary-free MRI parameter estimation core";

    py::register_exception<PerkError>(m, "PerkError");
    py::register_exception<DataError>(m, "DataError");

    // --- signal models ---------------------------------------------------
    m.def(
        "signal",
        [](double m0, double t1, double t2, double kappa) {
            return acquisition_signal(paper_acquisition(), {m0, t1, t2}, {kappa});
        },
        py::arg("m0"), py::arg("t1"), py::arg("t2"), py::arg("kappa") = 1.0,
        "Noiseless magnitudes of the default two-SPGR + DESS acquisition.");
    m.def("rician_mean", py::overload_cast<double, double>(&rician_mean), py::arg("s"),
          py::arg("sigma"));
    m.def(
        "oracle_check",
        [](const std::vector<double>& t1, const std::vector<double>& t2,
           const std::vector<double>& kappa, int spins, int reps) {
            IsochromatConfig ic;
            ic.n_spins = spins;
            ic.n_reps = reps;
            return oracle_grid_check(paper_acquisition(), t1, t2, kappa, ic).max_rel_err;
        },
        py::arg("t1_grid"), py::arg("t2_grid"), py::arg("kappa_grid"), py::arg("spins") = 256,
        py::arg("reps") = 4000,
        "Worst relative error of the analytic amplitudes against the isochromat simulator.");

    // --- priors ----------------------------------------------------------
    py::class_<PriorSpec>(m, "Priors");
    m.def(
        "uniform_priors",
        [](std::pair<double, double> m0, std::pair<double, double> t1,
           std::pair<double, double> t2, std::pair<double, double> kappa) {
            PriorSpec pr;
            pr.m0 = Uniform{m0.first, m0.second};
            pr.t1 = LogUniform{t1.first, t1.second};
            pr.t2 = LogUniform{t2.first, t2.second};
            pr.kappa = Uniform{kappa.first, kappa.second};
            return pr;
        },
        py::arg("m0") = std::pair<double, double>{0.1, 1.2},
        py::arg("t1") = std::pair<double, double>{400.0, 2000.0},
        py::arg("t2") = std::pair<double, double>{40.0, 200.0},
        py::arg("kappa") = std::pair<double, double>{0.9, 1.1},
        "M0 and kappa uniform, T1 and T2 log-uniform over the given supports.");
    m.def(
        "default_priors",
        [](const std::vector<double>& magnitudes, const std::vector<double>& kappas, bool broad) {
            return paper_default_priors(magnitudes, kappas, broad);
        },
        py::arg("magnitudes"), py::arg("kappas"), py::arg("broad") = false,
        "Data-driven priors: M0 support from the magnitudes, kappa KDE, tight or broad T1/T2.");

    // --- phantoms ----------------------------------------------------------
    py::class_<PhantomScene>(m, "Scene")
        .def_readonly("rows", &PhantomScene::rows)
        .def_readonly("cols", &PhantomScene::cols)
        .def_readonly("class_map", &PhantomScene::class_map)
        .def_readonly("truth", &PhantomScene::truth)
        .def_readonly("kappa_map", &PhantomScene::kappa_map)
        .def_readonly("roi_masks", &PhantomScene::roi_masks)
        .def_property_readonly("tissue", [](const PhantomScene& s) { return tissue_mask(s); })
        .def(
            "roi",
            [](const PhantomScene& s, const std::string& name) {
                const auto it = s.roi_masks.find(name);
                if (it == s.roi_masks.end()) throw DataError("no such ROI: " + name);
                return it->second;
            },
            py::arg("name"));
    m.def("brain_phantom", &brain_phantom, py::arg("rows"), py::arg("cols"),
          py::arg("kappa_amplitude") = 0.2);
    m.def("vial_phantom", &vial_phantom, py::arg("rows"), py::arg("cols"),
          py::arg("kappa_amplitude") = 0.1);
    m.def("kappa_bump", &kappa_bump, py::arg("rows"), py::arg("cols"), py::arg("amplitude"));
    m.def(
        "synthesize",
        [](const PhantomScene& scene, const Vec& sigmas, std::uint64_t seed) {
            const auto imgs = synthesize(scene, paper_acquisition(), noise_from(sigmas), seed);
            Mat out(static_cast<Index>(imgs.size()), scene.n_voxels());
            for (std::size_t d = 0; d < imgs.size(); ++d)
                out.row(static_cast<Index>(d)) = imgs[d].transpose();
            return out;
        },
        py::arg("scene"), py::arg("sigmas"), py::arg("seed"),
        "Noisy magnitude images, one row per dataset.");
    m.def("estimate_sigma", &estimate_sigma, py::arg("background_magnitudes"),
          "Per-channel Rayleigh noise std; multiply by sqrt(2) for the total complex std.");
    m.def("snr", &snr, py::arg("y_roi"), py::arg("eps_roi"));

    py::class_<RoiStats>(m, "RoiStats")
        .def_readonly("n", &RoiStats::n)
        .def_readonly("mean", &RoiStats::mean)
        .def_readonly("std", &RoiStats::std)
        .def_readonly("rmse", &RoiStats::rmse)
        .def_readonly("se_mean", &RoiStats::se_mean)
        .def_readonly("se_std", &RoiStats::se_std);
    m.def("roi_stats", &roi_stats, py::arg("map"), py::arg("truth"), py::arg("mask"));
    m.def("round_to_se", &round_to_se, py::arg("value"), py::arg("se"));

    // --- training and prediction -----------------------------------------
    py::class_<TrainingSet>(m, "TrainingSet")
        .def_readonly("regressands", &TrainingSet::regressands)
        .def_readonly("regressors", &TrainingSet::regressors)
        .def_readonly("seed", &TrainingSet::seed)
        .def_property_readonly("n", &TrainingSet::n);
    m.def(
        "training_set",
        [](const PriorSpec& priors, const Vec& sigmas, Index n, std::uint64_t seed) {
            return generate_training_set(priors, paper_acquisition(), noise_from(sigmas), n, seed);
        },
        py::arg("priors"), py::arg("sigmas"), py::arg("n"), py::arg("seed"));

    py::class_<RffPerk>(m, "Estimator")
        .def_property_readonly("z", &RffPerk::z)
        .def_readonly("rho", &RffPerk::rho)
        .def_property_readonly("lam", [](const RffPerk& e) { return e.cfg.lambda; })
        .def_property_readonly("bandwidth", [](const RffPerk& e) { return e.cfg.Lambda; })
        .def(
            "predict", [](const RffPerk& e, const Vec& p) { return predict(e, p); }, py::arg("p"),
            "Latent estimate (M0, T1, T2) at regressor p = [magnitudes; kappa].")
        .def(
            "predict_map",
            [](const RffPerk& e, const Mat& data, const Vec& kappa,
               const std::vector<unsigned char>& mask) {
                Mat known(1, kappa.size());
                known.row(0) = kappa.transpose();
                return predict_map(e, rows_of(data), known, mask);
            },
            py::arg("data"), py::arg("kappa"), py::arg("mask"),
            "Per-voxel estimates, zero outside the mask; data is datasets x voxels.")
        .def(
            "save", [](const RffPerk& e, const std::string& path) { save_rff(e, path); },
            py::arg("path"));
    m.def(
        "train",
        [](const TrainingSet& ts, Index z, double rho, double lam, std::optional<Vec> bandwidth,
           std::uint64_t seed) {
            const KernelConfig kc = kernel_from(ts, lam, bandwidth);
            return train_rff(ts, rff_draw(kc, z, seed), rho);
        },
        py::arg("training_set"), py::arg("z"), py::arg("rho"), py::arg("lam") = std::exp2(0.6),
        py::arg("bandwidth") = py::none(), py::arg("seed") = 0,
        "Random-Fourier-feature kernel ridge regression; bandwidth defaults to lam * "
        "regressor row means.");
    m.def("load_estimator", &load_rff, py::arg("path"));

    py::class_<ExactPerk>(m, "ExactEstimator")
        .def_property_readonly("n", [](const ExactPerk& e) { return e.regressors.cols(); })
        .def("predict", &predict_exact, py::arg("p"));
    m.def(
        "train_exact",
        [](const TrainingSet& ts, const Vec& rho, double lam, std::optional<Vec> bandwidth) {
            return train_exact(ts, kernel_from(ts, lam, bandwidth), rho);
        },
        py::arg("training_set"), py::arg("rho"), py::arg("lam") = std::exp2(0.6),
        py::arg("bandwidth") = py::none(),
        "Gram-form reference estimator (kept small; per-latent rho vector).");

    // --- model selection ---------------------------------------------------
    m.def(
        "holdout_search",
        [](const Vec& lambda_grid, const Vec& rho_grid, Index t, const Vec& w,
           const PriorSpec& priors, const Vec& sigmas, Index n, Index z, std::uint64_t seed,
           const Vec& bandwidth_means) {
            HoldoutConfig hc;
            hc.lambda_grid = lambda_grid;
            hc.rho_grid = rho_grid;
            hc.t = t;
            hc.w = w;
            const HoldoutSurface s = holdout_search(hc, priors, paper_acquisition(),
                                                    noise_from(sigmas), n, z, seed,
                                                    bandwidth_means);
            return py::make_tuple(s.cost, s.lambda_hat, s.rho_hat, s.min_cost);
        },
        py::arg("lambda_grid"), py::arg("rho_grid"), py::arg("t"), py::arg("w"),
        py::arg("priors"), py::arg("sigmas"), py::arg("n"), py::arg("z"), py::arg("seed"),
        py::arg("bandwidth_means") = Vec(),
        "Returns (cost surface, lambda_hat, rho_hat, min_cost).");

    // --- estimator analysis ------------------------------------------------
    py::class_<FisherResult>(m, "FisherResult")
        .def_readonly("f", &FisherResult::f)
        .def_readonly("crlb_diag", &FisherResult::crlb_diag)
        .def_readonly("cond", &FisherResult::cond);
    m.def(
        "fisher",
        [](double m0, double t1, double t2, double kappa, const Vec& sigmas) {
            return fisher(paper_acquisition(), {m0, t1, t2}, {kappa}, noise_from(sigmas));
        },
        py::arg("m0"), py::arg("t1"), py::arg("t2"), py::arg("kappa"), py::arg("sigmas"));

    py::class_<BiasCovReport>(m, "BiasCovReport")
        .def_readonly("bias", &BiasCovReport::bias)
        .def_readonly("cov", &BiasCovReport::cov)
        .def_readonly("min_snr", &BiasCovReport::min_snr)
        .def_readonly("bias_se", &BiasCovReport::bias_se)
        .def_readonly("cov_se", &BiasCovReport::cov_se)
        .def_property_readonly("monte_carlo", [](const BiasCovReport& r) {
            return r.method == BiasCovMethod::MonteCarlo;
        });
    m.def(
        "conditional_bias",
        [](const ExactPerk& est, double m0, double t1, double t2, double kappa,
           const Vec& sigmas) {
            return conditional_bias(est, paper_acquisition(), {m0, t1, t2}, {kappa},
                                    noise_from(sigmas));
        },
        py::arg("estimator"), py::arg("m0"), py::arg("t1"), py::arg("t2"), py::arg("kappa"),
        py::arg("sigmas"));
    m.def(
        "conditional_cov",
        [](const ExactPerk& est, double m0, double t1, double t2, double kappa,
           const Vec& sigmas) {
            return conditional_cov(est, paper_acquisition(), {m0, t1, t2}, {kappa},
                                   noise_from(sigmas));
        },
        py::arg("estimator"), py::arg("m0"), py::arg("t1"), py::arg("t2"), py::arg("kappa"),
        py::arg("sigmas"));
    m.def(
        "monte_carlo_bias_cov",
        [](const ExactPerk& est, double m0, double t1, double t2, double kappa,
           const Vec& sigmas, Index trials, std::uint64_t seed) {
            return monte_carlo_bias_cov(est, paper_acquisition(), {m0, t1, t2}, {kappa},
                                        noise_from(sigmas), trials, seed);
        },
        py::arg("estimator"), py::arg("m0"), py::arg("t1"), py::arg("t2"), py::arg("kappa"),
        py::arg("sigmas"), py::arg("trials"), py::arg("seed"));

    // --- grid-search baseline ----------------------------------------------
    py::class_<Dictionary>(m, "Dictionary")
        .def_readonly("atoms", &Dictionary::atoms)
        .def_readonly("t1_grid", &Dictionary::t1_grid)
        .def_readonly("t2_grid", &Dictionary::t2_grid)
        .def_readonly("kappa", &Dictionary::kappa);
    m.def(
        "build_dictionary",
        [](double kappa, Index t1_count, Index t2_count, std::pair<double, double> t1_support,
           std::pair<double, double> t2_support) {
            return build_dictionary(paper_acquisition(), kappa, t1_count, t2_count, t1_support,
                                    t2_support);
        },
        py::arg("kappa") = 1.0, py::arg("t1_count") = 100, py::arg("t2_count") = 100,
        py::arg("t1_support") = VpmGridConfig{}.t1_support,
        py::arg("t2_support") = VpmGridConfig{}.t2_support);
    m.def(
        "vpm_estimate",
        [](const Vec& y, const Dictionary& dict) { return latent_vec(vpm_estimate(y, dict)); },
        py::arg("y"), py::arg("dictionary"));
    m.def(
        "vpm_map",
        [](const Mat& data, const Vec& kappa, const std::vector<unsigned char>& mask,
           Index clusters, Index t1_count, Index t2_count, std::pair<double, double> t1_support,
           std::pair<double, double> t2_support, std::uint64_t seed) {
            VpmGridConfig cfg;
            cfg.t1_count = t1_count;
            cfg.t2_count = t2_count;
            cfg.t1_support = t1_support;
            cfg.t2_support = t2_support;
            cfg.seed = seed;
            return vpm_map(rows_of(data), kappa, mask, clusters, cfg);
        },
        py::arg("data"), py::arg("kappa"), py::arg("mask"), py::arg("clusters") = 5,
        py::arg("t1_count") = 100, py::arg("t2_count") = 100,
        py::arg("t1_support") = VpmGridConfig{}.t1_support,
        py::arg("t2_support") = VpmGridConfig{}.t2_support, py::arg("seed") = 0);
}
