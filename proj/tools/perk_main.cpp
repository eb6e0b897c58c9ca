#include <CLI11.hpp>

#include "perk/analysis.hpp"
#include "perk/estimator.hpp"
#include "perk/io.hpp"
#include "perk/isochromat.hpp"
#include "perk/model_selection.hpp"
#include "perk/phantom.hpp"
#include "perk/pipeline.hpp"
#include "perk/vpm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

using namespace perk;

// stable per-command seed-stream ids, derived from the base seed
constexpr std::uint64_t kSeedPhantom = 100;
constexpr std::uint64_t kSeedTrain = 200;
constexpr std::uint64_t kSeedFeatures = 201;
constexpr std::uint64_t kSeedHoldout = 300;
constexpr std::uint64_t kSeedAnalyzeTrain = 400;
constexpr std::uint64_t kSeedAnalyzeMc = 401;
constexpr std::uint64_t kSeedVpm = 500;

struct Cli {
    std::string config_path;
    std::string out = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = -1;
    std::string estimator_path;
    std::string data_path, kappa_path, mask_path, truth_path;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig resolve_config(const Cli& cli) {
    RunConfig cfg = load_config(cli.config_path);
    if (cli.seed_given) {
        cfg.seed = cli.seed;
        cfg.seed_set = true;
    }
    if (!cfg.seed_set)
        throw DataError("no seed given: set config key 'seed' or pass --seed (entropy defaults "
                        "are not allowed)");
    if (cli.threads >= 0)
        set_threads(cli.threads);
    else
        set_threads(cfg.threads);
    std::filesystem::create_directories(cli.out);
    return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::vector<std::string> dataset_names(const Acquisition& acq) {
    std::vector<std::string> names;
    for (const auto& scan : acq.scans) {
        switch (scan.kind) {
            case ScanKind::Spgr:
                names.push_back("spgr" + std::to_string(static_cast<int>(std::lround(scan.flip_deg))));
                break;
            case ScanKind::Dess:
                names.push_back("dess_e1");
                names.push_back("dess_e2");
                break;
            case ScanKind::Toy:
                names.push_back("toy");
                break;
        }
    }
    return names;
}

struct TestInputs {
    MapFile data_map, kappa_map, mask_map;
    std::vector<Vec> data;
    Vec kappa;
    std::vector<unsigned char> tissue;
};

std::vector<unsigned char> to_mask(const Vec& channel) {
    std::vector<unsigned char> m(static_cast<std::size_t>(channel.size()));
    for (Index v = 0; v < channel.size(); ++v) m[static_cast<std::size_t>(v)] = channel[v] != 0.0;
    return m;
}

TestInputs read_test_inputs(const Cli& cli) {
    TestInputs in;
    in.data_map = read_map(cli.data_path.empty() ? join(cli.out, "data.map") : cli.data_path);
    in.kappa_map = read_map(cli.kappa_path.empty() ? join(cli.out, "kappa.map") : cli.kappa_path);
    in.mask_map = read_map(cli.mask_path.empty() ? join(cli.out, "mask.map") : cli.mask_path);
    const Index n_vox = in.data_map.n_voxels();
    if (in.kappa_map.n_voxels() != n_vox || in.mask_map.n_voxels() != n_vox)
        throw DataError("data/kappa/mask voxel counts differ");
    for (const auto& name : in.data_map.channel_names) in.data.push_back(in.data_map.channel(name));
    in.kappa = in.kappa_map.channel("kappa");
    in.tissue = to_mask(in.mask_map.channel("tissue"));
    return in;
}

MapFile latent_map_file(Index rows, Index cols, const Mat& xhat) {
    MapFile out;
    out.rows = rows;
    out.cols = cols;
    out.add_channel("m0", "au", xhat.row(0).transpose());
    out.add_channel("t1", "ms", xhat.row(1).transpose());
    out.add_channel("t2", "ms", xhat.row(2).transpose());
    return out;
}

void write_roi_stats_csv(const std::string& path, const Mat& xhat, const MapFile& truth,
                         const MapFile& masks) {
    static const char* params[] = {"m0", "t1", "t2"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& roi : masks.channel_names) {
        if (roi == "tissue") continue;
        const std::vector<unsigned char> m = to_mask(masks.channel(roi));
        Index n = 0;
        for (unsigned char b : m) n += b;
        if (n < 2) continue;
        for (int l = 0; l < kNumLatent; ++l) {
            const Vec tmap = truth.channel(params[l]);
            double tv = 0.0;
            for (Index v = 0; v < tmap.size(); ++v)
                if (m[static_cast<std::size_t>(v)]) tv += tmap[v];
            tv /= static_cast<double>(n);
            const Vec est = xhat.row(l).transpose();
            const RoiStats st = roi_stats(est, tv, m);
            rows.push_back({roi, params[l], fmt17(tv), std::to_string(st.n), fmt17(st.mean),
                            fmt17(st.std), fmt17(st.rmse), fmt17(st.se_mean), fmt17(st.se_std),
                            round_to_se(st.mean, st.se_mean), round_to_se(st.std, st.se_std)});
        }
    }
    write_csv(path,
              {"roi", "param", "truth", "n", "mean", "std", "rmse", "se_mean", "se_std",
               "mean_rounded", "std_rounded"},
              rows);
}

void cmd_phantom(const Cli& cli, const RunConfig& cfg) {
    const std::uint64_t phantom_seed = derive_seed(cfg.seed, kSeedPhantom);
    std::printf("seeds: base=%llu phantom=%llu\n", static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(phantom_seed));
    const SceneData sd = make_scene_data(cfg.phantom, phantom_seed);
    const PhantomScene& scene = sd.scene;

    MapFile truth;
    truth.rows = scene.rows;
    truth.cols = scene.cols;
    truth.add_channel("m0", "au", scene.truth.row(0).transpose());
    truth.add_channel("t1", "ms", scene.truth.row(1).transpose());
    truth.add_channel("t2", "ms", scene.truth.row(2).transpose());
    write_map(truth, join(cli.out, "truth.map"));

    MapFile kappa;
    kappa.rows = scene.rows;
    kappa.cols = scene.cols;
    kappa.add_channel("kappa", "1", scene.kappa_map);
    write_map(kappa, join(cli.out, "kappa.map"));

    MapFile data;
    data.rows = scene.rows;
    data.cols = scene.cols;
    const std::vector<std::string> names = dataset_names(sd.acq);
    for (std::size_t q = 0; q < sd.data.size(); ++q) data.add_channel(names[q], "au", sd.data[q]);
    write_map(data, join(cli.out, "data.map"));

    MapFile mask;
    mask.rows = scene.rows;
    mask.cols = scene.cols;
    const std::vector<unsigned char> tissue = tissue_mask(scene);
    Vec tv(scene.n_voxels());
    for (Index v = 0; v < tv.size(); ++v) tv[v] = tissue[static_cast<std::size_t>(v)];
    mask.add_channel("tissue", "1", tv);
    for (const auto& [name, roi] : scene.roi_masks) {
        Vec rv(scene.n_voxels());
        for (Index v = 0; v < rv.size(); ++v) rv[v] = roi[static_cast<std::size_t>(v)];
        mask.add_channel(name, "1", rv);
    }
    write_map(mask, join(cli.out, "mask.map"));

    std::vector<unsigned char> background(tissue.size());
    for (std::size_t v = 0; v < tissue.size(); ++v) background[v] = tissue[v] ? 0 : 1;
    const Vec snrs =
        dataset_snrs(sd.data, scene.roi_masks.at(reference_roi(cfg.phantom.kind)), background);
    std::printf("phantom: %s %lldx%lld, sigma=%s\n", cfg.phantom.kind.c_str(),
                static_cast<long long>(scene.rows), static_cast<long long>(scene.cols),
                fmt17(sd.noise.sigmas[0]).c_str());
    std::printf("%s SNR per dataset:", reference_roi(cfg.phantom.kind).c_str());
    for (Index q = 0; q < snrs.size(); ++q) std::printf(" %.1f", snrs[q]);
    std::printf("\n");
}

void cmd_train(const Cli& cli, const RunConfig& cfg) {
    const std::uint64_t train_seed = derive_seed(cfg.seed, kSeedTrain);
    const std::uint64_t feature_seed = derive_seed(cfg.seed, kSeedFeatures);
    std::printf("seeds: base=%llu train=%llu features=%llu\n",
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(train_seed),
                static_cast<unsigned long long>(feature_seed));
    const TestInputs in = read_test_inputs(cli);
    const Acquisition acq = paper_acquisition();
    if (static_cast<Index>(in.data.size()) != acq.dataset_count())
        throw DataError("data.map channel count does not match the acquisition");

    const NoiseModel noise = noise_from_background(in.data, in.tissue);
    const PriorSpec priors =
        priors_from_data(in.data, in.kappa, in.tissue, cfg.priors.support == "broad");
    const KernelConfig kc =
        bandwidth_from_data(in.data, in.kappa, in.tissue, std::exp2(cfg.train.lambda_log2));

    const auto t0 = std::chrono::steady_clock::now();
    const TrainingSet ts = generate_training_set(priors, acq, noise, cfg.train.n, train_seed);
    const FeatureMap fm = rff_draw(kc, cfg.train.z, feature_seed);
    const RffPerk est = train_rff(ts, fm, std::exp2(cfg.train.rho_log2));
    const double dt = seconds_since(t0);
    const std::string path = cli.estimator_path.empty() ? join(cli.out, "estimator.bin")
                                                        : cli.estimator_path;
    save_rff(est, path);
    std::printf("trained N=%lld Z=%lld lambda=2^%g rho=2^%g -> %s\n",
                static_cast<long long>(cfg.train.n), static_cast<long long>(cfg.train.z),
                cfg.train.lambda_log2, cfg.train.rho_log2, path.c_str());
    std::printf("training took %.1f s\n", dt);
}

void cmd_estimate(const Cli& cli, const RunConfig& cfg) {
    std::printf("seeds: base=%llu (prediction is deterministic)\n",
                static_cast<unsigned long long>(cfg.seed));
    const TestInputs in = read_test_inputs(cli);
    const std::string est_path =
        cli.estimator_path.empty() ? join(cli.out, "estimator.bin") : cli.estimator_path;
    RffPerk est;
    try {
        est = load_rff(est_path);
    } catch (const PerkError& e) {
        throw DataError(e.what());
    }
    Mat known(1, in.kappa.size());
    known.row(0) = in.kappa.transpose();

    const auto t0 = std::chrono::steady_clock::now();
    const Mat xhat = predict_map(est, in.data, known, in.tissue);
    const double dt = seconds_since(t0);
    write_map(latent_map_file(in.data_map.rows, in.data_map.cols, xhat),
              join(cli.out, "xhat_perk.map"));
    std::printf("prediction took %.2f s\n", dt);

    const std::string truth_path =
        cli.truth_path.empty() ? join(cli.out, "truth.map") : cli.truth_path;
    if (std::filesystem::exists(truth_path)) {
        write_roi_stats_csv(join(cli.out, "stats_perk.csv"), xhat, read_map(truth_path),
                            in.mask_map);
        std::printf("ROI stats -> %s\n", join(cli.out, "stats_perk.csv").c_str());
    }
}

void cmd_vpm(const Cli& cli, const RunConfig& cfg) {
    const std::uint64_t vpm_seed = derive_seed(cfg.seed, kSeedVpm);
    std::printf("seeds: base=%llu vpm=%llu\n", static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(vpm_seed));
    const TestInputs in = read_test_inputs(cli);
    VpmGridConfig grid;
    grid.t1_count = cfg.vpm.t1_count;
    grid.t2_count = cfg.vpm.t2_count;
    grid.seed = vpm_seed;

    const auto t0 = std::chrono::steady_clock::now();
    const Mat xhat = vpm_map(in.data, in.kappa, in.tissue, cfg.vpm.clusters, grid);
    const double dt = seconds_since(t0);
    write_map(latent_map_file(in.data_map.rows, in.data_map.cols, xhat),
              join(cli.out, "xhat_vpm.map"));
    std::printf("VPM (k=%lld, %lldx%lld grid) took %.1f s\n",
                static_cast<long long>(cfg.vpm.clusters), static_cast<long long>(cfg.vpm.t1_count),
                static_cast<long long>(cfg.vpm.t2_count), dt);

    const std::string truth_path =
        cli.truth_path.empty() ? join(cli.out, "truth.map") : cli.truth_path;
    if (std::filesystem::exists(truth_path)) {
        write_roi_stats_csv(join(cli.out, "stats_vpm.csv"), xhat, read_map(truth_path),
                            in.mask_map);
        std::printf("ROI stats -> %s\n", join(cli.out, "stats_vpm.csv").c_str());
    }
}

void cmd_holdout(const Cli& cli, const RunConfig& cfg) {
    const std::uint64_t holdout_seed = derive_seed(cfg.seed, kSeedHoldout);
    std::printf("seeds: base=%llu holdout=%llu (per-cell streams derive from it)\n",
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(holdout_seed));
    const TestInputs in = read_test_inputs(cli);
    const NoiseModel noise = noise_from_background(in.data, in.tissue);
    const PriorSpec priors =
        priors_from_data(in.data, in.kappa, in.tissue, cfg.priors.support == "broad");
    const KernelConfig base = bandwidth_from_data(in.data, in.kappa, in.tissue, 1.0);

    const HoldoutSettings& hs = cfg.holdout;
    auto grid_log2 = [](double center, double step, Index count) {
        Vec g(count);
        for (Index i = 0; i < count; ++i)
            g[i] = center + step * (static_cast<double>(i) - static_cast<double>(count - 1) / 2.0);
        return g;
    };
    const Vec lambda_log2 = grid_log2(hs.lambda_log2_center, hs.lambda_log2_step, hs.lambda_count);
    const Vec rho_log2 = grid_log2(hs.rho_log2_center, hs.rho_log2_step, hs.rho_count);
    HoldoutConfig hc;
    hc.lambda_grid = lambda_log2.unaryExpr([](double v) { return std::exp2(v); });
    hc.rho_grid = rho_log2.unaryExpr([](double v) { return std::exp2(v); });
    hc.t = hs.t;
    hc.w = Vec::Zero(kNumLatent);
    hc.w[1] = 0.5;
    hc.w[2] = 0.5;

    const auto t0 = std::chrono::steady_clock::now();
    const HoldoutSurface surf = holdout_search(hc, priors, paper_acquisition(), noise,
                                               cfg.train.n, cfg.train.z, holdout_seed, base.Lambda);
    const double dt = seconds_since(t0);

    Mat rows(hc.lambda_grid.size() * hc.rho_grid.size(), 3);
    Index r = 0;
    for (Index i = 0; i < hc.lambda_grid.size(); ++i)
        for (Index j = 0; j < hc.rho_grid.size(); ++j, ++r)
            rows.row(r) << lambda_log2[i], rho_log2[j], surf.cost(i, j);
    write_csv(join(cli.out, "holdout.csv"), {"lambda_log2", "rho_log2", "psi"}, rows);
    std::printf("holdout sweep (%lldx%lld, T=%lld, N=%lld) took %.1f s\n",
                static_cast<long long>(hc.lambda_grid.size()),
                static_cast<long long>(hc.rho_grid.size()), static_cast<long long>(hs.t),
                static_cast<long long>(cfg.train.n), dt);
    std::printf("selected lambda=2^%g rho=2^%g psi=%s\n", lambda_log2[surf.argmin_lambda],
                rho_log2[surf.argmin_rho], fmt17(surf.min_cost).c_str());
}

void cmd_analyze(const Cli& cli, const RunConfig& cfg) {
    const std::uint64_t train_seed = derive_seed(cfg.seed, kSeedAnalyzeTrain);
    const std::uint64_t mc_seed = derive_seed(cfg.seed, kSeedAnalyzeMc);
    std::printf("seeds: base=%llu analyze_train=%llu analyze_mc=%llu\n",
                static_cast<unsigned long long>(cfg.seed),
                static_cast<unsigned long long>(train_seed),
                static_cast<unsigned long long>(mc_seed));
    const Acquisition acq = paper_acquisition();
    double lambda = std::exp2(cfg.train.lambda_log2);
    if (!cli.estimator_path.empty()) {
        try {
            lambda = load_rff(cli.estimator_path).cfg.lambda;
        } catch (const PerkError& e) {
            throw DataError(e.what());
        }
    }
    require(cfg.analyze.snr > 0.0, "analyze.snr must be positive");
    const bool with_mc = cfg.analyze.trials > 0;

    std::vector<std::string> header = {"m0",        "t1",        "t2",        "kappa",
                                       "sigma",     "min_snr",   "crlb_m0",   "crlb_t1",
                                       "crlb_t2",   "fisher_cond", "bias_m0", "bias_t1",
                                       "bias_t2",   "cov_m0_m0", "cov_t1_t1", "cov_t2_t2",
                                       "cov_m0_t1", "cov_m0_t2", "cov_t1_t2"};
    if (with_mc) {
        for (const char* c : {"mc_bias_m0", "mc_bias_t1", "mc_bias_t2", "mc_cov_m0_m0",
                              "mc_cov_t1_t1", "mc_cov_t2_t2", "mc_bias_se_m0", "mc_bias_se_t1",
                              "mc_bias_se_t2"})
            header.push_back(c);
    }

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < cfg.analyze.points.size(); ++i) {
        const AnalyzePoint& pt = cfg.analyze.points[i];
        const LatentParams x{pt.m0, pt.t1, pt.t2};
        const KnownParams nu{pt.kappa};
        const Vec s = acquisition_signal(acq, x, nu);
        NoiseModel noise;
        noise.sigmas = Vec::Constant(acq.dataset_count(), s.minCoeff() / cfg.analyze.snr);

        PriorSpec priors;
        priors.m0 = Uniform{0.1, 1.2};
        priors.t1 = LogUniform{400.0, 2000.0};
        priors.t2 = LogUniform{40.0, 200.0};
        priors.kappa = Uniform{0.9, 1.1};
        const TrainingSet ts = generate_training_set(priors, acq, noise, cfg.analyze.n_train,
                                                     derive_seed(train_seed, i));
        KernelConfig kc;
        kc.lambda = lambda;
        kc.Lambda = lambda * ts.regressors.rowwise().mean();
        const ExactPerk est =
            train_exact(ts, kc, Vec::Constant(kNumLatent, std::exp2(cfg.analyze.rho_log2)));

        const FisherResult fr = fisher(acq, x, nu, noise);
        const BiasCovReport cb = conditional_bias(est, acq, x, nu, noise);
        const BiasCovReport cc = conditional_cov(est, acq, x, nu, noise);

        std::vector<std::string> row = {fmt17(pt.m0),
                                        fmt17(pt.t1),
                                        fmt17(pt.t2),
                                        fmt17(pt.kappa),
                                        fmt17(noise.sigmas[0]),
                                        fmt17(cb.min_snr),
                                        fmt17(fr.crlb_diag[0]),
                                        fmt17(fr.crlb_diag[1]),
                                        fmt17(fr.crlb_diag[2]),
                                        fmt17(fr.cond),
                                        fmt17(cb.bias[0]),
                                        fmt17(cb.bias[1]),
                                        fmt17(cb.bias[2]),
                                        fmt17(cc.cov(0, 0)),
                                        fmt17(cc.cov(1, 1)),
                                        fmt17(cc.cov(2, 2)),
                                        fmt17(cc.cov(0, 1)),
                                        fmt17(cc.cov(0, 2)),
                                        fmt17(cc.cov(1, 2))};
        if (with_mc) {
            const BiasCovReport mc = monte_carlo_bias_cov(est, acq, x, nu, noise,
                                                          cfg.analyze.trials, derive_seed(mc_seed, i));
            for (double v : {mc.bias[0], mc.bias[1], mc.bias[2], mc.cov(0, 0), mc.cov(1, 1),
                             mc.cov(2, 2), mc.bias_se[0], mc.bias_se[1], mc.bias_se[2]})
                row.push_back(fmt17(v));
        }
        rows.push_back(std::move(row));
    }
    write_csv(join(cli.out, "analysis.csv"), header, rows);
    std::printf("analyzed %zu points -> %s\n", cfg.analyze.points.size(),
                join(cli.out, "analysis.csv").c_str());
}

void cmd_oracle_check(const Cli& cli, const RunConfig& cfg) {
    std::printf("seeds: base=%llu (equispaced phases, no jitter)\n",
                static_cast<unsigned long long>(cfg.seed));
    auto logspace = [](double lo, double hi, Index n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            v[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, f);
        }
        return v;
    };
    auto linspace = [](double lo, double hi, Index n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            v[static_cast<std::size_t>(i)] = lo + f * (hi - lo);
        }
        return v;
    };
    IsochromatConfig ic;
    ic.n_spins = static_cast<int>(cfg.oracle.spins);
    ic.n_reps = static_cast<int>(cfg.oracle.reps);
    const Acquisition acq = paper_acquisition();
    const auto t0 = std::chrono::steady_clock::now();
    const OracleGridResult res =
        oracle_grid_check(acq, logspace(400.0, 2000.0, cfg.oracle.t1_count),
                          logspace(40.0, 200.0, cfg.oracle.t2_count),
                          linspace(0.5, 2.0, cfg.oracle.kappa_count), ic);
    const double dt = seconds_since(t0);

    const Index d_count = acq.dataset_count();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const auto& r = res.rows[i];
        rows.push_back({fmt17(r.t1), fmt17(r.t2), fmt17(r.kappa),
                        std::to_string(static_cast<Index>(i) % d_count), fmt17(r.analytic),
                        fmt17(r.simulated), fmt17(r.rel_err)});
    }
    write_csv(join(cli.out, "oracle.csv"),
              {"t1", "t2", "kappa", "dataset", "analytic", "simulated", "rel_err"}, rows);

    const bool pass = res.max_rel_err <= cfg.oracle.tol;
    std::printf("oracle check took %.1f s; max rel err %.3g at (T1=%g, T2=%g, kappa=%g): %s "
                "(tol %.3g)\n",
                dt, res.max_rel_err, res.worst_x.t1, res.worst_x.t2, res.worst_nu.kappa,
                pass ? "PASS" : "FAIL", cfg.oracle.tol);
    if (!pass) throw PerkError("signal-model oracle exceeded tolerance");
}

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    CLI::App app{"dictionary-free MRI parameter estimation toolkit"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "JSON config file");
        sub->add_option("--out", cli.out, "output directory (default .)");
        sub->add_option("--seed", cli.seed, "base seed (overrides config)")
            ->each([&](const std::string&) { cli.seed_given = true; });
        sub->add_option("--threads", cli.threads, "worker threads (0 = hardware)");
        return sub;
    };
    auto add_inputs = [&](CLI::App* sub) {
        sub->add_option("--data", cli.data_path, "data map (default <out>/data.map)");
        sub->add_option("--kappa", cli.kappa_path, "kappa map (default <out>/kappa.map)");
        sub->add_option("--mask", cli.mask_path, "mask map (default <out>/mask.map)");
        sub->add_option("--truth", cli.truth_path, "truth map for ROI stats (default <out>/truth.map)");
        return sub;
    };

    CLI::App* phantom = add_common(app.add_subcommand("phantom", "synthesize a digital phantom"));
    CLI::App* train = add_inputs(add_common(app.add_subcommand("train", "train an RFF estimator")));
    train->add_option("--estimator", cli.estimator_path, "output estimator path");
    CLI::App* estimate =
        add_inputs(add_common(app.add_subcommand("estimate", "predict parameter maps")));
    estimate->add_option("--estimator", cli.estimator_path, "estimator path");
    CLI::App* vpm = add_inputs(add_common(app.add_subcommand("vpm", "grid-search baseline maps")));
    CLI::App* holdout =
        add_inputs(add_common(app.add_subcommand("holdout", "sweep (lambda, rho) by holdout")));
    CLI::App* analyze =
        add_common(app.add_subcommand("analyze", "Fisher/CRLB and bias/covariance tables"));
    analyze->add_option("--estimator", cli.estimator_path, "reuse this estimator's lambda");
    CLI::App* oracle =
        add_common(app.add_subcommand("oracle-check", "isochromat check of the signal models"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const RunConfig cfg = resolve_config(cli);
        if (phantom->parsed()) cmd_phantom(cli, cfg);
        if (train->parsed()) cmd_train(cli, cfg);
        if (estimate->parsed()) cmd_estimate(cli, cfg);
        if (vpm->parsed()) cmd_vpm(cli, cfg);
        if (holdout->parsed()) cmd_holdout(cli, cfg);
        if (analyze->parsed()) cmd_analyze(cli, cfg);
        if (oracle->parsed()) cmd_oracle_check(cli, cfg);
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
