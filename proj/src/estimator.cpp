#include "perk/estimator.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace perk {

namespace {

constexpr Index kChunk = 4096;

void check_kernel_config(const KernelConfig& cfg) {
    require(cfg.lambda > 0.0, "kernel scale lambda must be positive");
    require(cfg.Lambda.size() > 0, "empty bandwidth diagonal");
    require((cfg.Lambda.array() > 0.0).all(), "bandwidth entries must be positive");
}

// Solve (A + shift I) W = B for SPD A, falling back to LDLT with a warning.
Mat regularized_solve(const Mat& a, double shift, const Mat& b, const char* what,
                      Eigen::LLT<Mat>* keep = nullptr) {
    Mat sys = a;
    sys.diagonal().array() += shift;
    Eigen::LLT<Mat> llt(sys);
    if (keep) *keep = llt;
    if (llt.info() == Eigen::Success) return llt.solve(b);
    std::fprintf(stderr, "warning: %s Cholesky failed, falling back to LDLT\n", what);
    Eigen::LDLT<Mat> ldlt(sys);
    require(ldlt.info() == Eigen::Success, "regularized system could not be factorized");
    return ldlt.solve(b);
}

}  // namespace

TrainingSet generate_training_set(const PriorSpec& priors, const Acquisition& acq,
                                  const NoiseModel& noise, Index n, std::uint64_t seed) {
    require(n > 0, "training set size must be positive");
    const Index d = acq.dataset_count();
    require(noise.sigmas.size() == d, "noise sigma count must match dataset count");
    require((noise.sigmas.array() >= 0.0).all(), "noise sigmas must be non-negative");

    TrainingSet ts;
    ts.regressands.resize(kNumLatent, n);
    ts.regressors.resize(d + kNumKnown, n);
    ts.noise = noise;
    ts.seed = seed;

    Rng base(seed);
    // Per-channel std of the complex noise whose total std is sigma_d.
    const Vec chan = noise.sigmas / std::sqrt(2.0);
    parallel_chunks(n, kChunk, [&](Index chunk, Index begin, Index end) {
        Rng rng = base.stream(static_cast<std::uint64_t>(chunk));
        for (Index j = begin; j < end; ++j) {
            LatentParams x;
            x.m0 = sample_one(priors.m0, rng);
            x.t1 = sample_one(priors.t1, rng);
            x.t2 = sample_one(priors.t2, rng);
            KnownParams nu;
            nu.kappa = sample_one(priors.kappa, rng);
            const Vec s = acquisition_signal(acq, x, nu);
            ts.regressands(0, j) = x.m0;
            ts.regressands(1, j) = x.t1;
            ts.regressands(2, j) = x.t2;
            for (Index k = 0; k < d; ++k) {
                const double re = s[k] + chan[k] * rng.normal();
                const double im = chan[k] * rng.normal();
                ts.regressors(k, j) = std::hypot(re, im);
            }
            ts.regressors(d, j) = nu.kappa;
        }
    });
    return ts;
}

KernelConfig bandwidth_from_test_data(const std::vector<Vec>& dataset_mags, const Mat& known_vals,
                                      double lambda) {
    require(lambda > 0.0, "kernel scale lambda must be positive");
    require(!dataset_mags.empty(), "no datasets given");
    const Index d = static_cast<Index>(dataset_mags.size());
    const Index k = known_vals.rows();
    KernelConfig cfg;
    cfg.lambda = lambda;
    cfg.Lambda.resize(d + k);
    for (Index i = 0; i < d; ++i) {
        require(dataset_mags[i].size() > 0, "empty dataset");
        cfg.Lambda[i] = lambda * dataset_mags[i].mean();
    }
    for (Index i = 0; i < k; ++i) {
        require(known_vals.cols() > 0, "empty known-parameter map");
        cfg.Lambda[d + i] = lambda * known_vals.row(i).mean();
    }
    require((cfg.Lambda.array() > 0.0).all(),
            "bandwidth means must be positive; check masks and known maps");
    return cfg;
}

double gaussian_kernel(const Vec& p, const Vec& p_prime, const KernelConfig& cfg) {
    check_kernel_config(cfg);
    require(p.size() == cfg.Lambda.size() && p_prime.size() == cfg.Lambda.size(),
            "feature size does not match bandwidth size");
    const double d2 = ((p - p_prime).array() / cfg.Lambda.array()).square().sum();
    return std::exp(-0.5 * d2);
}

namespace {

// Gram matrix of Lambda-scaled features via the squared-distance identity.
Mat gram_matrix(const Mat& regressors, const KernelConfig& cfg) {
    Mat u = cfg.Lambda.cwiseInverse().asDiagonal() * regressors;
    Vec sq = u.colwise().squaredNorm();
    Mat g = u.transpose() * u;
    const Index n = regressors.cols();
    Mat k(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i)
            k(i, j) = std::exp(-0.5 * std::max(0.0, sq[i] + sq[j] - 2.0 * g(i, j)));
    return k;
}

}  // namespace

ExactPerk train_exact(const TrainingSet& ts, const KernelConfig& cfg, const Vec& rho_per_l,
                      Index max_n) {
    check_kernel_config(cfg);
    const Index n = ts.n();
    const Index l = ts.regressands.rows();
    require(n > 0, "empty training set");
    require(n <= max_n, "training set exceeds the Gram-form size cap");
    require(ts.regressors.rows() == cfg.Lambda.size(),
            "regressor size does not match bandwidth size");
    require(rho_per_l.size() == l, "need one regularization value per latent parameter");
    require((rho_per_l.array() > 0.0).all(), "regularization must be positive");

    ExactPerk est;
    est.regressors = ts.regressors;
    est.cfg = cfg;
    est.rho = rho_per_l;
    est.m_x = ts.regressands.rowwise().mean();

    const Mat k = gram_matrix(ts.regressors, cfg);
    est.m_k = k.rowwise().mean();
    const double grand = est.m_k.mean();
    // M K M without forming M: subtract row/column means, add back the grand mean.
    Mat kc = k;
    kc.colwise() -= est.m_k;
    kc.rowwise() -= est.m_k.transpose();
    kc.array() += grand;

    Mat x_tilde_t = (ts.regressands.colwise() - est.m_x).transpose();  // N x L, already M-centered
    est.R.resize(l, n);
    const bool shared = (rho_per_l.array() == rho_per_l[0]).all();
    if (shared) {
        est.R = regularized_solve(kc, static_cast<double>(n) * rho_per_l[0], x_tilde_t,
                                  "exact PERK").transpose();
    } else {
        for (Index i = 0; i < l; ++i)
            est.R.row(i) = regularized_solve(kc, static_cast<double>(n) * rho_per_l[i],
                                             x_tilde_t.col(i), "exact PERK").transpose();
    }
    est.r_mk = est.R * est.m_k;
    return est;
}

Vec predict_exact(const ExactPerk& est, const Vec& p) {
    require(p.size() == est.cfg.Lambda.size(), "feature size does not match bandwidth size");
    const Index n = est.regressors.cols();
    Vec up = p.array() / est.cfg.Lambda.array();
    Vec k_p(n);
    for (Index j = 0; j < n; ++j) {
        const double d2 =
            (est.regressors.col(j).array() / est.cfg.Lambda.array() - up.array()).square().sum();
        k_p[j] = std::exp(-0.5 * d2);
    }
    return est.m_x - est.r_mk + est.R * k_p;
}

FeatureMap rff_draw(const KernelConfig& cfg, Index z, std::uint64_t seed) {
    check_kernel_config(cfg);
    require(z > 0, "feature count must be positive");
    const Index p = cfg.Lambda.size();
    FeatureMap fm;
    fm.V.resize(p, z);
    fm.s.resize(z);
    fm.seed = seed;
    fm.cfg = cfg;
    Rng rng(seed);
    for (Index j = 0; j < z; ++j)
        for (Index i = 0; i < p; ++i) fm.V(i, j) = rng.normal() / (2.0 * kPi * cfg.Lambda[i]);
    for (Index j = 0; j < z; ++j) fm.s[j] = rng.uniform();
    return fm;
}

Vec featurize(const FeatureMap& fm, const Vec& p) {
    require(p.size() == fm.p(), "feature size does not match map size");
    const double scale = std::sqrt(2.0 / static_cast<double>(fm.z()));
    return scale * (2.0 * kPi * (fm.V.transpose() * p + fm.s).array()).cos();
}

Mat featurize_block(const FeatureMap& fm, const Mat& p_block) {
    require(p_block.rows() == fm.p(), "feature size does not match map size");
    const double scale = std::sqrt(2.0 / static_cast<double>(fm.z()));
    Mat phase = fm.V.transpose() * p_block;
    phase.colwise() += fm.s;
    return scale * (2.0 * kPi * phase.array()).cos();
}

namespace {

// C += A A' by fixed output-column blocks; per-element accumulation order is
// independent of the worker count, so results are bitwise reproducible.
void accumulate_outer(Mat& c, const Mat& a) {
    parallel_chunks(c.cols(), 128, [&](Index, Index begin, Index end) {
        c.middleCols(begin, end - begin).noalias() +=
            a * a.middleRows(begin, end - begin).transpose();
    });
}

void finalize_rff(RffPerk& est) {
    est.w = regularized_solve(est.c_zz, est.rho, est.c_zx, "RFF PERK", &est.chol);
}

}  // namespace

RffPerk train_rff(const TrainingSet& ts, const FeatureMap& fm, double rho) {
    const Index n = ts.n();
    const Index z = fm.z();
    require(n > 1, "RFF training needs at least two samples");
    require(rho > 0.0, "regularization must be positive");
    require(ts.regressors.rows() == fm.p(), "regressor size does not match feature map");

    RffPerk est;
    est.fm = fm;
    est.cfg = fm.cfg;
    est.rho = rho;
    est.m_x = ts.regressands.rowwise().mean();

    // Pass 1: feature means, accumulated in chunk order.
    const Index n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<Vec> partial(static_cast<std::size_t>(n_chunks));
    parallel_chunks(n, kChunk, [&](Index chunk, Index begin, Index end) {
        partial[static_cast<std::size_t>(chunk)] =
            featurize_block(fm, ts.regressors.middleCols(begin, end - begin)).rowwise().sum();
    });
    est.m_z = Vec::Zero(z);
    for (const Vec& v : partial) est.m_z += v;
    est.m_z /= static_cast<double>(n);

    // Pass 2: centered second moments. Chunks run serially; the expensive
    // rank-update is parallelized over output columns inside each chunk.
    est.c_zz = Mat::Zero(z, z);
    est.c_zx = Mat::Zero(z, ts.regressands.rows());
    for (Index chunk = 0; chunk < n_chunks; ++chunk) {
        const Index begin = chunk * kChunk;
        const Index m = std::min(kChunk, n - begin);
        Mat zc = featurize_block(fm, ts.regressors.middleCols(begin, m));
        zc.colwise() -= est.m_z;
        Mat xc = ts.regressands.middleCols(begin, m);
        xc.colwise() -= est.m_x;
        accumulate_outer(est.c_zz, zc);
        est.c_zx.noalias() += zc * xc.transpose();
    }
    est.c_zz /= static_cast<double>(n);
    est.c_zx /= static_cast<double>(n);

    finalize_rff(est);
    return est;
}

Vec predict(const RffPerk& est, const Vec& p) {
    return est.m_x + est.w.transpose() * (featurize(est.fm, p) - est.m_z);
}

Mat predict_map(const RffPerk& est, const std::vector<Vec>& datasets, const Mat& known_map,
                const std::vector<unsigned char>& mask) {
    const Index d = static_cast<Index>(datasets.size());
    const Index k = known_map.rows();
    require(d + k == est.fm.p(), "dataset/known count does not match the trained feature size");
    require(d > 0, "no datasets given");
    const Index n_vox = datasets[0].size();
    for (const Vec& img : datasets) require(img.size() == n_vox, "dataset sizes differ");
    require(known_map.cols() == n_vox, "known map size does not match datasets");
    require(static_cast<Index>(mask.size()) == n_vox, "mask size does not match datasets");

    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(n_vox));
    for (Index v = 0; v < n_vox; ++v)
        if (mask[static_cast<std::size_t>(v)]) keep.push_back(v);

    Mat out = Mat::Zero(est.l(), n_vox);
    const Vec offset = est.m_x - est.w.transpose() * est.m_z;
    parallel_chunks(static_cast<Index>(keep.size()), kChunk, [&](Index, Index begin, Index end) {
        const Index m = end - begin;
        Mat blk(d + k, m);
        for (Index j = 0; j < m; ++j) {
            const Index v = keep[static_cast<std::size_t>(begin + j)];
            for (Index i = 0; i < d; ++i) blk(i, j) = datasets[static_cast<std::size_t>(i)][v];
            for (Index i = 0; i < k; ++i) blk(d + i, j) = known_map(i, v);
        }
        Mat xh = (est.w.transpose() * featurize_block(est.fm, blk)).colwise() + offset;
        for (Index j = 0; j < m; ++j) out.col(keep[static_cast<std::size_t>(begin + j)]) = xh.col(j);
    });
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes little endian");

constexpr char kMagic[8] = {'P', 'E', 'R', 'K', 'R', 'F', 'F', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_mat_rowmajor(std::ostream& os, const Mat& m) {
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) write_f64(os, m(i, j));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

Mat read_mat_rowmajor(std::istream& is, Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = read_f64(is);
    return m;
}

}  // namespace

void save_rff(const RffPerk& est, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "cannot open estimator file for writing: " + path);
    os.write(kMagic, sizeof kMagic);
    write_u64(os, static_cast<std::uint64_t>(est.z()));
    write_u64(os, static_cast<std::uint64_t>(est.l()));
    write_u64(os, static_cast<std::uint64_t>(est.fm.p()));
    write_u64(os, est.fm.seed);
    write_f64(os, est.cfg.lambda);
    write_f64(os, est.rho);
    write_mat_rowmajor(os, est.cfg.Lambda);
    write_mat_rowmajor(os, est.m_x);
    write_mat_rowmajor(os, est.m_z);
    write_mat_rowmajor(os, est.c_zx);
    write_mat_rowmajor(os, est.c_zz);
    write_mat_rowmajor(os, est.fm.V);
    write_mat_rowmajor(os, est.fm.s);
    require(os.good(), "failed writing estimator file: " + path);
}

RffPerk load_rff(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot open estimator file: " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    require(is.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
            "not an estimator file (bad magic): " + path);
    const auto z = static_cast<Index>(read_u64(is));
    const auto l = static_cast<Index>(read_u64(is));
    const auto p = static_cast<Index>(read_u64(is));
    const std::uint64_t seed = read_u64(is);
    require(z > 0 && l > 0 && p > 0 && z < (1 << 24) && l < (1 << 16) && p < (1 << 16),
            "implausible estimator dimensions: " + path);
    RffPerk est;
    est.cfg.lambda = read_f64(is);
    est.rho = read_f64(is);
    est.cfg.Lambda = read_mat_rowmajor(is, p, 1);
    est.m_x = read_mat_rowmajor(is, l, 1);
    est.m_z = read_mat_rowmajor(is, z, 1);
    est.c_zx = read_mat_rowmajor(is, z, l);
    est.c_zz = read_mat_rowmajor(is, z, z);
    est.fm.V = read_mat_rowmajor(is, p, z);
    est.fm.s = read_mat_rowmajor(is, z, 1);
    est.fm.seed = seed;
    est.fm.cfg = est.cfg;
    require(is.good(), "estimator file truncated: " + path);
    finalize_rff(est);
    return est;
}

}  // namespace perk
