#pragma once

#include "perk/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace perk {

// I/O and configuration problems: exit code 2 at the CLI, distinct from
// numerical failures (exit 3).
struct DataError : PerkError {
    using PerkError::PerkError;
};

// Text sidecar at `path` + raw float64-LE payload at `path + ".bin"`,
// channels concatenated, each row-major rows x cols.
struct MapFile {
    Index rows = 0;
    Index cols = 0;
    std::vector<std::string> channel_names;
    std::vector<std::string> channel_units;
    Mat data;  // channels x (rows*cols)

    Index channels() const { return data.rows(); }
    Index n_voxels() const { return rows * cols; }
    bool has_channel(const std::string& name) const;
    Vec channel(const std::string& name) const;
    void add_channel(const std::string& name, const std::string& unit, const Vec& values);
};

void write_map(const MapFile& map, const std::string& path);
MapFile read_map(const std::string& path);

std::string fmt17(double v);  // 17 significant digits

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows);

struct PhantomConfig {
    std::string kind = "brain";  // brain | vial
    Index rows = 64;
    Index cols = 64;
    double kappa_amplitude = -1.0;  // <0: kind default (brain 0.2, vial 0.1)
    double sigma = -1.0;            // total complex std; <0: calibrate from snr_target
    double snr_target = 152.0;      // reference-ROI worst-dataset SNR when sigma < 0
};

struct TrainSettings {
    Index n = 100000;
    Index z = 1000;
    double lambda_log2 = 0.6;
    double rho_log2 = -41.0;
};

struct PriorsSettings {
    std::string support = "tight";  // tight | broad
};

struct VpmSettings {
    Index clusters = 5;
    Index t1_count = 100;
    Index t2_count = 100;
};

struct HoldoutSettings {
    double lambda_log2_center = 0.6;
    double lambda_log2_step = 0.5;
    Index lambda_count = 7;
    double rho_log2_center = -41.0;
    double rho_log2_step = 3.0;
    Index rho_count = 7;
    Index t = 10000;
};

struct AnalyzePoint {
    double m0 = 0.77;
    double t1 = 832.0;
    double t2 = 79.6;
    double kappa = 1.0;
};

struct AnalyzeSettings {
    Index n_train = 100;
    Index trials = 0;  // >0 adds Monte-Carlo columns
    double rho_log2 = -10.0;
    double snr = 25.0;  // sigma_d = min_d s_d / snr at each point
    std::vector<AnalyzePoint> points{{}};
};

struct OracleSettings {
    Index t1_count = 5;
    Index t2_count = 5;
    Index kappa_count = 3;
    Index spins = 256;
    Index reps = 4000;
    double tol = 1e-3;
};

struct RunConfig {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    PhantomConfig phantom;
    PriorsSettings priors;
    TrainSettings train;
    VpmSettings vpm;
    HoldoutSettings holdout;
    AnalyzeSettings analyze;
    OracleSettings oracle;
};

// Parses the JSON config; missing keys keep defaults, wrong types raise
// DataError naming the key path. Empty path returns all defaults.
RunConfig load_config(const std::string& path);

}  // namespace perk
