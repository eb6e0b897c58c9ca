#include "perk/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace perk {

using nlohmann::json;

bool MapFile::has_channel(const std::string& name) const {
    for (const auto& c : channel_names)
        if (c == name) return true;
    return false;
}

Vec MapFile::channel(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i)
        if (channel_names[i] == name) return data.row(static_cast<Index>(i)).transpose();
    throw DataError("no such map channel: " + name);
}

void MapFile::add_channel(const std::string& name, const std::string& unit, const Vec& values) {
    if (channels() == 0) {
        if (rows == 0 && cols == 0) {
            rows = values.size();
            cols = 1;
        }
        data.resize(0, rows * cols);
    }
    if (values.size() != n_voxels()) throw DataError("channel size does not match map dims");
    data.conservativeResize(data.rows() + 1, Eigen::NoChange);
    data.row(data.rows() - 1) = values.transpose();
    channel_names.push_back(name);
    channel_units.push_back(unit);
}

void write_map(const MapFile& map, const std::string& path) {
    if (map.channels() == 0 || map.n_voxels() == 0) throw DataError("refusing to write empty map");
    if (map.data.cols() != map.n_voxels()) throw DataError("map payload does not match dims");
    std::ofstream hdr(path);
    if (!hdr.good()) throw DataError("cannot open map sidecar for writing: " + path);
    hdr << "perk-map 1\n";
    hdr << "rows " << map.rows << "\n";
    hdr << "cols " << map.cols << "\n";
    hdr << "channels " << map.channels() << "\n";
    hdr << "dtype float64-le\n";
    for (Index c = 0; c < map.channels(); ++c)
        hdr << "channel " << map.channel_names[static_cast<std::size_t>(c)] << " "
            << map.channel_units[static_cast<std::size_t>(c)] << "\n";
    if (!hdr.good()) throw DataError("failed writing map sidecar: " + path);
    hdr.close();

    std::ofstream bin(path + ".bin", std::ios::binary);
    if (!bin.good()) throw DataError("cannot open map payload for writing: " + path + ".bin");
    for (Index c = 0; c < map.channels(); ++c)
        for (Index v = 0; v < map.n_voxels(); ++v) {
            const double x = map.data(c, v);
            bin.write(reinterpret_cast<const char*>(&x), sizeof x);
        }
    if (!bin.good()) throw DataError("failed writing map payload: " + path + ".bin");
}

MapFile read_map(const std::string& path) {
    std::ifstream hdr(path);
    if (!hdr.good()) throw DataError("cannot open map sidecar: " + path);
    std::string line;
    if (!std::getline(hdr, line) || line != "perk-map 1")
        throw DataError("unsupported map format in " + path);
    MapFile map;
    Index channels = -1;
    std::string dtype;
    while (std::getline(hdr, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "rows")
            ss >> map.rows;
        else if (key == "cols")
            ss >> map.cols;
        else if (key == "channels")
            ss >> channels;
        else if (key == "dtype")
            ss >> dtype;
        else if (key == "channel") {
            std::string name, unit;
            ss >> name >> unit;
            if (name.empty()) throw DataError("malformed channel line in " + path);
            map.channel_names.push_back(name);
            map.channel_units.push_back(unit.empty() ? "1" : unit);
        } else {
            throw DataError("unknown sidecar key '" + key + "' in " + path);
        }
        if (ss.fail()) throw DataError("malformed sidecar line '" + line + "' in " + path);
    }
    if (dtype != "float64-le") throw DataError("unsupported dtype in " + path);
    if (map.rows <= 0 || map.cols <= 0) throw DataError("bad dims in " + path);
    if (channels != static_cast<Index>(map.channel_names.size()))
        throw DataError("channel count does not match channel lines in " + path);

    std::ifstream bin(path + ".bin", std::ios::binary);
    if (!bin.good()) throw DataError("cannot open map payload: " + path + ".bin");
    map.data.resize(channels, map.n_voxels());
    for (Index c = 0; c < channels; ++c)
        for (Index v = 0; v < map.n_voxels(); ++v) {
            double x = 0;
            bin.read(reinterpret_cast<char*>(&x), sizeof x);
            map.data(c, v) = x;
        }
    if (!bin.good()) throw DataError("map payload truncated: " + path + ".bin");
    bin.get();
    if (!bin.eof()) throw DataError("map payload longer than sidecar dims: " + path + ".bin");
    return map;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path);
    if (!os.good()) throw DataError("cannot open CSV for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw DataError("CSV row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    if (!os.good()) throw DataError("failed writing CSV: " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows) {
    std::vector<std::vector<std::string>> cells(static_cast<std::size_t>(rows.rows()));
    for (Index i = 0; i < rows.rows(); ++i) {
        cells[static_cast<std::size_t>(i)].reserve(static_cast<std::size_t>(rows.cols()));
        for (Index j = 0; j < rows.cols(); ++j)
            cells[static_cast<std::size_t>(i)].push_back(fmt17(rows(i, j)));
    }
    write_csv(path, header, cells);
}

namespace {

// typed getters that name the failing key path
template <typename T>
T get_field(const json& j, const std::string& path, const std::string& key, T fallback);

template <>
double get_field(const json& j, const std::string& path, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw DataError("config key " + path + key + ": expected number");
    return j[key].get<double>();
}

template <>
Index get_field(const json& j, const std::string& path, const std::string& key, Index fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer())
        throw DataError("config key " + path + key + ": expected integer");
    return j[key].get<Index>();
}

template <>
std::string get_field(const json& j, const std::string& path, const std::string& key,
                      std::string fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw DataError("config key " + path + key + ": expected string");
    return j[key].get<std::string>();
}

const json& get_section(const json& j, const std::string& key, const json& empty) {
    if (!j.contains(key)) return empty;
    if (!j[key].is_object()) throw DataError("config key " + key + ": expected object");
    return j[key];
}

}  // namespace

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream is(path);
    if (!is.good()) throw DataError("cannot open config: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError("config parse error in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw DataError("config root must be an object");

    static const json empty = json::object();
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
            throw DataError("config key seed: expected non-negative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
        cfg.seed_set = true;
    }
    cfg.threads = static_cast<int>(get_field<Index>(j, "", "threads", cfg.threads));

    const json& ph = get_section(j, "phantom", empty);
    cfg.phantom.kind = get_field<std::string>(ph, "phantom.", "kind", cfg.phantom.kind);
    if (cfg.phantom.kind != "brain" && cfg.phantom.kind != "vial")
        throw DataError("config key phantom.kind: must be 'brain' or 'vial'");
    cfg.phantom.rows = get_field<Index>(ph, "phantom.", "rows", cfg.phantom.rows);
    cfg.phantom.cols = get_field<Index>(ph, "phantom.", "cols", cfg.phantom.cols);
    cfg.phantom.kappa_amplitude =
        get_field<double>(ph, "phantom.", "kappa_amplitude", cfg.phantom.kappa_amplitude);
    cfg.phantom.sigma = get_field<double>(ph, "phantom.", "sigma", cfg.phantom.sigma);
    cfg.phantom.snr_target = get_field<double>(ph, "phantom.", "snr_target", cfg.phantom.snr_target);

    const json& pr = get_section(j, "priors", empty);
    cfg.priors.support = get_field<std::string>(pr, "priors.", "support", cfg.priors.support);
    if (cfg.priors.support != "tight" && cfg.priors.support != "broad")
        throw DataError("config key priors.support: must be 'tight' or 'broad'");

    const json& tr = get_section(j, "train", empty);
    cfg.train.n = get_field<Index>(tr, "train.", "n", cfg.train.n);
    cfg.train.z = get_field<Index>(tr, "train.", "z", cfg.train.z);
    cfg.train.lambda_log2 = get_field<double>(tr, "train.", "lambda_log2", cfg.train.lambda_log2);
    cfg.train.rho_log2 = get_field<double>(tr, "train.", "rho_log2", cfg.train.rho_log2);

    const json& vp = get_section(j, "vpm", empty);
    cfg.vpm.clusters = get_field<Index>(vp, "vpm.", "clusters", cfg.vpm.clusters);
    cfg.vpm.t1_count = get_field<Index>(vp, "vpm.", "t1_count", cfg.vpm.t1_count);
    cfg.vpm.t2_count = get_field<Index>(vp, "vpm.", "t2_count", cfg.vpm.t2_count);

    const json& ho = get_section(j, "holdout", empty);
    cfg.holdout.lambda_log2_center =
        get_field<double>(ho, "holdout.", "lambda_log2_center", cfg.holdout.lambda_log2_center);
    cfg.holdout.lambda_log2_step =
        get_field<double>(ho, "holdout.", "lambda_log2_step", cfg.holdout.lambda_log2_step);
    cfg.holdout.lambda_count = get_field<Index>(ho, "holdout.", "lambda_count", cfg.holdout.lambda_count);
    cfg.holdout.rho_log2_center =
        get_field<double>(ho, "holdout.", "rho_log2_center", cfg.holdout.rho_log2_center);
    cfg.holdout.rho_log2_step =
        get_field<double>(ho, "holdout.", "rho_log2_step", cfg.holdout.rho_log2_step);
    cfg.holdout.rho_count = get_field<Index>(ho, "holdout.", "rho_count", cfg.holdout.rho_count);
    cfg.holdout.t = get_field<Index>(ho, "holdout.", "t", cfg.holdout.t);

    const json& an = get_section(j, "analyze", empty);
    cfg.analyze.n_train = get_field<Index>(an, "analyze.", "n_train", cfg.analyze.n_train);
    cfg.analyze.trials = get_field<Index>(an, "analyze.", "trials", cfg.analyze.trials);
    cfg.analyze.rho_log2 = get_field<double>(an, "analyze.", "rho_log2", cfg.analyze.rho_log2);
    cfg.analyze.snr = get_field<double>(an, "analyze.", "snr", cfg.analyze.snr);
    if (an.contains("points")) {
        if (!an["points"].is_array()) throw DataError("config key analyze.points: expected array");
        cfg.analyze.points.clear();
        std::size_t idx = 0;
        for (const auto& p : an["points"]) {
            const std::string path_p = "analyze.points[" + std::to_string(idx++) + "].";
            if (!p.is_object()) throw DataError("config key " + path_p + ": expected object");
            AnalyzePoint pt;
            pt.m0 = get_field<double>(p, path_p, "m0", pt.m0);
            pt.t1 = get_field<double>(p, path_p, "t1", pt.t1);
            pt.t2 = get_field<double>(p, path_p, "t2", pt.t2);
            pt.kappa = get_field<double>(p, path_p, "kappa", pt.kappa);
            cfg.analyze.points.push_back(pt);
        }
        if (cfg.analyze.points.empty()) throw DataError("config key analyze.points: empty array");
    }

    const json& oc = get_section(j, "oracle", empty);
    cfg.oracle.t1_count = get_field<Index>(oc, "oracle.", "t1_count", cfg.oracle.t1_count);
    cfg.oracle.t2_count = get_field<Index>(oc, "oracle.", "t2_count", cfg.oracle.t2_count);
    cfg.oracle.kappa_count = get_field<Index>(oc, "oracle.", "kappa_count", cfg.oracle.kappa_count);
    cfg.oracle.spins = get_field<Index>(oc, "oracle.", "spins", cfg.oracle.spins);
    cfg.oracle.reps = get_field<Index>(oc, "oracle.", "reps", cfg.oracle.reps);
    cfg.oracle.tol = get_field<double>(oc, "oracle.", "tol", cfg.oracle.tol);

    return cfg;
}

}  // namespace perk
