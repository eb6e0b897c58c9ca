#pragma once

#include "perk/common.hpp"

#include <vector>

namespace perk {

// x = [M0, T1, T2], L = 3
struct LatentParams {
    double m0 = 0.0;
    double t1 = 0.0;  // ms
    double t2 = 0.0;  // ms
};
inline constexpr int kNumLatent = 3;

// nu = kappa (flip angle scaling), K = 1
struct KnownParams {
    double kappa = 1.0;
};
inline constexpr int kNumKnown = 1;

enum class ScanKind { Spgr, Dess, Toy };

struct ScanSpec {
    ScanKind kind = ScanKind::Spgr;
    double flip_deg = 0.0;
    double tr_ms = 0.0;
    double te_ms = 0.0;

    int signal_count() const { return kind == ScanKind::Dess ? 2 : 1; }
};

struct Acquisition {
    std::vector<ScanSpec> scans;

    int dataset_count() const {
        int d = 0;
        for (const auto& s : scans) d += s.signal_count();
        return d;
    }
};

// Per-dataset total complex noise std sigma_d: synthesis adds real and
// imaginary parts each N(0, sigma_d^2 / 2). The Rayleigh-fit estimate from
// estimate_sigma is the per-channel std sigma_d / sqrt(2); scale by sqrt(2)
// before storing it here.
struct NoiseModel {
    Vec sigmas;
};

Acquisition paper_acquisition();  // SPGR 5 and 15 deg (TR 12.2), DESS 30 deg (TR 17.5), TE 4.67

double spgr_signal(const LatentParams& x, const KnownParams& nu, const ScanSpec& scan);
std::pair<double, double> dess_signals(const LatentParams& x, const KnownParams& nu,
                                       const ScanSpec& scan);
// Toy mono-exponential: s = M0 * exp(-TE / T2)
double toy_signal(const LatentParams& x, const ScanSpec& scan);

Vec acquisition_signal(const Acquisition& acq, const LatentParams& x, const KnownParams& nu);

// mu = sqrt(s^2 + sigma^2) (high-SNR Rician mean)
double rician_mean(double s, double sigma);
Vec rician_mean(const Vec& s, const NoiseModel& noise);

// Central finite differences, relative step 1e-5 (one-sided at domain
// boundaries). With analytic_spgr, SPGR rows use the closed-form gradient.
Mat signal_gradient(const Acquisition& acq, const LatentParams& x, const KnownParams& nu,
                    bool analytic_spgr = false);

}  // namespace perk
