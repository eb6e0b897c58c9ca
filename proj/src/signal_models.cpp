#include "perk/signal_models.hpp"

#include <cmath>

namespace perk {

namespace {

constexpr double kFdRel = 1e-5;
constexpr double kFdFloor = 1e-3;

void check_finite(const LatentParams& x, const KnownParams& nu) {
    require(std::isfinite(x.m0) && std::isfinite(x.t1) && std::isfinite(x.t2) &&
                std::isfinite(nu.kappa),
            "signal model: non-finite parameters");
    require(x.t1 > 0.0 && x.t2 > 0.0 && x.m0 >= 0.0 && nu.kappa > 0.0,
            "signal model: parameters outside domain");
}

double deg2rad(double d) { return d * kPi / 180.0; }

// Signed Ernst amplitude before the magnitude is taken
double spgr_signed(const LatentParams& x, const KnownParams& nu, const ScanSpec& scan) {
    const double a = nu.kappa * deg2rad(scan.flip_deg);
    const double e1 = std::exp(-scan.tr_ms / x.t1);
    return x.m0 * std::sin(a) * (1.0 - e1) / (1.0 - e1 * std::cos(a)) *
           std::exp(-scan.te_ms / x.t2);
}

}  // namespace

Acquisition paper_acquisition() {
    Acquisition acq;
    acq.scans = {
        {ScanKind::Spgr, 5.0, 12.2, 4.67},
        {ScanKind::Spgr, 15.0, 12.2, 4.67},
        {ScanKind::Dess, 30.0, 17.5, 4.67},
    };
    return acq;
}

double spgr_signal(const LatentParams& x, const KnownParams& nu, const ScanSpec& scan) {
    require(scan.kind == ScanKind::Spgr, "spgr_signal: scan kind is not SPGR");
    check_finite(x, nu);
    return std::abs(spgr_signed(x, nu, scan));
}

std::pair<double, double> dess_signals(const LatentParams& x, const KnownParams& nu,
                                       const ScanSpec& scan) {
    require(scan.kind == ScanKind::Dess, "dess_signals: scan kind is not DESS");
    check_finite(x, nu);
    const double a = nu.kappa * deg2rad(scan.flip_deg);
    const double e1 = std::exp(-scan.tr_ms / x.t1);
    const double e2 = std::exp(-scan.tr_ms / x.t2);
    const double c = std::cos(a);
    const double sa = std::sin(a);
    const double p = 1.0 - e1 * c - e2 * e2 * (e1 - c);
    const double q = e2 * (1.0 - e1) * (1.0 + c);
    const double r2 = p * p - q * q;
    require(r2 > 0.0, "dess_signals: degenerate steady state (relaxation too slow)");
    const double r = std::sqrt(r2);
    const double t = q / (p + r);  // rationalized (p - r)/q, stable for small q
    const double amp = x.m0 * (1.0 - e1) * sa / r;
    const double echo1 = amp * (1.0 - e2 * t) * std::exp(-scan.te_ms / x.t2);
    const double echo2 = amp * (e2 - t) * std::exp(-(scan.tr_ms - scan.te_ms) / x.t2);
    return {std::abs(echo1), std::abs(echo2)};
}

double toy_signal(const LatentParams& x, const ScanSpec& scan) {
    require(scan.kind == ScanKind::Toy, "toy_signal: scan kind is not Toy");
    require(x.t2 > 0.0 && x.m0 >= 0.0, "toy_signal: parameters outside domain");
    return x.m0 * std::exp(-scan.te_ms / x.t2);
}

Vec acquisition_signal(const Acquisition& acq, const LatentParams& x, const KnownParams& nu) {
    Vec out(acq.dataset_count());
    Index d = 0;
    for (const auto& scan : acq.scans) {
        switch (scan.kind) {
            case ScanKind::Spgr:
                out[d++] = spgr_signal(x, nu, scan);
                break;
            case ScanKind::Dess: {
                auto [e1, e2] = dess_signals(x, nu, scan);
                out[d++] = e1;
                out[d++] = e2;
                break;
            }
            case ScanKind::Toy:
                out[d++] = toy_signal(x, scan);
                break;
        }
    }
    return out;
}

double rician_mean(double s, double sigma) {
    require(sigma >= 0.0, "rician_mean: negative sigma");
    return std::sqrt(s * s + sigma * sigma);
}

Vec rician_mean(const Vec& s, const NoiseModel& noise) {
    require(s.size() == noise.sigmas.size(), "rician_mean: length mismatch");
    Vec mu(s.size());
    for (Index d = 0; d < s.size(); ++d) mu[d] = rician_mean(s[d], noise.sigmas[d]);
    return mu;
}

Mat signal_gradient(const Acquisition& acq, const LatentParams& x, const KnownParams& nu,
                    bool analytic_spgr) {
    check_finite(x, nu);
    const int d_count = acq.dataset_count();
    Mat g(d_count, kNumLatent);

    auto eval = [&](const LatentParams& xp) { return acquisition_signal(acq, xp, nu); };
    for (int l = 0; l < kNumLatent; ++l) {
        double* field = nullptr;
        LatentParams xp = x;
        switch (l) {
            case 0: field = &xp.m0; break;
            case 1: field = &xp.t1; break;
            case 2: field = &xp.t2; break;
        }
        const double v = *field;
        const double h = kFdRel * std::max(std::abs(v), kFdFloor);
        Vec fp, fm;
        if (v - h > 0.0) {
            *field = v + h;
            fp = eval(xp);
            *field = v - h;
            fm = eval(xp);
            g.col(l) = (fp - fm) / (2.0 * h);
        } else {
            // one-sided forward difference at the domain boundary
            *field = v + h;
            fp = eval(xp);
            *field = v;
            fm = eval(xp);
            g.col(l) = (fp - fm) / h;
        }
    }

    if (analytic_spgr) {
        Index d = 0;
        for (const auto& scan : acq.scans) {
            if (scan.kind != ScanKind::Spgr) {
                d += scan.signal_count();
                continue;
            }
            const double a = nu.kappa * deg2rad(scan.flip_deg);
            const double e1 = std::exp(-scan.tr_ms / x.t1);
            const double c = std::cos(a);
            const double dec = std::exp(-scan.te_ms / x.t2);
            const double s = spgr_signed(x, nu, scan);
            const double sign = s < 0.0 ? -1.0 : 1.0;
            const double de1 = e1 * scan.tr_ms / (x.t1 * x.t1);  // dE1/dT1
            g(d, 0) = sign * std::sin(a) * (1.0 - e1) / (1.0 - e1 * c) * dec;
            g(d, 1) = sign * x.m0 * std::sin(a) * dec * (c - 1.0) /
                      ((1.0 - e1 * c) * (1.0 - e1 * c)) * de1;
            g(d, 2) = sign * s * scan.te_ms / (x.t2 * x.t2);
            ++d;
        }
    }
    return g;
}

}  // namespace perk
