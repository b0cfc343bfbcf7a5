#include "sclab/model.hpp"

#include <cmath>
#include <numbers>

#include "sclab/error.hpp"

namespace sclab {

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Domain: return "domain error";
        case ErrorCode::Singularity: return "singularity error";
        case ErrorCode::Collision: return "collision error";
        case ErrorCode::StepFailure: return "step failure";
        case ErrorCode::Window: return "window violation";
        case ErrorCode::FiniteDifference: return "finite-difference failure";
        case ErrorCode::RootFinder: return "root-finder non-convergence";
        case ErrorCode::Quadrature: return "quadrature failure";
        case ErrorCode::GridResolution: return "grid-resolution error";
        case ErrorCode::Stagnation: return "inverse-iteration stagnation";
        case ErrorCode::IncompleteSpectrum: return "incomplete-spectrum error";
        case ErrorCode::TruncationCertificate: return "truncation-certificate failure";
        case ErrorCode::BankNotBuilt: return "bank-not-built error";
        case ErrorCode::MissingSlot: return "missing-slot error";
        case ErrorCode::NonPositiveValue: return "nonpositive-value error";
        case ErrorCode::GridMismatch: return "grid-mismatch error";
        case ErrorCode::NonElliptic: return "non-ellipticity error";
        case ErrorCode::Config: return "config error";
        case ErrorCode::Io: return "io error";
    }
    return "error";
}

namespace {
double bump_exp(double x, double a) { return x > 0.0 ? std::exp(-a / x) : 0.0; }
}  // namespace

double smooth_ramp_down(double x, double a) {
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    const double g = bump_exp(x, a), k = bump_exp(1.0 - x, a);
    return k / (g + k);
}

double smooth_ramp_down_slope(double x, double a) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double g = bump_exp(x, a), k = bump_exp(1.0 - x, a);
    const double gp = a / (x * x) * g;
    const double kp = -a / ((1.0 - x) * (1.0 - x)) * k;
    const double s = g + k;
    return (kp * g - k * gp) / (s * s);
}

double inner_radius(const ModelParams& m) {
    if (m.r_inner > 0.0) return m.r_inner;
    return m.eta * std::pow(m.h, 1.0 / (1.0 - m.alpha));
}

void validate(const ModelParams& m) {
    require(m.alpha > 0.0 && m.alpha < 1.0, ErrorCode::Domain, "alpha must lie in (0,1)");
    require(m.d >= 2, ErrorCode::Domain, "dimension must be at least 2");
    require(m.h > 0.0 && m.h <= 1.0, ErrorCode::Domain, "h must lie in (0,1]");
    const double ri = inner_radius(m);
    require(ri > 0.0, ErrorCode::Domain, "inner radius must be positive");
    require(ri < m.L, ErrorCode::Domain, "inner radius must be below L");
    if (m.potential == PotentialKind::Reference || m.potential == PotentialKind::Perturbed) {
        const double rbar = std::pow(m.h, 1.0 / (1.0 - m.alpha));
        require(ri < rbar && rbar <= m.L, ErrorCode::Domain, "need r_inner < h^{1/(1-alpha)} <= L");
    }
    if (m.potential == PotentialKind::Perturbed) {
        require(m.pert.beta > 0.0, ErrorCode::Domain, "beta must be positive");
        // c = 1 + a_met r^beta psi is smallest where psi = 1 and r^beta is extreme
        if (m.pert.a_met < 0.0) {
            const double worst = 1.0 + m.pert.a_met * std::pow(std::min(m.L, 2.0), m.pert.beta);
            double cmin = worst;
            for (int i = 0; i <= 400; ++i) {
                const double r = ri + (std::min(m.L, 2.0) - ri) * i / 400.0;
                cmin = std::min(cmin, metric(m, r));
            }
            require(cmin > 0.0, ErrorCode::NonElliptic, "metric coefficient c(r) <= 0");
        }
    }
    require(m.grid.points_per_wavelength > 0.0, ErrorCode::Domain, "points per wavelength must be positive");
}

double cutoff_psi(double r) { return smooth_ramp_down(r - 1.0); }
double cutoff_psi_slope(double r) { return smooth_ramp_down_slope(r - 1.0); }

double potential(const ModelParams& m, double r) {
    switch (m.potential) {
        case PotentialKind::Reference: return m.v_shift - std::pow(r, -2.0 * m.alpha);
        case PotentialKind::Perturbed:
            return m.v_shift - std::pow(r, -2.0 * m.alpha) * (1.0 + m.pert.a_pot * std::pow(r, m.pert.beta) * cutoff_psi(r));
        case PotentialKind::Harmonic: return m.v_shift + 0.5 * r * r;
        case PotentialKind::Free: return m.v_shift;
    }
    return 0.0;
}

double metric(const ModelParams& m, double r) {
    if (m.potential != PotentialKind::Perturbed || m.pert.a_met == 0.0) return 1.0;
    return 1.0 + m.pert.a_met * std::pow(r, m.pert.beta) * cutoff_psi(r);
}

double metric_slope(const ModelParams& m, double r) {
    if (m.potential != PotentialKind::Perturbed || m.pert.a_met == 0.0) return 0.0;
    const double b = m.pert.beta;
    return m.pert.a_met * (b * std::pow(r, b - 1.0) * cutoff_psi(r) + std::pow(r, b) * cutoff_psi_slope(r));
}

double nu_ell(int d, int ell) { return double(ell) * double(ell + d - 2) + 0.25 * double(d - 1) * double(d - 3); }

double channel_multiplicity(int d, int ell) {
    if (d == 2) return ell == 0 ? 1.0 : 2.0;
    // (2l+d-2) (l+d-3)! / (l! (d-2)!)
    double v = double(2 * ell + d - 2);
    for (int k = 1; k <= d - 3; ++k) v *= double(ell + k) / double(k);
    return v / double(d - 2);
}

double sphere_area(int d) { return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d); }

double ball_volume(int d) { return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

std::string potential_name(PotentialKind k) {
    switch (k) {
        case PotentialKind::Reference: return "reference";
        case PotentialKind::Perturbed: return "perturbed";
        case PotentialKind::Harmonic: return "harmonic";
        case PotentialKind::Free: return "free";
    }
    return "reference";
}

PotentialKind potential_from_name(const std::string& s) {
    if (s == "reference") return PotentialKind::Reference;
    if (s == "perturbed") return PotentialKind::Perturbed;
    if (s == "harmonic") return PotentialKind::Harmonic;
    if (s == "free") return PotentialKind::Free;
    fail(ErrorCode::Config, "unknown potential '" + s + "'");
}

std::string grid_kind_name(GridKind k) { return k == GridKind::LogUniform ? "log-uniform" : "adapted"; }

GridKind grid_kind_from_name(const std::string& s) {
    if (s == "log-uniform") return GridKind::LogUniform;
    if (s == "adapted") return GridKind::Adapted;
    fail(ErrorCode::Config, "unknown grid kind '" + s + "'");
}

}  // namespace sclab
