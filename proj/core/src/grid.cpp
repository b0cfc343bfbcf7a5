#include "sclab/grid.hpp"

#include <algorithm>
#include <cmath>

#include "sclab/error.hpp"

namespace sclab {

RadialGrid::RadialGrid(GridKind kind, double r_inner, double L, std::size_t N, double alpha, double knee,
                       double sigma)
    : kind_(kind), r0_(r_inner), L_(L), N_(N), p_(1.0 - alpha), knee_(knee), sigma_(sigma) {
    require(r_inner > 0.0 && L > r_inner, ErrorCode::Domain, "grid needs 0 < r_inner < L");
    require(N >= 2, ErrorCode::Domain, "grid needs at least two interior nodes");
    kp_ = 0.0;
    if (kind_ == GridKind::Adapted) {
        require(knee > 0.0 && sigma >= 0.0, ErrorCode::Domain, "adapted grid needs knee > 0, sigma >= 0");
        kp_ = std::pow(knee, -p_);
    }
    q0_ = q_of_r(r0_);
    dq_ = (q_of_r(L_) - q0_) / double(N_ + 1);
}

double RadialGrid::q_of_r(double r) const {
    if (kind_ == GridKind::LogUniform) return std::log(r);
    return std::log(r) + kp_ * (std::pow(r, p_) / p_ + sigma_ * r);
}

double RadialGrid::dr_dq(double r) const {
    if (kind_ == GridKind::LogUniform) return r;
    return 1.0 / (1.0 / r + kp_ * (std::pow(r, p_ - 1.0) + sigma_));
}

double RadialGrid::r_of_q(double q) const {
    if (kind_ == GridKind::LogUniform) return std::exp(q);
    // safeguarded Newton in s = ln r; g is increasing and convex
    double lo = std::log(r0_) - 1.0, hi = std::log(L_) + 1.0;
    double s = std::clamp(q, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double e = std::exp(s), ep = std::exp(p_ * s);
        const double g = s + kp_ * (ep / p_ + sigma_ * e) - q;
        if (g > 0.0)
            hi = s;
        else
            lo = s;
        const double gp = 1.0 + kp_ * (ep + sigma_ * e);
        double next = s - g / gp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - s) <= 1e-16 * std::max(1.0, std::fabs(s))) {
            s = next;
            break;
        }
        s = next;
    }
    return std::exp(s);
}

namespace {

double local_wavelength(const ModelParams& m, double r, double tau_max) {
    const double ke = tau_max - potential(m, r);
    if (ke <= 0.0) return HUGE_VAL;
    return m.h * std::sqrt(metric(m, r) / (2.0 * ke));
}

RadialGrid shape_of(const ModelParams& m, double tau_max, std::size_t N) {
    const double ri = inner_radius(m);
    double knee = m.grid.knee, sigma = m.grid.sigma;
    if (m.grid.kind == GridKind::Adapted) {
        if (knee <= 0.0) knee = std::pow(m.h, 1.0 / (1.0 - m.alpha));
        if (sigma < 0.0) sigma = std::sqrt(std::max(tau_max, 0.0));
    }
    return RadialGrid(m.grid.kind, ri, m.L, N, m.alpha, knee, sigma);
}

}  // namespace

double max_grid_step(const ModelParams& m, const RadialGrid& shape, double tau_max) {
    const double ri = shape.r_inner(), L = shape.r_outer();
    const int samples = 8000;
    double best = HUGE_VAL;
    for (int i = 0; i <= samples; ++i) {
        const double r = ri * std::pow(L / ri, double(i) / samples);
        const double lam = local_wavelength(m, r, tau_max);
        if (!std::isfinite(lam)) continue;
        best = std::min(best, lam / (m.grid.points_per_wavelength * shape.dr_dq(r)));
    }
    return best;
}

namespace {

// exact check at every node and half node
bool resolves(const ModelParams& m, const RadialGrid& g, double tau_max) {
    const double ppw = m.grid.points_per_wavelength;
    for (std::size_t k = 1; k <= 2 * g.interior() + 1; ++k) {
        const double r = g.r_node(0.5 * double(k));
        const double lam = local_wavelength(m, r, tau_max);
        if (!std::isfinite(lam)) continue;
        if (g.delta() * g.dr_dq(r) * ppw > lam) return false;
    }
    return true;
}

}  // namespace

ModelParams resolve_grid(const ModelParams& m, double tau_max) {
    validate(m);
    ModelParams out = m;
    RadialGrid probe = shape_of(m, tau_max, 2);
    if (m.grid.kind == GridKind::Adapted) {
        out.grid.knee = probe.knee();
        out.grid.sigma = probe.sigma();
    }
    if (m.grid.N > 0) {
        RadialGrid g = shape_of(out, tau_max, m.grid.N);
        require(resolves(m, g, tau_max), ErrorCode::GridResolution,
                "N = " + std::to_string(m.grid.N) + " gives fewer than " +
                    std::to_string(m.grid.points_per_wavelength) + " points per local wavelength");
        return out;
    }
    const double span = probe.q_of_r(m.L) - probe.q_of_r(probe.r_inner());
    const double step = max_grid_step(m, probe, tau_max);
    std::size_t N = std::size_t(std::ceil(std::isfinite(step) ? span / step : 64.0));
    N = std::max<std::size_t>(N, 64);
    for (int it = 0; it < 40; ++it) {
        RadialGrid g = shape_of(out, tau_max, N);
        if (resolves(m, g, tau_max)) break;
        N = std::size_t(double(N) * 1.05) + 1;
    }
    out.grid.N = N;
    return out;
}

RadialGrid make_grid(const ModelParams& r) {
    require(r.grid.N >= 2, ErrorCode::Domain, "grid is not resolved (N = 0)");
    double knee = r.grid.knee, sigma = r.grid.sigma;
    if (r.grid.kind == GridKind::Adapted)
        require(knee > 0.0 && sigma >= 0.0, ErrorCode::Domain, "adapted grid is not resolved");
    return RadialGrid(r.grid.kind, inner_radius(r), r.L, r.grid.N, r.alpha, knee, sigma);
}

}  // namespace sclab
