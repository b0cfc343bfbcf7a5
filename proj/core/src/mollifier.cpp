#include "sclab/mollifier.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sclab/error.hpp"
#include "sclab/io.hpp"
#include "sclab/model.hpp"

namespace sclab::mollifier {

using std::numbers::pi;

double barchi(const Profile& p, double t) { return smooth_ramp_down(2.0 * std::fabs(t) - 1.0, p.sharpness); }

double CutoffBank::barchi(double t) const { return mollifier::barchi(profile, t); }

namespace {

// Phi and Phi' on s_j = s0 + j ds, j < n. Trapezoid on [0,1] (the integrand is even),
// with the phases advanced by rotation and re-anchored every 256 nodes.
void phi_grid(const Profile& p, double s0, double ds, std::size_t n, std::size_t quad_points, std::vector<double>& phi,
              std::vector<double>& dphi) {
    require(quad_points >= 4096, ErrorCode::Domain, "quad_points must be at least 2^12");
    const std::size_t K = quad_points / 2;  // intervals on [0, 1]
    const double dt = 1.0 / double(K);
    std::vector<double> si(n, 0.0), co(n, 0.0);
    for (std::size_t k = 0; k <= K; ++k) {
        const double t = dt * double(k);
        const double w = (k == 0 || k == K) ? 0.5 * dt : dt;
        const double c = barchi(p, t) * w;
        if (c == 0.0) continue;
        if (k == 0) {
            for (std::size_t j = 0; j < n; ++j) {
                si[j] += c * (s0 + ds * double(j));  // sin(st)/t -> s
                co[j] += c;
            }
            continue;
        }
        const std::complex<double> rot = std::polar(1.0, ds * t);
        std::complex<double> z;
        for (std::size_t j = 0; j < n; ++j) {
            if (j % 256 == 0) z = std::polar(1.0, (s0 + ds * double(j)) * t);
            si[j] += c * z.imag() / t;
            co[j] += c * z.real();
            z *= rot;
        }
    }
    phi.resize(n);
    dphi.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        phi[j] = 0.5 + si[j] / pi;
        dphi[j] = co[j] / pi;
    }
}

}  // namespace

double phi_direct(const Profile& p, double s, std::size_t quad_points) {
    std::vector<double> a, b;
    phi_grid(p, s, 0.0, 1, quad_points, a, b);
    return a[0];
}

double phi_slope_direct(const Profile& p, double s, std::size_t quad_points) {
    std::vector<double> a, b;
    phi_grid(p, s, 0.0, 1, quad_points, a, b);
    return b[0];
}

double tail_cut(const Profile& p, double eps, std::size_t quad_points, double s_limit) {
    const double ds = 0.125;
    const std::size_t n = std::size_t(s_limit / ds);
    std::vector<double> phi, dphi;
    phi_grid(p, ds, ds, n, quad_points, phi, dphi);
    // Phi(-s) = 1 - Phi(s), so the positive side decides
    std::size_t last = 0;
    bool any = false;
    for (std::size_t j = 0; j < n; ++j)
        if (std::fabs(phi[j] - 1.0) > eps) last = j, any = true;
    require(!any || last + 16 < n, ErrorCode::Quadrature, "tail does not reach the requested level inside the scan range");
    return any ? ds * double(last + 2) : ds;
}

SharpnessScan scan_sharpness(const std::vector<double>& candidates, double eps, std::size_t quad_points) {
    SharpnessScan out;
    double best = HUGE_VAL;
    for (double a : candidates) {
        const double c = tail_cut(Profile{a}, eps, quad_points);
        out.sharpness.push_back(a);
        out.s_cut.push_back(c);
        if (c < best) best = c, out.best = a;
    }
    return out;
}

CutoffBank build_cutoff_bank(const Profile& p, std::size_t quad_points, std::size_t table_nodes) {
    require(p.sharpness > 0.0, ErrorCode::Domain, "sharpness must be positive");
    require(table_nodes >= 1024, ErrorCode::Domain, "table too small");
    CutoffBank b;
    b.profile = p;
    b.quad_points = quad_points;
    const double cut = tail_cut(p, b.tail_eps, quad_points);
    // the table must hold the whole non-negligible part of Phi
    b.s_max = std::max(64.0, 8.0 * std::ceil(1.25 * cut / 8.0));
    const std::size_t half = table_nodes / 2;
    b.ds = b.s_max / double(half);
    std::vector<double> pp, dp;
    phi_grid(p, 0.0, b.ds, half + 1, quad_points, pp, dp);
    b.phi.resize(2 * half + 1);
    b.dphi.resize(2 * half + 1);
    for (std::size_t j = 0; j <= half; ++j) {
        b.phi[half + j] = pp[j];
        b.phi[half - j] = 1.0 - pp[j];
        b.dphi[half + j] = dp[j];
        b.dphi[half - j] = dp[j];
    }
    b.phi[half] = 0.5;
    require(std::fabs(b.phi.back() - 1.0) <= 1e-9 && std::fabs(b.phi.front()) <= 1e-9, ErrorCode::Quadrature,
            "Phi(+inf) differs from 1 beyond 1e-9");
    b.C4 = 0.0;
    b.s_cut = 0.0;
    for (std::size_t j = 0; j <= half; ++j) {
        const double s = b.ds * double(j);
        const double e = std::fabs(pp[j] - 1.0);
        if (s >= 1.0) b.C4 = std::max(b.C4, e * std::pow(1.0 + s, 4.0));
        if (j > 0 && e > b.tail_eps) b.s_cut = s + b.ds;
    }
    return b;
}

double CutoffBank::Phi(double s) const {
    require(built(), ErrorCode::BankNotBuilt, "cutoff bank not built");
    if (s >= s_max) return 1.0;
    if (s <= -s_max) return 0.0;
    const double x = (s + s_max) / ds;
    const std::size_t j = std::min(std::size_t(x), phi.size() - 2);
    const double u = x - double(j), u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u, h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * phi[j] + h10 * ds * dphi[j] + h01 * phi[j + 1] + h11 * ds * dphi[j + 1];
}

double CutoffBank::Phi_slope(double s) const {
    require(built(), ErrorCode::BankNotBuilt, "cutoff bank not built");
    if (std::fabs(s) >= s_max) return 0.0;
    const double x = (s + s_max) / ds;
    const std::size_t j = std::min(std::size_t(x), phi.size() - 2);
    const double u = x - double(j), u2 = u * u;
    const double g00 = 6 * u2 - 6 * u, g10 = 3 * u2 - 4 * u + 1, g01 = -6 * u2 + 6 * u, g11 = 3 * u2 - 2 * u;
    return (g00 * phi[j] + g01 * phi[j + 1]) / ds + g10 * dphi[j] + g11 * dphi[j + 1];
}

nlohmann::json CutoffBank::to_json() const {
    return {{"sharpness", profile.sharpness},
            {"quad_points", quad_points},
            {"s_max", s_max},
            {"ds", ds},
            {"C4", C4},
            {"tail_eps", tail_eps},
            {"s_cut", s_cut},
            {"phi", phi},
            {"dphi", dphi}};
}

std::string CutoffBank::hash() const { return io::sha256_hex(to_json().dump()); }

CutoffBank bank_from_json(const nlohmann::json& j) {
    CutoffBank b;
    b.profile.sharpness = j.at("sharpness");
    b.quad_points = j.at("quad_points");
    b.s_max = j.at("s_max");
    b.ds = j.at("ds");
    b.C4 = j.at("C4");
    b.tail_eps = j.at("tail_eps");
    b.s_cut = j.at("s_cut");
    b.phi = j.at("phi").get<std::vector<double>>();
    b.dphi = j.at("dphi").get<std::vector<double>>();
    require(b.phi.size() == b.dphi.size() && b.phi.size() >= 3, ErrorCode::Config, "malformed bank document");
    return b;
}

double margin(const CutoffBank& bank, double T, double h) {
    require(bank.built(), ErrorCode::BankNotBuilt, "cutoff bank not built");
    require(T > 0.0 && h > 0.0, ErrorCode::Domain, "need T > 0 and h > 0");
    return h * bank.s_cut / T;
}

double tauberian_sum(const std::vector<radial::SummaryEntry>& entries, double tau, double T, double h,
                     const CutoffBank& bank) {
    require(bank.built(), ErrorCode::BankNotBuilt, "cutoff bank not built");
    const double k = T / h;
    const double lo = tau - bank.s_max / k;  // entries below sit on the plateau Phi = 1
    double acc = 0.0, comp = 0.0;
    for (const auto& e : entries) {
        const double v = e.lambda <= lo ? e.w : e.w * bank.Phi(k * (tau - e.lambda));
        if (v == 0.0 && e.lambda > tau) break;
        // Neumaier summation
        const double t = acc + v;
        comp += std::fabs(acc) >= std::fabs(v) ? (acc - t) + v : (v - t) + acc;
        acc = t;
    }
    return acc + comp;
}

double tauberian_diag(const radial::SpectralSummary& s, double tau, double T, double h, const CutoffBank& bank) {
    const double m = margin(bank, T, h);
    require(s.complete_below(), ErrorCode::IncompleteSpectrum, "summary does not hold the spectrum below its window");
    require(s.tau_max >= tau + m, ErrorCode::IncompleteSpectrum,
            "spectrum ends at " + io::fmt(s.tau_max) + ", below tau + margin = " + io::fmt(tau + m));
    return tauberian_sum(s.entries, tau, T, h, bank);
}

double band_difference(const radial::SpectralSummary& s, double tau, double T, double T_prime, double h,
                       const CutoffBank& bank) {
    require(T_prime > 0.0 && T_prime <= T, ErrorCode::Domain, "need 0 < T' <= T");
    const double m = margin(bank, T_prime, h);
    require(s.tau_max >= tau + m, ErrorCode::IncompleteSpectrum,
            "spectrum ends at " + io::fmt(s.tau_max) + ", below tau + margin = " + io::fmt(tau + m));
    require(s.lambda_lo <= tau - m, ErrorCode::IncompleteSpectrum,
            "window starts at " + io::fmt(s.lambda_lo) + ", above tau - margin = " + io::fmt(tau - m));
    if (T == T_prime) return 0.0;
    const double k = T / h, kp = T_prime / h;
    double acc = 0.0;
    for (const auto& e : s.entries) {
        if (e.lambda < tau - m) continue;  // both factors within tail_eps of 1
        if (e.lambda > tau + m) break;
        acc += e.w * (bank.Phi(k * (tau - e.lambda)) - bank.Phi(kp * (tau - e.lambda)));
    }
    return acc;
}

}  // namespace sclab::mollifier
