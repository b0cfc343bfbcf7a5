#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/radial_spectrum.hpp"

// Time cutoffs and the smoothed step they induce on a pure-point spectrum.
//
//   barchi(t) = B(2|t| - 1),  B(x) = f(1-x) / (f(x) + f(1-x)),  f(x) = exp(-a/x)
//   Phi(s)    = (2 pi)^{-1} int_{-inf}^{s} hat barchi,  hat f(sigma) = int e^{-i sigma t} f(t) dt
//             = 1/2 + (2 pi)^{-1} int_{-1}^{1} barchi(t) sin(s t) / t dt
namespace sclab::mollifier {

struct Profile {
    double sharpness = 2.0;  // a; 2 minimizes the 1e-8 cut among the scanned values
};

struct CutoffBank {
    Profile profile;
    std::size_t quad_points = 0;
    double s_max = 0.0;         // table covers [-s_max, s_max]
    double ds = 0.0;
    std::vector<double> phi;    // Phi at the nodes
    std::vector<double> dphi;   // Phi' = hat barchi / (2 pi)
    double C4 = 0.0;            // sup (1+|s|)^4 |Phi(s) - 1{s>0}| over |s| >= 1
    double tail_eps = 1e-8;
    double s_cut = 0.0;         // |Phi - 1{s>0}| <= tail_eps beyond this

    bool built() const { return !phi.empty(); }
    double barchi(double t) const;
    double Phi(double s) const;        // cubic Hermite on the table, step function beyond it
    double Phi_slope(double s) const;
    nlohmann::json to_json() const;
    std::string hash() const;
};

double barchi(const Profile& p, double t);

// Trapezoid evaluation; spectrally accurate because barchi is flat at +-1.
double phi_direct(const Profile& p, double s, std::size_t quad_points);
double phi_slope_direct(const Profile& p, double s, std::size_t quad_points);

// Smallest s with |Phi(s') - 1{s'>0}| <= eps for all |s'| >= s (scanned on a 1/8 grid).
double tail_cut(const Profile& p, double eps, std::size_t quad_points, double s_limit = 1024.0);

struct SharpnessScan {
    std::vector<double> sharpness;
    std::vector<double> s_cut;
    double best = 0.0;
};
SharpnessScan scan_sharpness(const std::vector<double>& candidates, double eps = 1e-8, std::size_t quad_points = 1 << 12);

CutoffBank build_cutoff_bank(const Profile& p = {}, std::size_t quad_points = 1 << 12, std::size_t table_nodes = 1 << 15);
CutoffBank bank_from_json(const nlohmann::json& j);

// Energy margin h s_cut / T that the spectrum must extend beyond tau.
double margin(const CutoffBank& bank, double T, double h);

// sum_j w_j Phi(T (tau - lambda_j) / h) over raw entries (no completeness checks)
double tauberian_sum(const std::vector<radial::SummaryEntry>& entries, double tau, double T, double h,
                     const CutoffBank& bank);

double tauberian_diag(const radial::SpectralSummary& s, double tau, double T, double h, const CutoffBank& bank);

// Tauberian(T) - Tauberian(T'); only the window tau +- margin(T') is needed, so
// windowed summaries are accepted.
double band_difference(const radial::SpectralSummary& s, double tau, double T, double T_prime, double h,
                       const CutoffBank& bank);

}  // namespace sclab::mollifier
