#pragma once
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

// Weyl terms, scale radii, estimate envelopes, power-law fits and loop phases.
namespace sclab::asymptotics {

// (2 pi h)^{-d} |B^d| g^{-1/2} (2 (tau - V))_+^{d/2}
double weyl_diag(int d, double h, double tau, double V_at, double metric_det = 1.0);
// same with V = -|x|^{-2 alpha}
double weyl_diag_reference(double alpha, int d, double h, const std::vector<double>& x, double tau);

struct ScaleSet {
    double h = 0.0;
    double alpha = 0.0;
    double r = 0.0;
    std::optional<double> beta;
    double delta = 0.05;
    double hbar = 0.0;      // h r^{alpha-1}
    double r_bar = 0.0;     // h^{1/(1-alpha)}
    double r_star = 0.0;    // h^{1/(1-alpha) - delta}
    std::optional<double> r_upper_star;  // h^{1/(1-alpha+beta)}
    bool even_branch = false;   // (1-alpha)^{-1} in 2Z
    bool branch_exact = false;  // decided by rational arithmetic
    std::string warning;
    double rho_exponent = 0.0;  // 1/2 - delta or 1/3 - delta
    double rho_bar = 0.0;       // hbar^{rho_exponent}
};

ScaleSet scale_set(double h, double alpha, double r, std::optional<double> beta = std::nullopt, double delta = 0.05);

// Exact test of (1-alpha)^{-1} in 2Z when alpha is a short rational; otherwise 1e-12 tolerance.
struct BranchTest {
    bool even = false;
    bool exact = false;
    long p = 0, q = 1;  // alpha = p/q when exact
};
BranchTest even_inverse_test(double alpha);

struct EnvelopeTerm {
    std::string slot;
    double h_exp = 0.0;
    double r_exp = 0.0;
    double rho_pow = 0.0;
    double eps_pow = 0.0;
    double rbar_pow = 0.0;
    bool skippable = false;  // dropped for alpha <= 1/2 when the skip rule is on
};

struct EstimateEnvelope {
    std::string id;
    int d = 2;
    double alpha = 0.5;
    double beta = 1.0;
    double s = 1.0;  // order in the h^s remainders
    bool skip_rule = true;
    std::vector<EnvelopeTerm> terms;
    bool skips_active() const { return skip_rule && alpha <= 0.5; }
};

const std::vector<std::string>& envelope_ids();
EstimateEnvelope make_envelope(const std::string& id, int d, double alpha, double beta = 1.0, double s = 1.0,
                               bool skip_rule = true);

// Constants are looked up per slot (C1, C2, ...); a key "C" fills every slot not given.
double envelope_value(const EstimateEnvelope& env, const ScaleSet& sc, std::optional<double> eps,
                      const std::map<std::string, double>& constants);
double envelope_term_value(const EnvelopeTerm& t, const ScaleSet& sc, std::optional<double> eps);
nlohmann::json to_json(const EstimateEnvelope& env);

struct Fit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    std::size_t n = 0;
};
// least squares on (ln h, ln value)
Fit exponent_fit(const std::vector<std::pair<double, double>>& points);

// value(h/2) <= (1 + slack) value(h) for every pair of sweep points one halving apart (within 5%);
// consecutive points are compared when the sweep has no such pair.
bool nonincreasing_across_halvings(const std::vector<std::pair<double, double>>& points, double slack);

struct PhaseResult {
    double f_peak = 0.0;
    double power = 0.0;
    double snr = 0.0;
    bool inconclusive = false;
    double sample_rate = 0.0;  // in cycles per unit of 1/h
    std::vector<std::pair<double, double>> spectrum;  // (f, power) on the window grid
};

// Periodogram of band_diff h^{d-3/2} in u = 1/h after removing a quadratic trend in u, searched on
// [f_min, f_max] minus the images of frequencies below trend_guard cycles per record. SNR is the peak
// power over the mean power of the Fourier bins k = 1..n/2.
PhaseResult phase_extract(const std::vector<std::pair<double, double>>& points, std::pair<double, double> window,
                          int d = 2, double snr_threshold = 3.0, double trend_guard = 3.0);

// Half alias period [k rate/2, (k+1) rate/2] containing f. Real samples put the images of a tone
// at k rate +- f, so each tone has exactly one image in such a zone.
std::pair<double, double> alias_window(double f, const std::vector<std::pair<double, double>>& points);

struct SecondTermSample {
    double h;
    double tauberian;
    double weyl;
};
struct SecondTermCheck {
    Fit fit;
    bool degenerate = false;
    double expected_min = 0.0;  // (2-d) - 0.25
    bool consistent = false;
};
SecondTermCheck weyl_second_term_check(const std::vector<SecondTermSample>& sweep, int d);

struct ScalingQuantities {
    double t0 = 0.0;       // 2/(1+alpha)
    double T_star = 0.0;   // 0.2 t0 r^{1+alpha}
    double C0 = 0.0;       // 2 max(t0, max_k t_k) r^{1+alpha}
    double min_tk = 0.0;   // scaled; +inf without loops
    bool T_star_below_loops = true;
};
ScalingQuantities scaling_quantities(double alpha, double r);

}  // namespace sclab::asymptotics
