#pragma once
#include <cstddef>
#include <string>

namespace sclab {

// Smooth transition built from exp(-a/x): 1 for x <= 0, 0 for x >= 1.
double smooth_ramp_down(double x, double sharpness = 1.0);
double smooth_ramp_down_slope(double x, double sharpness = 1.0);

enum class GridKind {
    LogUniform,  // uniform in s = ln r
    Adapted,     // uniform in q = ln r + knee^{-p} (r^p/p + sigma r), p = 1 - alpha
};

struct GridSpec {
    GridKind kind = GridKind::LogUniform;
    std::size_t N = 0;          // interior nodes; 0 = choose from the wavelength rule
    double points_per_wavelength = 16.0;
    double knee = 0.0;          // Adapted only; 0 = h^{1/(1-alpha)}
    double sigma = -1.0;        // Adapted only; < 0 = sqrt(max(tau_max, 0))
};

// Radial perturbation family: V = -r^{-2a}(1 + a_pot r^beta psi), c = 1 + a_met r^beta psi
struct PerturbationSpec {
    double beta = 1.0;
    double a_pot = 0.0;
    double a_met = 0.0;
    bool is_zero() const { return a_pot == 0.0 && a_met == 0.0; }
};

enum class PotentialKind {
    Reference,  // -r^{-2 alpha}
    Perturbed,  // PerturbationSpec family
    Harmonic,   // r^2/2, sanity fixture
    Free,       // 0, sanity fixture
};

struct ModelParams {
    double alpha = 0.5;
    int d = 2;
    double h = 0.1;
    double L = 3.0;
    double r_inner = 0.0;       // 0 = eta * h^{1/(1-alpha)}
    double eta = 1e-3;
    GridSpec grid;
    PotentialKind potential = PotentialKind::Reference;
    PerturbationSpec pert;
    double v_shift = 0.0;       // constant added to V
};

double inner_radius(const ModelParams& m);
void validate(const ModelParams& m);

double cutoff_psi(double r);
double cutoff_psi_slope(double r);

double potential(const ModelParams& m, double r);
double metric(const ModelParams& m, double r);
double metric_slope(const ModelParams& m, double r);

// angular data
double nu_ell(int d, int ell);
double channel_multiplicity(int d, int ell);
double sphere_area(int d);  // |S^{d-1}|
double ball_volume(int d);  // |B^d|

std::string potential_name(PotentialKind k);
PotentialKind potential_from_name(const std::string& s);
std::string grid_kind_name(GridKind k);
GridKind grid_kind_from_name(const std::string& s);

}  // namespace sclab
