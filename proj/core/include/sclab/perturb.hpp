#pragma once
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/model.hpp"
#include "sclab/mollifier.hpp"
#include "sclab/radial_spectrum.hpp"

// Radial perturbations of the reference model and paired difference observables.
namespace sclab::perturb {

// -h^2/2 (p u')' + q u = lambda w u in the dr measure, on the interior nodes of the grid
struct ChannelCoefficients {
    int ell = 0;
    std::vector<double> r;
    std::vector<double> p;  // c(r)
    std::vector<double> q;  // c nu_l h^2/(2 r^2) + V + h^2 (d-1) c'/(4 r)
    std::vector<double> w;  // 1
};

ModelParams perturbed_model(const ModelParams& base, const PerturbationSpec& spec);

ChannelCoefficients perturbed_channel_coefficients(const PerturbationSpec& spec, const ModelParams& model, int ell,
                                                   double tau_max = 0.0);

// Resolve one grid for both operators (the finer of the two) so differences cancel node by node.
struct MatchedPair {
    ModelParams reference;
    ModelParams perturbed;
};
MatchedPair matched_pair(const ModelParams& base, const PerturbationSpec& spec, double tau_max);
void check_matched(const ModelParams& a, const ModelParams& b);

struct DifferenceResult {
    double e_ref = 0.0, e_pert = 0.0;
    double e_diff = 0.0;          // sharp counts at tau
    double tauberian_diff = 0.0;  // tauberian(T) of the two operators
    double band_diff = 0.0;       // [tb(T) - tb(T')]_pert - [tb(T) - tb(T')]_ref
    double weyl_ref = 0.0, weyl_pert = 0.0;
    double weyl_diff = 0.0;
};

struct DifferenceOptions {
    double T = 0.0;        // 0: T_* at |x|
    double T_prime = 0.0;  // 0: no band term
    radial::SolveOptions solve;
    radial::SpectrumCache* cache = nullptr;
};

// Both models must be resolved on identical grids.
DifferenceResult difference_diag(const ModelParams& reference, const ModelParams& perturbed, const std::vector<double>& x,
                                 double tau, const mollifier::CutoffBank& bank, const DifferenceOptions& opt = {});

// Weyl term of the perturbed operator: V and det(g^{jk}) = c^d at |x|
double weyl_perturbed(const ModelParams& perturbed, const std::vector<double>& x, double tau);

struct NearOriginResult {
    double r_bar = 0.0;
    std::vector<double> probes;
    std::vector<double> e_ref;    // e_h(x,x,tau) per probe
    std::vector<double> e_pert;
    double sup_ee = 0.0;
    double sup_diff = 0.0;
    double rbar_pow_d = 0.0;      // r_bar^{-d}
    double rbar_pow_beta_d = 0.0; // r_bar^{beta-d}
};

NearOriginResult near_origin_sup(const ModelParams& base, const PerturbationSpec& spec, double tau,
                                 std::size_t n_probes = 8, const radial::SolveOptions& solve = {},
                                 radial::SpectrumCache* cache = nullptr);

// Constants c_m in |d^m/dr^m (f)| r^m <= c_m eps |r|^{base}, f the perturbation of V or of the metric.
// Closed form on r <= 1 (where psi = 1), autodiff on a grid up to radius R otherwise.
struct CSigmaReport {
    int order = 3;
    double R = 1.0;
    double eps = 0.0;
    std::vector<double> pot_symbolic, met_symbolic;  // m = 0..3
    std::vector<double> pot_numeric, met_numeric;    // m = 0..order
    double max_mismatch = 0.0;                       // symbolic vs numeric, on r <= min(R, 1)
};
CSigmaReport c_sigma_check(const PerturbationSpec& spec, double alpha, double R, int order = 3, std::size_t grid = 400);

nlohmann::json to_json(const DifferenceResult& d);

}  // namespace sclab::perturb
