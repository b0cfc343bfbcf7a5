#pragma once
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

// Zero-energy dynamics of H = |xi|^2/2 - g |x|^{-2 alpha}: closed-form orbits,
// self-intersection loops, and an ODE oracle for everything closed-form.
namespace sclab::classical {

struct DynParams {
    double alpha = 0.5;
    double omega = 1.0;   // 2 - 2 alpha
    double energy = 0.0;  // catalog operations use 0
    double g = 1.0;       // coupling; 1/2 gives the time normalization of the radial asymptotes
    static DynParams make(double alpha, double energy = 0.0, double g = 1.0);
};

struct LoopCount {
    int n = 0;
    bool degenerate = false;  // 1/omega is an integer: the last intersection sits at infinity
};

// n = #{k : 1 <= k < 1/omega}
LoopCount loop_count(double alpha);

struct LoopEntry {
    int k = 0;
    double theta_k = 0.0;
    double gamma_k = 0.0;      // intersection radius at M = 1
    double mu_k = 0.0;         // angular momentum of the loop through |x| = 1
    double t_k = 0.0;          // return time at |x| = 1
    double s_k = 0.0;          // loop action at |x| = 1
    double t_err = 0.0;        // quadrature error estimates
    double s_err = 0.0;
    double gamma_alt = 0.0;    // (1 - cos(omega pi k))^{-1/omega}, the sign-flipped algebra
};

struct LoopCatalog {
    double alpha = 0.0;
    int n = 0;
    bool degenerate = false;
    std::vector<LoopEntry> entries;  // k = 1..n
    std::vector<int> k_by_gamma;     // k sorted by increasing gamma_k
    std::vector<int> k_by_mu;        // k sorted by increasing mu_k
    const LoopEntry& at(int k) const;
};

// Built at g = 1. Memoized per alpha.
const LoopCatalog& loop_catalog(double alpha);
LoopCatalog build_loop_catalog(double alpha);

// Exact action 4 mu_k tan(omega pi k / 2) / omega.
double loop_action_exact(double alpha, int k);

// 2/(1+alpha); the drop-and-return time in the g = 1/2 normalization
double radial_time(double alpha);

// r = (M^2 / (g (1 - cos(omega theta))))^{1/omega}, pericenter at theta = pi/omega
double closed_form_radius(const DynParams& dyn, double M, double theta);

struct Sample {
    double t;
    std::vector<double> x;
    std::vector<double> xi;
};

struct Trajectory {
    std::vector<Sample> samples;
    double H0 = 0.0;
    double M0 = 0.0;                   // signed in the orbit plane
    double H_drift = 0.0;
    double M_drift = 0.0;              // max over components x_i xi_j - x_j xi_i
    std::optional<double> pericenter_time;
    double angle_advance = 0.0;        // unwrapped polar angle swept in the orbit plane
    bool stopped_by_event = false;
    std::vector<double> plane_angle;   // unwrapped polar angle per sample
    int d = 2;
};

struct FlowOptions {
    double t_end = 0.0;
    double tol = 1e-10;
    bool continue_collision = false;  // bounce radial paths through the origin
    std::size_t max_steps = 2000000;
    // Stops when this changes sign from negative to nonnegative. Arguments: t, plane
    // position, plane momentum, unwrapped angle advance.
    std::function<double(double, const double*, const double*, double)> stop;
};

Trajectory integrate_flow(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                          double t_end, double tol);
Trajectory integrate_flow(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                          const FlowOptions& opt);

double hamiltonian(const DynParams& dyn, const std::vector<double>& x, const std::vector<double>& xi);

// Incoming zero-energy state at radius r on the positive x-axis with angular momentum M.
void zero_energy_state(const DynParams& dyn, double r, double M, std::vector<double>& x, std::vector<double>& xi);

struct LoopReturn {
    double t = 0.0;
    double miss = 0.0;  // |x(t) - x0|
    Trajectory traj;
};

// First return of loop k through x0 = (1, 0), located by the unwrapped angle 2 pi k.
LoopReturn loop_return(const DynParams& dyn, int k, double tol);

// Transversal self-intersections of the sampled planar path.
std::size_t count_self_intersections(const Trajectory& tr);

// Full zero-energy orbit with M = 1 from radius R_far back to R_far.
Trajectory full_orbit(const DynParams& dyn, double R_far, double tol);

// Angle swept beyond radius R on one branch of a zero-energy orbit.
double orbit_tail_angle(const DynParams& dyn, double M, double R);

struct Asymptote {
    double t;
    double s_advance;
};

struct AsymptoteWindow {
    double C0 = 2.0;
    double eps0 = 0.5;
};

// Leading terms t = r^{1+a}/(1+a), s = s0 - rho r^{a-1}/(1-a), s0 = pi/omega; time counted from pericenter.
Asymptote time_angle_asymptotes(const DynParams& dyn, double rho, double tau, double r, const AsymptoteWindow& w = {});

// Flow oracle for the same quantities (pericenter to radius r at energy tau).
Asymptote time_angle_exact(const DynParams& dyn, double rho, double tau, double r, double tol);

struct JacobianResult {
    std::vector<double> singular_values;
    int rank_eps = 0;
    std::vector<std::vector<double>> J;  // d x (d+1); last column is d/dt
    std::vector<double> velocity;        // xi(t_ret)
};

JacobianResult return_map_jacobian(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                                   double t_ret, double tol = 1e-12);

struct Connection {
    double M;
    int winding;
    int direction;  // +1 counter-clockwise
};

std::vector<Connection> connecting_trajectories(const DynParams& dyn, const std::vector<double>& x,
                                                const std::vector<double>& y);

// Closed-form loops through a point at radius r (one polyline per k and direction).
std::vector<std::vector<std::vector<double>>> loop_polylines(double alpha, double r, std::size_t points);

// Flow-versus-closed-form checks for one alpha (g = 1).
struct GeometryCheck {
    double alpha = 0.0;
    LoopCount count;
    std::size_t intersections = 0;  // of the integrated M = 1 orbit
    double angle_error = 0.0;       // total swept angle vs 2 pi / omega
    double H_drift = 0.0;
    double M_drift = 0.0;
    double residual = 0.0;          // max |r^omega (1 - cos(omega theta)) - 1| along the orbit
    double t_rel_err = 0.0;         // max over k of |t_k(flow) - t_k| / t_k
    double s_rel_err = 0.0;         // max over k of |s_k - exact| / s_k
    double loop_miss = 0.0;         // max over k of the closing distance
    double pericenter_time = 0.0;   // radial drop from |x| = 1
    double pericenter_target = 0.0; // 1/(1+alpha)
    Trajectory orbit;
};
GeometryCheck geometry_check(double alpha, double tol = 1e-12);

std::string trajectory_csv(const DynParams& dyn, const Trajectory& tr);
nlohmann::json catalog_json(const LoopCatalog& cat);

}  // namespace sclab::classical
