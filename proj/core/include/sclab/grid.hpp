#pragma once
#include <cstddef>
#include <vector>

#include "sclab/model.hpp"

namespace sclab {

// Smooth monotone map r -> q with a uniform grid in q. Node 0 sits on r_inner,
// node N+1 on L; nodes 1..N are the unknowns.
class RadialGrid {
public:
    RadialGrid(GridKind kind, double r_inner, double L, std::size_t N, double alpha, double knee, double sigma);

    GridKind kind() const { return kind_; }
    std::size_t interior() const { return N_; }
    double r_inner() const { return r0_; }
    double r_outer() const { return L_; }
    double delta() const { return dq_; }
    double knee() const { return knee_; }
    double sigma() const { return sigma_; }

    double q_of_r(double r) const;
    double r_of_q(double q) const;
    double dr_dq(double r) const;

    double q_node(double i) const { return q0_ + dq_ * i; }
    double r_node(double i) const { return r_of_q(q_node(i)); }

private:
    GridKind kind_;
    double r0_, L_;
    std::size_t N_;
    double p_, knee_, sigma_, kp_;
    double q0_, dq_;
};

// Largest admissible q-step for the wavelength rule at energy tau_max.
double max_grid_step(const ModelParams& m, const RadialGrid& shape, double tau_max);

// Fix N (and the adapted-grid parameters) for a model at tau_max. Explicit N is
// validated against the wavelength rule; N = 0 is filled in.
ModelParams resolve_grid(const ModelParams& m, double tau_max);

RadialGrid make_grid(const ModelParams& resolved);

}  // namespace sclab
