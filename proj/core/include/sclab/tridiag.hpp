#pragma once
#include <cstddef>
#include <span>
#include <vector>

// Symmetric tridiagonal eigen-solver working on a spectral window.
// Eigenvalues are isolated by Sturm-sequence bisection and refined by
// Rayleigh-quotient inverse iteration on a twisted factorization; only
// selected eigenvector components are kept.
namespace sclab::tridiag {

struct Matrix {
    std::vector<double> diag;  // n
    std::vector<double> off;   // n-1
    std::size_t size() const { return diag.size(); }
};

// Number of eigenvalues strictly below sigma.
std::size_t count_below(const Matrix& m, double sigma);

// Batched form; shifts are processed together to hide division latency.
void count_below(const Matrix& m, std::span<const double> sigmas, std::span<std::size_t> counts);

struct WindowOptions {
    double rel_tol = 2e-15;       // relative convergence of each eigenvalue
    double cluster_rel = 1e-10;   // eigenvalues closer than this (relative) form a cluster
    int max_rqi = 12;             // RQI steps before falling back to bisection
};

struct WindowResult {
    std::size_t count_lo = 0;     // eigenvalues below lo
    std::vector<double> values;   // ascending, all eigenvalues in [lo, hi)
    // values.size() x nodes.size(), row-major: unit-norm eigenvector at the requested nodes
    std::vector<double> samples;
    std::vector<int> cluster;     // cluster id per eigenvalue, -1 when isolated
    int rqi_fallbacks = 0;
    std::size_t count_shifts = 0;  // Sturm counts spent isolating
    std::size_t sweeps = 0;        // batched twisted sweeps
};

WindowResult eigen_window(const Matrix& m, double lo, double hi, std::span<const std::size_t> nodes,
                          const WindowOptions& opt = {});

// Full eigenvector for a converged eigenvalue (inverse iteration, used for clusters and tests).
std::vector<double> eigenvector(const Matrix& m, double lambda);

}  // namespace sclab::tridiag
