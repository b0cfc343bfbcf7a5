#pragma once
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "sclab/grid.hpp"
#include "sclab/model.hpp"
#include "sclab/tridiag.hpp"

namespace sclab::radial {

// W_l(r) = h^2 c nu_l / (2 r^2) + V(r) + h^2 (d-1) c'(r) / (4 r)
double effective_channel_potential(const ModelParams& m, int ell, double r);

// Node data of the discretized channel operator; shared by all channels of a model.
struct Discretization {
    ModelParams model;  // resolved (N fixed)
    RadialGrid grid;
    std::vector<double> r;        // interior node radii
    std::vector<double> mass;     // dr weight per node
    std::vector<double> kin;      // kinetic diagonal / mass
    std::vector<double> off;      // folded off-diagonal
    std::vector<double> pot;      // V + metric correction
    std::vector<double> cent;     // h^2 c / (2 r^2)

    explicit Discretization(const ModelParams& resolved);
    tridiag::Matrix channel_matrix(int ell) const;
    double channel_potential(int ell, std::size_t i) const { return pot[i] + nu_ell(model.d, ell) * cent[i]; }
};

struct SolveOptions {
    double lambda_lo = -std::numeric_limits<double>::infinity();  // window start; -inf = complete spectrum
    double tunnel_exponent = 70.0;  // states with |u(probe)|^2 below e^{-this} are never computed
    double trunc_eps = 1e-10;       // channel truncation threshold (relative weight of last two channels)
    int ell_cap = 200000;
    int workers = 1;
};

struct ChannelPair {
    double lambda;
    std::vector<double> u_at;  // aligned with ChannelSpectrum::probes
    int cluster = -1;
};

struct ChannelSpectrum {
    int ell = 0;
    double nu_ell = 0.0;
    double tau_max = 0.0;
    double floor = 0.0;              // lowest energy solved for
    std::size_t count_below_floor = 0;
    std::vector<double> probes;      // probe radii
    std::vector<ChannelPair> pairs;  // ascending lambda
};

// Lowest energy at which a state of this channel can carry weight above
// e^{-tunnel_exponent} at any of the probes (WKB barrier estimate).
double channel_floor(const Discretization& disc, int ell, const std::vector<double>& probes, double tau_max,
                     double tunnel_exponent);

ChannelSpectrum channel_eigensolve(const Discretization& disc, int ell, double tau_max,
                                   const std::vector<double>& probes, const SolveOptions& opt = {});
ChannelSpectrum channel_eigensolve(const ModelParams& m, int ell, double tau_max, const std::vector<double>& probes,
                                   const SolveOptions& opt = {});

struct SummaryEntry {
    double lambda;
    double w;
};

struct SpectralSummary {
    std::vector<double> x;  // probe point
    double r = 0.0;
    double h = 0.0;
    int d = 2;
    double tau_max = 0.0;
    double lambda_lo = -std::numeric_limits<double>::infinity();  // -inf: complete below tau_max
    std::vector<SummaryEntry> entries;                              // ascending lambda
    int ell_max_used = 0;
    double tail_estimate = 0.0;
    std::vector<double> channel_weight;  // per channel, for diagnostics
    bool complete_below() const { return lambda_lo == -std::numeric_limits<double>::infinity(); }
    double total_weight() const;
};

class SpectrumCache;

// Summaries for several probe radii from one set of channel solves.
std::vector<SpectralSummary> spectral_summaries(const Discretization& disc, const std::vector<double>& probes,
                                                double tau_max, const SolveOptions& opt = {},
                                                SpectrumCache* cache = nullptr);

SpectralSummary spectral_summary(const ModelParams& m, const std::vector<double>& x, double tau_max,
                                 const SolveOptions& opt = {}, SpectrumCache* cache = nullptr);

double sharp_count(const SpectralSummary& s, double tau);

// Persistent cache of channel spectra, one JSON document per entry.
class SpectrumCache {
public:
    explicit SpectrumCache(std::string dir);
    std::optional<ChannelSpectrum> get(const std::string& key);
    void put(const std::string& key, const ChannelSpectrum& cs);
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::shared_mutex mu_;
    std::unordered_map<std::string, std::shared_ptr<const ChannelSpectrum>> mem_;
};

std::string channel_cache_key(const ModelParams& resolved, int ell, double tau_max, const std::vector<double>& probes,
                              const SolveOptions& opt);

}  // namespace sclab::radial
