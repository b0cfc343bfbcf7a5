#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sclab/model.hpp"
#include "sclab/mollifier.hpp"
#include "sclab/radial_spectrum.hpp"

// Declarative experiments: config parsing, sweeps, manifests and tables.
namespace sclab::expcli {

const std::vector<std::string>& experiment_kinds();

struct ExperimentConfig {
    std::string kind;
    std::string id;
    ModelParams model;
    std::vector<double> h;      // strictly decreasing
    std::vector<double> r{1.0};
    std::vector<double> alpha;  // empty: model.alpha
    mollifier::Profile bank;
    std::vector<std::string> envelopes;
    PerturbationSpec pert;
    std::vector<double> a_pot;  // perturb-sweep amplitudes
    double tau = 0.0;
    double delta = 0.05;
    double tol = 1e-12;         // classical integration tolerance
    double T = 0.0;             // 0: C0 for band sweeps, T_* otherwise
    double T_prime = 0.0;       // 0: T_*
    bool windowed = false;      // band sweeps: solve only the window around tau
    std::size_t probes = 8;     // near-origin
    double f_center = 0.0;      // phase-scan window centre; 0: s_1 r^{1-alpha} / (2 pi)
    std::string out = "out";
    std::string cache;          // empty: none (SCLAB_CACHE also read by the CLI)
    int workers = 1;
};

// INI-style document with sections [experiment] [model] [sweep] [bank] [envelope]
// [perturbation] [run]. Unknown keys and bad values raise config errors naming the field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// "section.key=value" overrides applied after parsing
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void validate(const ExperimentConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Sweep helpers
std::vector<double> geometric_h(double h_max, double h_min, std::size_t count);
std::vector<double> inverse_uniform_h(double u_min, double u_max, std::size_t count);

struct PointRecord {
    nlohmann::json params;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
    std::vector<std::string> row;  // CSV cells when ok
    nlohmann::json extra;
};

struct RunResult {
    std::string dir;
    nlohmann::json manifest;
    std::string table;        // CSV bytes
    std::size_t failures = 0;
    std::size_t rows = 0;
};

// Executes the experiment and writes out/<id>/manifest.json, table.csv and extras.
RunResult run(const ExperimentConfig& cfg);

// Pipeline pieces shared by the CLI and the acceptance suite.
struct WeylPoint {
    double sharp = 0.0, weyl = 0.0, tauberian = 0.0;
    std::size_t entries = 0;
    int ell_max = 0;
    double T_star = 0.0;
};
WeylPoint weyl_point(const ModelParams& m, double r, double tau, const mollifier::CutoffBank& bank,
                     const radial::SolveOptions& solve = {}, radial::SpectrumCache* cache = nullptr);

struct BandPoint {
    double band = 0.0;
    double T = 0.0, T_prime = 0.0;
    std::size_t entries = 0;
};
// T = 0 and T' = 0 select C0 and T_* at radius r
BandPoint band_point(const ModelParams& m, double r, double tau, const mollifier::CutoffBank& bank, double T = 0.0,
                     double T_prime = 0.0, bool windowed = false, const radial::SolveOptions& solve = {},
                     radial::SpectrumCache* cache = nullptr);

// Deterministic CSV of a channel/summary for the eigensolver fixtures.
std::string summary_csv(const radial::SpectralSummary& s);

std::string code_version();

}  // namespace sclab::expcli
