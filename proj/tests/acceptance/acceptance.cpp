// Acceptance suite: one pass/fail line per criterion.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sclab/asymptotics.hpp"
#include "sclab/classical.hpp"
#include "sclab/expcli.hpp"
#include "sclab/grid.hpp"
#include "sclab/io.hpp"
#include "sclab/radial_spectrum.hpp"
#include "sclab/tridiag.hpp"

using namespace sclab;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

// pinned tolerances
constexpr double kDrift = 1e-9;
constexpr double kResidual = 1e-7;
constexpr double kLoopTime = 1e-6;
constexpr double kPericenter = 1e-8;
constexpr double kLevels = 1e-3;
constexpr double kChannelCount = 2.0;
constexpr double kSlopeMin = 0.7;
constexpr double kMonotoneSlack = 1.2;
constexpr double kRatio = 1.5;
constexpr double kPhase = 0.05;
constexpr double kLinearity = 0.2;
constexpr double kIdentity = 1e-12;

const std::vector<double> kSweepH = {0.2, 0.14, 0.1, 0.07, 0.05};

struct Context {
    std::string out;
    std::string cache;
    int workers = 1;
};

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;
    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string f(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

expcli::ExperimentConfig base_config(const Context& ctx, const std::string& kind, const std::string& id) {
    expcli::ExperimentConfig c;
    c.kind = kind;
    c.id = id;
    c.out = ctx.out;
    c.cache = ctx.cache;
    c.workers = ctx.workers;
    c.model.d = 2;
    c.model.L = 3.0;
    c.model.grid.kind = GridKind::Adapted;
    return c;
}

// ---------------------------------------------------------------- 1

const std::vector<double> kClassicalAlphas = {0.25, 0.5, 0.6, 0.75, 0.8, 0.875};

Outcome criterion1(const Context&) {
    Outcome o;
    // 0 for alpha <= 1/2, 1 for 1/2 < alpha <= 3/4, then k < 1/omega
    const std::map<double, int> table = {{0.25, 0}, {0.5, 0}, {0.6, 1}, {0.75, 1}, {0.8, 2}, {0.875, 3}};
    for (double a : kClassicalAlphas) {
        const auto g = classical::geometry_check(a, 1e-12);
        const std::string tag = "alpha=" + f(a) + ": ";
        o.check(g.count.n == table.at(a), tag + "loop_count " + std::to_string(g.count.n));
        o.check(g.intersections == std::size_t(g.count.n),
                tag + "integrated intersections " + std::to_string(g.intersections));
        o.check(g.H_drift <= kDrift && g.M_drift <= kDrift, tag + "drift H " + f(g.H_drift) + " M " + f(g.M_drift));
        o.check(g.residual <= kResidual, tag + "closed-form residual " + f(g.residual));
        o.check(g.t_rel_err <= kLoopTime, tag + "t_k quadrature vs flow " + f(g.t_rel_err));
        o.check(std::fabs(g.pericenter_time - g.pericenter_target) <= kPericenter,
                tag + "radial drop pericenter " + f(g.pericenter_time) + " vs 1/(1+alpha) " + f(g.pericenter_target));
    }
    return o;
}

// ---------------------------------------------------------------- 2

std::vector<double> lowest_levels(const ModelParams& m, int ell, double hi) {
    const radial::Discretization disc(resolve_grid(m, hi));
    return tridiag::eigen_window(disc.channel_matrix(ell), -1e4, hi, {}).values;
}

Outcome criterion2(const Context&) {
    Outcome o;
    {
        ModelParams m;
        m.d = 3;
        m.h = 0.1;
        m.L = 10.0;
        m.potential = PotentialKind::Harmonic;
        const auto v = lowest_levels(m, 0, 1.0);
        double worst = 0.0;
        for (int j = 0; j <= 2; ++j)
            worst = std::max(worst, std::fabs(v.at(std::size_t(j)) / (m.h * (2 * j + 1.5)) - 1.0));
        o.check(worst <= kLevels, "oscillator j<=2 max rel err " + f(worst));
    }
    {
        ModelParams m;
        m.d = 3;
        m.h = 0.1;
        m.L = 3.0;
        m.potential = PotentialKind::Free;
        const double len = m.L - inner_radius(m);
        auto box = [&](int n) { return 0.5 * m.h * m.h * pi * pi * n * n / (len * len); };
        const auto v = lowest_levels(m, 0, box(11));
        double worst = 0.0;
        for (int n = 1; n <= 10; ++n) worst = std::max(worst, std::fabs(v.at(std::size_t(n - 1)) / box(n) - 1.0));
        o.check(worst <= kLevels, "Dirichlet box n<=10 max rel err " + f(worst));
    }
    {
        ModelParams m;
        m.alpha = 0.5;
        m.d = 2;
        m.h = 0.1;
        const double tau = 0.0;
        const ModelParams res = resolve_grid(m, tau);
        const radial::Discretization disc(res);
        const double a = std::log(inner_radius(res)), b = std::log(res.L);
        const int K = 100000;
        double worst = 0.0;
        int channels = 0;
        for (int ell = 0; ell < 10000; ++ell) {
            const double count = double(tridiag::count_below(disc.channel_matrix(ell), tau));
            double acc = 0.0;
            for (int i = 0; i < K; ++i) {
                const double r = std::exp(a + (b - a) * (i + 0.5) / K);
                const double W = radial::effective_channel_potential(res, ell, r);
                if (W < tau) acc += std::sqrt(2.0 * (tau - W)) * r;
            }
            const double weyl = acc * (b - a) / K / (pi * m.h);
            worst = std::max(worst, std::fabs(count - weyl));
            ++channels;
            if (count == 0.0 && weyl == 0.0) break;
        }
        o.check(worst <= kChannelCount,
                "reference per-channel counts vs 1D Weyl over " + std::to_string(channels) + " channels, max |diff| " +
                    f(worst));
    }
    return o;
}

// ---------------------------------------------------------------- 3, 4

expcli::RunResult weyl_sweep(const Context& ctx) {
    auto c = base_config(ctx, "weyl-sweep", "c3-weyl-sweep");
    c.alpha = {0.4, 0.5};
    c.h = kSweepH;
    c.tau = 0.0;
    return expcli::run(c);
}

Outcome criterion3(const Context& ctx) {
    Outcome o;
    const auto r = weyl_sweep(ctx);
    o.check(r.failures == 0, "sweep points failed: " + std::to_string(r.failures));
    for (const auto& g : r.manifest["fits"]) {
        const std::string tag = "alpha=" + f(g["group"]["alpha"].get<double>()) + ": ";
        if (!g["normalized_error"].contains("slope")) {
            o.check(false, tag + "no fit");
            continue;
        }
        const double slope = g["normalized_error"]["slope"];
        o.check(slope >= kSlopeMin, tag + "slope of |sharp - weyl| h^2 = " + f(slope));
        o.check(g["nonincreasing_20pct"].get<bool>(), tag + "normalized error non-increasing across h-halvings within 20%");
    }
    return o;
}

Outcome criterion4(const Context& ctx) {
    Outcome o;
    const auto r = weyl_sweep(ctx);
    o.check(r.failures == 0, "sweep points failed: " + std::to_string(r.failures));
    for (const auto& g : r.manifest["fits"]) {
        const std::string tag = "alpha=" + f(g["group"]["alpha"].get<double>()) + ": ";
        const double m = g["tauberian_ratio_max"];
        o.check(m <= kRatio, tag + "max |tauberian(T_*) - weyl| h^{d-2} / value at h=0.2 = " + f(m));
    }
    return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion5(const Context& ctx) {
    Outcome o;
    auto c = base_config(ctx, "band-sweep", "c5-band-sweep");
    c.alpha = {0.25, 0.75};
    c.h = kSweepH;
    c.windowed = true;
    c.envelopes = {"E1.8"};
    const auto r = expcli::run(c);
    o.check(r.failures == 0, "sweep points failed: " + std::to_string(r.failures));
    std::map<double, double> worst;
    // ratio column: observable/envelope normalized at h = 0.2 per alpha
    std::istringstream in(r.table);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<double> v;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
        worst[v[2]] = std::max(worst[v[2]], v[7]);
    }
    for (double a : c.alpha) {
        const bool skip = asymptotics::make_envelope("E1.8", 2, a).skips_active();
        o.check(worst.count(a) && worst[a] <= kRatio,
                "alpha=" + f(a) + " (" + (skip ? "first term skipped" : "two-term envelope") +
                    "): max normalized ratio " + f(worst[a]));
    }
    return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion6(const Context& ctx) {
    Outcome o;
    const double s1 = classical::loop_catalog(0.75).at(1).s_k;
    const double f_pred = s1 / (2.0 * pi);
    auto run = [&](double alpha, const std::string& id) {
        auto c = base_config(ctx, "phase-scan", id);
        c.alpha = {alpha};
        c.h = expcli::inverse_uniform_h(40.0, 200.0, 64);
        c.f_center = f_pred;
        return expcli::run(c);
    };
    const auto loop = run(0.75, "c6-phase-0.75");
    const auto& p = loop.manifest["fits"];
    o.check(loop.failures == 0, "alpha=0.75 points failed: " + std::to_string(loop.failures));
    if (p.contains("f_peak")) {
        const double fp = p["f_peak"], rel = std::fabs(fp - f_pred) / f_pred;
        o.check(rel <= kPhase && !p["inconclusive"].get<bool>(),
                "alpha=0.75 peak " + f(fp) + " vs s_1/(2 pi) = " + f(f_pred) + " (rel " + f(rel) + ", snr " +
                    f(p["snr"].get<double>()) + ", window [" + f(p["window"][0].get<double>()) + ", " +
                    f(p["window"][1].get<double>()) + "])");
    } else {
        o.check(false, "alpha=0.75 phase extraction: " + p.value("error", std::string("missing")));
    }
    const auto ctrl = run(0.25, "c6-phase-0.25");
    const auto& q = ctrl.manifest["fits"];
    o.check(ctrl.failures == 0, "alpha=0.25 points failed: " + std::to_string(ctrl.failures));
    if (q.contains("inconclusive")) {
        o.check(q["inconclusive"].get<bool>(), "alpha=0.25 control inconclusive (snr " + f(q["snr"].get<double>()) +
                                                    ", peak " + f(q["f_peak"].get<double>()) + ")");
    } else {
        o.check(false, "alpha=0.25 phase extraction: " + q.value("error", std::string("missing")));
    }
    return o;
}

// ---------------------------------------------------------------- 7

Outcome criterion7(const Context& ctx) {
    Outcome o;
    auto c = base_config(ctx, "near-origin", "c7-near-origin");
    c.model.alpha = 0.5;
    c.h = {0.15, 0.1, 0.07};
    c.pert.beta = 1.0;
    c.pert.a_pot = 0.05;
    c.tau = 0.0;
    const auto r = expcli::run(c);
    o.check(r.failures == 0, "points failed: " + std::to_string(r.failures));
    const auto& fit = r.manifest["fits"];
    o.check(fit["ratio_ee_max"].get<double>() <= kRatio,
            "sup e_h r_bar^2 / coarsest-h value, max " + f(fit["ratio_ee_max"].get<double>()));
    o.check(fit["ratio_diff_max"].get<double>() <= kRatio,
            "sup_diff r_bar^{2-beta} / coarsest-h value, max " + f(fit["ratio_diff_max"].get<double>()));
    return o;
}

// ---------------------------------------------------------------- 8

Outcome criterion8(const Context& ctx) {
    Outcome o;
    auto c = base_config(ctx, "perturb-sweep", "c8-perturb-sweep");
    c.model.alpha = 0.5;
    c.h = {0.05};
    c.pert.beta = 1.0;
    c.a_pot = {0.01, 0.02, 0.04, 0.08};
    c.tau = 0.0;
    const auto r = expcli::run(c);
    o.check(r.failures == 0, "points failed: " + std::to_string(r.failures));
    for (const auto& g : r.manifest["fits"]) {
        if (!g["amplitude_fit"].contains("slope")) {
            o.check(false, "no fit: " + g["amplitude_fit"].dump());
            continue;
        }
        const double s = g["amplitude_fit"]["slope"];
        o.check(std::fabs(s - 1.0) <= kLinearity, "slope of |tauberian_diff - weyl_diff| vs a_pot = " + f(s));
    }
    return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion9(const Context&) {
    Outcome o;
    double worst_hbar = 0.0, worst_weyl = 0.0;
    for (double a : {0.25, 0.5, 0.6, 0.75})
        for (double h : {0.2, 0.05, 0.01}) {
            const auto s = asymptotics::scale_set(h, a, 1.0);
            worst_hbar = std::max(worst_hbar, std::fabs(asymptotics::scale_set(h, a, s.r_bar).hbar - 1.0));
            for (int d : {2, 3})
                for (double r : {0.3, 1.7}) {
                    std::vector<double> x(std::size_t(d), 0.0), y(std::size_t(d), 0.0);
                    x[0] = r;
                    y[0] = 1.0;
                    const double hb = h * std::pow(r, a - 1.0);
                    const double lhs = asymptotics::weyl_diag_reference(a, d, h, x, 0.0);
                    const double rhs = std::pow(r, -double(d)) * asymptotics::weyl_diag_reference(a, d, hb, y, 0.0);
                    worst_weyl = std::max(worst_weyl, std::fabs(lhs - rhs) / lhs);
                }
        }
    o.check(worst_hbar <= kIdentity, "hbar(r_bar) = 1, max err " + f(worst_hbar));
    o.check(worst_weyl <= kIdentity, "weyl_diag(h, r) = r^{-d} weyl_diag(hbar, 1), max rel err " + f(worst_weyl));
    for (double a : {0.5, 0.75}) {
        const auto s = asymptotics::scale_set(0.1, a, 1.0);
        const auto t = asymptotics::even_inverse_test(a);
        const bool even = std::fmod(1.0 / (1.0 - a), 2.0) == 0.0;
        o.check(s.even_branch == t.even && t.even == even && t.exact &&
                    std::fabs(s.rho_exponent - (1.0 / 3.0 - s.delta)) <= kIdentity,
                "alpha=" + f(a) + ": (1-alpha)^{-1} = " + f(1.0 / (1.0 - a)) + " in 2Z, rho_bar exponent " +
                    f(s.rho_exponent));
    }
    return o;
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> csv_files(const std::string& dir) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") m[e.path().filename().string()] = io::read_file(e.path().string());
    return m;
}

Outcome criterion10(const Context& ctx) {
    Outcome o;
    auto runs = [&](const std::string& tag) {
        const std::string root = (fs::path(ctx.out) / ("c10-" + tag)).string();
        fs::remove_all(root);
        std::vector<std::map<std::string, std::string>> files;
        auto cl = base_config(ctx, "classical", "classical");
        cl.cache.clear();
        cl.out = root;
        cl.alpha = kClassicalAlphas;
        files.push_back(csv_files(expcli::run(cl).dir));
        auto osc = base_config(ctx, "spectrum", "oscillator");
        osc.cache.clear();
        osc.out = root;
        osc.model.d = 3;
        osc.model.L = 10.0;
        osc.model.grid.kind = GridKind::LogUniform;
        osc.model.potential = PotentialKind::Harmonic;
        osc.h = {0.1};
        osc.tau = 1.0;
        files.push_back(csv_files(expcli::run(osc).dir));
        auto ref = base_config(ctx, "spectrum", "reference");
        ref.cache.clear();
        ref.out = root;
        ref.model.alpha = 0.5;
        ref.model.grid.kind = GridKind::LogUniform;
        ref.h = {0.1};
        ref.tau = 0.0;
        files.push_back(csv_files(expcli::run(ref).dir));
        return files;
    };
    const auto a = runs("a"), b = runs("b");
    std::size_t n = 0, same = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (const auto& [name, content] : a[i]) {
            ++n;
            const auto it = b[i].find(name);
            if (it != b[i].end() && it->second == content) ++same;
        }
    o.check(n > 0 && same == n, std::to_string(same) + "/" + std::to_string(n) + " CSV files byte-identical");
    return o;
}

const std::map<int, std::pair<std::string, std::function<Outcome(const Context&)>>>& criteria() {
    static const std::map<int, std::pair<std::string, std::function<Outcome(const Context&)>>> c = {
        {1, {"classical geometry suite", criterion1}},
        {2, {"eigensolver sanity", criterion2}},
        {3, {"Weyl convergence", criterion3}},
        {4, {"Tauberian leading term", criterion4}},
        {5, {"band-difference bound", criterion5}},
        {6, {"loop-phase check", criterion6}},
        {7, {"near-origin zone", criterion7}},
        {8, {"perturbation linearity", criterion8}},
        {9, {"scaling identities", criterion9}},
        {10, {"determinism", criterion10}},
    };
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> which;
    Context ctx;
    ctx.out = (fs::temp_directory_path() / "sclab-acceptance").string();
    app.add_option("--criterion,-c", which, "criteria to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--out", ctx.out, "output root");
    app.add_option("--cache", ctx.cache, "spectrum cache directory for the sweeps");
    app.add_option("--workers", ctx.workers, "worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    if (which.empty())
        for (const auto& [k, v] : criteria()) which.push_back(k);
    int failed = 0;
    for (int k : which) {
        const auto& [name, fn] = criteria().at(k);
        Outcome o;
        try {
            o = fn(ctx);
        } catch (const std::exception& e) {
            o.check(false, std::string("error: ") + e.what());
        }
        for (const auto& n : o.notes) std::printf("  [%d] %s\n", k, n.c_str());
        std::printf("criterion %d %s: %s\n", k, o.pass ? "PASS" : "FAIL", name.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
