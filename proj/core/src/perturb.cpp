#include "sclab/perturb.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/differentiation/autodiff.hpp>

#include "sclab/asymptotics.hpp"
#include "sclab/error.hpp"
#include "sclab/grid.hpp"

namespace sclab::perturb {

ModelParams perturbed_model(const ModelParams& base, const PerturbationSpec& spec) {
    ModelParams m = base;
    m.potential = PotentialKind::Perturbed;
    m.pert = spec;
    return m;
}

ChannelCoefficients perturbed_channel_coefficients(const PerturbationSpec& spec, const ModelParams& model, int ell,
                                                   double tau_max) {
    require(ell >= 0, ErrorCode::Domain, "channel index must be >= 0");
    const ModelParams pm = perturbed_model(model, spec);
    validate(pm);  // throws the non-ellipticity error
    const ModelParams res = resolve_grid(pm, tau_max);
    const RadialGrid g = make_grid(res);
    ChannelCoefficients out;
    out.ell = ell;
    const double h2 = res.h * res.h, nu = nu_ell(res.d, ell);
    for (std::size_t i = 1; i <= g.interior(); ++i) {
        const double r = g.r_node(double(i));
        const double c = metric(res, r);
        require(c > 0.0, ErrorCode::NonElliptic, "c(r) <= 0 at r = " + std::to_string(r));
        out.r.push_back(r);
        out.p.push_back(c);
        out.q.push_back(0.5 * h2 * c * nu / (r * r) + potential(res, r) +
                        0.25 * h2 * double(res.d - 1) * metric_slope(res, r) / r);
        out.w.push_back(1.0);
    }
    return out;
}

MatchedPair matched_pair(const ModelParams& base, const PerturbationSpec& spec, double tau_max) {
    ModelParams ref = base;
    ref.potential = PotentialKind::Reference;
    ref.grid.N = 0;
    ModelParams pert = perturbed_model(ref, spec);
    const ModelParams rr = resolve_grid(ref, tau_max);
    const ModelParams rp = resolve_grid(pert, tau_max);
    MatchedPair mp{rr, rp};
    const std::size_t N = std::max(rr.grid.N, rp.grid.N);
    mp.reference.grid = rr.grid;
    mp.reference.grid.N = N;
    mp.perturbed.grid = rr.grid;
    mp.perturbed.grid.N = N;
    mp.reference = resolve_grid(mp.reference, tau_max);
    mp.perturbed = resolve_grid(mp.perturbed, tau_max);
    check_matched(mp.reference, mp.perturbed);
    return mp;
}

void check_matched(const ModelParams& a, const ModelParams& b) {
    const bool same = a.alpha == b.alpha && a.d == b.d && a.h == b.h && a.L == b.L &&
                      inner_radius(a) == inner_radius(b) && a.grid.kind == b.grid.kind && a.grid.N == b.grid.N &&
                      a.grid.N > 0 && a.grid.knee == b.grid.knee && a.grid.sigma == b.grid.sigma;
    require(same, ErrorCode::GridMismatch,
            "paired operators must share N, r_inner, L and the grid map (N = " + std::to_string(a.grid.N) + " vs " +
                std::to_string(b.grid.N) + ")");
}

double weyl_perturbed(const ModelParams& m, const std::vector<double>& x, double tau) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2);
    const double c = metric(m, r);
    return asymptotics::weyl_diag(m.d, m.h, tau, potential(m, r), std::pow(c, m.d));
}

DifferenceResult difference_diag(const ModelParams& reference, const ModelParams& perturbed, const std::vector<double>& x,
                                 double tau, const mollifier::CutoffBank& bank, const DifferenceOptions& opt) {
    check_matched(reference, perturbed);
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2);
    const double T = opt.T > 0.0 ? opt.T : asymptotics::scaling_quantities(reference.alpha, r).T_star;
    const double Tmin = opt.T_prime > 0.0 ? std::min(T, opt.T_prime) : T;
    const double h = reference.h;
    const double tau_max = tau + mollifier::margin(bank, Tmin, h);
    // the resolved grids were fixed by the caller; refuse to re-resolve silently
    const auto sr = radial::spectral_summary(reference, x, tau_max, opt.solve, opt.cache);
    const auto sp = radial::spectral_summary(perturbed, x, tau_max, opt.solve, opt.cache);
    DifferenceResult d;
    d.e_ref = radial::sharp_count(sr, tau);
    d.e_pert = radial::sharp_count(sp, tau);
    d.e_diff = d.e_pert - d.e_ref;
    const double tr = mollifier::tauberian_diag(sr, tau, T, h, bank);
    const double tp = mollifier::tauberian_diag(sp, tau, T, h, bank);
    d.tauberian_diff = tp - tr;
    if (opt.T_prime > 0.0)
        d.band_diff = mollifier::band_difference(sp, tau, T, opt.T_prime, h, bank) -
                      mollifier::band_difference(sr, tau, T, opt.T_prime, h, bank);
    d.weyl_ref = weyl_perturbed(reference, x, tau);
    d.weyl_pert = weyl_perturbed(perturbed, x, tau);
    d.weyl_diff = d.weyl_pert - d.weyl_ref;
    return d;
}

NearOriginResult near_origin_sup(const ModelParams& base, const PerturbationSpec& spec, double tau,
                                 std::size_t n_probes, const radial::SolveOptions& solve,
                                 radial::SpectrumCache* cache) {
    require(n_probes >= 2, ErrorCode::Domain, "need at least two probes");
    NearOriginResult out;
    out.r_bar = std::pow(base.h, 1.0 / (1.0 - base.alpha));
    out.rbar_pow_d = std::pow(out.r_bar, -double(base.d));
    out.rbar_pow_beta_d = std::pow(out.r_bar, spec.beta - double(base.d));
    const double r_lo = std::max(10.0 * inner_radius(base), 1e-2 * out.r_bar);
    require(r_lo < out.r_bar, ErrorCode::Domain, "inner cutoff leaves no room below r_bar");
    for (std::size_t i = 0; i < n_probes; ++i)
        out.probes.push_back(r_lo * std::pow(out.r_bar / r_lo, double(i) / double(n_probes - 1)));
    const MatchedPair mp = matched_pair(base, spec, tau);
    auto run = [&](const ModelParams& m) {
        radial::Discretization disc(m);
        const auto sums = radial::spectral_summaries(disc, out.probes, tau, solve, cache);
        std::vector<double> e;
        for (const auto& s : sums) e.push_back(radial::sharp_count(s, tau));
        return e;
    };
    out.e_ref = run(mp.reference);
    out.e_pert = spec.is_zero() ? out.e_ref : run(mp.perturbed);
    for (std::size_t i = 0; i < n_probes; ++i) {
        out.sup_ee = std::max(out.sup_ee, std::fabs(out.e_pert[i]));
        out.sup_diff = std::max(out.sup_diff, std::fabs(out.e_pert[i] - out.e_ref[i]));
    }
    return out;
}

namespace {

constexpr int kMaxOrder = 6;

template <class T>
T ramp(const T& r) {
    using std::exp;
    const double x = static_cast<double>(r) - 1.0;
    if (x <= 0.0) return T(1.0);
    if (x >= 1.0) return T(0.0);
    const T y = r - 1.0;
    const T g = exp(-1.0 / y), k = exp(-1.0 / (1.0 - y));
    return k / (g + k);
}

double falling(double g, int m) {
    double v = 1.0;
    for (int j = 0; j < m; ++j) v *= g - j;
    return v;
}

// sup over the grid of |f^{(m)}| r^{m - base} / eps for f = a r^gamma psi(r)
std::vector<double> numeric_constants(double a, double gamma, double base, double R, double eps, int order,
                                      std::size_t grid) {
    using namespace boost::math::differentiation;
    std::vector<double> c(order + 1, 0.0);
    if (eps == 0.0 || a == 0.0) return c;
    for (std::size_t j = 1; j <= grid; ++j) {
        const double r = R * double(j) / double(grid);
        const auto x = make_fvar<double, kMaxOrder>(r);
        const auto f = a * pow(x, gamma) * ramp(x);
        for (int m = 0; m <= order; ++m)
            c[m] = std::max(c[m], std::fabs(f.derivative(m)) * std::pow(r, m - base) / eps);
    }
    return c;
}

}  // namespace

CSigmaReport c_sigma_check(const PerturbationSpec& spec, double alpha, double R, int order, std::size_t grid) {
    require(order >= 0 && order <= kMaxOrder, ErrorCode::Domain, "order must lie in [0, 6]");
    require(R > 0.0 && alpha > 0.0 && alpha < 1.0 && spec.beta > 0.0, ErrorCode::Domain, "bad inputs");
    CSigmaReport rep;
    rep.order = order;
    rep.R = R;
    const double amax = std::max(std::fabs(spec.a_pot), std::fabs(spec.a_met));
    rep.eps = amax * std::pow(R, spec.beta);
    const double gp = spec.beta - 2.0 * alpha, gm = spec.beta;
    for (int m = 0; m <= 3; ++m) {
        rep.pot_symbolic.push_back(amax > 0 ? std::fabs(spec.a_pot) * std::fabs(falling(gp, m)) / amax : 0.0);
        rep.met_symbolic.push_back(amax > 0 ? std::fabs(spec.a_met) * std::fabs(falling(gm, m)) / amax : 0.0);
    }
    rep.pot_numeric = numeric_constants(-spec.a_pot, gp, -2.0 * alpha, R, rep.eps, order, grid);
    rep.met_numeric = numeric_constants(spec.a_met, gm, 0.0, R, rep.eps, order, grid);
    // closed form holds exactly where psi = 1
    const double R1 = std::min(R, 1.0);
    const double e1 = amax * std::pow(R1, spec.beta);
    const auto p1 = numeric_constants(-spec.a_pot, gp, -2.0 * alpha, R1, e1, std::min(order, 3), grid);
    const auto m1 = numeric_constants(spec.a_met, gm, 0.0, R1, e1, std::min(order, 3), grid);
    for (int m = 0; m <= std::min(order, 3); ++m) {
        auto rel = [](double a, double b) { return std::fabs(a - b) / std::max(1e-300, std::max(std::fabs(a), std::fabs(b))); };
        if (rep.pot_symbolic[m] > 0) rep.max_mismatch = std::max(rep.max_mismatch, rel(p1[m], rep.pot_symbolic[m]));
        if (rep.met_symbolic[m] > 0) rep.max_mismatch = std::max(rep.max_mismatch, rel(m1[m], rep.met_symbolic[m]));
    }
    return rep;
}

nlohmann::json to_json(const DifferenceResult& d) {
    return {{"e_ref", d.e_ref},         {"e_pert", d.e_pert},       {"e_diff", d.e_diff},
            {"tauberian_diff", d.tauberian_diff}, {"band_diff", d.band_diff}, {"weyl_ref", d.weyl_ref},
            {"weyl_pert", d.weyl_pert}, {"weyl_diff", d.weyl_diff}};
}

}  // namespace sclab::perturb
