#include "sclab/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

#include "sclab/classical.hpp"
#include "sclab/error.hpp"
#include "sclab/model.hpp"

namespace sclab::asymptotics {

using std::numbers::pi;

double weyl_diag(int d, double h, double tau, double V_at, double metric_det) {
    require(d >= 1 && h > 0.0 && metric_det > 0.0, ErrorCode::Domain, "need d >= 1, h > 0, det g > 0");
    const double p2 = 2.0 * (tau - V_at);
    if (p2 <= 0.0) return 0.0;  // classically forbidden
    return std::pow(2.0 * pi * h, -d) * ball_volume(d) / std::sqrt(metric_det) * std::pow(p2, 0.5 * d);
}

double weyl_diag_reference(double alpha, int d, double h, const std::vector<double>& x, double tau) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    require(r2 > 0.0, ErrorCode::Domain, "probe at the origin");
    return weyl_diag(d, h, tau, -std::pow(r2, -alpha));
}

BranchTest even_inverse_test(double alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::Domain, "alpha must lie in (0,1)");
    BranchTest bt;
    // continued fraction convergents of alpha
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = alpha;
    for (int it = 0; it < 40; ++it) {
        const double a = std::floor(x);
        const long ai = long(a);
        const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > 1000000) break;
        p0 = p1, q0 = q1, p1 = p2, q1 = q2;
        if (std::fabs(alpha - double(p1) / double(q1)) <= 4.0 * std::numeric_limits<double>::epsilon() * alpha) {
            bt.exact = true;
            bt.p = p1;
            bt.q = q1;
            break;
        }
        const double frac = x - a;
        if (frac == 0.0) break;
        x = 1.0 / frac;
    }
    if (bt.exact) {
        // (1 - p/q)^{-1} = q / (q - p)
        const long den = bt.q - bt.p;
        bt.even = den > 0 && bt.q % den == 0 && (bt.q / den) % 2 == 0;
    } else {
        const double inv = 1.0 / (1.0 - alpha);
        const double k = std::round(0.5 * inv);
        bt.even = k >= 1.0 && std::fabs(inv - 2.0 * k) <= 1e-12 * inv;
    }
    return bt;
}

ScaleSet scale_set(double h, double alpha, double r, std::optional<double> beta, double delta) {
    require(h > 0.0 && h <= 1.0, ErrorCode::Domain, "h must lie in (0,1]");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::Domain, "alpha must lie in (0,1)");
    require(r > 0.0, ErrorCode::Domain, "r must be positive");
    require(delta > 0.0 && delta < 1.0 / 3.0, ErrorCode::Domain, "delta must lie in (0, 1/3)");
    ScaleSet s;
    s.h = h;
    s.alpha = alpha;
    s.r = r;
    s.beta = beta;
    s.delta = delta;
    s.hbar = h * std::pow(r, alpha - 1.0);
    s.r_bar = std::pow(h, 1.0 / (1.0 - alpha));
    s.r_star = std::pow(h, 1.0 / (1.0 - alpha) - delta);
    if (beta) {
        require(*beta > 0.0, ErrorCode::Domain, "beta must be positive");
        s.r_upper_star = std::pow(h, 1.0 / (1.0 - alpha + *beta));
    }
    const auto bt = even_inverse_test(alpha);
    s.even_branch = bt.even;
    s.branch_exact = bt.exact;
    if (!bt.exact) s.warning = "alpha is not a short rational; branch decided with tolerance 1e-12";
    s.rho_exponent = (bt.even ? 1.0 / 3.0 : 0.5) - delta;
    s.rho_bar = std::pow(s.hbar, s.rho_exponent);
    return s;
}

const std::vector<std::string>& envelope_ids() {
    static const std::vector<std::string> ids = {"E1.8",  "E1.13", "E1.14", "E1.15", "E1.17",
                                                 "E1.18", "E1.19", "E2.61", "E2.69", "E3.13",
                                                 "E3.25", "E3.26", "E3.27", "E3.32", "E3.33"};
    return ids;
}

EstimateEnvelope make_envelope(const std::string& id, int d, double alpha, double beta, double s, bool skip_rule) {
    require(d >= 2, ErrorCode::Domain, "dimension must be at least 2");
    EstimateEnvelope e;
    e.id = id;
    e.d = d;
    e.alpha = alpha;
    e.beta = beta;
    e.s = s;
    e.skip_rule = skip_rule;
    const double D = d, a = alpha, b = beta;
    auto T = [&](double he, double re, double rho = 0, double eps = 0, double rb = 0, bool skip = false) {
        EnvelopeTerm t;
        t.slot = "C" + std::to_string(e.terms.size() + 1);
        t.h_exp = he, t.r_exp = re, t.rho_pow = rho, t.eps_pow = eps, t.rbar_pow = rb, t.skippable = skip;
        e.terms.push_back(t);
    };
    if (id == "E1.8" || id == "E2.61") {
        T(1.5 - D, 0, 0, 0, 0, true);
        T(1 - D, 0, D - 1);
    } else if (id == "E1.13") {
        T(1 - D, 2 * a - a * D);
    } else if (id == "E1.14") {
        T(1 - D, 2 * a - a * D + b);
    } else if (id == "E1.15") {
        T(1.5 - D, -1.5 * (1 - a) - a * D, 0, 0, 0, true);
        T(1 - D, -1 + a - a * D, D - 1);
        T(1 - D, -1 + a - a * D + b * D - b);
    } else if (id == "E1.17") {
        T(0.5 - D, -0.5 * (1 - a) - a * D + b, 0, 0, 0, true);
        T(-D, b - a * D, D - 1);
        T(-D, -a * D + b * D);
    } else if (id == "E1.18") {
        T(2 - D, -2 + 2 * a - a * D);
        T(1 - D, -a * D + a - 1 + b);
    } else if (id == "E1.19") {
        T(2 - D, -2 + 2 * a + b - a * D);
    } else if (id == "E2.69") {
        T(1 - D, -(D - 2) * a);
        T(1.5 - D, -1.5 - a * (D - 1.5));
        T(1 - D, -1 - a * (D - 1), D - 1);
    } else if (id == "E3.13") {
        T(1.5 - D, 0, 0, 0, 0, true);
        T(1 - D, 0, D - 1);
        T(1 - D, 0, 0, D - 1);
    } else if (id == "E3.25") {
        T(2 - D, 0, 0, 1);
        T(0.5 - D, 0, 0, 1, 0, true);  // here the second term is the skippable one
        T(-D, 0, D - 1, 1);
        T(s, 0);
    } else if (id == "E3.26") {
        T(0, 0, 0, 0, -D);
    } else if (id == "E3.27") {
        T(0, 0, 0, 0, b - D);
    } else if (id == "E3.32") {
        T(-D + s, -a * D - (1 - a) * s);
    } else if (id == "E3.33") {
        T(-D + s, -a * D - (1 - a) * s + b);
    } else {
        fail(ErrorCode::Config, "unknown envelope id '" + id + "'");
    }
    return e;
}

double envelope_term_value(const EnvelopeTerm& t, const ScaleSet& sc, std::optional<double> eps) {
    double v = std::pow(sc.h, t.h_exp) * std::pow(sc.r, t.r_exp);
    if (t.rho_pow != 0.0) v *= std::pow(sc.rho_bar, t.rho_pow);
    if (t.rbar_pow != 0.0) v *= std::pow(sc.r_bar, t.rbar_pow);
    if (t.eps_pow != 0.0) {
        require(eps.has_value(), ErrorCode::MissingSlot, "envelope needs eps");
        v *= std::pow(*eps, t.eps_pow);
    }
    return v;
}

double envelope_value(const EstimateEnvelope& env, const ScaleSet& sc, std::optional<double> eps,
                      const std::map<std::string, double>& constants) {
    double acc = 0.0;
    for (const auto& t : env.terms) {
        if (t.skippable && env.skips_active()) continue;
        double C;
        if (auto it = constants.find(t.slot); it != constants.end())
            C = it->second;
        else if (auto all = constants.find("C"); all != constants.end())
            C = all->second;
        else
            fail(ErrorCode::MissingSlot, env.id + ": constant " + t.slot + " not supplied");
        acc += C * envelope_term_value(t, sc, eps);
    }
    return acc;
}

nlohmann::json to_json(const EstimateEnvelope& env) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : env.terms)
        terms.push_back({{"slot", t.slot},
                         {"h_exp", t.h_exp},
                         {"r_exp", t.r_exp},
                         {"rho_pow", t.rho_pow},
                         {"eps_pow", t.eps_pow},
                         {"rbar_pow", t.rbar_pow},
                         {"skippable", t.skippable}});
    return {{"id", env.id}, {"d", env.d},          {"alpha", env.alpha},
            {"beta", env.beta}, {"s", env.s}, {"skips_active", env.skips_active()}, {"terms", terms}};
}

bool nonincreasing_across_halvings(const std::vector<std::pair<double, double>>& points, double slack) {
    bool paired = false, ok = true;
    for (const auto& [h, v] : points)
        for (const auto& [h2, v2] : points)
            if (std::fabs(h2 - 0.5 * h) <= 0.05 * 0.5 * h) {
                paired = true;
                if (v2 > (1.0 + slack) * v) ok = false;
            }
    if (paired) return ok;
    for (std::size_t j = 1; j < points.size(); ++j)
        if (points[j].second > (1.0 + slack) * points[j - 1].second) return false;
    return true;
}

Fit exponent_fit(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 4, ErrorCode::Domain, "need at least 4 points");
    const std::size_t n = points.size();
    std::vector<double> X(n), Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(points[i].first > 0.0, ErrorCode::Domain, "h must be positive");
        require(points[i].second > 0.0, ErrorCode::NonPositiveValue,
                "value at h = " + std::to_string(points[i].first) + " is not positive");
        X[i] = std::log(points[i].first);
        Y[i] = std::log(points[i].second);
    }
    const double mx = std::accumulate(X.begin(), X.end(), 0.0) / double(n);
    const double my = std::accumulate(Y.begin(), Y.end(), 0.0) / double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) sxx += (X[i] - mx) * (X[i] - mx), sxy += (X[i] - mx) * (Y[i] - my);
    require(sxx > 0.0, ErrorCode::Domain, "all h values coincide");
    Fit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = Y[i] - f.intercept - f.slope * X[i];
        sse += e * e;
    }
    f.stderr_slope = std::sqrt(sse / double(n - 2) / sxx);
    return f;
}

namespace {

struct Series {
    std::vector<double> u, y;
    double du = 0.0;
};

Series prepare(const std::vector<std::pair<double, double>>& points, int d) {
    require(points.size() >= 64, ErrorCode::Domain, "phase extraction needs at least 64 samples");
    std::vector<std::pair<double, double>> uv;
    for (auto [h, v] : points) {
        require(h > 0.0, ErrorCode::Domain, "h must be positive");
        uv.push_back({1.0 / h, v * std::pow(h, d - 1.5)});
    }
    std::sort(uv.begin(), uv.end());
    Series s;
    const std::size_t n = uv.size();
    s.du = (uv.back().first - uv.front().first) / double(n - 1);
    require(s.du > 0.0, ErrorCode::Domain, "1/h samples coincide");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::fabs(uv[i].first - uv.front().first - s.du * double(i)) <= 1e-6 * s.du, ErrorCode::Domain,
                "1/h samples are not uniformly spaced");
        s.u.push_back(uv[i].first);
        s.y.push_back(uv[i].second);
    }
    // remove the least-squares quadratic in u: power-law trends are not tones
    const double uc = 0.5 * (s.u.front() + s.u.back()), us = 0.5 * (s.u.back() - s.u.front());
    double A[3][4] = {};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (s.u[i] - uc) / us, b[3] = {1.0, x, x * x};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) A[r][c] += b[r] * b[c];
            A[r][3] += b[r] * s.y[i];
        }
    }
    for (int k = 0; k < 3; ++k)
        for (int r = k + 1; r < 3; ++r) {
            const double f = A[r][k] / A[k][k];
            for (int c = k; c < 4; ++c) A[r][c] -= f * A[k][c];
        }
    double coef[3];
    for (int r = 2; r >= 0; --r) {
        double v = A[r][3];
        for (int c = r + 1; c < 3; ++c) v -= A[r][c] * coef[c];
        coef[r] = v / A[r][r];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (s.u[i] - uc) / us;
        s.y[i] -= coef[0] + coef[1] * x + coef[2] * x * x;
        // Hann taper keeps trend leakage out of the tone bins
        s.y[i] *= 0.5 - 0.5 * std::cos(2.0 * pi * double(i) / double(n - 1));
    }
    return s;
}

double power(const Series& s, double f) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < s.u.size(); ++i) acc += s.y[i] * std::polar(1.0, -2.0 * pi * f * s.u[i]);
    return std::norm(acc) / double(s.u.size());
}

}  // namespace

std::pair<double, double> alias_window(double f, const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 2, ErrorCode::Domain, "need samples");
    double umin = HUGE_VAL, umax = -HUGE_VAL;
    for (auto [h, v] : points) umin = std::min(umin, 1.0 / h), umax = std::max(umax, 1.0 / h);
    const double half = 0.5 * double(points.size() - 1) / (umax - umin);
    const double z = std::floor(f / half);
    return {z * half, (z + 1.0) * half};
}

PhaseResult phase_extract(const std::vector<std::pair<double, double>>& points, std::pair<double, double> window,
                          int d, double snr_threshold, double trend_guard) {
    require(window.first >= 0.0 && window.second > window.first, ErrorCode::Domain, "bad frequency window");
    const Series s = prepare(points, d);
    const std::size_t n = s.u.size();
    PhaseResult res;
    res.sample_rate = 1.0 / s.du;
    const double span = s.du * double(n - 1);
    const std::size_t grid = std::max<std::size_t>(64, std::size_t(std::ceil((window.second - window.first) * span * 16)));
    const double df = (window.second - window.first) / double(grid);
    // images of frequencies below trend_guard cycles per record are indistinguishable from a trend
    const double rate = 1.0 / s.du, guard = trend_guard / span;
    auto near_trend = [&](double f) {
        const double k = std::round(f / rate);
        return std::fabs(f - k * rate) < guard;
    };
    std::size_t best = 0;
    for (std::size_t i = 0; i <= grid; ++i) {
        const double f = window.first + df * double(i);
        if (near_trend(f)) continue;
        const double p = power(s, f);
        res.spectrum.push_back({f, p});
        if (p > res.spectrum[best].second) best = res.spectrum.size() - 1;
    }
    require(!res.spectrum.empty(), ErrorCode::Domain, "window lies entirely on trend images");
    // golden-section polish around the best grid point
    double a = std::max(window.first, res.spectrum[best].first - df);
    double b = std::min(window.second, res.spectrum[best].first + df);
    if (near_trend(a) || near_trend(b)) a = b = res.spectrum[best].first;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), e = a + g * (b - a);
    double pc = power(s, c), pe = power(s, e);
    for (int it = 0; it < 60; ++it) {
        if (pc > pe) {
            b = e, e = c, pe = pc;
            c = b - g * (b - a), pc = power(s, c);
        } else {
            a = c, c = e, pc = pe;
            e = a + g * (b - a), pe = power(s, e);
        }
    }
    res.f_peak = 0.5 * (a + b);
    res.power = power(s, res.f_peak);
    if (res.power < res.spectrum[best].second) res.f_peak = res.spectrum[best].first, res.power = res.spectrum[best].second;
    // reference level: mean power over the Fourier bins of the full band
    double ref = 0.0;
    const std::size_t nb = n / 2;
    for (std::size_t k = 1; k <= nb; ++k) ref += power(s, double(k) / (double(n) * s.du));
    ref /= double(nb);
    res.snr = ref > 0.0 ? res.power / ref : 0.0;
    res.inconclusive = !(res.snr >= snr_threshold);
    return res;
}

SecondTermCheck weyl_second_term_check(const std::vector<SecondTermSample>& sweep, int d) {
    require(sweep.size() >= 5, ErrorCode::Domain, "need at least 5 h values");
    SecondTermCheck out;
    out.expected_min = (2.0 - d) - 0.25;
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : sweep) {
        const double diff = std::fabs(s.tauberian - s.weyl);
        if (!(diff > 1e-13 * std::max(1.0, std::fabs(s.weyl)))) {
            out.degenerate = true;
            return out;
        }
        pts.push_back({s.h, diff});
    }
    out.fit = exponent_fit(pts);
    out.consistent = out.fit.slope >= out.expected_min;
    return out;
}

ScalingQuantities scaling_quantities(double alpha, double r) {
    require(r > 0.0, ErrorCode::Domain, "r must be positive");
    ScalingQuantities q;
    q.t0 = classical::radial_time(alpha);
    const double sc = std::pow(r, 1.0 + alpha);
    const auto& cat = classical::loop_catalog(alpha);
    double tmax = q.t0, tmin = HUGE_VAL;
    for (const auto& e : cat.entries) tmax = std::max(tmax, e.t_k), tmin = std::min(tmin, e.t_k);
    q.T_star = 0.2 * q.t0 * sc;
    q.C0 = 2.0 * tmax * sc;
    q.min_tk = tmin * sc;
    q.T_star_below_loops = q.T_star < q.min_tk;
    return q;
}

}  // namespace sclab::asymptotics
