#include "sclab/classical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <shared_mutex>
#include <sstream>

#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "sclab/error.hpp"
#include "sclab/io.hpp"

namespace sclab::classical {

namespace odeint = boost::numeric::odeint;
using std::numbers::pi;

namespace {

void check_alpha(double alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::Domain, "alpha must lie in (0,1)");
}

double wrap_pi(double a) {
    while (a > pi) a -= 2.0 * pi;
    while (a <= -pi) a += 2.0 * pi;
    return a;
}

// root of f on [a, b] with f(a) < 0 <= f(b)
template <class F>
double locate(F f, double a, double b, double fa, double fb) {
    if (fb == 0.0) return b;
    boost::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), it);
    return 0.5 * (r.first + r.second);
}

template <class F>
double integrate(F f, double a, double b, double* err, double tol = 1e-15, unsigned depth = 20) {
    double e = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, depth, tol, &e);
    if (err) *err = e;
    return v;
}

}  // namespace

DynParams DynParams::make(double alpha, double energy, double g) {
    check_alpha(alpha);
    require(g > 0.0, ErrorCode::Domain, "coupling must be positive");
    DynParams p;
    p.alpha = alpha;
    p.omega = 2.0 - 2.0 * alpha;
    p.energy = energy;
    p.g = g;
    return p;
}

// ---------------------------------------------------------------- catalog

LoopCount loop_count(double alpha) {
    check_alpha(alpha);
    const double inv = 1.0 / (2.0 - 2.0 * alpha);
    const double near = std::round(inv);
    LoopCount c;
    c.degenerate = std::fabs(inv - near) <= 1e-12 * inv;
    // k < 1/omega, with the boundary excluded when 1/omega is an integer
    c.n = c.degenerate ? int(near) - 1 : int(std::floor(inv));
    return c;
}

const LoopEntry& LoopCatalog::at(int k) const {
    require(k >= 1 && k <= n, ErrorCode::Domain, "loop index out of range (need 1 <= k < 1/omega)");
    return entries[std::size_t(k - 1)];
}

double loop_action_exact(double alpha, int k) {
    const LoopCount c = loop_count(alpha);
    require(k >= 1 && k <= c.n, ErrorCode::Domain, "loop index out of range (need 1 <= k < 1/omega)");
    const double w = 2.0 - 2.0 * alpha;
    const double mu = std::sqrt(1.0 + std::cos(w * pi * k));
    return 4.0 * mu * std::tan(0.5 * w * pi * k) / w;
}

LoopCatalog build_loop_catalog(double alpha) {
    const LoopCount c = loop_count(alpha);
    const double w = 2.0 - 2.0 * alpha;
    LoopCatalog cat;
    cat.alpha = alpha;
    cat.n = c.n;
    cat.degenerate = c.degenerate;
    for (int k = 1; k <= c.n; ++k) {
        LoopEntry e;
        e.k = k;
        e.theta_k = pi / w - pi * k;
        // the intersection sits where cos(omega theta_k) = -cos(omega pi k)
        const double cc = 1.0 + std::cos(w * pi * k);
        e.gamma_k = std::pow(cc, -1.0 / w);
        e.gamma_alt = std::pow(1.0 - std::cos(w * pi * k), -1.0 / w);
        e.mu_k = std::pow(e.gamma_k, -0.5 * w);
        const double M = e.mu_k;
        // dt = r^2 dtheta / M with r^omega = M^2 / (1 - cos omega theta); twice the half-loop
        auto dt = [&](double th) { return std::pow(M * M / (1.0 - std::cos(w * th)), 2.0 / w) / M; };
        auto ds = [&](double th) { return 2.0 * M / (1.0 - std::cos(w * th)); };
        double et = 0.0, es = 0.0;
        e.t_k = 2.0 * integrate(dt, e.theta_k, pi / w, &et);
        e.s_k = 2.0 * integrate(ds, e.theta_k, pi / w, &es);
        e.t_err = 2.0 * et;
        e.s_err = 2.0 * es;
        require(e.t_err <= 1e-9 * e.t_k && e.s_err <= 1e-9 * e.s_k, ErrorCode::Quadrature,
                "loop quadrature did not converge (estimated error " + io::fmt(std::max(e.t_err, e.s_err)) + ")");
        cat.entries.push_back(e);
    }
    for (int k = 1; k <= c.n; ++k) {
        cat.k_by_gamma.push_back(k);
        cat.k_by_mu.push_back(k);
    }
    std::stable_sort(cat.k_by_gamma.begin(), cat.k_by_gamma.end(),
                     [&](int a, int b) { return cat.at(a).gamma_k < cat.at(b).gamma_k; });
    std::stable_sort(cat.k_by_mu.begin(), cat.k_by_mu.end(),
                     [&](int a, int b) { return cat.at(a).mu_k < cat.at(b).mu_k; });
    return cat;
}

const LoopCatalog& loop_catalog(double alpha) {
    static std::shared_mutex mu;
    static std::map<double, std::unique_ptr<LoopCatalog>> memo;
    {
        std::shared_lock lk(mu);
        auto it = memo.find(alpha);
        if (it != memo.end()) return *it->second;
    }
    auto built = std::make_unique<LoopCatalog>(build_loop_catalog(alpha));
    std::unique_lock lk(mu);
    return *memo.emplace(alpha, std::move(built)).first->second;
}

double radial_time(double alpha) {
    check_alpha(alpha);
    return 2.0 / (1.0 + alpha);
}

double closed_form_radius(const DynParams& dyn, double M, double theta) {
    require(M != 0.0, ErrorCode::Domain, "closed form needs M != 0");
    const double c = 1.0 - std::cos(dyn.omega * theta);
    require(c > 1e-300, ErrorCode::Singularity, "radius diverges where omega theta is a multiple of 2 pi");
    return std::pow(M * M / (dyn.g * c), 1.0 / dyn.omega);
}

// ---------------------------------------------------------------- flow

double hamiltonian(const DynParams& dyn, const std::vector<double>& x, const std::vector<double>& xi) {
    double r2 = 0.0, p2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        r2 += x[i] * x[i];
        p2 += xi[i] * xi[i];
    }
    return 0.5 * p2 - dyn.g * std::pow(r2, -dyn.alpha);
}

void zero_energy_state(const DynParams& dyn, double r, double M, std::vector<double>& x, std::vector<double>& xi) {
    const double pr2 = 2.0 * dyn.g * std::pow(r, -2.0 * dyn.alpha) - M * M / (r * r);
    require(pr2 >= 0.0, ErrorCode::Domain, "radius below the pericenter of this angular momentum");
    x = {r, 0.0};
    xi = {-std::sqrt(pr2), M / r};
}

namespace {

using State4 = std::array<double, 4>;
using State3 = std::array<double, 3>;

struct Plane {
    int d = 2;
    std::vector<double> e1, e2;
    void embed(const double* q, std::vector<double>& out) const {
        out.assign(std::size_t(d), 0.0);
        for (int i = 0; i < d; ++i) out[std::size_t(i)] = q[0] * e1[std::size_t(i)] + q[1] * e2[std::size_t(i)];
    }
};

Plane make_plane(const std::vector<double>& x0, const std::vector<double>& xi0) {
    Plane P;
    P.d = int(x0.size());
    const std::size_t d = x0.size();
    if (d == 2) {
        P.e1 = {1.0, 0.0};
        P.e2 = {0.0, 1.0};
        return P;
    }
    double n1 = 0.0;
    for (double v : x0) n1 += v * v;
    n1 = std::sqrt(n1);
    P.e1.resize(d);
    for (std::size_t i = 0; i < d; ++i) P.e1[i] = x0[i] / n1;
    auto orth = [&](std::vector<double> v) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += v[i] * P.e1[i];
        double n = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            v[i] -= dot * P.e1[i];
            n += v[i] * v[i];
        }
        return std::make_pair(v, std::sqrt(n));
    };
    double pn = 0.0;
    for (double v : xi0) pn += v * v;
    auto [v, n] = orth(xi0);
    if (n <= 1e-14 * std::sqrt(pn) || n == 0.0) {
        // radial start: any plane through x0 will do
        std::size_t j = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::fabs(P.e1[i]) < std::fabs(P.e1[j])) j = i;
        std::vector<double> u(d, 0.0);
        u[j] = 1.0;
        std::tie(v, n) = orth(u);
    }
    P.e2.resize(d);
    for (std::size_t i = 0; i < d; ++i) P.e2[i] = v[i] / n;
    return P;
}

// pericenter radius at energy E and angular momentum M (M != 0)
double pericenter_radius(const DynParams& dyn, double E, double M) {
    const double w = dyn.omega;
    auto f = [&](double r) { return 2.0 * E * r * r + 2.0 * dyn.g * std::pow(r, w) - M * M; };
    double hi = std::pow(M * M / (2.0 * dyn.g), 1.0 / w);
    if (E < 0.0) {
        const double rs = std::pow(dyn.g * w / (-2.0 * E), 1.0 / (2.0 - w));
        hi = std::min(hi * 4.0, rs);
        require(f(hi) >= 0.0, ErrorCode::Domain, "no classically allowed region for this energy and momentum");
    } else {
        while (f(hi) < 0.0) hi *= 2.0;
    }
    double lo = hi;
    while (f(lo) >= 0.0 && lo > 1e-300) lo *= 0.5;
    return locate(f, lo, hi, f(lo), f(hi));
}

// time to fall from r to the origin on a radial path at energy E
double radial_fall_time(const DynParams& dyn, double E, double r) {
    const double a = dyn.alpha;
    // relative correction is O(E r^{2a} / g)
    if (std::fabs(E) * std::pow(r, 2.0 * a) <= 1e-14 * dyn.g) return std::pow(r, 1.0 + a) / (std::sqrt(2.0 * dyn.g) * (1.0 + a));
    // s = u^{1/(1+a)} removes the endpoint singularity
    auto f = [&](double u) {
        return 1.0 / ((1.0 + a) * std::sqrt(2.0 * (dyn.g + E * std::pow(u, 2.0 * a / (1.0 + a)))));
    };
    return integrate(f, 0.0, std::pow(r, 1.0 + a), nullptr, 1e-13, 10);
}

enum class Chart { Cartesian, Theta, Radial };

struct Driver {
    const DynParams& dyn;
    const FlowOptions& opt;
    double E = 0.0, M = 0.0;
    double r_switch = 0.0;
    double eps = 0.0;
    // current plane state
    double t = 0.0, q[2]{}, p[2]{}, phi = 0.0;
    Trajectory out;
    std::vector<std::array<double, 5>> plane;  // t, q, p
    bool done = false;

    Driver(const DynParams& d, const FlowOptions& o) : dyn(d), opt(o) {}

    double radius() const { return std::hypot(q[0], q[1]); }

    void record() {
        plane.push_back({t, q[0], q[1], p[0], p[1]});
        out.plane_angle.push_back(phi);
    }

    double user(double tt, const double* qq, const double* pp, double ph) const {
        return opt.stop ? opt.stop(tt, qq, pp, ph) : -1.0;
    }

    // ---------- Cartesian chart
    Chart run_cartesian() {
        auto rhs = [this](const State4& y, State4& dy, double) {
            const double r2 = y[0] * y[0] + y[1] * y[1];
            const double f = -2.0 * dyn.alpha * dyn.g * std::pow(r2, -dyn.alpha - 1.0);
            dy = {y[2], y[3], f * y[0], f * y[1]};
        };
        auto st = odeint::make_dense_output(eps, eps, odeint::runge_kutta_dopri5<State4>());
        const double r0 = radius();
        const double v0 = std::hypot(p[0], p[1]) + 1e-300;
        st.initialize(State4{q[0], q[1], p[0], p[1]}, t, std::min(1e-3 * r0 / v0, opt.t_end - t));
        const double phi0 = phi;
        double ang_prev = std::atan2(q[1], q[0]);
        double phi_prev = phi0;
        auto angle_at = [&](const State4& y) { return phi_prev + wrap_pi(std::atan2(y[1], y[0]) - ang_prev); };
        auto sw = [&](const State4& y) { return r_switch - std::hypot(y[0], y[1]); };
        double sw_prev = sw(st.current_state());
        double us_prev = user(t, q, p, phi);
        std::size_t steps = 0;
        while (true) {
            require(++steps <= opt.max_steps, ErrorCode::StepFailure, "step budget exhausted");
            const State4 ya = st.current_state();
            const auto [ta, tb] = st.do_step(rhs);
            require(std::isfinite(st.current_state()[0]) && tb > ta, ErrorCode::StepFailure, "integration step failed");
            const State4 yb = st.current_state();
            const double phib = angle_at(yb);
            // earliest event inside (ta, tb]
            double te = HUGE_VAL;
            int kind = 0;
            if (tb >= opt.t_end) {
                te = opt.t_end;
                kind = 1;
            }
            State4 y;
            const double swb = sw(yb);
            if (sw_prev < 0.0 && swb >= 0.0) {
                const double tc = locate(
                    [&](double s) {
                        st.calc_state(s, y);
                        return sw(y);
                    },
                    ta, tb, sw_prev, swb);
                if (tc < te) te = tc, kind = 2;
            }
            sw_prev = swb;
            if (opt.stop) {
                const double ub = user(tb, yb.data(), yb.data() + 2, phib);
                if (us_prev < 0.0 && ub >= 0.0) {
                    const double tc = locate(
                        [&](double s) {
                            st.calc_state(s, y);
                            return user(s, y.data(), y.data() + 2, angle_at(y));
                        },
                        ta, tb, us_prev, ub);
                    if (tc <= te) te = tc, kind = 3;
                }
                us_prev = ub;
            }
            if (kind != 0) {
                // dense output only brackets the event; the state itself gets a full-accuracy step
                y = ya;
                if (te > ta) odeint::integrate_adaptive(odeint::make_controlled(eps, eps, odeint::runge_kutta_dopri5<State4>()),
                                                        rhs, y, ta, te, te - ta);
                t = te;
                phi = angle_at(y);
                std::copy(y.begin(), y.begin() + 2, q);
                std::copy(y.begin() + 2, y.end(), p);
                record();
                if (kind == 2) return M == 0.0 ? Chart::Radial : Chart::Theta;
                out.stopped_by_event = kind == 3;
                done = true;
                return Chart::Cartesian;
            }
            t = tb;
            std::copy(yb.begin(), yb.begin() + 2, q);
            std::copy(yb.begin() + 2, yb.end(), p);
            phi = phib;
            ang_prev = std::atan2(q[1], q[0]);
            phi_prev = phi;
            record();
        }
    }

    // ---------- pericenter chart: polar angle as the independent variable, state (ln r, p_r, t)
    Chart run_theta() {
        const double Ma = std::fabs(M), sg = M > 0.0 ? 1.0 : -1.0;
        const double w2 = -2.0 * dyn.alpha - 1.0;
        auto rhs = [&](const State3& y, State3& dy, double) {
            const double r = std::exp(y[0]), r2 = r * r;
            dy[0] = y[1] * r / Ma;
            dy[1] = (M * M / (r2 * r) - 2.0 * dyn.alpha * dyn.g * std::pow(r, w2)) * r2 / Ma;
            dy[2] = r2 / Ma;
        };
        const double r0 = radius();
        const double phi_a = phi;
        const double ur[2] = {q[0] / r0, q[1] / r0};
        const double pr0 = p[0] * ur[0] + p[1] * ur[1];
        const double ang0 = std::atan2(q[1], q[0]);
        auto to_plane = [&](const State3& y, double th, double* qq, double* pp) {
            const double a = ang0 + sg * th;
            const double c = std::cos(a), s = std::sin(a), r = std::exp(y[0]);
            qq[0] = r * c;
            qq[1] = r * s;
            pp[0] = y[1] * c - M / r * s;
            pp[1] = y[1] * s + M / r * c;
        };
        auto st = odeint::make_dense_output(eps, eps, odeint::runge_kutta_dopri5<State3>());
        st.initialize(State3{std::log(r0), pr0, t}, 0.0, 1e-3);
        const double lsw = std::log(r_switch);
        auto ex = [&](const State3& y) { return y[0] - lsw; };
        auto tv = [&](const State3& y) { return y[2] - opt.t_end; };
        double ex_prev = ex(st.current_state());
        double pr_prev = pr0;
        double us_prev = user(t, q, p, phi);
        double qq[2], pp[2];
        std::size_t steps = 0;
        while (true) {
            require(++steps <= opt.max_steps, ErrorCode::StepFailure, "step budget exhausted");
            const State3 ya = st.current_state();
            const auto [ta, tb] = st.do_step(rhs);
            const State3 yb = st.current_state();
            require(std::isfinite(yb[0]) && std::isfinite(yb[1]), ErrorCode::StepFailure, "pericenter chart step failed");
            State3 y;
            if (pr_prev < 0.0 && yb[1] >= 0.0) {
                const double tc = locate(
                    [&](double s) {
                        st.calc_state(s, y);
                        return y[1];
                    },
                    ta, tb, pr_prev, yb[1]);
                st.calc_state(tc, y);
                if (!out.pericenter_time) out.pericenter_time = y[2];
            }
            pr_prev = yb[1];
            double te = HUGE_VAL;
            int kind = 0;
            const double tvb = tv(yb);
            if (tvb >= 0.0) {
                te = locate(
                    [&](double s) {
                        st.calc_state(s, y);
                        return tv(y);
                    },
                    ta, tb, tv(State3{0, 0, t}), tvb);
                kind = 1;
            }
            const double exb = ex(yb);
            if (ex_prev < 0.0 && exb >= 0.0) {
                const double tc = locate(
                    [&](double s) {
                        st.calc_state(s, y);
                        return ex(y);
                    },
                    ta, tb, ex_prev, exb);
                if (tc < te) te = tc, kind = 2;
            }
            ex_prev = exb;
            if (opt.stop) {
                to_plane(yb, tb, qq, pp);
                const double ub = user(yb[2], qq, pp, phi_a + sg * tb);
                if (us_prev < 0.0 && ub >= 0.0) {
                    const double tc = locate(
                        [&](double s) {
                            st.calc_state(s, y);
                            to_plane(y, s, qq, pp);
                            return user(y[2], qq, pp, phi_a + sg * s);
                        },
                        ta, tb, us_prev, ub);
                    if (tc <= te) te = tc, kind = 3;
                }
                us_prev = ub;
            }
            const double thb = kind ? te : tb;
            if (kind) {
                y = ya;
                if (te > ta) odeint::integrate_adaptive(odeint::make_controlled(eps, eps, odeint::runge_kutta_dopri5<State3>()),
                                                        rhs, y, ta, te, te - ta);
            }
            State3 yy = kind ? y : yb;
            if (kind == 2) {
                // roundoff at a deep pericenter leaves an absolute energy error of order
                // eps |V(r_p)|; restore the conserved energy before climbing out
                const double r = std::exp(yy[0]);
                const double pr2 = 2.0 * (E + dyn.g * std::pow(r, -2.0 * dyn.alpha)) - M * M / (r * r);
                if (pr2 > 0.0) yy[1] = std::copysign(std::sqrt(pr2), yy[1]);
            }
            t = kind == 1 ? opt.t_end : yy[2];
            to_plane(yy, thb, q, p);
            phi = phi_a + sg * thb;
            record();
            if (kind == 2) return Chart::Cartesian;
            if (kind) {
                out.stopped_by_event = kind == 3;
                done = true;
                return Chart::Theta;
            }
        }
    }

    // ---------- radial chart: exact fall and return along a ray
    Chart run_radial() {
        const double r0 = radius();
        const double u[2] = {q[0] / r0, q[1] / r0};
        const double pr0 = p[0] * u[0] + p[1] * u[1];
        const double T0 = radial_fall_time(dyn, E, r0);
        // clock runs along the unfolded path: s in [0, T0] falling, then rising
        const double t_origin = pr0 < 0.0 ? t + T0 : t - T0;
        const double t_exit = t_origin + radial_fall_time(dyn, E, std::max(r_switch, r0));
        auto r_at = [&](double tt) {
            const double s = std::fabs(tt - t_origin);
            if (s <= 0.0) return 0.0;
            const double rmax = std::max(r_switch, r0) * 2.0;
            return locate([&](double r) { return radial_fall_time(dyn, E, r) - s; }, 0.0, rmax, -s,
                          radial_fall_time(dyn, E, rmax) - s);
        };
        auto set = [&](double tt) {
            const double r = r_at(tt);
            const double sp = std::sqrt(std::max(0.0, 2.0 * (E + dyn.g * std::pow(std::max(r, 1e-300), -2.0 * dyn.alpha))));
            const double sgn = tt < t_origin ? -1.0 : 1.0;
            t = tt;
            q[0] = r * u[0];
            q[1] = r * u[1];
            p[0] = sgn * sp * u[0];
            p[1] = sgn * sp * u[1];
        };
        if (pr0 < 0.0 && !out.pericenter_time) out.pericenter_time = t_origin;
        const int m = 64;
        double us_prev = user(t, q, p, phi);
        double t_prev = t;
        for (int j = 1; j <= 2 * m; ++j) {
            // nodes cluster toward the origin
            const double f = double(j) / m - 1.0;
            double tt = t_origin + (t_exit - t_origin) * std::copysign(f * f, f);
            if (tt <= t_prev) continue;
            bool end = false;
            if (tt >= t_origin && t_prev < t_origin && !opt.continue_collision && opt.t_end > t_origin)
                fail(ErrorCode::Collision, "radial path reaches the origin; continuation not requested");
            if (tt >= opt.t_end) tt = opt.t_end, end = true;
            if (opt.stop) {
                set(tt);
                const double ub = user(t, q, p, phi);
                if (us_prev < 0.0 && ub >= 0.0) {
                    const double tc = locate(
                        [&](double s) {
                            set(s);
                            return user(t, q, p, phi);
                        },
                        t_prev, tt, us_prev, ub);
                    set(tc);
                    record();
                    out.stopped_by_event = true;
                    done = true;
                    return Chart::Radial;
                }
                us_prev = ub;
            }
            set(tt);
            record();
            t_prev = tt;
            if (end) {
                done = true;
                return Chart::Radial;
            }
        }
        return Chart::Cartesian;
    }
};

}  // namespace

Trajectory integrate_flow(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                          const FlowOptions& opt) {
    const std::size_t d = x0.size();
    require((d == 2 || d == 3) && xi0.size() == d, ErrorCode::Domain, "flow needs d in {2,3}");
    require(opt.tol >= 1e-13 && opt.tol <= 1e-6, ErrorCode::Domain, "tol must lie in [1e-13, 1e-6]");
    double r0 = 0.0;
    for (double v : x0) r0 += v * v;
    r0 = std::sqrt(r0);
    require(r0 > 0.0, ErrorCode::Domain, "start point must avoid the origin");

    const Plane P = make_plane(x0, xi0);
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    Driver D(dyn, opt);
    D.eps = 0.02 * opt.tol;
    D.q[0] = dot(x0, P.e1);
    D.q[1] = dot(x0, P.e2);
    D.p[0] = dot(xi0, P.e1);
    D.p[1] = dot(xi0, P.e2);
    D.phi = 0.0;
    D.E = hamiltonian(dyn, x0, xi0);
    D.M = D.q[0] * D.p[1] - D.q[1] * D.p[0];
    const double pn = std::hypot(D.p[0], D.p[1]);
    if (std::fabs(D.M) <= 1e-14 * r0 * pn) D.M = 0.0;
    // near-radial orbits also leave the Cartesian chart early: its clock cannot
    // resolve a pericenter far below the start radius
    D.r_switch = D.M == 0.0 ? 0.5 * r0 : std::max(2.0 * pericenter_radius(dyn, D.E, D.M), 1e-3 * r0);
    D.out.d = int(d);
    D.out.H0 = D.E;
    D.out.M0 = D.M;
    D.record();

    Chart c = r0 < D.r_switch ? (D.M == 0.0 ? Chart::Radial : Chart::Theta) : Chart::Cartesian;
    if (opt.t_end <= 0.0) D.done = true;
    while (!D.done) {
        switch (c) {
            case Chart::Cartesian: c = D.run_cartesian(); break;
            case Chart::Theta: c = D.run_theta(); break;
            case Chart::Radial: c = D.run_radial(); break;
        }
    }

    Trajectory& tr = D.out;
    tr.angle_advance = D.phi;
    tr.samples.reserve(D.plane.size());
    for (const auto& s : D.plane) {
        Sample smp;
        smp.t = s[0];
        P.embed(&s[1], smp.x);
        P.embed(&s[3], smp.xi);
        const double H = hamiltonian(dyn, smp.x, smp.xi);
        tr.H_drift = std::max(tr.H_drift, std::fabs(H - tr.H0));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) {
                const double Lij = smp.x[i] * smp.xi[j] - smp.x[j] * smp.xi[i];
                const double L0 = x0[i] * xi0[j] - x0[j] * xi0[i];
                tr.M_drift = std::max(tr.M_drift, std::fabs(Lij - L0));
            }
        tr.samples.push_back(std::move(smp));
    }
    return tr;
}

Trajectory integrate_flow(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                          double t_end, double tol) {
    FlowOptions o;
    o.t_end = t_end;
    o.tol = tol;
    return integrate_flow(dyn, x0, xi0, o);
}

LoopReturn loop_return(const DynParams& dyn, int k, double tol) {
    const LoopCatalog& cat = loop_catalog(dyn.alpha);
    const LoopEntry& e = cat.at(k);
    // the catalog is normalized at g = 1; other couplings rescale M by sqrt(g)
    const double M = e.mu_k * std::sqrt(dyn.g);
    std::vector<double> x0, xi0;
    zero_energy_state(dyn, 1.0, M, x0, xi0);
    FlowOptions o;
    o.tol = tol;
    o.t_end = 1e3 * (e.t_k + 1.0);
    const double target = 2.0 * pi * k;
    o.stop = [target](double, const double*, const double*, double ph) { return ph - target; };
    LoopReturn lr;
    lr.traj = integrate_flow(dyn, x0, xi0, o);
    require(lr.traj.stopped_by_event, ErrorCode::StepFailure, "loop did not close");
    const Sample& last = lr.traj.samples.back();
    lr.t = last.t;
    lr.miss = std::hypot(last.x[0] - x0[0], last.x[1] - x0[1]);
    return lr;
}

double orbit_tail_angle(const DynParams& dyn, double M, double R) {
    const double u = M * M / (dyn.g * std::pow(R, dyn.omega));
    require(u <= 2.0, ErrorCode::Domain, "radius below the pericenter");
    return std::acos(1.0 - u) / dyn.omega;
}

Trajectory full_orbit(const DynParams& dyn, double R_far, double tol) {
    std::vector<double> x0, xi0;
    zero_energy_state(dyn, R_far, 1.0, x0, xi0);
    FlowOptions o;
    o.tol = tol;
    o.t_end = HUGE_VAL;
    o.stop = [R_far](double, const double* q, const double*, double) { return std::hypot(q[0], q[1]) - R_far; };
    Trajectory tr = integrate_flow(dyn, x0, xi0, o);
    require(tr.stopped_by_event, ErrorCode::StepFailure, "orbit did not escape");
    return tr;
}

// ---------------------------------------------------------------- intersections

std::size_t count_self_intersections(const Trajectory& tr) {
    const auto& s = tr.samples;
    if (s.size() < 4) return 0;
    struct Seg {
        double x0, y0, x1, y1, xmin, xmax;
        std::size_t i;
    };
    std::vector<Seg> seg;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double a = s[i].x[0], b = s[i].x[1], c = s[i + 1].x[0], e = s[i + 1].x[1];
        if (a == c && b == e) continue;
        seg.push_back({a, b, c, e, std::min(a, c), std::max(a, c), i});
    }
    std::sort(seg.begin(), seg.end(), [](const Seg& u, const Seg& v) { return u.xmin < v.xmin; });
    auto orient = [](double ax, double ay, double bx, double by, double cx, double cy) {
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    };
    std::size_t count = 0;
    for (std::size_t a = 0; a < seg.size(); ++a) {
        const Seg& u = seg[a];
        for (std::size_t b = a + 1; b < seg.size() && seg[b].xmin <= u.xmax; ++b) {
            const Seg& v = seg[b];
            if (u.i + 1 >= v.i && v.i + 1 >= u.i) continue;  // neighbours share an end
            if (std::max(std::min(u.y0, u.y1), std::min(v.y0, v.y1)) > std::min(std::max(u.y0, u.y1), std::max(v.y0, v.y1)))
                continue;
            const double o1 = orient(u.x0, u.y0, u.x1, u.y1, v.x0, v.y0);
            const double o2 = orient(u.x0, u.y0, u.x1, u.y1, v.x1, v.y1);
            const double o3 = orient(v.x0, v.y0, v.x1, v.y1, u.x0, u.y0);
            const double o4 = orient(v.x0, v.y0, v.x1, v.y1, u.x1, u.y1);
            // half-open in the second endpoint so a crossing through a shared node counts once
            if (((o1 < 0.0 && o2 >= 0.0) || (o1 >= 0.0 && o2 < 0.0)) && ((o3 < 0.0 && o4 >= 0.0) || (o3 >= 0.0 && o4 < 0.0)))
                ++count;
        }
    }
    return count;
}

// ---------------------------------------------------------------- asymptotes

Asymptote time_angle_asymptotes(const DynParams& dyn, double rho, double tau, double r, const AsymptoteWindow& w) {
    require(rho >= 0.0 && r > 0.0, ErrorCode::Domain, "need rho >= 0 and r > 0");
    const double a = dyn.alpha;
    const double lower = w.C0 * std::pow(rho, 1.0 / (1.0 - a));
    const double upper = tau == 0.0 ? HUGE_VAL : w.eps0 * std::pow(std::fabs(tau), -1.0 / (2.0 * a));
    require(r >= lower && r <= upper, ErrorCode::Window,
            "r=" + io::fmt(r) + " outside [" + io::fmt(lower) + ", " + io::fmt(upper) + "]");
    const double k = 1.0 / std::sqrt(2.0 * dyn.g);
    return {k * std::pow(r, 1.0 + a) / (1.0 + a), pi / dyn.omega - k * rho * std::pow(r, a - 1.0) / (1.0 - a)};
}

Asymptote time_angle_exact(const DynParams& dyn, double rho, double tau, double r, double tol) {
    if (rho == 0.0) {
        require(dyn.g + tau * std::pow(r, 2.0 * dyn.alpha) > 0.0, ErrorCode::Domain, "radius not reachable");
        return {radial_fall_time(dyn, tau, r), pi / dyn.omega};
    }
    const double rp = pericenter_radius(dyn, tau, rho);
    require(rp < r, ErrorCode::Domain, "radius below the pericenter");
    FlowOptions o;
    o.tol = tol;
    o.t_end = HUGE_VAL;
    o.stop = [r](double, const double* q, const double*, double) { return std::hypot(q[0], q[1]) - r; };
    const Trajectory tr = integrate_flow(dyn, {rp, 0.0}, {0.0, rho / rp}, o);
    require(tr.stopped_by_event, ErrorCode::StepFailure, "radius not reached");
    return {tr.samples.back().t, tr.angle_advance};
}

// ---------------------------------------------------------------- return map

JacobianResult return_map_jacobian(const DynParams& dyn, const std::vector<double>& x0, const std::vector<double>& xi0,
                                   double t_ret, double tol) {
    const std::size_t d = x0.size();
    double pn = 0.0;
    for (double v : xi0) pn += v * v;
    pn = std::sqrt(pn);
    const double hx = std::cbrt(tol) * std::max(pn, 1e-3);
    const double ht = std::cbrt(tol) * std::max(t_ret, 1e-3);
    require(tol < 1e-3 * std::min(hx, ht), ErrorCode::FiniteDifference, "integration tolerance exceeds the step size");
    FlowOptions o;
    o.tol = tol;
    o.continue_collision = true;
    auto endpoint = [&](const std::vector<double>& xi, double t) {
        o.t_end = t;
        return integrate_flow(dyn, x0, xi, o).samples.back();
    };
    JacobianResult res;
    Eigen::MatrixXd J(Eigen::Index(d), Eigen::Index(d + 1));
    for (std::size_t c = 0; c <= d; ++c) {
        std::vector<double> xp = xi0, xm = xi0;
        double tp = t_ret, tm = t_ret, h;
        if (c < d) {
            h = hx;
            xp[c] += h;
            xm[c] -= h;
        } else {
            h = ht;
            tp += h;
            tm -= h;
        }
        const Sample a = endpoint(xp, tp), b = endpoint(xm, tm);
        for (std::size_t i = 0; i < d; ++i) J(Eigen::Index(i), Eigen::Index(c)) = (a.x[i] - b.x[i]) / (2.0 * h);
    }
    res.velocity = endpoint(xi0, t_ret).xi;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) res.singular_values.push_back(sv(i));
    for (double s : res.singular_values)
        if (s > 1e-6 * res.singular_values.front()) ++res.rank_eps;
    res.J.assign(d, std::vector<double>(d + 1));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t c = 0; c <= d; ++c) res.J[i][c] = J(Eigen::Index(i), Eigen::Index(c));
    return res;
}

// ---------------------------------------------------------------- connections

std::vector<Connection> connecting_trajectories(const DynParams& dyn, const std::vector<double>& x,
                                                const std::vector<double>& y) {
    require(x.size() == 2 && y.size() == 2, ErrorCode::Domain, "connections are computed for d = 2");
    const double a = std::hypot(x[0], x[1]), b = std::hypot(y[0], y[1]);
    require(a > 0.0 && b > 0.0, ErrorCode::Domain, "end points must avoid the origin");
    const double w = dyn.omega;
    const double Mmax = std::sqrt(2.0 * dyn.g) * std::pow(std::min(a, b), 0.5 * w);
    auto c = [&](double M, double r) { return std::acos(std::clamp(1.0 - M * M / (dyn.g * std::pow(r, w)), -1.0, 1.0)) / w; };
    // angle swept from x to y: one monotone branch through the pericenter
    // (decreasing in M), plus the branch that stays on one side (increasing in M)
    auto through = [&](double M) { return 2.0 * pi / w - c(M, a) - c(M, b); };
    auto oneside = [&](double M) { return std::fabs(c(M, a) - c(M, b)); };
    const double lo = 1e-12 * Mmax;
    std::vector<Connection> out;
    for (int dir : {+1, -1}) {
        double delta = std::atan2(y[1], y[0]) - std::atan2(x[1], x[0]);
        delta *= dir;
        delta = std::fmod(delta, 2.0 * pi);
        if (delta < 0.0) delta += 2.0 * pi;
        const double joint = through(Mmax);  // = oneside(Mmax)
        for (int j = 0;; ++j) {
            const double target = delta + 2.0 * pi * j;
            if (target >= 2.0 * pi / w) break;
            if (target <= 0.0) continue;  // zero sweep: radial path only
            double M;
            if (target >= joint) {
                auto f = [&](double m) { return target - through(m); };
                M = locate(f, lo, Mmax, f(lo), f(Mmax));
            } else {
                if (a == b) continue;
                auto f = [&](double m) { return oneside(m) - target; };
                M = locate(f, lo, Mmax, f(lo), f(Mmax));
            }
            out.push_back({dir * M, j, dir});
        }
    }
    return out;
}

std::vector<std::vector<std::vector<double>>> loop_polylines(double alpha, double r, std::size_t points) {
    const LoopCatalog& cat = loop_catalog(alpha);
    const DynParams dyn = DynParams::make(alpha);
    std::vector<std::vector<std::vector<double>>> out;
    for (const LoopEntry& e : cat.entries) {
        const double M = e.mu_k * std::pow(r, 1.0 - alpha);
        for (double dir : {1.0, -1.0}) {
            std::vector<std::vector<double>> line;
            const double span = 2.0 * pi / dyn.omega - 2.0 * e.theta_k;
            for (std::size_t i = 0; i <= points; ++i) {
                const double th = e.theta_k + span * double(i) / double(points);
                const double rr = closed_form_radius(dyn, M, th);
                const double ph = dir * (th - e.theta_k);
                line.push_back({rr * std::cos(ph), rr * std::sin(ph)});
            }
            out.push_back(std::move(line));
        }
    }
    return out;
}

// ---------------------------------------------------------------- geometry suite

GeometryCheck geometry_check(double alpha, double tol) {
    check_alpha(alpha);
    GeometryCheck g;
    g.alpha = alpha;
    g.count = loop_count(alpha);
    const LoopCatalog& cat = loop_catalog(alpha);
    const DynParams dyn = DynParams::make(alpha);
    double gmax = 1.0;
    for (const LoopEntry& e : cat.entries) gmax = std::max(gmax, e.gamma_k);
    const double R = std::max(10.0, 4.0 * gmax);
    g.orbit = full_orbit(dyn, R, tol);
    const Trajectory& tr = g.orbit;
    g.intersections = count_self_intersections(tr);
    g.angle_error = std::fabs(tr.angle_advance + 2.0 * orbit_tail_angle(dyn, 1.0, R) - 2.0 * pi / dyn.omega);
    g.H_drift = tr.H_drift;
    g.M_drift = tr.M_drift;
    // theta measured from the direction where 1 - cos(omega theta) vanishes
    const double theta0 = orbit_tail_angle(dyn, 1.0, R);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        const Sample& s = tr.samples[i];
        const double r = std::hypot(s.x[0], s.x[1]);
        const double th = tr.plane_angle[i] + theta0;
        g.residual = std::max(g.residual, std::fabs(std::pow(r, dyn.omega) * (1.0 - std::cos(dyn.omega * th)) - 1.0));
    }
    for (const LoopEntry& e : cat.entries) {
        const LoopReturn lr = loop_return(dyn, e.k, tol);
        g.t_rel_err = std::max(g.t_rel_err, std::fabs(lr.t - e.t_k) / e.t_k);
        g.loop_miss = std::max(g.loop_miss, lr.miss);
        g.H_drift = std::max(g.H_drift, lr.traj.H_drift);
        g.M_drift = std::max(g.M_drift, lr.traj.M_drift);
        const double ex = loop_action_exact(alpha, e.k);
        g.s_rel_err = std::max(g.s_rel_err, std::fabs(e.s_k - ex) / std::fabs(ex));
    }
    FlowOptions o;
    o.t_end = 1.0;
    o.tol = std::max(tol, 1e-11);
    o.continue_collision = true;
    const Trajectory drop = integrate_flow(dyn, {1.0, 0.0}, {-std::sqrt(2.0), 0.0}, o);
    require(drop.pericenter_time.has_value(), ErrorCode::StepFailure, "radial drop did not reach the origin");
    g.pericenter_time = *drop.pericenter_time;
    g.pericenter_target = 1.0 / (1.0 + alpha);
    return g;
}

// ---------------------------------------------------------------- emitters

std::string trajectory_csv(const DynParams& dyn, const Trajectory& tr) {
    std::vector<std::string> head{"t"};
    for (int i = 1; i <= tr.d; ++i) head.push_back("x" + std::to_string(i));
    for (int i = 1; i <= tr.d; ++i) head.push_back("xi" + std::to_string(i));
    head.push_back("H");
    head.push_back("M");
    io::CsvWriter w(head);
    for (const Sample& s : tr.samples) {
        std::vector<double> row{s.t};
        row.insert(row.end(), s.x.begin(), s.x.end());
        row.insert(row.end(), s.xi.begin(), s.xi.end());
        row.push_back(hamiltonian(dyn, s.x, s.xi));
        if (tr.d == 2) {
            row.push_back(s.x[0] * s.xi[1] - s.x[1] * s.xi[0]);
        } else {
            double m2 = 0.0;
            for (int i = 0; i < tr.d; ++i)
                for (int j = i + 1; j < tr.d; ++j) {
                    const double l = s.x[std::size_t(i)] * s.xi[std::size_t(j)] - s.x[std::size_t(j)] * s.xi[std::size_t(i)];
                    m2 += l * l;
                }
            row.push_back(std::sqrt(m2));
        }
        w.row(row);
    }
    return w.str();
}

nlohmann::json catalog_json(const LoopCatalog& cat) {
    nlohmann::json entries = nlohmann::json::array();
    for (const LoopEntry& e : cat.entries)
        entries.push_back({{"k", e.k},
                           {"theta_k", e.theta_k},
                           {"gamma_k", e.gamma_k},
                           {"gamma_alt", e.gamma_alt},
                           {"mu_k", e.mu_k},
                           {"t_k", e.t_k},
                           {"t_err", e.t_err},
                           {"s_k", e.s_k},
                           {"s_err", e.s_err}});
    return {{"alpha", cat.alpha},          {"n", cat.n},          {"degenerate", cat.degenerate},
            {"entries", entries},          {"k_by_gamma", cat.k_by_gamma}, {"k_by_mu", cat.k_by_mu}};
}

}  // namespace sclab::classical
