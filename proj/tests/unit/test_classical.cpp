#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sclab/classical.hpp"
#include "sclab/error.hpp"

using namespace sclab;
using namespace sclab::classical;
using std::numbers::pi;

TEST_CASE("loop_count follows k < 1/omega") {
    CHECK(loop_count(0.25).n == 0);
    CHECK(loop_count(0.6).n == 1);
    CHECK(loop_count(0.8).n == 2);
    CHECK(loop_count(0.5).n == 0);
    CHECK(loop_count(0.5).degenerate);
    CHECK(loop_count(0.75).n == 1);
    CHECK(loop_count(0.75).degenerate);
    CHECK(loop_count(0.875).n == 3);
    CHECK_THROWS_AS(loop_count(0.0), Error);
    CHECK_THROWS_AS(loop_count(1.0), Error);
}

TEST_CASE("catalog entries satisfy the intersection algebra") {
    for (double a : {0.6, 0.75, 0.8, 0.875, 0.9}) {
        const auto& cat = loop_catalog(a);
        const double w = 2.0 - 2.0 * a;
        for (const auto& e : cat.entries) {
            CHECK(e.theta_k == doctest::Approx(pi / w - pi * e.k).epsilon(1e-14));
            CHECK(std::pow(e.gamma_k, w) * (1.0 + std::cos(w * pi * e.k)) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::pow(e.gamma_alt, w) * (1.0 - std::cos(w * pi * e.k)) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(e.mu_k == doctest::Approx(std::pow(e.gamma_k, -w / 2.0)).epsilon(1e-12));
            CHECK(e.s_k == doctest::Approx(loop_action_exact(a, e.k)).epsilon(1e-10));
        }
        for (std::size_t i = 0; i + 1 < cat.k_by_mu.size(); ++i)
            CHECK(cat.at(cat.k_by_mu[i]).mu_k < cat.at(cat.k_by_mu[i + 1]).mu_k);
    }
}

TEST_CASE("catalog examples") {
    const auto& c75 = loop_catalog(0.75);
    CHECK(c75.at(1).theta_k == doctest::Approx(pi));
    CHECK(c75.at(1).gamma_k == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c75.at(1).mu_k == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c75.at(1).s_k == doctest::Approx(8.0).epsilon(1e-12));
    CHECK_THROWS_AS(c75.at(2), Error);
    CHECK(loop_catalog(0.875).at(2).mu_k == doctest::Approx(1.0).epsilon(1e-14));
    const auto lr = loop_return(DynParams::make(0.75), 1, 1e-12);
    CHECK(std::fabs(lr.t - c75.at(1).t_k) <= 1e-6 * c75.at(1).t_k);
    CHECK(lr.miss < 1e-8);
}

TEST_CASE("radial_time") {
    CHECK(radial_time(0.5) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(radial_time(1.0 / 3.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(radial_time(1e-12) == doctest::Approx(2.0).epsilon(1e-11));
    CHECK_THROWS_AS(radial_time(1.5), Error);
}

TEST_CASE("closed_form_radius") {
    const auto dyn = DynParams::make(0.5);
    CHECK(closed_form_radius(dyn, 1.0, pi) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(closed_form_radius(dyn, 1.0, pi / 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(closed_form_radius(DynParams::make(0.3), 1.0, 0.0), Error);
}

TEST_CASE("integrate_flow conserves H and M and follows the closed form") {
    const auto dyn = DynParams::make(0.5);
    std::vector<double> x0, xi0;
    zero_energy_state(dyn, 4.0, 1.0, x0, xi0);
    const auto tr = integrate_flow(dyn, x0, xi0, 6.0, 1e-11);
    CHECK(tr.H_drift <= 1e-9);
    CHECK(tr.M_drift <= 1e-9);
    // r (1 - cos theta) = 1 with theta measured from the asymptote direction
    const double th0 = orbit_tail_angle(dyn, 1.0, 4.0);
    double res = 0.0;
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        const double r = std::hypot(tr.samples[i].x[0], tr.samples[i].x[1]);
        res = std::max(res, std::fabs(r * (1.0 - std::cos(tr.plane_angle[i] + th0)) - 1.0));
    }
    CHECK(res <= 1e-9);
}

TEST_CASE("radial collision needs continuation") {
    const auto dyn = DynParams::make(0.5);
    CHECK_THROWS_AS(integrate_flow(dyn, {1.0, 0.0}, {-std::sqrt(2.0), 0.0}, 1.0, 1e-10), Error);
    FlowOptions o;
    o.t_end = 1.0;
    o.tol = 1e-11;
    o.continue_collision = true;
    const auto tr = integrate_flow(dyn, {1.0, 0.0}, {-std::sqrt(2.0), 0.0}, o);
    REQUIRE(tr.pericenter_time.has_value());
    // with H = xi^2/2 - r^{-2 alpha} the drop from r = 1 takes 1/(sqrt 2 (1 + alpha))
    CHECK(*tr.pericenter_time == doctest::Approx(1.0 / (std::sqrt(2.0) * 1.5)).epsilon(1e-9));
    // the g = 1/2 coupling gives 1/(1 + alpha)
    const auto half = DynParams::make(0.5, 0.0, 0.5);
    const auto t2 = integrate_flow(half, {1.0, 0.0}, {-1.0, 0.0}, o);
    REQUIRE(t2.pericenter_time.has_value());
    CHECK(*t2.pericenter_time == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
}

TEST_CASE("geometry_check agrees with the catalog") {
    for (double a : {0.25, 0.6, 0.8}) {
        const auto g = geometry_check(a, 1e-12);
        CHECK(g.intersections == std::size_t(g.count.n));
        CHECK(g.H_drift <= 1e-9);
        CHECK(g.residual <= 1e-7);
        CHECK(g.t_rel_err <= 1e-6);
        CHECK(g.angle_error <= 1e-8);
    }
}

TEST_CASE("time/angle asymptotes") {
    const auto dyn = DynParams::make(0.5, 0.0, 0.5);
    const auto a = time_angle_asymptotes(dyn, 0.0, 0.0, 1.0);
    CHECK(a.t == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(a.s_advance == doctest::Approx(pi / dyn.omega).epsilon(1e-14));
    CHECK(time_angle_asymptotes(dyn, 0.0, 0.0, 0.3).s_advance == doctest::Approx(pi / dyn.omega));
    // flow oracle with a bounded constant over a (rho, r) grid
    double C = 0.0;
    for (double r : {0.5, 1.0, 1.5})
        for (double rho : {0.05, 0.1, 0.2})
            for (double tau : {-0.05, 0.0, 0.05}) {
                const auto lead = time_angle_asymptotes(dyn, rho, tau, r);
                const auto ex = time_angle_exact(dyn, rho, tau, r, 1e-12);
                const double scale = std::pow(r, 3 * 0.5 + 1) * std::fabs(tau) + std::pow(r, 3 * 0.5 - 1) * rho * rho;
                C = std::max(C, std::fabs(ex.t - lead.t) / scale);
            }
    CHECK(C < 10.0);
}

TEST_CASE("return-map jacobian at a loop point") {
    const auto dyn = DynParams::make(0.75);
    std::vector<double> x0, xi0;
    zero_energy_state(dyn, 1.0, loop_catalog(0.75).at(1).mu_k, x0, xi0);
    const auto lr = loop_return(dyn, 1, 1e-12);
    const auto J = return_map_jacobian(dyn, x0, xi0, lr.t);
    CHECK(J.rank_eps >= 2);
    // the time column is the flow velocity
    for (std::size_t i = 0; i < 2; ++i) CHECK(J.J[i][2] == doctest::Approx(J.velocity[i]).epsilon(1e-6));
}

TEST_CASE("connecting trajectories") {
    const auto c = connecting_trajectories(DynParams::make(0.75), {1.0, 0.0}, {1.0, 0.0});
    REQUIRE(c.size() == 2);
    for (const auto& k : c) CHECK(std::fabs(k.M) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(connecting_trajectories(DynParams::make(0.5), {1.0, 0.0}, {1.0, 0.0}).empty());
}

TEST_CASE("emitters") {
    const auto dyn = DynParams::make(0.6);
    const auto tr = full_orbit(dyn, 10.0, 1e-10);
    const std::string csv = trajectory_csv(dyn, tr);
    CHECK(csv.rfind("t,x1,x2,xi1,xi2,H,M\n", 0) == 0);
    const auto j = catalog_json(loop_catalog(0.6));
    CHECK(j["n"] == 1);
    CHECK(j["entries"].size() == 1);
}
