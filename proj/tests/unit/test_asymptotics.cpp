#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sclab/asymptotics.hpp"
#include "sclab/classical.hpp"
#include "sclab/error.hpp"

using namespace sclab;
using namespace sclab::asymptotics;
using std::numbers::pi;

TEST_CASE("weyl_diag") {
    CHECK(weyl_diag(2, 0.1, 0.0, -1.0) == doctest::Approx(15.9155).epsilon(1e-5));
    CHECK(weyl_diag(2, 0.1, 0.0, -1.0) == doctest::Approx(2.0 * pi / std::pow(2 * pi * 0.1, 2)).epsilon(1e-14));
    CHECK(weyl_diag(3, 0.1, -0.5, -0.5) == 0.0);
    CHECK(weyl_diag(3, 0.1, -1.0, -0.5) == 0.0);
    CHECK(weyl_diag_reference(0.5, 2, 0.1, {1.0, 0.0}, 0.0) == doctest::Approx(15.9155).epsilon(1e-5));
    // scaling: x = r y maps (h, r) to (hbar, 1) at tau = 0 with the Jacobian r^{-d}
    for (double a : {0.25, 0.5, 0.75})
        for (int d : {2, 3})
            for (double r : {0.3, 1.0, 2.5}) {
                const double h = 0.07, hb = h * std::pow(r, a - 1.0);
                std::vector<double> x(std::size_t(d), 0.0), one(std::size_t(d), 0.0);
                x[0] = r;
                one[0] = 1.0;
                const double lhs = weyl_diag_reference(a, d, h, x, 0.0);
                const double rhs = std::pow(r, -double(d)) * weyl_diag_reference(a, d, hb, one, 0.0);
                CHECK(std::fabs(lhs - rhs) <= 1e-12 * lhs);
            }
}

TEST_CASE("scale_set") {
    const auto s = scale_set(0.01, 0.5, 1.0);
    CHECK(s.r_bar == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.even_branch);
    CHECK(s.branch_exact);
    CHECK(s.rho_exponent == doctest::Approx(1.0 / 3.0 - 0.05));
    const auto t = scale_set(0.01, 0.5, s.r_bar);
    CHECK(t.hbar == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scale_set(0.1, 0.75, 1.0).even_branch);
    const auto q = scale_set(0.1, 0.25, 1.0);
    CHECK_FALSE(q.even_branch);
    CHECK(q.rho_exponent == doctest::Approx(0.45));
    CHECK(q.rho_bar == doctest::Approx(std::pow(0.1, 0.45)).epsilon(1e-14));
    CHECK(scale_set(0.1, 0.5, 1.0, 1.0).r_upper_star.has_value());
    CHECK_THROWS_AS(scale_set(0.1, 0.5, 1.0, std::nullopt, 0.5), Error);
}

TEST_CASE("even inverse test") {
    CHECK(even_inverse_test(0.5).even);
    CHECK(even_inverse_test(0.75).even);
    CHECK(even_inverse_test(5.0 / 6.0).even);
    CHECK_FALSE(even_inverse_test(2.0 / 3.0).even);  // 3 is odd
    CHECK_FALSE(even_inverse_test(0.25).even);
    CHECK(even_inverse_test(0.75).exact);
}

TEST_CASE("envelopes") {
    const auto sc = scale_set(0.1, 0.25, 1.0);
    const auto full = make_envelope("E1.8", 2, 0.25, 1.0, 1.0, false);
    const double expect = std::pow(0.1, -0.5) + std::pow(0.1, 0.45) * std::pow(0.1, -1.0);
    CHECK(envelope_value(full, sc, std::nullopt, {{"C", 1.0}}) == doctest::Approx(expect).epsilon(1e-13));
    const auto skip = make_envelope("E1.8", 2, 0.25);
    CHECK(skip.skips_active());
    CHECK(envelope_value(skip, sc, std::nullopt, {{"C", 1.0}}) == doctest::Approx(std::pow(0.1, -0.55)).epsilon(1e-13));
    const auto loops = make_envelope("E1.8", 2, 0.75);
    CHECK_FALSE(loops.skips_active());
    const auto e326 = make_envelope("E3.26", 3, 0.5);
    const auto s2 = scale_set(0.05, 0.5, 0.3);
    CHECK(envelope_value(e326, s2, std::nullopt, {{"C", 2.0}}) == doctest::Approx(2.0 * std::pow(s2.r_bar, -3)));
    CHECK_THROWS_AS(envelope_value(full, sc, std::nullopt, {{"C1", 1.0}}), Error);
    CHECK_THROWS_AS(envelope_value(make_envelope("E3.25", 2, 0.5), sc, std::nullopt, {{"C", 1.0}}), Error);
    CHECK_THROWS_AS(make_envelope("E9.99", 2, 0.5), Error);
    CHECK(envelope_ids().size() == 15);
    for (const auto& id : envelope_ids()) CHECK_NOTHROW(make_envelope(id, 2, 0.6));
}

TEST_CASE("exponent_fit") {
    std::vector<std::pair<double, double>> a, b, c;
    for (int i = 0; i < 24; ++i) {
        const double h = 0.1 * std::pow(0.1, i / 23.0);
        a.push_back({h, 3.0 * h * h});
        b.push_back({h, h * h * (1.0 + 0.1 * std::sin(1.0 / h))});
        c.push_back({h, 7.0});
    }
    CHECK(exponent_fit(a).slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::fabs(exponent_fit(b).slope - 2.0) <= 0.05);
    CHECK(std::fabs(exponent_fit(c).slope) <= 1e-12);
    c[3].second = 0.0;
    CHECK_THROWS_AS(exponent_fit(c), Error);
    CHECK_THROWS_AS(exponent_fit({{0.1, 1.0}, {0.05, 2.0}}), Error);
}

TEST_CASE("non-increasing across halvings") {
    // pairs (0.2, 0.1), (0.14, 0.07), (0.1, 0.05); the sqrt(2) neighbours are not compared
    CHECK(nonincreasing_across_halvings({{0.2, 1.0}, {0.14, 0.5}, {0.1, 0.9}, {0.07, 0.45}, {0.05, 0.8}}, 0.2));
    CHECK_FALSE(nonincreasing_across_halvings({{0.2, 1.0}, {0.14, 0.5}, {0.1, 0.9}, {0.07, 0.61}, {0.05, 0.8}}, 0.2));
    CHECK(nonincreasing_across_halvings({{0.2, 1.0}, {0.1, 1.19}}, 0.2));
    CHECK_FALSE(nonincreasing_across_halvings({{0.2, 1.0}, {0.1, 1.21}}, 0.2));
    // no halving pairs: consecutive points
    CHECK(nonincreasing_across_halvings({{0.2, 1.0}, {0.18, 1.1}, {0.16, 1.2}}, 0.2));
    CHECK_FALSE(nonincreasing_across_halvings({{0.2, 1.0}, {0.18, 1.3}}, 0.2));
}

TEST_CASE("phase_extract recovers a pure tone") {
    const double s1 = classical::loop_catalog(0.75).at(1).s_k;
    const double f = s1 / (2.0 * pi);
    std::vector<std::pair<double, double>> pts;
    const std::size_t n = 64;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = 40.0 + 160.0 * double(i) / double(n - 1), h = 1.0 / u;
        pts.push_back({h, std::cos(s1 / h) * std::pow(h, -0.5)});
    }
    const auto win = alias_window(f, pts);
    CHECK(win.first < f);
    CHECK(win.second > f);
    // real samples: the images of f are k rate +- f; only f itself may fall in the window
    const double rate = 63.0 / 160.0;
    for (int k = 1; k < 16; ++k) {
        for (double g : {k * rate - f, k * rate + f, f - k * rate}) {
            if (std::fabs(g - f) < 1e-12) continue;
            CHECK_FALSE((g > win.first && g < win.second));
        }
    }
    const auto r = phase_extract(pts, win);
    CHECK(std::fabs(r.f_peak - f) <= 1.0 / 160.0);
    CHECK_FALSE(r.inconclusive);
    CHECK(r.snr > 3.0);
    // a smooth trend has no tone
    std::vector<std::pair<double, double>> flat;
    for (const auto& [h, v] : pts) flat.push_back({h, std::pow(h, -0.5) * (1.0 + 0.2 * h)});
    CHECK(phase_extract(flat, win).inconclusive);
    CHECK_THROWS_AS(phase_extract(std::vector<std::pair<double, double>>(pts.begin(), pts.begin() + 62), win), Error);
}

TEST_CASE("second-term check") {
    std::vector<SecondTermSample> s;
    for (double h : {0.2, 0.14, 0.1, 0.07, 0.05}) s.push_back({h, 10.0 / (h * h), 10.0 / (h * h)});
    const auto c = weyl_second_term_check(s, 2);
    CHECK(c.degenerate);
    std::vector<SecondTermSample> t;
    for (double h : {0.2, 0.14, 0.1, 0.07, 0.05}) t.push_back({h, 1.0 / (h * h) + 0.3, 1.0 / (h * h)});
    const auto d = weyl_second_term_check(t, 2);
    CHECK_FALSE(d.degenerate);
    CHECK(d.fit.slope == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(d.consistent);
}

TEST_CASE("scaling quantities") {
    const auto q = scaling_quantities(0.75, 1.0);
    CHECK(q.t0 == doctest::Approx(2.0 / 1.75));
    CHECK(q.T_star == doctest::Approx(0.2 * 2.0 / 1.75));
    CHECK(q.T_star_below_loops);
    CHECK(q.C0 >= 2.0 * q.t0);
    const auto p = scaling_quantities(0.25, 2.0);
    CHECK(std::isinf(p.min_tk));
    CHECK(p.T_star == doctest::Approx(0.2 * 1.6 * std::pow(2.0, 1.25)));
}
