#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sclab/asymptotics.hpp"
#include "sclab/error.hpp"
#include "sclab/grid.hpp"
#include "sclab/mollifier.hpp"
#include "sclab/perturb.hpp"

using namespace sclab;
using namespace sclab::perturb;

namespace {
ModelParams base(double h) {
    ModelParams m;
    m.alpha = 0.5;
    m.d = 2;
    m.h = h;
    return m;
}
}  // namespace

TEST_CASE("zero perturbation reproduces the reference coefficients") {
    const ModelParams m = base(0.1);
    const auto c = perturbed_channel_coefficients({}, m, 2);
    REQUIRE(!c.r.empty());
    for (std::size_t i = 0; i < c.r.size(); i += 97) {
        const double r = c.r[i];
        CHECK(c.p[i] == 1.0);
        CHECK(c.q[i] == doctest::Approx(0.5 * m.h * m.h * nu_ell(2, 2) / (r * r) - std::pow(r, -1.0)).epsilon(1e-15));
    }
}

TEST_CASE("potential amplitude shifts q") {
    const ModelParams m = base(0.1);
    PerturbationSpec s;
    s.a_pot = 0.1;
    const auto c0 = perturbed_channel_coefficients({}, m, 1);
    const auto c1 = perturbed_channel_coefficients(s, m, 1);
    REQUIRE(c0.r.size() == c1.r.size());
    for (std::size_t i = 0; i < c0.r.size(); i += 53) {
        const double r = c0.r[i];
        CHECK(std::fabs(c1.q[i] - c0.q[i] + 0.1 * std::pow(r, 1.0 - 1.0) * cutoff_psi(r)) <=
              1e-14 * std::max(1.0, std::fabs(c0.q[i])));
    }
}

TEST_CASE("non-elliptic metric") {
    PerturbationSpec s;
    s.a_met = -2.0;
    CHECK_THROWS_AS(perturbed_channel_coefficients(s, base(0.1), 0), Error);
    try {
        perturbed_channel_coefficients(s, base(0.1), 0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonElliptic);
    }
}

TEST_CASE("matched grids") {
    PerturbationSpec s;
    s.a_pot = 0.05;
    s.a_met = 0.1;
    const auto mp = matched_pair(base(0.1), s, 0.0);
    CHECK_NOTHROW(check_matched(mp.reference, mp.perturbed));
    ModelParams other = mp.perturbed;
    other.grid.N += 1;
    try {
        check_matched(mp.reference, other);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridMismatch);
    }
}

TEST_CASE("zero spec gives zero differences") {
    const auto bank = mollifier::build_cutoff_bank();
    const ModelParams m = base(0.2);
    const double T = asymptotics::scaling_quantities(0.5, 1.0).T_star;
    const auto mp = matched_pair(m, {}, mollifier::margin(bank, T, m.h));
    const auto d = difference_diag(mp.reference, mp.perturbed, {1.0, 0.0}, 0.0, bank);
    CHECK(d.e_diff == 0.0);
    CHECK(d.tauberian_diff == 0.0);
    CHECK(d.weyl_diff == 0.0);
    CHECK(d.e_ref > 0.0);
    const auto n = near_origin_sup(m, {}, 0.0, 4);
    CHECK(n.sup_diff == 0.0);
    CHECK(n.probes.back() == doctest::Approx(n.r_bar));
}

TEST_CASE("perturbed Weyl term uses the metric determinant") {
    ModelParams m = perturbed_model(base(0.1), {1.0, 0.0, 0.2});
    const double c = 1.0 + 0.2 * 0.5;
    CHECK(weyl_perturbed(m, {0.5, 0.0}, 0.0) ==
          doctest::Approx(asymptotics::weyl_diag(2, 0.1, 0.0, -std::pow(0.5, -1.0), c * c)).epsilon(1e-14));
}

TEST_CASE("c_sigma constants") {
    PerturbationSpec s;
    s.beta = 1.5;
    s.a_pot = 0.3;
    s.a_met = 0.1;
    const auto rep = c_sigma_check(s, 0.5, 1.0);
    CHECK(rep.max_mismatch <= 1e-8);
    CHECK(rep.pot_symbolic[0] == doctest::Approx(1.0));
    CHECK(rep.met_symbolic[1] == doctest::Approx(0.1 * 1.5 / 0.3));
    const auto far = c_sigma_check(s, 0.5, 2.5, 4);
    CHECK(far.pot_numeric.size() == 5);
    CHECK_THROWS_AS(c_sigma_check(s, 0.5, 1.0, 9), Error);
}
