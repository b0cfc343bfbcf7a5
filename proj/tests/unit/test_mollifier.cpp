#include <doctest.h>

#include <cmath>

#include "sclab/error.hpp"
#include "sclab/mollifier.hpp"

using namespace sclab;
using namespace sclab::mollifier;

namespace {
const CutoffBank& bank() {
    static const CutoffBank b = build_cutoff_bank();
    return b;
}
}  // namespace

TEST_CASE("cutoff profile") {
    const Profile p;
    CHECK(barchi(p, 0.0) == 1.0);
    CHECK(barchi(p, 0.3) == 1.0);
    CHECK(barchi(p, 1.0) == 0.0);
    CHECK(barchi(p, 0.7) == barchi(p, -0.7));
    CHECK(barchi(p, 0.6) > barchi(p, 0.8));
}

TEST_CASE("Phi values and tail") {
    const auto& b = bank();
    CHECK(b.Phi(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.Phi(1e4) == 1.0);
    CHECK(b.Phi(-1e4) == 0.0);
    CHECK(b.Phi(150.0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::fabs(b.Phi(-20.0)) <= b.C4 * std::pow(21.0, -4));
    CHECK(b.C4 == doctest::Approx(4.305e3).epsilon(1e-3));
    CHECK(b.s_cut == doctest::Approx(147.445).epsilon(1e-4));
    CHECK(b.s_max == 192.0);
    // table agrees with direct quadrature
    for (double s : {-7.3, -1.1, 0.4, 2.9, 13.7})
        CHECK(b.Phi(s) == doctest::Approx(phi_direct(b.profile, s, 1 << 12)).epsilon(1e-10));
    CHECK(b.Phi_slope(0.3) == doctest::Approx(phi_slope_direct(b.profile, 0.3, 1 << 12)).epsilon(1e-8));
    // odd symmetry about 1/2
    CHECK(b.Phi(3.3) + b.Phi(-3.3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bank round trip") {
    const auto& b = bank();
    const auto c = bank_from_json(b.to_json());
    CHECK(c.hash() == b.hash());
    CHECK(c.Phi(1.7) == b.Phi(1.7));
}

TEST_CASE("tauberian single entry and empty summary") {
    const auto& b = bank();
    const double tau = 0.0, T = 1.0, h = 0.1;
    const std::vector<radial::SummaryEntry> one{{tau - 10.0 * h / T, 1.0}};
    CHECK(std::fabs(tauberian_sum(one, tau, T, h, b) - 1.0) <= b.C4 * std::pow(11.0, -4));
    CHECK(tauberian_sum({}, tau, T, h, b) == 0.0);
    radial::SpectralSummary s;
    s.h = h;
    s.tau_max = 100.0;
    CHECK(tauberian_diag(s, tau, T, h, b) == 0.0);
}

TEST_CASE("tauberian approaches the sharp count for separated levels") {
    const auto& b = bank();
    const double g = 1.0, h = 0.01, T = 1.0, tau = 5.5;
    std::vector<radial::SummaryEntry> e;
    for (int j = 0; j < 12; ++j) e.push_back({j * g, 1.0 + 0.1 * j});
    double sharp = 0.0, wsum = 0.0;
    for (const auto& x : e) {
        wsum += x.w;
        if (x.lambda <= tau) sharp += x.w;
    }
    const double bound = wsum * b.C4 * std::pow(T * g / (2.0 * h), -4);
    CHECK(std::fabs(tauberian_sum(e, tau, T, h, b) - sharp) <= bound);
}

TEST_CASE("tauberian_diag margin and completeness") {
    const auto& b = bank();
    radial::SpectralSummary s;
    s.h = 0.1;
    s.tau_max = 1.0;  // margin needs h s_cut / T = 14.7
    s.entries = {{0.0, 1.0}};
    CHECK_THROWS_AS(tauberian_diag(s, 0.0, 1.0, 0.1, b), Error);
    s.tau_max = 20.0;
    s.lambda_lo = -5.0;
    CHECK_THROWS_AS(tauberian_diag(s, 0.0, 1.0, 0.1, b), Error);
    CutoffBank empty;
    s.lambda_lo = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(tauberian_diag(s, 0.0, 1.0, 0.1, empty), Error);
}

TEST_CASE("band difference") {
    const auto& b = bank();
    radial::SpectralSummary s;
    s.h = 0.1;
    s.tau_max = 100.0;
    s.entries = {{-0.3, 1.0}, {0.01, 2.0}, {0.2, 0.5}};
    CHECK(band_difference(s, 0.0, 2.0, 2.0, 0.1, b) == 0.0);
    const double full = tauberian_diag(s, 0.0, 3.0, 0.1, b) - tauberian_diag(s, 0.0, 1.0, 0.1, b);
    CHECK(band_difference(s, 0.0, 3.0, 1.0, 0.1, b) == doctest::Approx(full).epsilon(1e-13));
    // windowed summaries are enough
    s.lambda_lo = -20.0;
    CHECK(band_difference(s, 0.0, 3.0, 1.0, 0.1, b) == doctest::Approx(full).epsilon(1e-13));
    s.lambda_lo = -1.0;
    CHECK_THROWS_AS(band_difference(s, 0.0, 3.0, 1.0, 0.1, b), Error);
}

TEST_CASE("sharpness scan prefers a = 2") {
    const auto sc = scan_sharpness({1.0, 2.0, 4.0});
    CHECK(sc.best == 2.0);
}
