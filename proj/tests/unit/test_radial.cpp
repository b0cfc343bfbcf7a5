#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "sclab/asymptotics.hpp"
#include "sclab/error.hpp"
#include "sclab/grid.hpp"
#include "sclab/radial_spectrum.hpp"
#include "sclab/tridiag.hpp"

using namespace sclab;
using std::numbers::pi;

namespace {

std::vector<double> lowest(const ModelParams& m, int ell, double hi, std::size_t count) {
    const radial::Discretization disc(resolve_grid(m, hi));
    const auto mat = disc.channel_matrix(ell);
    const auto w = tridiag::eigen_window(mat, -1e4, hi, {});
    std::vector<double> v(w.values.begin(), w.values.begin() + std::min(count, w.values.size()));
    return v;
}

}  // namespace

TEST_CASE("angular data") {
    CHECK(nu_ell(3, 0) == 0.0);
    CHECK(nu_ell(2, 0) == doctest::Approx(-0.25));
    CHECK(channel_multiplicity(2, 0) == 1.0);
    CHECK(channel_multiplicity(2, 3) == 2.0);
    CHECK(channel_multiplicity(3, 2) == 5.0);
    CHECK(ball_volume(2) == doctest::Approx(pi));
    CHECK(sphere_area(3) == doctest::Approx(4 * pi));
}

TEST_CASE("effective channel potential") {
    ModelParams m;
    m.alpha = 0.5;
    m.d = 2;
    m.h = 1.0;
    CHECK(radial::effective_channel_potential(m, 1, 1.0) == doctest::Approx(-0.625).epsilon(1e-14));
    ModelParams m3 = m;
    m3.d = 3;
    CHECK(radial::effective_channel_potential(m3, 0, 0.7) == doctest::Approx(potential(m3, 0.7)).epsilon(1e-14));
    CHECK_THROWS_AS(radial::effective_channel_potential(m, 0, 10.0), Error);
}

TEST_CASE("tridiagonal Sturm counts match a dense solve") {
    tridiag::Matrix t;
    const std::size_t n = 50;
    for (std::size_t i = 0; i < n; ++i) t.diag.push_back(2.0);
    for (std::size_t i = 0; i + 1 < n; ++i) t.off.push_back(-1.0);
    // eigenvalues 2 - 2 cos(k pi / (n+1))
    for (std::size_t k = 1; k <= n; ++k) {
        const double lam = 2.0 - 2.0 * std::cos(double(k) * pi / double(n + 1));
        CHECK(tridiag::count_below(t, lam - 1e-9) == k - 1);
        CHECK(tridiag::count_below(t, lam + 1e-9) == k);
    }
    const auto w = tridiag::eigen_window(t, 0.0, 0.5, std::vector<std::size_t>{0, 10});
    for (std::size_t i = 0; i < w.values.size(); ++i)
        CHECK(w.values[i] == doctest::Approx(2.0 - 2.0 * std::cos(double(i + 1) * pi / double(n + 1))).epsilon(1e-13));
}

TEST_CASE("oscillator levels") {
    ModelParams m;
    m.d = 3;
    m.h = 0.1;
    m.L = 10.0;
    m.potential = PotentialKind::Harmonic;
    const auto v = lowest(m, 0, 1.0, 3);
    REQUIRE(v.size() == 3);
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(v[j] / (m.h * (2 * j + 1.5)) - 1.0) <= 1e-3);
}

TEST_CASE("particle in a box") {
    ModelParams m;
    m.d = 3;
    m.h = 0.1;
    m.L = 3.0;
    m.potential = PotentialKind::Free;
    const double len = m.L - inner_radius(m);
    const double top = 0.5 * m.h * m.h * pi * pi * 121.0 / (len * len);
    const auto v = lowest(m, 0, top, 10);
    REQUIRE(v.size() == 10);
    for (int n = 1; n <= 10; ++n) {
        const double ex = 0.5 * m.h * m.h * pi * pi * n * n / (len * len);
        CHECK(std::fabs(v[n - 1] / ex - 1.0) <= 1e-3);
    }
}

TEST_CASE("per-channel counts against the 1D Weyl quadrature") {
    ModelParams m;
    m.alpha = 0.5;
    m.d = 2;
    m.h = 0.1;
    const double tau = 0.0;
    const ModelParams res = resolve_grid(m, tau);
    const radial::Discretization disc(res);
    for (int ell : {0, 1, 3, 8}) {
        const std::size_t count = tridiag::count_below(disc.channel_matrix(ell), tau);
        // (pi h)^{-1} int sqrt(2 (tau - W)_+) dr in ln r
        const double a = std::log(inner_radius(res)), b = std::log(res.L);
        const int K = 200000;
        double acc = 0.0;
        for (int i = 0; i < K; ++i) {
            const double r = std::exp(a + (b - a) * (i + 0.5) / K);
            const double W = radial::effective_channel_potential(res, ell, r);
            if (W < tau) acc += std::sqrt(2.0 * (tau - W)) * r;
        }
        const double weyl = acc * (b - a) / K / (pi * m.h);
        CHECK(std::fabs(double(count) - weyl) <= 2.0);
    }
}

TEST_CASE("spectral summary against the Weyl term") {
    ModelParams m;
    m.alpha = 0.5;
    m.d = 2;
    m.h = 0.1;
    const auto s = radial::spectral_summary(m, {1.0, 0.0}, 0.0);
    CHECK(s.complete_below());
    const double w = asymptotics::weyl_diag(2, 0.1, 0.0, -1.0);
    CHECK(std::fabs(radial::sharp_count(s, 0.0) / w - 1.0) <= 0.15);
    CHECK(std::fabs(s.total_weight() / w - 1.0) <= 0.15);
    // monotone in tau and zero below the ground state
    CHECK(radial::sharp_count(s, -1e6) == 0.0);
    double prev = 0.0;
    for (double t = -50.0; t <= 0.0; t += 5.0) {
        const double c = radial::sharp_count(s, t);
        CHECK(c >= prev);
        prev = c;
    }
    // empty window
    const auto e = radial::spectral_summary(m, {1.0, 0.0}, -1e4);
    CHECK(e.entries.empty());
    // tighter truncation changes little
    radial::SolveOptions tight;
    tight.trunc_eps = 1e-13;
    const auto s2 = radial::spectral_summary(m, {1.0, 0.0}, 0.0, tight);
    CHECK(s2.ell_max_used >= s.ell_max_used);
    CHECK(std::fabs(s2.total_weight() - s.total_weight()) <= 1e-6 * s.total_weight());
}

TEST_CASE("sharp count refuses windowed summaries") {
    ModelParams m;
    m.alpha = 0.5;
    m.h = 0.2;
    radial::SolveOptions o;
    o.lambda_lo = -5.0;
    const auto s = radial::spectral_summary(m, {1.0, 0.0}, 0.0, o);
    CHECK_FALSE(s.complete_below());
    CHECK_THROWS_AS(radial::sharp_count(s, 0.0), Error);
}

TEST_CASE("warm cache equals cold cache") {
    const auto dir = std::filesystem::temp_directory_path() / "sclab-unit-cache";
    std::filesystem::remove_all(dir);
    ModelParams m;
    m.alpha = 0.5;
    m.h = 0.2;
    radial::SpectrumCache c1(dir.string());
    const auto a = radial::spectral_summary(m, {1.0, 0.0}, 0.5, {}, &c1);
    radial::SpectrumCache c2(dir.string());
    const auto b = radial::spectral_summary(m, {1.0, 0.0}, 0.5, {}, &c2);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].lambda == b.entries[i].lambda);
        CHECK(a.entries[i].w == b.entries[i].w);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("explicit grids below the wavelength rule are rejected") {
    ModelParams m;
    m.h = 0.05;
    m.grid.N = 50;
    CHECK_THROWS_AS(resolve_grid(m, 0.0), Error);
}
