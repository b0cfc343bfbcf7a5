#include <doctest.h>

#include <filesystem>
#include <string>

#include "sclab/error.hpp"
#include "sclab/expcli.hpp"
#include "sclab/io.hpp"

using namespace sclab;
using namespace sclab::expcli;

namespace {

std::string config_error_of(const std::string& text) {
    try {
        validate(parse_config(text));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Config);
        return e.what();
    }
    return "";
}

std::filesystem::path tmp(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sclab-unit-" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = parse_config(R"(# weyl sweep
[experiment]
kind = weyl-sweep
id = w05
[model]
alpha = 0.5
d = 2
grid = adapted
[sweep]
h = [0.2, 0.14, 0.1, 0.07, 0.05]
r = 1
[envelope]
ids = E1.13, E1.14
[run]
workers = 2
)");
    CHECK(cfg.kind == "weyl-sweep");
    CHECK(cfg.id == "w05");
    CHECK(cfg.model.grid.kind == GridKind::Adapted);
    CHECK(cfg.h.size() == 5);
    CHECK(cfg.h[4] == 0.05);
    CHECK(cfg.envelopes.size() == 2);
    CHECK(cfg.workers == 2);
    CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("config errors name the field") {
    CHECK(config_error_of("[experiment]\nkind = weyl-sweep\n").find("sweep.h") != std::string::npos);
    CHECK(config_error_of("[experiment]\nkind = weyl-sweep\n[sweep]\nh = 0.1, 0.2\n").find("sweep.h") !=
          std::string::npos);
    CHECK(config_error_of("[experiment]\nkind = nope\n").find("experiment.kind") != std::string::npos);
    CHECK(config_error_of("[model]\nalpha = x\n").find("model.alpha") != std::string::npos);
    CHECK(config_error_of("[model]\nfoo = 1\n").find("model.foo") != std::string::npos);
    CHECK(config_error_of("[bogus]\nfoo = 1\n").find("bogus") != std::string::npos);
    CHECK(config_error_of("[experiment]\nkind = band-sweep\n[sweep]\nh = 0.1\n[envelope]\nids = E7\n")
              .find("envelope.ids") != std::string::npos);
    CHECK(config_error_of("[experiment]\nkind = phase-scan\n[sweep]\nh = 0.1, 0.05\n").find("64") !=
          std::string::npos);
    CHECK(config_error_of("[experiment]\nkind = perturb-sweep\n[sweep]\nh = 0.1\n").find("sweep.a_pot") !=
          std::string::npos);
}

TEST_CASE("overrides and hashing") {
    ExperimentConfig cfg = parse_config("[experiment]\nkind = spectrum\n[sweep]\nh = 0.2\n");
    const std::string h0 = config_hash(cfg);
    apply_override(cfg, "run.out=/tmp/elsewhere");
    apply_override(cfg, "run.workers=3");
    CHECK(config_hash(cfg) == h0);
    apply_override(cfg, "model.alpha=0.6");
    CHECK(cfg.model.alpha == 0.6);
    CHECK(config_hash(cfg) != h0);
    CHECK_THROWS_AS(apply_override(cfg, "model.alpha"), Error);
    CHECK_THROWS_AS(apply_override(cfg, "model.nothing=1"), Error);
}

TEST_CASE("sweep helpers") {
    const auto g = geometric_h(0.2, 0.05, 5);
    CHECK(g.front() == 0.2);
    CHECK(g.back() == 0.05);
    CHECK(g[2] == doctest::Approx(0.1).epsilon(1e-14));
    const auto u = inverse_uniform_h(40.0, 200.0, 64);
    CHECK(u.size() == 64);
    CHECK(1.0 / u[1] - 1.0 / u[0] == doctest::Approx(160.0 / 63.0));
    CHECK_THROWS_AS(geometric_h(0.05, 0.2, 3), Error);
}

TEST_CASE("classical run writes catalog and table") {
    const auto dir = tmp("classical");
    ExperimentConfig cfg = parse_config("[experiment]\nkind = classical\n[sweep]\nalpha = 0.25, 0.5, 0.6, 0.75, 0.8, 0.875\n");
    cfg.out = dir.string();
    const auto r = run(cfg);
    CHECK(r.failures == 0);
    CHECK(r.rows == 6);
    const auto cat = nlohmann::json::parse(io::read_file((dir / "classical" / "catalog.json").string()));
    const std::vector<int> n{0, 0, 1, 1, 2, 3};
    REQUIRE(cat.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(cat[i]["n"] == n[i]);
    CHECK(std::filesystem::exists(dir / "classical" / "trajectory-0.csv"));
    CHECK(std::filesystem::exists(dir / "classical" / "manifest.json"));
    const auto again = run(cfg);
    CHECK(again.table == r.table);
    std::filesystem::remove_all(dir);
}

TEST_CASE("fail-soft accounting") {
    const auto dir = tmp("failsoft");
    // an explicit grid that is too coarse for the smaller h fails that point only
    ExperimentConfig cfg = parse_config("[experiment]\nkind = spectrum\nid = fs\n[model]\nN = 1000\n[sweep]\nh = 0.3, 0.02\n[run]\ntau = -0.5\n");
    cfg.out = dir.string();
    const auto r = run(cfg);
    CHECK(r.failures == 1);
    CHECK(r.rows == 1);
    CHECK(r.manifest["failures"] == 1);
    CHECK(r.manifest["points"][1]["ok"] == false);
    std::filesystem::remove_all(dir);
}
