#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sclab/error.hpp"
#include "sclab/expcli.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::string cache;
    int workers = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "experiment file (INI sections)");
    sub->add_option("--out", c.out, "output root; results go to <out>/<id>");
    sub->add_option("--workers", c.workers, "worker threads over sweep points")->check(CLI::PositiveNumber);
    sub->add_option("--cache", c.cache, "spectrum cache directory (default: $SCLAB_CACHE)");
    sub->add_option("--set", c.overrides, "override section.key=value (repeatable)");
}

int execute(const std::string& kind, const Common& c) {
    using namespace sclab::expcli;
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (!kind.empty()) {
        if (!c.config.empty() && !cfg.kind.empty() && cfg.kind != kind)
            sclab::fail(sclab::ErrorCode::Config,
                        "experiment.kind: config says '" + cfg.kind + "' but the subcommand is '" + kind + "'");
        if (cfg.id.empty() || cfg.id == cfg.kind) cfg.id = kind;
        cfg.kind = kind;
    }
    if (const char* env = std::getenv("SCLAB_CACHE"); env && cfg.cache.empty()) cfg.cache = env;
    for (const auto& o : c.overrides) apply_override(cfg, o);
    if (!c.out.empty()) cfg.out = c.out;
    if (!c.cache.empty()) cfg.cache = c.cache;
    if (c.workers > 0) cfg.workers = c.workers;
    const RunResult r = run(cfg);
    std::cout << r.dir << ": " << r.rows << " rows, " << r.failures << " failures\n";
    for (const auto& p : r.manifest["points"])
        if (!p["ok"].get<bool>()) std::cerr << "failed " << p["params"].dump() << ": " << p["error"].get<std::string>() << "\n";
    return r.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical spectral experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", sclab::expcli::code_version());
    Common common;
    std::string chosen;
    for (const auto& k : sclab::expcli::experiment_kinds()) {
        auto* sub = app.add_subcommand(k, "run a " + k + " experiment");
        add_common(sub, common);
        sub->callback([&chosen, k] { chosen = k; });
    }
    auto* runsub = app.add_subcommand("run", "run the experiment named by the config file");
    add_common(runsub, common);
    runsub->callback([&chosen] { chosen = ""; });
    runsub->get_option("--config")->required();
    CLI11_PARSE(app, argc, argv);
    try {
        return execute(chosen, common);
    } catch (const sclab::Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == sclab::ErrorCode::Config ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
}
