#include "sclab/expcli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sclab/asymptotics.hpp"
#include "sclab/classical.hpp"
#include "sclab/error.hpp"
#include "sclab/io.hpp"
#include "sclab/perturb.hpp"

#ifndef SCLAB_VERSION
#define SCLAB_VERSION "0.0.0"
#endif

namespace sclab::expcli {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
    fail(ErrorCode::Config, field + ": " + msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string t = s.substr(b, e - b + 1);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
    return t;
}

double parse_double(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        config_error(field, "'" + s + "' is not a number");
    return v;
}

long parse_long(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        config_error(field, "'" + s + "' is not an integer");
    return v;
}

std::size_t parse_count(const std::string& field, const std::string& raw) {
    const long v = parse_long(field, raw);
    if (v < 0) config_error(field, "must be nonnegative");
    return std::size_t(v);
}

bool parse_bool(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    config_error(field, "'" + s + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& raw) {
    std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') s.erase(s.begin());
    if (!s.empty() && s.back() == ']') s.pop_back();
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

std::vector<double> parse_list(const std::string& field, const std::string& raw) {
    std::vector<double> v;
    for (const auto& t : split_list(raw)) v.push_back(parse_double(field, t));
    return v;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"experiment.kind", [](auto& c, auto&, auto& v) { c.kind = trim(v); }},
        {"experiment.id", [](auto& c, auto&, auto& v) { c.id = trim(v); }},
        {"model.alpha", [](auto& c, auto& f, auto& v) { c.model.alpha = parse_double(f, v); }},
        {"model.d", [](auto& c, auto& f, auto& v) { c.model.d = int(parse_long(f, v)); }},
        {"model.h", [](auto& c, auto& f, auto& v) { c.model.h = parse_double(f, v); }},
        {"model.L", [](auto& c, auto& f, auto& v) { c.model.L = parse_double(f, v); }},
        {"model.r_inner", [](auto& c, auto& f, auto& v) { c.model.r_inner = parse_double(f, v); }},
        {"model.eta", [](auto& c, auto& f, auto& v) { c.model.eta = parse_double(f, v); }},
        {"model.v_shift", [](auto& c, auto& f, auto& v) { c.model.v_shift = parse_double(f, v); }},
        {"model.potential",
         [](auto& c, auto& f, auto& v) {
             try {
                 c.model.potential = potential_from_name(trim(v));
             } catch (const Error& e) {
                 config_error(f, e.what());
             }
         }},
        {"model.grid",
         [](auto& c, auto& f, auto& v) {
             try {
                 c.model.grid.kind = grid_kind_from_name(trim(v));
             } catch (const Error& e) {
                 config_error(f, e.what());
             }
         }},
        {"model.N", [](auto& c, auto& f, auto& v) { c.model.grid.N = parse_count(f, v); }},
        {"model.points_per_wavelength",
         [](auto& c, auto& f, auto& v) { c.model.grid.points_per_wavelength = parse_double(f, v); }},
        {"model.knee", [](auto& c, auto& f, auto& v) { c.model.grid.knee = parse_double(f, v); }},
        {"model.sigma", [](auto& c, auto& f, auto& v) { c.model.grid.sigma = parse_double(f, v); }},
        {"sweep.h", [](auto& c, auto& f, auto& v) { c.h = parse_list(f, v); }},
        {"sweep.h_geometric",
         [](auto& c, auto& f, auto& v) {
             const auto p = parse_list(f, v);
             if (p.size() != 3) config_error(f, "expected h_max, h_min, count");
             if (p[2] < 1 || p[2] != std::floor(p[2])) config_error(f, "count must be a positive integer");
             try {
                 c.h = geometric_h(p[0], p[1], std::size_t(p[2]));
             } catch (const Error& e) {
                 config_error(f, e.what());
             }
         }},
        {"sweep.inv_h_uniform",
         [](auto& c, auto& f, auto& v) {
             const auto p = parse_list(f, v);
             if (p.size() != 3) config_error(f, "expected u_min, u_max, count");
             if (p[2] < 1 || p[2] != std::floor(p[2])) config_error(f, "count must be a positive integer");
             try {
                 c.h = inverse_uniform_h(p[0], p[1], std::size_t(p[2]));
             } catch (const Error& e) {
                 config_error(f, e.what());
             }
         }},
        {"sweep.r", [](auto& c, auto& f, auto& v) { c.r = parse_list(f, v); }},
        {"sweep.alpha", [](auto& c, auto& f, auto& v) { c.alpha = parse_list(f, v); }},
        {"sweep.a_pot", [](auto& c, auto& f, auto& v) { c.a_pot = parse_list(f, v); }},
        {"bank.sharpness", [](auto& c, auto& f, auto& v) { c.bank.sharpness = parse_double(f, v); }},
        {"envelope.ids", [](auto& c, auto&, auto& v) { c.envelopes = split_list(v); }},
        {"perturbation.beta", [](auto& c, auto& f, auto& v) { c.pert.beta = parse_double(f, v); }},
        {"perturbation.a_pot", [](auto& c, auto& f, auto& v) { c.pert.a_pot = parse_double(f, v); }},
        {"perturbation.a_met", [](auto& c, auto& f, auto& v) { c.pert.a_met = parse_double(f, v); }},
        {"run.tau", [](auto& c, auto& f, auto& v) { c.tau = parse_double(f, v); }},
        {"run.delta", [](auto& c, auto& f, auto& v) { c.delta = parse_double(f, v); }},
        {"run.tol", [](auto& c, auto& f, auto& v) { c.tol = parse_double(f, v); }},
        {"run.T", [](auto& c, auto& f, auto& v) { c.T = parse_double(f, v); }},
        {"run.T_prime", [](auto& c, auto& f, auto& v) { c.T_prime = parse_double(f, v); }},
        {"run.windowed", [](auto& c, auto& f, auto& v) { c.windowed = parse_bool(f, v); }},
        {"run.probes", [](auto& c, auto& f, auto& v) { c.probes = parse_count(f, v); }},
        {"run.f_center", [](auto& c, auto& f, auto& v) { c.f_center = parse_double(f, v); }},
        {"run.out", [](auto& c, auto&, auto& v) { c.out = trim(v); }},
        {"run.cache", [](auto& c, auto&, auto& v) { c.cache = trim(v); }},
        {"run.workers", [](auto& c, auto& f, auto& v) { c.workers = int(parse_long(f, v)); }},
    };
    return table;
}

void set_field(ExperimentConfig& cfg, const std::string& field, const std::string& value) {
    const auto& t = setters();
    const auto it = t.find(field);
    if (it == t.end()) config_error(field, "unknown key");
    it->second(cfg, field, value);
}

bool uniform_in_inverse(const std::vector<double>& h) {
    if (h.size() < 3) return true;
    const double du = (1.0 / h.back() - 1.0 / h.front()) / double(h.size() - 1);
    for (std::size_t i = 0; i < h.size(); ++i)
        if (std::fabs(1.0 / h[i] - (1.0 / h.front() + du * double(i))) > 1e-6 * du) return false;
    return true;
}

bool kind_uses_h(const std::string& k) { return k != "classical"; }
bool kind_uses_bank(const std::string& k) {
    return k == "weyl-sweep" || k == "band-sweep" || k == "perturb-sweep" || k == "phase-scan";
}

std::string default_envelope(const std::string& k) {
    if (k == "weyl-sweep") return "E1.13";
    if (k == "band-sweep" || k == "phase-scan") return "E1.8";
    if (k == "perturb-sweep") return "E3.25";
    if (k == "near-origin") return "E3.26";
    return "";
}

std::vector<double> probe_point(int d, double r) {
    std::vector<double> x(std::size_t(d), 0.0);
    x[0] = r;
    return x;
}

// key used to group points that share everything but h
std::string group_key(const json& p) {
    json g = p;
    g.erase("h");
    return g.dump();
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k = {"classical",     "spectrum",    "weyl-sweep", "band-sweep",
                                               "perturb-sweep", "near-origin", "phase-scan"};
    return k;
}

ExperimentConfig parse_config(const std::string& text) {
    // '#' comments are accepted alongside ';'
    std::string cleaned;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        const std::string t = trim(line);
        if (!t.empty() && t[0] == '#') continue;
        cleaned += line + "\n";
    }
    boost::property_tree::ptree pt;
    try {
        std::istringstream in(cleaned);
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorCode::Config, std::string("line ") + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig cfg;
    static const std::set<std::string> sections = {"experiment", "model",        "sweep", "bank",
                                                   "envelope",   "perturbation", "run"};
    for (const auto& [sec, body] : pt) {
        if (body.empty()) config_error(sec, "key outside a section");
        if (!sections.count(sec)) config_error(sec, "unknown section");
        for (const auto& [key, val] : body) set_field(cfg, sec + "." + key, val.data());
    }
    if (cfg.id.empty()) cfg.id = cfg.kind;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::Config, "cannot read config '" + path + "'");
    }
    return parse_config(text);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) config_error(assignment, "override must read section.key=value");
    set_field(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void validate(const ExperimentConfig& cfg) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        config_error("experiment.kind", "'" + cfg.kind + "' is not a known kind");
    if (cfg.id.empty()) config_error("experiment.id", "empty");
    for (char c : cfg.id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            config_error("experiment.id", "only letters, digits, '-', '_' and '.' are allowed");
    if (kind_uses_h(cfg.kind)) {
        if (cfg.h.empty()) config_error("sweep.h", "empty list");
        for (std::size_t i = 0; i < cfg.h.size(); ++i) {
            if (!(cfg.h[i] > 0.0)) config_error("sweep.h", "values must be positive");
            if (i > 0 && !(cfg.h[i] < cfg.h[i - 1])) config_error("sweep.h", "values must be strictly decreasing");
        }
    }
    if (cfg.r.empty()) config_error("sweep.r", "empty list");
    for (double r : cfg.r)
        if (!(r > 0.0)) config_error("sweep.r", "values must be positive");
    for (double a : cfg.alpha)
        if (!(a > 0.0 && a < 1.0)) config_error("sweep.alpha", "values must lie in (0, 1)");
    const auto& ids = asymptotics::envelope_ids();
    for (const auto& e : cfg.envelopes)
        if (std::find(ids.begin(), ids.end(), e) == ids.end())
            config_error("envelope.ids", "'" + e + "' is not a known envelope");
    if (!(cfg.bank.sharpness > 0.0)) config_error("bank.sharpness", "must be positive");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0 / 3.0)) config_error("run.delta", "must lie in (0, 1/3)");
    if (!(cfg.tol > 0.0)) config_error("run.tol", "must be positive");
    if (cfg.T < 0.0) config_error("run.T", "must be nonnegative");
    if (cfg.T_prime < 0.0) config_error("run.T_prime", "must be nonnegative");
    if (cfg.f_center < 0.0) config_error("run.f_center", "must be nonnegative");
    if (cfg.workers < 1) config_error("run.workers", "must be at least 1");
    if (cfg.out.empty()) config_error("run.out", "empty");
    if (cfg.kind == "perturb-sweep" && cfg.a_pot.empty()) config_error("sweep.a_pot", "empty list");
    if (cfg.kind == "near-origin" && cfg.probes < 2) config_error("run.probes", "need at least two probes");
    if (cfg.kind == "phase-scan") {
        if (cfg.h.size() < 64) config_error("sweep.h", "phase scans need at least 64 points");
        if (!uniform_in_inverse(cfg.h)) config_error("sweep.h", "phase scans need points uniform in 1/h");
    }
    if (cfg.kind == "classical") {
        const std::vector<double> al = cfg.alpha.empty() ? std::vector<double>{cfg.model.alpha} : cfg.alpha;
        for (double a : al)
            if (!(a > 0.0 && a < 1.0)) config_error("model.alpha", "must lie in (0, 1)");
        return;
    }
    ModelParams m = cfg.model;
    m.h = cfg.h.front();
    if (!cfg.alpha.empty()) m.alpha = cfg.alpha.front();
    if (cfg.kind == "perturb-sweep" || cfg.kind == "near-origin") {
        m.potential = PotentialKind::Perturbed;
        m.pert = cfg.pert;
        if (cfg.kind == "perturb-sweep") m.pert.a_pot = cfg.a_pot.front();
    }
    try {
        sclab::validate(m);
    } catch (const Error& e) {
        config_error("model", e.what());
    }
}

json to_json(const ExperimentConfig& cfg) {
    return {{"kind", cfg.kind},
            {"id", cfg.id},
            {"model", io::to_json(cfg.model)},
            {"h", cfg.h},
            {"r", cfg.r},
            {"alpha", cfg.alpha},
            {"bank", {{"sharpness", cfg.bank.sharpness}}},
            {"envelopes", cfg.envelopes},
            {"perturbation", io::to_json(cfg.pert)},
            {"a_pot", cfg.a_pot},
            {"tau", cfg.tau},
            {"delta", cfg.delta},
            {"tol", cfg.tol},
            {"T", cfg.T},
            {"T_prime", cfg.T_prime},
            {"windowed", cfg.windowed},
            {"probes", cfg.probes},
            {"f_center", cfg.f_center},
            {"out", cfg.out},
            {"cache", cfg.cache},
            {"workers", cfg.workers}};
}

std::string config_hash(const ExperimentConfig& cfg) {
    // execution-only fields do not change results
    json j = to_json(cfg);
    j.erase("out");
    j.erase("cache");
    j.erase("workers");
    return io::sha256_hex(j.dump());
}

std::vector<double> geometric_h(double h_max, double h_min, std::size_t count) {
    require(h_max > h_min && h_min > 0.0 && count >= 2, ErrorCode::Config, "need h_max > h_min > 0 and count >= 2");
    std::vector<double> h(count);
    for (std::size_t i = 0; i < count; ++i)
        h[i] = h_max * std::pow(h_min / h_max, double(i) / double(count - 1));
    h.back() = h_min;
    return h;
}

std::vector<double> inverse_uniform_h(double u_min, double u_max, std::size_t count) {
    require(u_max > u_min && u_min > 0.0 && count >= 2, ErrorCode::Config, "need u_max > u_min > 0 and count >= 2");
    std::vector<double> h(count);
    for (std::size_t i = 0; i < count; ++i) h[i] = 1.0 / (u_min + (u_max - u_min) * double(i) / double(count - 1));
    return h;
}

std::string code_version() { return SCLAB_VERSION; }

std::string summary_csv(const radial::SpectralSummary& s) {
    io::CsvWriter w({"lambda", "w"});
    for (const auto& e : s.entries) w.row(std::vector<double>{e.lambda, e.w});
    return w.str();
}

WeylPoint weyl_point(const ModelParams& m, double r, double tau, const mollifier::CutoffBank& bank,
                     const radial::SolveOptions& solve, radial::SpectrumCache* cache) {
    WeylPoint p;
    p.T_star = asymptotics::scaling_quantities(m.alpha, r).T_star;
    radial::SolveOptions so = solve;
    so.lambda_lo = -std::numeric_limits<double>::infinity();
    const double tau_max = tau + mollifier::margin(bank, p.T_star, m.h);
    const auto s = radial::spectral_summary(m, probe_point(m.d, r), tau_max, so, cache);
    p.sharp = radial::sharp_count(s, tau);
    p.tauberian = mollifier::tauberian_diag(s, tau, p.T_star, m.h, bank);
    p.weyl = asymptotics::weyl_diag(m.d, m.h, tau, potential(m, r), std::pow(metric(m, r), m.d));
    p.entries = s.entries.size();
    p.ell_max = s.ell_max_used;
    return p;
}

BandPoint band_point(const ModelParams& m, double r, double tau, const mollifier::CutoffBank& bank, double T,
                     double T_prime, bool windowed, const radial::SolveOptions& solve, radial::SpectrumCache* cache) {
    const auto sq = asymptotics::scaling_quantities(m.alpha, r);
    BandPoint p;
    p.T = T > 0.0 ? T : sq.C0;
    p.T_prime = T_prime > 0.0 ? T_prime : sq.T_star;
    const double mg = mollifier::margin(bank, std::min(p.T, p.T_prime), m.h);
    radial::SolveOptions so = solve;
    so.lambda_lo = windowed ? tau - mg : -std::numeric_limits<double>::infinity();
    const auto s = radial::spectral_summary(m, probe_point(m.d, r), tau + mg, so, cache);
    p.band = mollifier::band_difference(s, tau, p.T, p.T_prime, m.h, bank);
    p.entries = s.entries.size();
    return p;
}

namespace {

struct Task {
    json params;
    std::function<json(json& files)> fn;  // returns raw values
};

struct Outcome {
    PointRecord rec;
    json values;
    json files = json::object();
};

std::vector<Outcome> execute(std::vector<Task>& tasks, int workers) {
    std::vector<Outcome> out(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
            Outcome& o = out[i];
            o.rec.params = tasks[i].params;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                o.values = tasks[i].fn(o.files);
                o.rec.ok = true;
            } catch (const std::exception& e) {
                o.rec.ok = false;
                o.rec.error = e.what();
            }
            o.rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const int n = std::max(1, std::min<int>(workers, int(tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

std::vector<std::string> cells(const std::vector<double>& v) {
    std::vector<std::string> c;
    for (double x : v) c.push_back(io::fmt(x));
    return c;
}

double envelope_shape(const std::string& id, const ExperimentConfig& cfg, double h, double alpha, double r,
                      std::optional<double> eps) {
    const auto env = asymptotics::make_envelope(id, cfg.model.d, alpha, cfg.pert.beta);
    const auto sc = asymptotics::scale_set(h, alpha, r, cfg.pert.beta, cfg.delta);
    return asymptotics::envelope_value(env, sc, eps, {{"C", 1.0}});
}

// observable / envelope, normalized by its value at the coarsest h of the group
std::vector<double> normalized_ratios(const std::vector<Outcome>& o, const std::vector<double>& obs,
                                      const std::vector<double>& env) {
    std::map<std::string, std::pair<double, double>> ref;  // group -> (h, obs/env)
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!o[i].rec.ok) continue;
        const std::string g = group_key(o[i].rec.params);
        const double h = o[i].rec.params["h"];
        auto it = ref.find(g);
        if (it == ref.end() || h > it->second.first) ref[g] = {h, obs[i] / env[i]};
    }
    std::vector<double> ratio(o.size(), 0.0);
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!o[i].rec.ok) continue;
        const double c = ref[group_key(o[i].rec.params)].second;
        ratio[i] = c > 0.0 ? (obs[i] / env[i]) / c : 0.0;
    }
    return ratio;
}

json fit_json(const std::vector<std::pair<double, double>>& pts) {
    try {
        const auto f = asymptotics::exponent_fit(pts);
        return {{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_slope}, {"n", f.n}};
    } catch (const Error& e) {
        return {{"error", e.what()}};
    }
}

std::vector<double> alphas_of(const ExperimentConfig& cfg) {
    return cfg.alpha.empty() ? std::vector<double>{cfg.model.alpha} : cfg.alpha;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::string& kind = cfg.kind;
    std::unique_ptr<radial::SpectrumCache> cache;
    if (!cfg.cache.empty()) cache = std::make_unique<radial::SpectrumCache>(cfg.cache);
    radial::SpectrumCache* cp = cache.get();
    mollifier::CutoffBank bank;
    if (kind_uses_bank(kind)) bank = mollifier::build_cutoff_bank(cfg.bank);
    const radial::SolveOptions solve;
    const std::string env_id = cfg.envelopes.empty() ? default_envelope(kind) : cfg.envelopes.front();

    std::vector<Task> tasks;
    const auto alphas = alphas_of(cfg);
    auto model_at = [&](double alpha, double h) {
        ModelParams m = cfg.model;
        m.alpha = alpha;
        m.h = h;
        return m;
    };

    if (kind == "classical") {
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double a = alphas[i];
            tasks.push_back({{{"alpha", a}}, [a, i, &cfg](json& files) {
                                 const auto g = classical::geometry_check(a, cfg.tol);
                                 const auto dyn = classical::DynParams::make(a);
                                 files["trajectory-" + std::to_string(i) + ".csv"] = classical::trajectory_csv(dyn, g.orbit);
                                 const auto loops = classical::loop_polylines(a, 1.0, 400);
                                 if (!loops.empty()) {
                                     io::CsvWriter w({"curve", "x1", "x2"});
                                     for (std::size_t c = 0; c < loops.size(); ++c)
                                         for (const auto& p : loops[c]) w.row(std::vector<double>{double(c), p[0], p[1]});
                                     files["loops-" + std::to_string(i) + ".csv"] = w.str();
                                 }
                                 return json{{"n", g.count.n},
                                             {"degenerate", g.count.degenerate},
                                             {"intersections", g.intersections},
                                             {"angle_error", g.angle_error},
                                             {"H_drift", g.H_drift},
                                             {"M_drift", g.M_drift},
                                             {"residual", g.residual},
                                             {"t_rel_err", g.t_rel_err},
                                             {"s_rel_err", g.s_rel_err},
                                             {"loop_miss", g.loop_miss},
                                             {"pericenter_time", g.pericenter_time},
                                             {"pericenter_target", g.pericenter_target},
                                             {"catalog", classical::catalog_json(classical::loop_catalog(a))}};
                             }});
        }
    } else if (kind == "perturb-sweep") {
        for (double a : alphas)
            for (double r : cfg.r)
                for (double ap : cfg.a_pot)
                    for (double h : cfg.h) {
                        const ModelParams base = model_at(a, h);
                        PerturbationSpec ps = cfg.pert;
                        ps.a_pot = ap;
                        tasks.push_back({{{"alpha", a}, {"r", r}, {"a_pot", ap}, {"h", h}},
                                         [=, &bank, &cfg](json&) {
                                             const double T = cfg.T > 0.0
                                                                  ? cfg.T
                                                                  : asymptotics::scaling_quantities(a, r).T_star;
                                             const double Tmin = cfg.T_prime > 0.0 ? std::min(T, cfg.T_prime) : T;
                                             const double tau_max = cfg.tau + mollifier::margin(bank, Tmin, h);
                                             const auto mp = perturb::matched_pair(base, ps, tau_max);
                                             perturb::DifferenceOptions o;
                                             o.T = T;
                                             o.T_prime = cfg.T_prime;
                                             o.solve = solve;
                                             o.cache = cp;
                                             const auto d = perturb::difference_diag(mp.reference, mp.perturbed,
                                                                                     probe_point(base.d, r), cfg.tau,
                                                                                     bank, o);
                                             json v = perturb::to_json(d);
                                             v["T"] = T;
                                             v["N"] = mp.reference.grid.N;
                                             return v;
                                         }});
                    }
    } else {
        for (double a : alphas)
            for (double r : cfg.r)
                for (double h : cfg.h) {
                    const ModelParams m = model_at(a, h);
                    json params = {{"alpha", a}, {"r", r}, {"h", h}};
                    if (kind == "spectrum") {
                        const std::size_t idx = tasks.size();
                        tasks.push_back({params, [=, &cfg](json& files) {
                                             const auto s = radial::spectral_summary(m, probe_point(m.d, r), cfg.tau,
                                                                                     solve, cp);
                                             files["summary-" + std::to_string(idx) + ".csv"] = summary_csv(s);
                                             return json{{"entries", s.entries.size()},
                                                         {"ell_max", s.ell_max_used},
                                                         {"total_weight", s.total_weight()},
                                                         {"tail", s.tail_estimate},
                                                         {"sharp", radial::sharp_count(s, cfg.tau)},
                                                         {"weyl", asymptotics::weyl_diag(m.d, h, cfg.tau, potential(m, r),
                                                                                         std::pow(metric(m, r), m.d))}};
                                         }});
                    } else if (kind == "weyl-sweep") {
                        tasks.push_back({params, [=, &bank, &cfg](json&) {
                                             const auto p = weyl_point(m, r, cfg.tau, bank, solve, cp);
                                             return json{{"sharp", p.sharp},     {"weyl", p.weyl},
                                                         {"tauberian", p.tauberian}, {"entries", p.entries},
                                                         {"ell_max", p.ell_max}, {"T_star", p.T_star}};
                                         }});
                    } else if (kind == "band-sweep" || kind == "phase-scan") {
                        tasks.push_back({params, [=, &bank, &cfg](json&) {
                                             const auto p = band_point(m, r, cfg.tau, bank, cfg.T, cfg.T_prime,
                                                                       cfg.windowed || kind == "phase-scan", solve, cp);
                                             return json{{"band", p.band},
                                                         {"T", p.T},
                                                         {"T_prime", p.T_prime},
                                                         {"entries", p.entries}};
                                         }});
                    } else if (kind == "near-origin") {
                        tasks.push_back({params, [=, &cfg](json&) {
                                             const auto n = perturb::near_origin_sup(m, cfg.pert, cfg.tau, cfg.probes,
                                                                                     solve, cp);
                                             return json{{"r_bar", n.r_bar},   {"sup_ee", n.sup_ee},
                                                         {"sup_diff", n.sup_diff}, {"probes", n.probes},
                                                         {"e_ref", n.e_ref},   {"e_pert", n.e_pert}};
                                         }});
                    }
                }
    }

    std::vector<Outcome> res = execute(tasks, cfg.workers);

    // assemble the table
    const std::size_t n = res.size();
    std::vector<std::string> header;
    json fits = json::object();
    std::vector<std::vector<std::string>> rows(n);
    auto P = [&](std::size_t i, const char* k) { return res[i].rec.params[k].get<double>(); };
    auto V = [&](std::size_t i, const char* k) { return res[i].values[k].get<double>(); };

    if (kind == "classical") {
        header = {"alpha",    "n",         "degenerate", "intersections", "angle_error",     "H_drift",
                  "M_drift",  "residual",  "t_rel_err",  "s_rel_err",     "loop_miss",       "pericenter_time",
                  "pericenter_target"};
        json catalog = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            const json& v = res[i].values;
            rows[i] = {io::fmt(P(i, "alpha")),
                       std::to_string(v["n"].get<int>()),
                       v["degenerate"].get<bool>() ? "1" : "0",
                       std::to_string(v["intersections"].get<std::size_t>())};
            for (const char* k : {"angle_error", "H_drift", "M_drift", "residual", "t_rel_err", "s_rel_err",
                                  "loop_miss", "pericenter_time", "pericenter_target"})
                rows[i].push_back(io::fmt(V(i, k)));
            catalog.push_back(v["catalog"]);
        }
        res.empty() ? void() : void(res.front().files["catalog.json"] = catalog.dump(2) + "\n");
    } else if (kind == "spectrum") {
        header = {"h", "r", "alpha", "tau_max", "entries", "ell_max", "total_weight", "tail", "sharp", "weyl"};
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            const json& v = res[i].values;
            rows[i] = cells({P(i, "h"), P(i, "r"), P(i, "alpha"), cfg.tau});
            rows[i].push_back(std::to_string(v["entries"].get<std::size_t>()));
            rows[i].push_back(std::to_string(v["ell_max"].get<int>()));
            for (const char* k : {"total_weight", "tail", "sharp", "weyl"}) rows[i].push_back(io::fmt(V(i, k)));
        }
    } else if (kind == "weyl-sweep") {
        header = {"h", "r", "alpha", "sharp", "weyl", "tauberian", "observable", "tb_error", "envelope", "ratio"};
        std::vector<double> obs(n, 0.0), env(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            obs[i] = std::fabs(V(i, "sharp") - V(i, "weyl"));
            env[i] = envelope_shape(env_id, cfg, P(i, "h"), P(i, "alpha"), P(i, "r"), std::nullopt);
        }
        const auto ratio = normalized_ratios(res, obs, env);
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            const double h = P(i, "h"), d = cfg.model.d;
            const double tb_err = std::fabs(V(i, "tauberian") - V(i, "weyl")) * std::pow(h, d - 2.0);
            rows[i] = cells({h, P(i, "r"), P(i, "alpha"), V(i, "sharp"), V(i, "weyl"), V(i, "tauberian"), obs[i],
                             tb_err, env[i], ratio[i]});
            groups[group_key(res[i].rec.params)].push_back(i);
        }
        fits = json::array();
        for (const auto& [g, idx] : groups) {
            const double d = cfg.model.d;
            std::vector<std::pair<double, double>> pts;
            std::vector<asymptotics::SecondTermSample> st;
            double tb_ratio_max = 0.0, tb0 = 0.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const std::size_t i = idx[j];
                const double h = P(i, "h");
                const double e = obs[i] * std::pow(h, d);
                pts.push_back({h, e});
                st.push_back({h, V(i, "tauberian"), V(i, "weyl")});
                const double tb = std::fabs(V(i, "tauberian") - V(i, "weyl")) * std::pow(h, d - 2.0);
                if (j == 0) tb0 = tb;
                tb_ratio_max = std::max(tb_ratio_max, tb0 > 0.0 ? tb / tb0 : 0.0);
            }
            json f = {{"group", json::parse(g)},
                      {"normalized_error", fit_json(pts)},
                      {"nonincreasing_20pct", asymptotics::nonincreasing_across_halvings(pts, 0.2)},
                      {"tauberian_ratio_max", tb_ratio_max}};
            try {
                const auto c = asymptotics::weyl_second_term_check(st, cfg.model.d);
                f["second_term"] = {{"slope", c.fit.slope},
                                    {"degenerate", c.degenerate},
                                    {"expected_min", c.expected_min},
                                    {"consistent", c.consistent}};
            } catch (const Error& e) {
                f["second_term"] = {{"error", e.what()}};
            }
            fits.push_back(f);
        }
    } else if (kind == "band-sweep" || kind == "phase-scan") {
        if (kind == "band-sweep")
            header = {"h", "r", "alpha", "T", "T_prime", "observable", "envelope", "ratio"};
        else
            header = {"h", "inv_h", "band_diff", "normalized"};
        std::vector<double> obs(n, 0.0), env(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            obs[i] = std::fabs(V(i, "band"));
            env[i] = envelope_shape(env_id, cfg, P(i, "h"), P(i, "alpha"), P(i, "r"), std::nullopt);
        }
        const auto ratio = normalized_ratios(res, obs, env);
        std::vector<std::pair<double, double>> series;
        double ratio_max = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            const double h = P(i, "h");
            if (kind == "band-sweep") {
                rows[i] = cells({h, P(i, "r"), P(i, "alpha"), V(i, "T"), V(i, "T_prime"), obs[i], env[i], ratio[i]});
                ratio_max = std::max(ratio_max, ratio[i]);
            } else {
                rows[i] = cells({h, 1.0 / h, V(i, "band"), V(i, "band") * std::pow(h, cfg.model.d - 1.5)});
                series.push_back({h, V(i, "band")});
            }
        }
        if (kind == "band-sweep") {
            fits = {{"envelope", env_id}, {"ratio_max", ratio_max}};
        } else {
            const double a = alphas.front(), r = cfg.r.front();
            const auto& cat = classical::loop_catalog(a);
            double f_pred = cfg.f_center;
            if (f_pred == 0.0 && cat.n > 0) f_pred = cat.at(1).s_k * std::pow(r, 1.0 - a) / (2.0 * std::numbers::pi);
            json ph = {{"f_pred", f_pred}};
            try {
                std::pair<double, double> win;
                if (f_pred > 0.0) {
                    win = asymptotics::alias_window(f_pred, series);
                } else {
                    const double span = 1.0 / series.back().first - 1.0 / series.front().first;
                    const double rate = double(series.size() - 1) / span;
                    win = {1.0 / span, 0.5 * rate};
                }
                const auto pr = asymptotics::phase_extract(series, win, cfg.model.d);
                ph["window"] = {win.first, win.second};
                ph["f_peak"] = pr.f_peak;
                ph["power"] = pr.power;
                ph["snr"] = pr.snr;
                ph["inconclusive"] = pr.inconclusive;
                ph["sample_rate"] = pr.sample_rate;
                if (f_pred > 0.0) ph["rel_err"] = std::fabs(pr.f_peak - f_pred) / f_pred;
                json spec = json::array();
                for (const auto& [f, p] : pr.spectrum) spec.push_back({f, p});
                ph["spectrum"] = spec;
            } catch (const Error& e) {
                ph["error"] = e.what();
            }
            fits = ph;
        }
    } else if (kind == "perturb-sweep") {
        header = {"h",        "r",         "a_pot",      "a_met",     "beta",     "eps",   "e_diff",
                  "tb_diff",  "weyl_diff", "observable", "envelope",  "ratio",    "eps_le_h"};
        std::vector<double> obs(n, 0.0), env(n, 1.0), eps(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            obs[i] = std::fabs(V(i, "tauberian_diff") - V(i, "weyl_diff"));
            eps[i] = std::max(std::fabs(P(i, "a_pot")), std::fabs(cfg.pert.a_met)) * std::pow(P(i, "r"), cfg.pert.beta);
            env[i] = envelope_shape(env_id, cfg, P(i, "h"), P(i, "alpha"), P(i, "r"), eps[i]);
        }
        const auto ratio = normalized_ratios(res, obs, env);
        std::map<std::string, std::vector<std::pair<double, double>>> by_h;  // (alpha, r, h) -> (a_pot, obs)
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            const double h = P(i, "h");
            rows[i] = cells({h, P(i, "r"), P(i, "a_pot"), cfg.pert.a_met, cfg.pert.beta, eps[i], V(i, "e_diff"),
                             V(i, "tauberian_diff"), V(i, "weyl_diff"), obs[i], env[i], ratio[i]});
            rows[i].push_back(eps[i] <= h ? "1" : "0");
            json g = {{"alpha", P(i, "alpha")}, {"r", P(i, "r")}, {"h", h}};
            by_h[g.dump()].push_back({std::fabs(P(i, "a_pot")), obs[i]});
        }
        fits = json::array();
        for (const auto& [g, pts] : by_h) fits.push_back({{"group", json::parse(g)}, {"amplitude_fit", fit_json(pts)}});
    } else if (kind == "near-origin") {
        header = {"h", "r", "alpha", "r_bar", "sup_ee", "scaled_ee", "sup_diff", "scaled_diff", "ratio_ee", "ratio_diff"};
        std::vector<double> ee(n, 0.0), df(n, 0.0), env_ee(n, 1.0), env_df(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            ee[i] = V(i, "sup_ee");
            df[i] = V(i, "sup_diff");
            env_ee[i] = envelope_shape(env_id, cfg, P(i, "h"), P(i, "alpha"), P(i, "r"), std::nullopt);
            env_df[i] = envelope_shape("E3.27", cfg, P(i, "h"), P(i, "alpha"), P(i, "r"), std::nullopt);
        }
        const auto r_ee = normalized_ratios(res, ee, env_ee);
        const auto r_df = normalized_ratios(res, df, env_df);
        double max_ee = 0.0, max_df = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!res[i].rec.ok) continue;
            rows[i] = cells({P(i, "h"), P(i, "r"), P(i, "alpha"), V(i, "r_bar"), ee[i], ee[i] / env_ee[i], df[i],
                             df[i] / env_df[i], r_ee[i], r_df[i]});
            max_ee = std::max(max_ee, r_ee[i]);
            max_df = std::max(max_df, r_df[i]);
        }
        fits = {{"ratio_ee_max", max_ee}, {"ratio_diff_max", max_df}};
    }

    io::CsvWriter table(header);
    RunResult rr;
    json points = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        PointRecord& rec = res[i].rec;
        if (rec.ok) {
            rec.row = rows[i];
            table.row(rec.row);
        } else {
            ++rr.failures;
        }
        json pj = {{"params", rec.params}, {"ok", rec.ok}, {"seconds", rec.seconds}};
        if (!rec.ok) pj["error"] = rec.error;
        if (rec.ok && kind == "near-origin") pj["values"] = res[i].values;
        points.push_back(pj);
    }
    rr.rows = table.rows();
    rr.table = table.str();
    rr.dir = (std::filesystem::path(cfg.out) / cfg.id).string();
    std::error_code ec;
    std::filesystem::create_directories(rr.dir, ec);
    require(!ec, ErrorCode::Io, "cannot create '" + rr.dir + "': " + ec.message());

    rr.manifest = {{"id", cfg.id},
                   {"kind", kind},
                   {"config", to_json(cfg)},
                   {"config_hash", config_hash(cfg)},
                   {"code_version", code_version()},
                   {"points", points},
                   {"rows", rr.rows},
                   {"failures", rr.failures},
                   {"fits", fits}};
    if (bank.built()) rr.manifest["bank_hash"] = bank.hash();
    if (!env_id.empty()) rr.manifest["envelope"] = env_id;

    for (const auto& o : res)
        for (const auto& [name, content] : o.files.items())
            io::write_atomic((std::filesystem::path(rr.dir) / name).string(), content.get<std::string>());
    io::write_atomic((std::filesystem::path(rr.dir) / "table.csv").string(), rr.table);
    io::write_atomic((std::filesystem::path(rr.dir) / "manifest.json").string(), rr.manifest.dump(2) + "\n");
    return rr;
}

}  // namespace sclab::expcli
