#include "sclab/radial_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <numeric>

#include "sclab/error.hpp"
#include "sclab/io.hpp"

namespace sclab::radial {

double effective_channel_potential(const ModelParams& m, int ell, double r) {
    const double ri = inner_radius(m);
    require(r >= ri && r <= m.L, ErrorCode::Domain, "radius outside [r_inner, L]");
    require(ell >= 0, ErrorCode::Domain, "channel index must be >= 0");
    const double h2 = m.h * m.h;
    return 0.5 * h2 * metric(m, r) * nu_ell(m.d, ell) / (r * r) + potential(m, r) +
           0.25 * h2 * double(m.d - 1) * metric_slope(m, r) / r;
}

Discretization::Discretization(const ModelParams& resolved) : model(resolved), grid(make_grid(resolved)) {
    const std::size_t N = grid.interior();
    const double dq = grid.delta();
    const double h2 = model.h * model.h;
    std::vector<double> phalf(N + 1);
    for (std::size_t j = 0; j <= N; ++j) {
        const double rh = grid.r_node(double(j) + 0.5);
        phalf[j] = metric(model, rh) / grid.dr_dq(rh);
    }
    r.resize(N);
    mass.resize(N);
    kin.resize(N);
    pot.resize(N);
    cent.resize(N);
    off.resize(N - 1);
    for (std::size_t i = 0; i < N; ++i) {
        const double ri = grid.r_node(double(i + 1));
        r[i] = ri;
        mass[i] = grid.dr_dq(ri) * dq;
        kin[i] = 0.5 * h2 * (phalf[i] + phalf[i + 1]) / dq / mass[i];
        const double c = metric(model, ri);
        pot[i] = potential(model, ri) + 0.25 * h2 * double(model.d - 1) * metric_slope(model, ri) / ri;
        cent[i] = 0.5 * h2 * c / (ri * ri);
    }
    for (std::size_t i = 0; i + 1 < N; ++i) off[i] = -0.5 * h2 * phalf[i + 1] / dq / std::sqrt(mass[i] * mass[i + 1]);
}

tridiag::Matrix Discretization::channel_matrix(int ell) const {
    tridiag::Matrix m;
    const double nu = nu_ell(model.d, ell);
    m.diag.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) m.diag[i] = kin[i] + pot[i] + nu * cent[i];
    m.off = off;
    return m;
}

namespace {

std::size_t nearest_node(const Discretization& disc, double rp) {
    const double t = (disc.grid.q_of_r(rp) - disc.grid.q_node(0)) / disc.grid.delta();
    const long k = std::lround(t) - 1;  // interior index
    return std::size_t(std::clamp<long>(k, 0, long(disc.r.size()) - 1));
}

// barrier exponent 2/h * int sqrt(2(W - lambda)) dr from the probe to the nearest allowed node
double barrier_exponent(const Discretization& disc, const std::vector<double>& W, std::size_t ip, double lambda) {
    if (W[ip] <= lambda) return 0.0;
    double left = 0.0;
    std::size_t i = ip;
    bool hit = false;
    while (true) {
        if (W[i] <= lambda) {
            hit = true;
            break;
        }
        left += std::sqrt(2.0 * (W[i] - lambda)) * disc.mass[i];
        if (i == 0) break;
        --i;
    }
    if (!hit) left = HUGE_VAL;
    double right = 0.0;
    hit = false;
    for (std::size_t j = ip; j < W.size(); ++j) {
        if (W[j] <= lambda) {
            hit = true;
            break;
        }
        right += std::sqrt(2.0 * (W[j] - lambda)) * disc.mass[j];
        if (right > left) break;
    }
    if (!hit) right = HUGE_VAL;
    return 2.0 / disc.model.h * std::min(left, right);
}

struct Stencil {
    std::size_t node[4];  // grid node numbers 0..N+1
    double weight[4];
};

Stencil probe_stencil(const Discretization& disc, double rp) {
    const std::size_t N = disc.r.size();
    const double t = (disc.grid.q_of_r(rp) - disc.grid.q_node(0)) / disc.grid.delta();
    long j0 = long(std::floor(t)) - 1;
    j0 = std::clamp<long>(j0, 0, long(N + 1) - 3);
    Stencil s;
    for (int k = 0; k < 4; ++k) s.node[k] = std::size_t(j0 + k);
    for (int k = 0; k < 4; ++k) {
        double w = 1.0;
        for (int l = 0; l < 4; ++l)
            if (l != k) w *= (t - double(j0 + l)) / double(k - l);
        s.weight[k] = w;
    }
    return s;
}

}  // namespace

double channel_floor(const Discretization& disc, int ell, const std::vector<double>& probes, double tau_max,
                     double tunnel_exponent) {
    const std::size_t N = disc.r.size();
    std::vector<double> W(N);
    for (std::size_t i = 0; i < N; ++i) W[i] = disc.channel_potential(ell, i);
    const double wmin = *std::min_element(W.begin(), W.end());
    const double bottom = wmin - 1e-9 * std::max(1.0, std::fabs(wmin));
    if (tau_max <= bottom) return tau_max;
    double best = tau_max;
    for (double rp : probes) {
        const std::size_t ip = nearest_node(disc, rp);
        if (barrier_exponent(disc, W, ip, tau_max) > tunnel_exponent) continue;
        if (barrier_exponent(disc, W, ip, wmin) <= tunnel_exponent) return bottom;
        double lo = wmin, hi = tau_max;
        for (int it = 0; it < 60 && hi - lo > 1e-12 * std::max(1.0, std::fabs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (barrier_exponent(disc, W, ip, mid) > tunnel_exponent)
                lo = mid;
            else
                hi = mid;
        }
        best = std::min(best, lo);
    }
    return best;
}

ChannelSpectrum channel_eigensolve(const Discretization& disc, int ell, double tau_max,
                                   const std::vector<double>& probes, const SolveOptions& opt) {
    require(ell >= 0, ErrorCode::Domain, "channel index must be >= 0");
    const double ri = disc.grid.r_inner(), L = disc.grid.r_outer();
    for (double rp : probes) require(rp >= ri && rp <= L, ErrorCode::Domain, "probe radius outside [r_inner, L]");

    ChannelSpectrum cs;
    cs.ell = ell;
    cs.nu_ell = nu_ell(disc.model.d, ell);
    cs.tau_max = tau_max;
    cs.probes = probes;
    const double floor = channel_floor(disc, ell, probes, tau_max, opt.tunnel_exponent);
    const double lo = std::max(floor, opt.lambda_lo);
    cs.floor = lo;
    const double hi = std::nextafter(tau_max, HUGE_VAL);
    const tridiag::Matrix mat = disc.channel_matrix(ell);
    if (!(lo < hi)) {
        cs.count_below_floor = tridiag::count_below(mat, lo);
        return cs;
    }

    std::vector<Stencil> st;
    std::vector<std::size_t> nodes;  // interior indices requested from the solver
    for (double rp : probes) {
        st.push_back(probe_stencil(disc, rp));
        for (std::size_t k : st.back().node)
            if (k >= 1 && k <= disc.r.size()) nodes.push_back(k - 1);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    const tridiag::WindowResult wr = tridiag::eigen_window(mat, lo, hi, nodes);
    cs.count_below_floor = wr.count_lo;
    const std::size_t nn = nodes.size();
    cs.pairs.reserve(wr.values.size());
    for (std::size_t j = 0; j < wr.values.size(); ++j) {
        ChannelPair p;
        p.lambda = wr.values[j];
        p.cluster = wr.cluster[j];
        p.u_at.resize(probes.size());
        for (std::size_t a = 0; a < probes.size(); ++a) {
            double u = 0.0;
            for (int k = 0; k < 4; ++k) {
                const std::size_t g = st[a].node[k];
                if (g == 0 || g > disc.r.size()) continue;
                const std::size_t col = std::size_t(std::lower_bound(nodes.begin(), nodes.end(), g - 1) - nodes.begin());
                u += st[a].weight[k] * wr.samples[j * nn + col] / std::sqrt(disc.mass[g - 1]);
            }
            p.u_at[a] = u;
        }
        cs.pairs.push_back(std::move(p));
    }
    return cs;
}

ChannelSpectrum channel_eigensolve(const ModelParams& m, int ell, double tau_max, const std::vector<double>& probes,
                                   const SolveOptions& opt) {
    const Discretization disc(resolve_grid(m, tau_max));
    return channel_eigensolve(disc, ell, tau_max, probes, opt);
}

double SpectralSummary::total_weight() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.w;
    return s;
}

// ---------------------------------------------------------------- cache

namespace {

io::json spectrum_to_json(const ChannelSpectrum& cs) {
    io::json pairs = io::json::array();
    for (const auto& p : cs.pairs) pairs.push_back({{"lambda", p.lambda}, {"u_at", p.u_at}, {"cluster", p.cluster}});
    return {{"ell", cs.ell},       {"nu_ell", cs.nu_ell},   {"tau_max", cs.tau_max},
            {"floor", cs.floor},   {"count_below_floor", cs.count_below_floor},
            {"probes", cs.probes}, {"pairs", pairs}};
}

ChannelSpectrum spectrum_from_json(const io::json& j) {
    ChannelSpectrum cs;
    cs.ell = j.at("ell");
    cs.nu_ell = j.at("nu_ell");
    cs.tau_max = j.at("tau_max");
    cs.floor = j.at("floor");
    cs.count_below_floor = j.at("count_below_floor");
    cs.probes = j.at("probes").get<std::vector<double>>();
    for (const auto& p : j.at("pairs"))
        cs.pairs.push_back({p.at("lambda").get<double>(), p.at("u_at").get<std::vector<double>>(), p.at("cluster").get<int>()});
    return cs;
}

}  // namespace

SpectrumCache::SpectrumCache(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<ChannelSpectrum> SpectrumCache::get(const std::string& key) {
    {
        std::shared_lock lk(mu_);
        auto it = mem_.find(key);
        if (it != mem_.end()) return *it->second;
    }
    if (dir_.empty()) return std::nullopt;
    const std::string path = dir_ + "/" + key + ".json";
    if (!std::filesystem::exists(path)) return std::nullopt;
    ChannelSpectrum cs = spectrum_from_json(io::json::parse(io::read_file(path)));
    std::unique_lock lk(mu_);
    mem_.emplace(key, std::make_shared<const ChannelSpectrum>(cs));
    return cs;
}

void SpectrumCache::put(const std::string& key, const ChannelSpectrum& cs) {
    std::unique_lock lk(mu_);
    if (mem_.count(key)) return;
    mem_.emplace(key, std::make_shared<const ChannelSpectrum>(cs));
    if (!dir_.empty()) io::write_atomic(dir_ + "/" + key + ".json", spectrum_to_json(cs).dump());
}

std::string channel_cache_key(const ModelParams& resolved, int ell, double tau_max, const std::vector<double>& probes,
                              const SolveOptions& opt) {
    io::json j{{"model", io::to_json(resolved)},
               {"ell", ell},
               {"tau_max", tau_max},
               {"probes", probes},
               {"lambda_lo", std::isfinite(opt.lambda_lo) ? io::json(opt.lambda_lo) : io::json("-inf")},
               {"tunnel_exponent", opt.tunnel_exponent}};
    return io::sha256_hex(j.dump());
}

// ---------------------------------------------------------------- summaries

std::vector<SpectralSummary> spectral_summaries(const Discretization& disc, const std::vector<double>& probes,
                                                double tau_max, const SolveOptions& opt, SpectrumCache* cache) {
    const ModelParams& m = disc.model;
    const std::size_t P = probes.size();
    require(P > 0, ErrorCode::Domain, "no probe radii");
    const double norm = 1.0 / sphere_area(m.d);

    auto solve = [&](int ell) {
        if (cache) {
            const std::string key = channel_cache_key(m, ell, tau_max, probes, opt);
            if (auto hit = cache->get(key)) return *hit;
            ChannelSpectrum cs = channel_eigensolve(disc, ell, tau_max, probes, opt);
            cache->put(key, cs);
            return cs;
        }
        return channel_eigensolve(disc, ell, tau_max, probes, opt);
    };

    std::vector<std::vector<SummaryEntry>> entries(P);
    std::vector<std::vector<double>> contrib(P);
    std::vector<double> total(P, 0.0);
    const int workers = std::max(1, opt.workers);
    int ell = 0;
    bool done = false;
    while (!done) {
        require(ell <= opt.ell_cap, ErrorCode::TruncationCertificate, "channel cap reached before truncation");
        std::vector<ChannelSpectrum> wave;
        if (workers == 1) {
            wave.push_back(solve(ell));
        } else {
            std::vector<std::future<ChannelSpectrum>> fut;
            for (int k = 0; k < workers; ++k) fut.push_back(std::async(std::launch::async, solve, ell + k));
            for (auto& f : fut) wave.push_back(f.get());
        }
        for (const ChannelSpectrum& cs : wave) {
            const double mult = channel_multiplicity(m.d, cs.ell);
            for (std::size_t a = 0; a < P; ++a) {
                const double scale = mult * norm / std::pow(probes[a], m.d - 1);
                double c = 0.0;
                for (const auto& p : cs.pairs) {
                    const double w = scale * p.u_at[a] * p.u_at[a];
                    entries[a].push_back({p.lambda, w});
                    c += w;
                }
                contrib[a].push_back(c);
                total[a] += c;
            }
            // stop once every probe sits behind the centrifugal barrier and the
            // last two channels are negligible
            bool stop = cs.ell >= 1;
            for (std::size_t a = 0; a < P && stop; ++a) {
                const std::size_t n = contrib[a].size();
                const double last2 = contrib[a][n - 1] + contrib[a][n - 2];
                const double wp = effective_channel_potential(m, cs.ell, probes[a]);
                stop = wp > tau_max && last2 <= opt.trunc_eps * total[a];
            }
            if (stop) {
                done = true;
                break;
            }
        }
        ell += int(wave.size());
    }

    std::vector<SpectralSummary> out(P);
    for (std::size_t a = 0; a < P; ++a) {
        SpectralSummary& s = out[a];
        s.x = {probes[a]};
        s.r = probes[a];
        s.h = m.h;
        s.d = m.d;
        s.tau_max = tau_max;
        s.lambda_lo = opt.lambda_lo;
        s.channel_weight = contrib[a];
        s.ell_max_used = int(contrib[a].size()) - 1;
        const std::size_t n = contrib[a].size();
        const double c1 = contrib[a][n - 1], c0 = contrib[a][n - 2];
        if (c1 <= 0.0)
            s.tail_estimate = 0.0;
        else if (c1 < c0)
            s.tail_estimate = c1 * (c1 / c0) / (1.0 - c1 / c0);
        else
            s.tail_estimate = HUGE_VAL;
        require(s.tail_estimate <= 1e-3 * total[a], ErrorCode::TruncationCertificate,
                "channel tail estimate exceeds 1e-3 of the total weight");
        auto& e = entries[a];
        std::stable_sort(e.begin(), e.end(), [](const SummaryEntry& x, const SummaryEntry& y) { return x.lambda < y.lambda; });
        for (const auto& v : e) {
            if (!s.entries.empty() && s.entries.back().lambda == v.lambda)
                s.entries.back().w += v.w;
            else
                s.entries.push_back(v);
        }
    }
    return out;
}

SpectralSummary spectral_summary(const ModelParams& m, const std::vector<double>& x, double tau_max,
                                 const SolveOptions& opt, SpectrumCache* cache) {
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    const double r = std::sqrt(r2);
    const Discretization disc(resolve_grid(m, tau_max));
    auto s = spectral_summaries(disc, {r}, tau_max, opt, cache);
    s[0].x = x;
    return s[0];
}

double sharp_count(const SpectralSummary& s, double tau) {
    require(tau <= s.tau_max, ErrorCode::Domain, "tau above the summary window");
    require(s.complete_below(), ErrorCode::IncompleteSpectrum, "summary does not hold the spectrum below its window");
    double acc = 0.0;
    for (const auto& e : s.entries) {
        if (e.lambda > tau) break;
        acc += e.w;
    }
    return acc;
}

}  // namespace sclab::radial
