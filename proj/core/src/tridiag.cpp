#include "sclab/tridiag.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "sclab/error.hpp"

namespace sclab::tridiag {

namespace {

double pivot_floor(const Matrix& m) {
    double mb = 1.0;
    for (double b : m.off) mb = std::max(mb, b * b);
    return DBL_MIN * mb;
}

// Shifts are processed as kW vectors of kV lanes so that several independent
// pivot recurrences are in flight; the recurrence itself is latency-bound.
constexpr std::size_t kV = 8;
constexpr std::size_t kW = 4;
constexpr std::size_t kBatch = kV * kW;

#define SCLAB_UNROLL _Pragma("GCC unroll 8")

typedef double vd __attribute__((vector_size(kV * sizeof(double))));
typedef std::int64_t vi __attribute__((vector_size(kV * sizeof(double))));

inline vd vabs(vd x) { return (vd)((vi)x & INT64_MAX); }
inline vd guard(vd q, vd pm) { return vabs(q) < pm ? -pm : q; }
inline vd splat(double x) { return x - vd{}; }

// Reciprocal for the Rayleigh sweeps, which are bound by division throughput:
// a 14-bit estimate plus two Newton steps is accurate to about an ulp.
inline vd recip(vd x) {
#if defined(__AVX512F__)
    if constexpr (kV == 8) {
        vd r = (vd)_mm512_rcp14_pd((__m512d)x);
        r = r + r * (1.0 - x * r);
        return r + r * (1.0 - x * r);
    }
#endif
    return 1.0 / x;
}

// counts for up to kBatch shifts in one sweep
void count_block(const Matrix& m, const double* s, std::size_t ns, std::size_t* out, double pivmin) {
    vd q[kW], sh[kW];
    vi c[kW];
    const vd pm = splat(pivmin);
    for (std::size_t w = 0; w < kW; ++w) {
        for (std::size_t k = 0; k < kV; ++k) sh[w][k] = w * kV + k < ns ? s[w * kV + k] : s[0];
        q[w] = m.diag[0] - sh[w];
        c[w] = -(q[w] < 0.0);
    }
    const std::size_t n = m.size();
    const double* d = m.diag.data();
    const double* b = m.off.data();
    for (std::size_t i = 1; i < n; ++i) {
        const double b2 = b[i - 1] * b[i - 1];
        const double di = d[i];
        for (std::size_t w = 0; w < kW; ++w) {
            const vd qq = (di - sh[w]) - b2 / guard(q[w], pm);
            c[w] -= qq < 0.0;
            q[w] = qq;
        }
    }
    for (std::size_t k = 0; k < ns; ++k) out[k] = std::size_t(c[k / kV][k % kV]);
}

struct Workspace {
    std::vector<double> lpiv, rpiv, z;
    explicit Workspace(std::size_t n) : lpiv(n), rpiv(n), z(n) {}
};

// One twisted factorization at sigma; fills ws.z (unnormalized, z[k]=1) and
// returns the Rayleigh correction. count receives #eigenvalues < sigma.
double twisted_step(const Matrix& m, double sigma, double pivmin, Workspace& ws, std::size_t& count,
                    double& nrm2) {
    const std::size_t n = m.size();
    const double* d = m.diag.data();
    const double* b = m.off.data();
    double* il = ws.lpiv.data();
    double* ir = ws.rpiv.data();

    std::size_t cnt = 0;
    double lp = d[0] - sigma;
    cnt += lp < 0.0;
    if (std::fabs(lp) < pivmin) lp = -pivmin;
    il[0] = lp;
    for (std::size_t i = 1; i < n; ++i) {
        lp = (d[i] - sigma) - b[i - 1] * b[i - 1] / lp;
        cnt += lp < 0.0;
        if (std::fabs(lp) < pivmin) lp = -pivmin;
        il[i] = lp;
    }
    double rp = d[n - 1] - sigma;
    if (std::fabs(rp) < pivmin) rp = -pivmin;
    ir[n - 1] = rp;
    for (std::size_t i = n - 1; i-- > 0;) {
        rp = (d[i] - sigma) - b[i] * b[i] / rp;
        if (std::fabs(rp) < pivmin) rp = -pivmin;
        ir[i] = rp;
    }
    count = cnt;

    // gamma_k = L_k + R_k - (d_k - sigma); smallest |gamma| marks the largest component
    std::size_t kbest = 0;
    double gbest = HUGE_VAL;
    double gsigned = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double g = il[k] + ir[k] - (d[k] - sigma);
        if (std::fabs(g) < gbest) {
            gbest = std::fabs(g);
            gsigned = g;
            kbest = k;
        }
    }
    double* z = ws.z.data();
    z[kbest] = 1.0;
    double s = 1.0;
    for (std::size_t i = kbest; i-- > 0;) {
        const double f = -b[i] / il[i];
        z[i] = f * z[i + 1];
        s += z[i] * z[i];
    }
    for (std::size_t i = kbest + 1; i < n; ++i) {
        const double f = -b[i - 1] / ir[i];
        z[i] = f * z[i - 1];
        s += z[i] * z[i];
    }
    nrm2 = s;
    return gsigned / s;
}

// k-th eigenvalue (0-based) by plain bisection inside [lo, hi]
double bisect_index(const Matrix& m, std::size_t k, double lo, double hi, double tol) {
    double s[kBatch];
    std::size_t c[kBatch];
    const double pivmin = pivot_floor(m);
    while (hi - lo > tol) {
        // split the bracket into kBatch+1 pieces per sweep
        const double w = (hi - lo) / double(kBatch + 1);
        for (std::size_t i = 0; i < kBatch; ++i) s[i] = lo + w * double(i + 1);
        count_block(m, s, kBatch, c, pivmin);
        double nlo = lo, nhi = hi;
        for (std::size_t i = 0; i < kBatch; ++i) {
            if (c[i] > k) {
                nhi = s[i];
                break;
            }
            nlo = s[i];
        }
        if (nlo == lo && nhi == hi) break;
        lo = nlo;
        hi = nhi;
    }
    return 0.5 * (lo + hi);
}

// tridiagonal solve (T - sigma) x = y with partial pivoting; y overwritten
void shifted_solve(const Matrix& m, double sigma, std::vector<double>& y) {
    const std::size_t n = m.size();
    // Gaussian elimination with row interchanges (dgttrf/dgtts2 layout)
    std::vector<double> dl(m.off), du(m.off), dd(n), du2(n, 0.0);
    std::vector<char> ipiv(n, 0);
    for (std::size_t i = 0; i < n; ++i) dd[i] = m.diag[i] - sigma;
    const double tiny = pivot_floor(m);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::fabs(dd[i]) >= std::fabs(dl[i])) {
            if (std::fabs(dd[i]) < tiny) dd[i] = tiny;
            const double f = dl[i] / dd[i];
            dl[i] = f;
            dd[i + 1] -= f * du[i];
            if (i + 2 < n) du2[i] = 0.0;
        } else {
            const double f = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = f;
            const double t = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = t - f * dd[i + 1];
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            ipiv[i] = 1;
        }
    }
    if (std::fabs(dd[n - 1]) < tiny) dd[n - 1] = tiny;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (ipiv[i]) std::swap(y[i], y[i + 1]);
        y[i + 1] -= dl[i] * y[i];
    }
    y[n - 1] /= dd[n - 1];
    if (n > 1) y[n - 2] = (y[n - 2] - du[n - 2] * y[n - 1]) / dd[n - 2];
    for (std::size_t i = n - 2; i-- > 0;) y[i] = (y[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / dd[i];
}

void normalize(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = 1.0 / std::sqrt(s);
    for (double& x : v) x *= s;
}


// lane vectors for the Rayleigh sweeps; more state per lane than a count, so fewer vectors
constexpr std::size_t kLW = 4;
constexpr std::size_t kLanes = kV * kLW;

struct Isolated {
    double lo, hi;
    std::size_t index;
};

// Rayleigh corrections for kBatch shifts at once. With twisted index k,
// ||z||^2 = -d(gamma_k)/d(sigma), so the derivative recurrences of the two
// pivot sweeps replace the eigenvector solve inside the iteration. Eigenvector
// components at the sample nodes are accumulated as pivot-ratio products
// towards a twist index fixed before the sweep (the previous argmin of
// |gamma|). The right sweep keeps one checkpoint per block and is recomputed
// block-wise during the left sweep, which keeps the working set in cache.
struct Lanes {
    static constexpr std::size_t kBlock = 32;
    static constexpr std::size_t kNone = SIZE_MAX;
    std::size_t n, nblocks;
    std::vector<vd> ck_r, ck_rd;           // right pivot and derivative at each block start
    std::vector<std::size_t> req;          // sorted distinct sample nodes
    std::vector<std::size_t> run_start;    // indices into req where a run of adjacent nodes begins
    std::vector<vd> cap_l, cap_r;          // left and right pivots at req nodes
    std::vector<vd> prod_l, prod_r;        // per run: z at the run head relative to z at the twist
    vd gk[kLW], gdk[kLW];                    // gamma and gamma' at the fixed twist
    std::size_t twist[kLanes];

    Lanes(std::size_t n_, std::span<const std::size_t> nodes)
        : n(n_), nblocks((n_ + kBlock - 1) / kBlock), ck_r(nblocks * kLW), ck_rd(nblocks * kLW), req(nodes.begin(), nodes.end()) {
        std::sort(req.begin(), req.end());
        req.erase(std::unique(req.begin(), req.end()), req.end());
        for (std::size_t c = 0; c < req.size(); ++c)
            if (c == 0 || req[c] != req[c - 1] + 1) run_start.push_back(c);
        cap_l.resize(req.size() * kLW);
        cap_r.resize(req.size() * kLW);
        prod_l.resize(run_start.size() * kLW);
        prod_r.resize(run_start.size() * kLW);
    }

    void sweep(const Matrix& m, const double* sigma, double pivmin, std::size_t* count, double* g, double* gd,
               std::size_t* kbest) {
        const double* d = m.diag.data();
        const double* b = m.off.data();
        const vd pm = splat(pivmin);
        const std::size_t nruns = run_start.size();
        vd sg[kLW], R[kLW], Rd[kLW], inv[kLW];
        vi tw[kLW];
        SCLAB_UNROLL
        for (std::size_t w = 0; w < kLW; ++w) {
            for (std::size_t k = 0; k < kV; ++k) {
                sg[w][k] = sigma[w * kV + k];
                tw[w][k] = twist[w * kV + k] == kNone ? -1 : std::int64_t(twist[w * kV + k]);
            }
        }
        for (std::size_t r = 0; r < nruns * kLW; ++r) {
            prod_l[r] = splat(1.0);
            prod_r[r] = splat(1.0);
        }
        auto right_init = [&] {
            SCLAB_UNROLL
            for (std::size_t w = 0; w < kLW; ++w) {
                R[w] = guard(d[n - 1] - sg[w], pm);
                Rd[w] = splat(-1.0);
            }
        };
        // R_i from R_{i+1}; inv keeps 1/R_{i+1}
        auto right_step = [&](std::size_t i) {
            const double b2 = b[i] * b[i];
            const double di = d[i];
            SCLAB_UNROLL
            for (std::size_t w = 0; w < kLW; ++w) {
                inv[w] = recip(R[w]);
                R[w] = guard((di - sg[w]) - b2 * inv[w], pm);
                Rd[w] = b2 * inv[w] * inv[w] * Rd[w] - 1.0;
            }
        };

        // full right sweep: checkpoints, plus z_t/z_k = prod_{j=k+1..t} (-b_{j-1}/R_j) for run heads t > k
        right_init();
        std::size_t first_run = nruns;  // runs whose head is >= i+1
        for (std::size_t i = n - 1;; --i) {
            if (i + 1 < n) {
                right_step(i);
                while (first_run > 0 && req[run_start[first_run - 1]] >= i + 1) --first_run;
                if (first_run < nruns) {
                    const std::int64_t j = std::int64_t(i + 1);
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        const vd ratio = -b[i] * inv[w];
                        const vi in_range = tw[w] < j;
                        for (std::size_t r = first_run; r < nruns; ++r) {
                            vd& pr = prod_r[r * kLW + w];
                            pr = in_range ? pr * ratio : pr;
                        }
                    }
                }
            }
            if (i % kBlock == 0) {
                SCLAB_UNROLL
                for (std::size_t w = 0; w < kLW; ++w) {
                    ck_r[(i / kBlock) * kLW + w] = R[w];
                    ck_rd[(i / kBlock) * kLW + w] = Rd[w];
                }
            }
            if (i == 0) break;
        }

        vd rb[kBlock][kLW], rdb[kBlock][kLW];
        vd L[kLW], Ld[kLW], best[kLW], gb[kLW], gdb[kLW], gkv[kLW], gdkv[kLW], linv[kLW];
        vi c[kLW], kb[kLW];
        SCLAB_UNROLL
        for (std::size_t w = 0; w < kLW; ++w) {
            gkv[w] = vd{};
            gdkv[w] = splat(-1.0);
        }
        std::size_t next_req = 0;
        std::size_t live_runs = 0;  // runs whose head is <= i-1
        for (std::size_t blk = 0; blk < nblocks; ++blk) {
            const std::size_t j0 = blk * kBlock;
            const std::size_t j1 = std::min(n, j0 + kBlock);
            // right pivots over [j0, j1), bit-identical to the full sweep
            std::size_t top;
            if (j1 == n) {
                top = n - 1;
                right_init();
            } else {
                top = j1;
                SCLAB_UNROLL
                for (std::size_t w = 0; w < kLW; ++w) {
                    R[w] = ck_r[(blk + 1) * kLW + w];
                    Rd[w] = ck_rd[(blk + 1) * kLW + w];
                }
            }
            for (std::size_t i = top;; --i) {
                if (i < top) right_step(i);
                if (i < j1) {
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        rb[i - j0][w] = R[w];
                        rdb[i - j0][w] = Rd[w];
                    }
                }
                if (i == j0) break;
            }

            for (std::size_t i = j0; i < j1; ++i) {
                const double di = d[i];
                const vi iv = std::int64_t(i) - vi{};
                if (i == 0) {
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        const vd l = di - sg[w];
                        c[w] = -(l < 0.0);
                        L[w] = guard(l, pm);
                        Ld[w] = splat(-1.0);
                        gb[w] = L[w] + rb[0][w] - (di - sg[w]);
                        best[w] = vabs(gb[w]);
                        gdb[w] = Ld[w] + rdb[0][w] + 1.0;
                        kb[w] = vi{};
                    }
                } else {
                    const double bi = b[i - 1];
                    const double b2 = bi * bi;
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        linv[w] = recip(L[w]);
                        const vd l = (di - sg[w]) - b2 * linv[w];
                        Ld[w] = b2 * linv[w] * linv[w] * Ld[w] - 1.0;
                        c[w] -= l < 0.0;
                        L[w] = guard(l, pm);
                        const vd gg = L[w] + rb[i - j0][w] - (di - sg[w]);
                        const vd a = vabs(gg);
                        const vd gdv = Ld[w] + rdb[i - j0][w] + 1.0;
                        const vi better = a < best[w];
                        best[w] = better ? a : best[w];
                        gb[w] = better ? gg : gb[w];
                        gdb[w] = better ? gdv : gdb[w];
                        kb[w] = better ? iv : kb[w];
                        const vi at = tw[w] == iv;
                        gkv[w] = at ? gg : gkv[w];
                        gdkv[w] = at ? gdv : gdkv[w];
                    }
                    // z_t/z_k = prod_{j=t..k-1} (-b_j/L_j) for run heads t < k
                    while (live_runs < nruns && req[run_start[live_runs]] <= i - 1) ++live_runs;
                    if (live_runs > 0) {
                        const vi jm = std::int64_t(i - 1) - vi{};
                        SCLAB_UNROLL
                        for (std::size_t w = 0; w < kLW; ++w) {
                            const vd ratio = -bi * linv[w];
                            const vi in_range = jm < tw[w];
                            for (std::size_t r = 0; r < live_runs; ++r) {
                                vd& pl = prod_l[r * kLW + w];
                                pl = in_range ? pl * ratio : pl;
                            }
                        }
                    }
                }
                if (i == 0) {
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        const vi at = tw[w] == iv;
                        gkv[w] = at ? gb[w] : gkv[w];
                        gdkv[w] = at ? gdb[w] : gdkv[w];
                    }
                }
                if (next_req < req.size() && req[next_req] == i) {
                    SCLAB_UNROLL
                    for (std::size_t w = 0; w < kLW; ++w) {
                        cap_l[next_req * kLW + w] = L[w];
                        cap_r[next_req * kLW + w] = rb[i - j0][w];
                    }
                    ++next_req;
                }
            }
        }
        for (std::size_t w = 0; w < kLW; ++w) {
            gk[w] = gkv[w];
            gdk[w] = gdkv[w];
        }
        for (std::size_t k = 0; k < kLanes; ++k) {
            const std::size_t w = k / kV, j = k % kV;
            count[k] = std::size_t(c[w][j]);
            kbest[k] = std::size_t(kb[w][j]);
            g[k] = gb[w][j];
            gd[k] = gdb[w][j];
        }
    }

    double twist_gamma(std::size_t lane) const { return gk[lane / kV][lane % kV]; }

    // Unit eigenvector components at the requested nodes for one lane, using the
    // twist that was fixed for the last sweep.
    bool sample(const Matrix& m, std::size_t lane, std::span<const std::size_t> nodes, double* out) const {
        const double* b = m.off.data();
        const std::size_t w = lane / kV, j = lane % kV;
        const std::size_t k = twist[lane];
        const double nrm2 = -gdk[w][j];
        if (k == kNone || !(nrm2 >= 1.0) || !std::isfinite(nrm2)) return false;
        const double s = 1.0 / std::sqrt(nrm2);
        std::vector<double> val(req.size());
        for (std::size_t r = 0; r < run_start.size(); ++r) {
            const std::size_t c0 = run_start[r];
            const std::size_t c1 = r + 1 < run_start.size() ? run_start[r + 1] : req.size();
            const std::size_t t0 = req[c0];
            double z = t0 < k ? prod_l[r * kLW + w][j] : t0 > k ? prod_r[r * kLW + w][j] : 1.0;
            val[c0] = z;
            for (std::size_t c = c0 + 1; c < c1; ++c) {
                const std::size_t t = req[c - 1];
                // z_t = -b_t z_{t+1} / L_t up to the twist, z_{t+1} = -b_t z_t / R_{t+1} beyond it
                z = t + 1 <= k ? z * (-cap_l[(c - 1) * kLW + w][j] / b[t]) : z * (-b[t] / cap_r[c * kLW + w][j]);
                val[c] = z;
            }
        }
        for (std::size_t c = 0; c < req.size(); ++c) {
            val[c] *= s;
            if (!std::isfinite(val[c])) return false;
        }
        for (std::size_t c = 0; c < nodes.size(); ++c)
            out[c] = val[std::size_t(std::lower_bound(req.begin(), req.end(), nodes[c]) - req.begin())];
        return true;
    }
};

void solve_isolated(const Matrix& m, const std::vector<Isolated>& work, std::span<const std::size_t> nodes,
                    std::size_t base, const WindowOptions& opt, double scale, double abs_tol, double pivmin,
                    WindowResult& out) {
    struct State {
        bool active = false;
        std::size_t task = 0;
        double blo = 0, bhi = 0, sigma = 0, last = HUGE_VAL;
        int it = 0;
        bool final = false;  // converged; this sweep only re-twists for the samples
    };
    Lanes lanes(m.size(), nodes);
    State st[kLanes];
    std::vector<std::size_t> failed;
    std::size_t next_task = 0;
    double sig[kLanes], g[kLanes], gd[kLanes];
    std::size_t cnt[kLanes], kb[kLanes];
    const std::size_t nn = nodes.size();

    for (;;) {
        std::size_t live = 0;
        for (std::size_t k = 0; k < kLanes; ++k) {
            State& s = st[k];
            if (!s.active && next_task < work.size()) {
                const Isolated& w = work[next_task];
                s = State{true, next_task++, w.lo, w.hi, 0.5 * (w.lo + w.hi), HUGE_VAL, 0, false};
                lanes.twist[k] = Lanes::kNone;
            }
            live += s.active;
        }
        if (!live) break;
        double filler = 0.0;
        for (auto& s : st)
            if (s.active) filler = s.sigma;
        for (std::size_t k = 0; k < kLanes; ++k) {
            sig[k] = st[k].active ? st[k].sigma : filler;
            if (!st[k].active) lanes.twist[k] = Lanes::kNone;
        }
        lanes.sweep(m, sig, pivmin, cnt, g, gd, kb);
        ++out.sweeps;

        for (std::size_t k = 0; k < kLanes; ++k) {
            State& s = st[k];
            if (!s.active) continue;
            const std::size_t j = work[s.task].index;
            if (cnt[k] > j)
                s.bhi = std::min(s.bhi, s.sigma);
            else
                s.blo = std::max(s.blo, s.sigma);
            const double delta = -g[k] / gd[k];
            if (!std::isfinite(delta) || !(gd[k] < 0.0)) {
                failed.push_back(s.task);
                s.active = false;
                continue;
            }
            const double ad = std::fabs(delta);
            const double mag = std::max(std::fabs(s.sigma), scale);
            // converged, or stalled at the roundoff floor of the twisted factorization
            // a correction far below the distance to the neighbours is final: the next
            // error is O(delta^2/gap) and the sample error O(delta/gap)
            const double gap_lb = std::min(s.sigma - work[s.task].lo, work[s.task].hi - s.sigma);
            const bool conv = ad <= std::max(opt.rel_tol * std::fabs(s.sigma), abs_tol) || ad <= 1e-10 * gap_lb ||
                              (ad <= 1e-9 * mag && ad > 0.25 * s.last);
            if (conv || s.final) {
                const double lambda = std::clamp(s.sigma + delta, s.blo, s.bhi);
                // the fixed twist must carry a large component for accurate samples
                const bool twist_ok = lanes.twist[k] != Lanes::kNone &&
                                      std::fabs(lanes.twist_gamma(k)) <= 16.0 * std::fabs(g[k]) + 1e-300;
                if (twist_ok || s.final) {
                    const std::size_t row = j - base;
                    out.values[row] = lambda;
                    if (!lanes.sample(m, k, nodes, out.samples.data() + row * nn)) failed.push_back(s.task);
                    s.active = false;
                    continue;
                }
                s.final = true;
                s.sigma = lambda;
                lanes.twist[k] = kb[k];
                continue;
            }
            if (++s.it >= opt.max_rqi) {
                failed.push_back(s.task);
                s.active = false;
                continue;
            }
            double nx = s.sigma + delta;
            // keep inside the bracket; halve when the iteration is not contracting
            if (!(nx > s.blo && nx < s.bhi) || (ad > 1e-9 * mag && ad > 0.5 * s.last)) nx = 0.5 * (s.blo + s.bhi);
            s.last = ad;
            s.sigma = nx;
            lanes.twist[k] = kb[k];
        }
    }

    Workspace ws(m.size());
    for (std::size_t task : failed) {
        ++out.rqi_fallbacks;
        const Isolated& w = work[task];
        const double lambda = bisect_index(m, w.index, w.lo, w.hi, abs_tol);
        std::size_t c = 0;
        double nrm2 = 1.0;
        twisted_step(m, lambda, pivmin, ws, c, nrm2);
        require(std::isfinite(nrm2), ErrorCode::Stagnation, "inverse iteration stagnated");
        const std::size_t row = w.index - base;
        out.values[row] = lambda;
        const double s = 1.0 / std::sqrt(nrm2);
        for (std::size_t c2 = 0; c2 < nn; ++c2) out.samples[row * nn + c2] = ws.z[nodes[c2]] * s;
    }
}

}  // namespace

std::size_t count_below(const Matrix& m, double sigma) {
    std::size_t c = 0;
    count_block(m, &sigma, 1, &c, pivot_floor(m));
    return c;
}

void count_below(const Matrix& m, std::span<const double> sigmas, std::span<std::size_t> counts) {
    const double pivmin = pivot_floor(m);
    for (std::size_t i = 0; i < sigmas.size(); i += kBatch) {
        const std::size_t ns = std::min(kBatch, sigmas.size() - i);
        count_block(m, sigmas.data() + i, ns, counts.data() + i, pivmin);
    }
}

std::vector<double> eigenvector(const Matrix& m, double lambda) {
    const std::size_t n = m.size();
    std::vector<double> x(n);
    // deterministic start vector
    std::uint64_t s = 0x9E3779B97F4A7C15ull;
    for (std::size_t i = 0; i < n; ++i) {
        s = s * 6364136223846793005ull + 1442695040888963407ull;
        x[i] = 0.5 + double(s >> 11) * 0x1.0p-53;
    }
    for (int it = 0; it < 3; ++it) {
        shifted_solve(m, lambda, x);
        normalize(x);
    }
    return x;
}

WindowResult eigen_window(const Matrix& m, double lo, double hi, std::span<const std::size_t> nodes,
                          const WindowOptions& opt) {
    const std::size_t n = m.size();
    require(n >= 2, ErrorCode::Domain, "tridiagonal matrix needs at least two rows");
    require(m.off.size() + 1 == n, ErrorCode::Domain, "off-diagonal length mismatch");
    require(hi > lo, ErrorCode::Domain, "empty eigenvalue window");
    for (std::size_t nd : nodes) require(nd < n, ErrorCode::Domain, "sample node out of range");

    WindowResult out;
    const double pivmin = pivot_floor(m);
    const double scale = std::max(std::fabs(lo), std::fabs(hi));
    const double abs_tol = opt.rel_tol * std::max(scale, 1e-300);

    struct Iv {
        double lo, hi;
        std::size_t clo, chi;
    };
    double ends[2] = {lo, hi};
    std::size_t ce[2];
    count_below(m, ends, ce);
    out.count_lo = ce[0];
    if (ce[1] <= ce[0]) return out;

    std::vector<Iv> pending{{lo, hi, ce[0], ce[1]}}, isolated, clusters;
    std::vector<double> mids;
    std::vector<std::size_t> cm;
    while (!pending.empty()) {
        const std::size_t take = std::min<std::size_t>(pending.size(), 64);
        std::vector<Iv> batch(pending.end() - take, pending.end());
        pending.resize(pending.size() - take);
        mids.resize(take);
        cm.resize(take);
        for (std::size_t i = 0; i < take; ++i) mids[i] = 0.5 * (batch[i].lo + batch[i].hi);
        count_below(m, mids, cm);
        out.count_shifts += take;
        for (std::size_t i = 0; i < take; ++i) {
            const Iv parts[2] = {{batch[i].lo, mids[i], batch[i].clo, cm[i]},
                                 {mids[i], batch[i].hi, cm[i], batch[i].chi}};
            for (const Iv& p : parts) {
                const std::size_t k = p.chi - p.clo;
                if (k == 0) continue;
                if (k == 1) {
                    isolated.push_back(p);
                    continue;
                }
                const double mag = std::max(std::fabs(p.lo), std::fabs(p.hi));
                if (p.hi - p.lo <= opt.cluster_rel * mag + 4.0 * abs_tol)
                    clusters.push_back(p);
                else
                    pending.push_back(p);
            }
        }
    }

    const std::size_t total = ce[1] - ce[0];
    out.values.assign(total, 0.0);
    out.samples.assign(total * nodes.size(), 0.0);
    out.cluster.assign(total, -1);

    std::vector<Isolated> work;
    work.reserve(isolated.size());
    for (const Iv& iv : isolated) work.push_back({iv.lo, iv.hi, iv.clo});
    solve_isolated(m, work, nodes, ce[0], opt, scale, abs_tol, pivmin, out);

    int cid = 0;
    for (const Iv& iv : clusters) {
        std::vector<std::vector<double>> vecs;
        for (std::size_t j = iv.clo; j < iv.chi; ++j) {
            const double lam = bisect_index(m, j, iv.lo, iv.hi, abs_tol);
            // inverse iteration with Gram-Schmidt against earlier members
            std::vector<double> x = eigenvector(m, lam);
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& v : vecs) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i) dot += v[i] * x[i];
                    for (std::size_t i = 0; i < n; ++i) x[i] -= dot * v[i];
                }
                normalize(x);
            }
            const std::size_t row = j - ce[0];
            out.values[row] = lam;
            out.cluster[row] = cid;
            for (std::size_t c = 0; c < nodes.size(); ++c) out.samples[row * nodes.size() + c] = x[nodes[c]];
            vecs.push_back(std::move(x));
        }
        ++cid;
    }
    return out;
}

}  // namespace sclab::tridiag
