#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "historic/moran.hpp"
#include "moran_internal.hpp"

namespace historic {

using detail::kInf;

double LevelPlan::log_kappa(int k) const {
    double s = 0;
    for (int i = 1; i <= k; ++i) s += static_cast<double>(N(i)) * family(i).log_M;
    return s;
}

namespace {

int gap_positions(const SeparatedFamily& f) { return f.unit() - f.segment_length(); }

std::size_t common_prefix(const Word& a, const Word& b) {
    auto j = first_difference(a, b);
    return j ? *j : std::min(a.size(), b.size());
}

}  // namespace

FractalLevel build_fractal_level(const LevelPlan& plan, int k, std::uint64_t atom_cap, std::uint64_t symbol_cap) {
    if (k < 1 || k > plan.depth()) throw PreconditionError("level " + std::to_string(k) + " outside the achieved depth");
    FractalLevel lv;
    lv.k = k;
    lv.t = plan.t(k);
    const long long len = plan.t(k) + plan.family(k).lookahead;
    if (static_cast<std::uint64_t>(len) > symbol_cap) throw EnumerationCapError("fractal level word length", symbol_cap);

    std::vector<int> slot_level;
    double log_total = 0;
    for (int i = 1; i <= k; ++i) {
        for (long long j = 0; j < plan.N(i); ++j) slot_level.push_back(i);
        log_total += static_cast<double>(plan.N(i)) * std::log(static_cast<double>(plan.family(i).size()));
        lv.log_kappa_product += static_cast<double>(plan.N(i)) * plan.family(i).log_M;
    }
    lv.total_atoms = std::exp(log_total);
    const double budget = static_cast<double>(std::min<std::uint64_t>(atom_cap, symbol_cap / static_cast<std::uint64_t>(len)));
    if (budget < 1) throw EnumerationCapError("fractal level atoms", atom_cap);
    // Exact comparison when the count is small enough to be an integer in a double.
    lv.sampled = log_total > std::log(budget) + 1e-9;
    const auto count = static_cast<std::size_t>(lv.sampled ? budget : std::llround(lv.total_atoms));

    const std::size_t slots = slot_level.size();
    std::vector<std::uint32_t> odometer(slots, 0);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<std::uint32_t> tuple(slots);
        if (lv.sampled) {
            // Stratified: mixed-radix digits of (s + 1/2) / count.
            double f = (static_cast<double>(s) + 0.5) / static_cast<double>(count);
            for (std::size_t d = 0; d < slots; ++d) {
                const double radix = static_cast<double>(plan.family(slot_level[d]).size());
                f *= radix;
                const double digit = std::min(std::floor(f), radix - 1);
                tuple[d] = static_cast<std::uint32_t>(digit);
                f -= digit;
            }
        } else {
            tuple = odometer;
            for (std::size_t d = slots; d-- > 0;) {
                if (++odometer[d] < plan.family(slot_level[d]).size()) break;
                odometer[d] = 0;
            }
        }
        GluingSpec spec{{}, {}, Resolution(plan.family(k).lookahead)};
        Atom atom;
        for (std::size_t d = 0; d < slots; ++d) {
            const auto& fam = plan.family(slot_level[d]);
            spec.segments.push_back(fam.words[tuple[d]]);
            if (d + 1 < slots) spec.gaps.push_back(fam.lag);
            atom.log_weight += fam.log_weights[tuple[d]];
        }
        ShadowCertificate cert = glue(spec, plan.sys);
        lv.shadowing_verified = lv.shadowing_verified && cert.verified;
        atom.word = std::move(cert.glued);
        const auto rest = static_cast<int>(len - static_cast<long long>(atom.word.size()));
        if (rest > 0) {
            auto tail = connector(plan.sys, atom.word.back(), -1, rest);
            atom.word.insert(atom.word.end(), tail->begin(), tail->end());
        }
        atom.tuple = std::move(tuple);
        lv.atoms.push_back(std::move(atom));
    }
    if (lv.sampled) {
        lv.log_kappa = lv.log_kappa_product;
    } else {
        std::vector<double> w;
        w.reserve(lv.atoms.size());
        for (const auto& a : lv.atoms) w.push_back(a.log_weight);
        lv.log_kappa = detail::log_sum_exp(w);
    }
    return lv;
}

SeparationReport check_separation(const FractalLevel& level, const Resolution& eps, std::uint64_t pair_limit) {
    const std::size_t A = level.atoms.size();
    if (A < 2) throw PreconditionError("separation needs at least two atoms");
    const int t = static_cast<int>(level.t);
    auto separated = [&](std::size_t a, std::size_t b) {
        const Dyadic d = bowen_from_difference(first_difference(level.atoms[a].word, level.atoms[b].word), t);
        return d.exceeds(3, eps.m);
    };
    SeparationReport rep;
    const std::uint64_t pairs = static_cast<std::uint64_t>(A) * (A - 1) / 2;
    if (pairs <= pair_limit) {
        rep.exhaustive = true;
        rep.pairs = pairs;
        for (std::size_t a = 0; a < A && rep.passed; ++a)
            for (std::size_t b = a + 1; b < A; ++b)
                if (!separated(a, b)) {
                    rep.passed = false;
                    rep.witness = std::make_pair(a, b);
                    break;
                }
        rep.note = "all pairs";
        return rep;
    }
    // The closest pair in the prefix metric is adjacent in lexicographic order.
    std::vector<std::size_t> order(A);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return level.atoms[a].word < level.atoms[b].word; });
    rep.pairs = A - 1;
    for (std::size_t i = 1; i < A; ++i)
        if (!separated(order[i - 1], order[i])) {
            rep.passed = false;
            rep.witness = std::make_pair(std::min(order[i - 1], order[i]), std::max(order[i - 1], order[i]));
            break;
        }
    rep.note = "sorted neighbours (covers all pairs)";
    return rep;
}

SeparationReport check_separation_structural(const LevelPlan& plan, int k) {
    if (k < 1 || k > plan.depth()) throw PreconditionError("level outside the achieved depth");
    SeparationReport rep;
    rep.exhaustive = true;
    const int m = plan.eps.m;
    for (int i = 1; i <= k && rep.passed; ++i) {
        const auto& f = plan.family(i);
        std::vector<std::size_t> order(f.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f.words[a] < f.words[b]; });
        const std::size_t depth = static_cast<std::size_t>(f.n + m - 2);
        for (std::size_t j = 1; j < order.size(); ++j)
            if (common_prefix(f.words[order[j - 1]], f.words[order[j]]) >= depth) {
                rep.passed = false;
                rep.witness = std::make_pair(std::min(order[j - 1], order[j]), std::max(order[j - 1], order[j]));
                rep.note = "family " + std::to_string(i) + " repeats a depth-" + std::to_string(depth) + " prefix";
                break;
            }
        if (!rep.passed) break;
        if (f.lag < f.lookahead) {
            rep.passed = false;
            rep.note = "family " + std::to_string(i) + " lag is shorter than its lookahead";
        }
    }
    if (rep.passed) {
        // Worst placement: a difference inside the last slot of level k, just below depth n + m - 2.
        const auto& f = plan.family(k);
        const long long j = plan.offset(k, plan.N(k)) + f.n + m - 3;
        const Dyadic d = bowen_from_difference(static_cast<std::size_t>(j), static_cast<int>(plan.t(k)));
        rep.passed = d.exceeds(3, m);
        rep.note = rep.passed ? "distinct family prefixes at every slot" : "last slot too close to t_k";
    }
    return rep;
}

double DiscreteMeasure::measure_of(const Word& prefix) const {
    auto it = std::lower_bound(support.begin(), support.end(), prefix);
    double s = 0;
    for (auto i = static_cast<std::size_t>(it - support.begin()); i < support.size() && has_prefix(support[i], prefix); ++i)
        s += mass[i];
    return s;
}

DiscreteMeasure build_measures(const FractalLevel& level) {
    std::vector<std::size_t> order(level.atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return level.atoms[a].word < level.atoms[b].word; });
    std::vector<double> w;
    for (const auto& a : level.atoms) w.push_back(a.log_weight);
    // Sampled levels are normalized over the sample itself.
    const double z = detail::log_sum_exp(w);
    DiscreteMeasure mu;
    for (std::size_t i : order) {
        mu.support.push_back(level.atoms[i].word);
        mu.mass.push_back(std::exp(level.atoms[i].log_weight - z));
        mu.total += mu.mass.back();
    }
    return mu;
}

namespace {

struct Located {
    int k;
    long long j;
};

Located locate(const LevelPlan& plan, long long n, int depth) {
    if (n < plan.t(1) || n >= plan.t(depth))
        throw PreconditionError("order " + std::to_string(n) + " outside [t_1, t_" + std::to_string(depth) + ")");
    int k = 1;
    while (k + 1 < depth && plan.t(k + 1) <= n) ++k;
    return {k, (n - plan.t(k)) / plan.family(k + 1).unit()};
}

BallCheck bound_terms(const LevelPlan& plan, const BoundContext& ctx, long long n, const Located& at, double log_mu,
                      double S) {
    BallCheck c;
    c.n = n;
    c.k = at.k;
    c.j = at.j;
    c.log_mu = log_mu;
    const auto& next = plan.family(at.k + 1);
    double gaps = 0;
    for (int i = 1; i <= at.k; ++i) gaps += static_cast<double>(plan.N(i)) * gap_positions(plan.family(i));
    gaps += static_cast<double>(at.j) * gap_positions(next);
    const double nn = static_cast<double>(n);
    c.W = gaps + next.unit();
    c.D = ctx.rate * gaps;
    c.E = ctx.rate * static_cast<double>(n - plan.t(at.k) - at.j * next.unit());
    const double common = S + 2 * nn * ctx.var_psi + ctx.psi_norm * c.W;
    c.log_rhs = -plan.log_kappa(at.k) - static_cast<double>(at.j) * next.log_M + common;
    c.log_rhs_de = -(ctx.rate * nn - c.D - c.E) + common;
    c.log_rhs_simple = -nn * ctx.bound_slope() + S;
    c.simple_applies = c.D <= ctx.gamma * nn && c.E <= ctx.gamma * nn && ctx.psi_norm * c.W <= ctx.gamma * nn;
    return c;
}

double tolerance(long long n) { return 1e-9 * std::max(1.0, static_cast<double>(n)); }

void record(BallBoundReport& rep, long long n, double d_full, double d_de, double d_simple, bool applies,
            std::vector<std::pair<long long, bool>>& applies_at) {
    rep.worst_ball = std::max(rep.worst_ball, d_full);
    rep.worst_de = std::max(rep.worst_de, d_de);
    rep.worst_any_simple = std::max(rep.worst_any_simple, d_simple);
    if (applies) rep.worst_simple = std::max(rep.worst_simple, d_simple);
    const double tol = tolerance(n);
    if (d_full > tol || d_de > tol || (applies && d_simple > tol)) ++rep.violations;
    applies_at.emplace_back(n, applies);
}

void finish(BallBoundReport& rep, std::vector<std::pair<long long, bool>>& applies_at) {
    std::sort(applies_at.begin(), applies_at.end());
    // Smallest swept order from which the simplified bound applies at every later swept order.
    rep.threshold_n = -1;
    for (auto it = applies_at.rbegin(); it != applies_at.rend() && it->second; ++it) rep.threshold_n = it->first;
    rep.passed = rep.violations == 0;
}

}  // namespace

BallCheck check_ball(const LevelPlan& plan, const DiscreteMeasure& mu, const LocallyConstantPotential& psi,
                     const BoundContext& ctx, const Word& q, long long n) {
    const Located at = locate(plan, n, plan.depth());
    const auto W = static_cast<std::size_t>(n + plan.eps.m + 1);
    if (q.size() < W) throw PreconditionError("ball centre shorter than n + m + 1");
    const double mass = mu.measure_of(prefix(q, W));
    return bound_terms(plan, ctx, n, at, mass > 0 ? std::log(mass) : -kInf,
                       birkhoff_sum(psi, q, static_cast<int>(n)));
}

BallBoundReport verify_ball_bound(const LevelPlan& plan, const FractalLevel& deepest, const LocallyConstantPotential& psi,
                                  const BoundContext& ctx, long long n_from, long long n_to) {
    if (deepest.sampled) throw PreconditionError("explicit ball sweep needs an unsampled level");
    if (deepest.k < 2) throw PreconditionError("explicit ball sweep needs depth >= 2");
    BallBoundReport rep;
    rep.n_from = std::max(n_from, plan.t(1));
    rep.n_to = std::min(n_to, plan.t(deepest.k) - 1);
    const DiscreteMeasure mu = build_measures(deepest);
    const std::size_t A = mu.support.size();
    const auto len = static_cast<std::size_t>(rep.n_to + 1);
    if (static_cast<double>(A) * static_cast<double>(len) > static_cast<double>(std::size_t{1} << 25))
        throw EnumerationCapError("explicit ball sweep prefix sums", std::uint64_t{1} << 25);
    // pre[a][i]: S_i psi of atom a.
    std::vector<std::vector<double>> pre(A, std::vector<double>(len + 1, 0.0));
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t i = 0; i < len; ++i) pre[a][i + 1] = pre[a][i] + psi.at(mu.support[a], i);
    std::vector<std::size_t> lcp(A, 0);
    for (std::size_t a = 1; a < A; ++a) lcp[a] = common_prefix(mu.support[a - 1], mu.support[a]);

    std::vector<std::pair<long long, bool>> applies_at;
    for (long long n = rep.n_from; n <= rep.n_to; ++n) {
        const Located at = locate(plan, n, deepest.k);
        const auto W = static_cast<std::size_t>(n + plan.eps.m + 1);
        double d_full = -kInf, d_de = -kInf, d_simple = -kInf;
        bool applies = true;
        for (std::size_t a = 0; a < A;) {
            std::size_t b = a + 1;
            double mass = mu.mass[a];
            while (b < A && lcp[b] >= W) mass += mu.mass[b++];
            const BallCheck c = bound_terms(plan, ctx, n, at, std::log(mass), pre[a][static_cast<std::size_t>(n)]);
            d_full = std::max(d_full, c.log_mu - c.log_rhs);
            d_de = std::max(d_de, c.log_mu - c.log_rhs_de);
            d_simple = std::max(d_simple, c.log_mu - c.log_rhs_simple);
            applies = c.simple_applies;
            ++rep.balls;
            a = b;
        }
        ++rep.orders;
        rep.orders_list.push_back(n);
        record(rep, n, d_full, d_de, d_simple, applies, applies_at);
    }
    finish(rep, applies_at);
    return rep;
}

namespace {

// Sorted view of one family with prefix sums of psi over its Birkhoff segments.
struct FamilyIndex {
    std::vector<std::size_t> order;
    std::vector<std::size_t> lcp;
    std::vector<std::vector<double>> seg_sum;  // [sorted word][L]: psi over segment positions < L
    bool stored = false;
};

FamilyIndex index_family(const SeparatedFamily& f, const LocallyConstantPotential& psi) {
    FamilyIndex ix;
    ix.order.resize(f.size());
    std::iota(ix.order.begin(), ix.order.end(), 0);
    std::sort(ix.order.begin(), ix.order.end(), [&](std::size_t a, std::size_t b) { return f.words[a] < f.words[b]; });
    ix.lcp.assign(f.size(), 0);
    for (std::size_t i = 1; i < f.size(); ++i) ix.lcp[i] = common_prefix(f.words[ix.order[i - 1]], f.words[ix.order[i]]);
    ix.stored = static_cast<double>(f.size()) * f.n <= static_cast<double>(std::size_t{1} << 24);
    if (ix.stored) {
        std::vector<char> in_seg(static_cast<std::size_t>(f.n), 0);
        for (const auto& [o, l] : f.segments)
            for (int i = o; i < o + l; ++i) in_seg[static_cast<std::size_t>(i)] = 1;
        ix.seg_sum.resize(f.size());
        for (std::size_t s = 0; s < f.size(); ++s) {
            const Word& w = f.words[ix.order[s]];
            auto& row = ix.seg_sum[s];
            row.assign(static_cast<std::size_t>(f.n) + 1, 0.0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(f.n); ++i)
                row[i + 1] = row[i] + (in_seg[i] ? psi.at(w, i) : 0.0);
        }
    }
    return ix;
}

double segment_sum(const SeparatedFamily& f, const FamilyIndex& ix, const LocallyConstantPotential& psi, std::size_t s,
                   long long upto) {
    const auto L = static_cast<std::size_t>(std::clamp<long long>(upto, 0, f.n));
    if (ix.stored) return ix.seg_sum[s][L];
    const Word& w = f.words[ix.order[s]];
    double sum = 0;
    for (const auto& [o, l] : f.segments)
        for (std::size_t i = static_cast<std::size_t>(o); i < std::min(L, static_cast<std::size_t>(o + l)); ++i)
            sum += psi.at(w, i);
    return sum;
}

long long covered(const SeparatedFamily& f, long long upto) {
    long long c = 0;
    for (const auto& [o, l] : f.segments) c += std::max(0LL, std::min<long long>(o + l, upto) - o);
    return c;
}

}  // namespace

BallBoundReport verify_ball_bound_structural(const LevelPlan& plan, const LocallyConstantPotential& psi,
                                             const BoundContext& ctx, const std::vector<long long>& orders) {
    if (plan.depth() < 2) throw PreconditionError("ball bound needs depth >= 2");
    if (psi.range() > plan.eps.m + 2) throw PreconditionError("psi range exceeds m + 2");
    BallBoundReport rep;
    rep.structural = true;
    std::map<int, FamilyIndex> index;
    std::vector<std::pair<long long, bool>> applies_at;
    rep.n_from = orders.empty() ? 0 : *std::min_element(orders.begin(), orders.end());
    rep.n_to = orders.empty() ? 0 : *std::max_element(orders.begin(), orders.end());
    for (long long n : orders) {
        const Located at = locate(plan, n, plan.depth());
        const int kn = at.k + 1;
        const auto& f = plan.family(kn);
        if (!index.count(kn)) index.emplace(kn, index_family(f, psi));
        const FamilyIndex& ix = index.at(kn);
        const long long o = plan.t(at.k) + at.j * f.unit();
        const long long W = n + plan.eps.m + 1;

        double fixed = -plan.log_kappa(at.k) - static_cast<double>(at.j) * f.log_M;
        long long cover = 0;
        for (int i = 1; i <= at.k; ++i) cover += plan.N(i) * plan.family(i).segment_length();
        cover += at.j * f.segment_length();
        double a_next = 0, P = 0;
        if (o + f.word_length() <= W) {
            a_next = -f.log_M;
            fixed += a_next;
            cover += f.segment_length();
        } else {
            const auto Lp = static_cast<std::size_t>(W - o);
            const long long rel = n - o;
            cover += covered(f, rel);
            P = -kInf;
            for (std::size_t a = 0; a < f.size();) {
                std::size_t b = a;
                std::vector<double> w;
                do {
                    w.push_back(f.log_weights[ix.order[b]]);
                    ++b;
                } while (b < f.size() && ix.lcp[b] >= Lp);
                P = std::max(P, detail::log_sum_exp(w) - f.log_M - segment_sum(f, ix, psi, a, rel));
                a = b;
            }
        }
        const double G = static_cast<double>(n - cover);
        const double gap_term = -ctx.psi_min * G;
        const BallCheck c = bound_terms(plan, ctx, n, at, 0.0, 0.0);
        const double nn = static_cast<double>(n);
        const double slack = 2 * nn * ctx.var_psi + ctx.psi_norm * c.W;
        const double d_full = a_next + P + gap_term - slack;
        const double d_de = fixed + P + gap_term + (ctx.rate * nn - c.D - c.E) - slack;
        const double d_simple = fixed + P + gap_term + nn * ctx.bound_slope();
        ++rep.orders;
        rep.balls += f.size();
        rep.orders_list.push_back(n);
        record(rep, n, d_full, d_de, d_simple, c.simple_applies, applies_at);
    }
    finish(rep, applies_at);
    return rep;
}

namespace {

using Matrix = std::vector<std::vector<double>>;

struct Semiring {
    bool maximize;
    double zero() const { return maximize ? -kInf : kInf; }
    double pick(double a, double b) const { return maximize ? std::max(a, b) : std::min(a, b); }
    double times(double a, double b) const {
        if (a == zero() || b == zero()) return zero();
        return a + b;
    }
    std::vector<double> apply(const std::vector<double>& v, const Matrix& T) const {
        std::vector<double> out(T.empty() ? 0 : T[0].size(), zero());
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] == zero()) continue;
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = pick(out[j], times(v[i], T[i][j]));
        }
        return out;
    }
    Matrix multiply(const Matrix& A, const Matrix& B) const {
        Matrix C(A.size(), std::vector<double>(B.empty() ? 0 : B[0].size(), zero()));
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t l = 0; l < B.size(); ++l) {
                if (A[i][l] == zero()) continue;
                for (std::size_t j = 0; j < C[i].size(); ++j) C[i][j] = pick(C[i][j], times(A[i][l], B[l][j]));
            }
        return C;
    }
    std::vector<double> power_apply(std::vector<double> v, Matrix T, long long e) const {
        while (e > 0) {
            if (e & 1) v = apply(v, T);
            e >>= 1;
            if (e > 0) T = multiply(T, T);
        }
        return v;
    }
};

// Words of one family grouped by (first symbols, lookahead); inner = S_n phi of the word itself.
struct SlotClasses {
    std::vector<Word> heads, tails;
    std::vector<std::vector<double>> best_max, best_min;  // [head][tail]
};

SlotClasses slot_classes(const SeparatedFamily& f, const LocallyConstantPotential& phi, int hlen) {
    SlotClasses sc;
    std::map<Word, std::size_t> hid, tid;
    std::vector<std::tuple<std::size_t, std::size_t, double>> rows;
    for (const Word& w : f.words) {
        Word h(w.begin(), w.begin() + hlen);
        Word t(w.begin() + f.n, w.end());
        auto hi = hid.emplace(h, hid.size()).first->second;
        auto ti = tid.emplace(t, tid.size()).first->second;
        rows.emplace_back(hi, ti, birkhoff_sum(phi, w, f.n));
    }
    sc.heads.resize(hid.size());
    sc.tails.resize(tid.size());
    for (const auto& [w, i] : hid) sc.heads[i] = w;
    for (const auto& [w, i] : tid) sc.tails[i] = w;
    sc.best_max.assign(hid.size(), std::vector<double>(tid.size(), -kInf));
    sc.best_min.assign(hid.size(), std::vector<double>(tid.size(), kInf));
    for (const auto& [h, t, v] : rows) {
        sc.best_max[h][t] = std::max(sc.best_max[h][t], v);
        sc.best_min[h][t] = std::min(sc.best_min[h][t], v);
    }
    return sc;
}

// Gap windows after a unit whose lookahead is `tail`, followed by a unit starting with `head`.
double gap_sum(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& tail, const Word* head,
               int lag, int hlen, bool& ok) {
    const int c = lag - static_cast<int>(tail.size());
    Word v = tail;
    auto u = head ? connector(sys, tail.back(), head->front(), c) : connector(sys, tail.back(), -1, c + hlen);
    ok = u.has_value();
    if (!ok) return 0;
    v.insert(v.end(), u->begin(), u->end());
    if (head) v.insert(v.end(), head->begin(), head->end());
    double s = 0;
    for (int i = 0; i < lag; ++i) s += phi.at(v, static_cast<std::size_t>(i));
    return s;
}

}  // namespace

OscillationReport oscillation_check(const LevelPlan& plan, const LocallyConstantPotential& phi, double delta) {
    const int D = plan.depth();
    if (D < 2) throw PreconditionError("oscillation needs depth >= 2");
    const int r = phi.range();
    const int hlen = std::max(r - 1, 1);
    for (int i = 1; i <= D; ++i) {
        if (plan.family(i).lookahead < hlen) throw PreconditionError("lookahead shorter than the phi window");
        if (plan.family(i).lag < plan.family(i).lookahead) throw PreconditionError("lag shorter than the lookahead");
    }
    std::vector<SlotClasses> cls;
    for (int i = 1; i <= D; ++i) cls.push_back(slot_classes(plan.family(i), phi, hlen));

    OscillationReport rep;
    rep.passed = true;
    std::vector<double> lo(static_cast<std::size_t>(D) + 1), hi(static_cast<std::size_t>(D) + 1);
    for (bool maximize : {true, false}) {
        const Semiring sr{maximize};
        auto best = [&](int i) -> const std::vector<std::vector<double>>& {
            return maximize ? cls[static_cast<std::size_t>(i - 1)].best_max : cls[static_cast<std::size_t>(i - 1)].best_min;
        };
        // Transition from the tails of level i into (a unit of) level j.
        auto transition = [&](int i, int j) {
            const auto& from = cls[static_cast<std::size_t>(i - 1)];
            const auto& to = cls[static_cast<std::size_t>(j - 1)];
            Matrix T(from.tails.size(), std::vector<double>(to.tails.size(), sr.zero()));
            for (std::size_t a = 0; a < from.tails.size(); ++a)
                for (std::size_t h = 0; h < to.heads.size(); ++h) {
                    bool ok = false;
                    const double g = gap_sum(plan.sys, phi, from.tails[a], &to.heads[h], plan.family(i).lag, hlen, ok);
                    if (!ok) continue;
                    for (std::size_t b = 0; b < to.tails.size(); ++b)
                        T[a][b] = sr.pick(T[a][b], sr.times(g, best(j)[h][b]));
                }
            return T;
        };
        std::vector<double> V(cls[0].tails.size(), sr.zero());
        for (std::size_t h = 0; h < cls[0].heads.size(); ++h)
            for (std::size_t b = 0; b < V.size(); ++b) V[b] = sr.pick(V[b], best(1)[h][b]);
        for (int k = 1; k <= D; ++k) {
            if (k > 1) V = sr.apply(V, transition(k - 1, k));
            V = sr.power_apply(V, transition(k, k), plan.N(k) - 1);
            // Close level k: gap windows read into the next level's first head, or the fixed tail at the end.
            const auto& here = cls[static_cast<std::size_t>(k - 1)];
            double total = sr.zero();
            for (std::size_t a = 0; a < V.size(); ++a) {
                if (V[a] == sr.zero()) continue;
                if (k < D) {
                    for (const Word& h : cls[static_cast<std::size_t>(k)].heads) {
                        bool ok = false;
                        const double g = gap_sum(plan.sys, phi, here.tails[a], &h, plan.family(k).lag, hlen, ok);
                        if (ok) total = sr.pick(total, V[a] + g);
                    }
                } else {
                    bool ok = false;
                    const double g = gap_sum(plan.sys, phi, here.tails[a], nullptr, plan.family(k).lag, hlen, ok);
                    if (ok) total = sr.pick(total, V[a] + g);
                }
            }
            (maximize ? hi : lo)[static_cast<std::size_t>(k)] = total / static_cast<double>(plan.t(k));
        }
    }
    for (int k = 1; k <= D; ++k) {
        OscillationLevel l;
        l.k = k;
        l.t = plan.t(k);
        l.target = plan.family(k).target;
        l.min_avg = lo[static_cast<std::size_t>(k)];
        l.max_avg = hi[static_cast<std::size_t>(k)];
        l.ok = std::abs(l.min_avg - l.target) <= delta && std::abs(l.max_avg - l.target) <= delta;
        rep.passed = rep.passed && l.ok;
        rep.levels.push_back(l);
    }
    rep.min_consecutive_gap = kInf;
    for (std::size_t i = 1; i < rep.levels.size(); ++i) {
        const auto& a = rep.levels[i - 1];
        const auto& b = rep.levels[i];
        const double d = std::max(b.min_avg - a.max_avg, a.min_avg - b.max_avg);
        rep.min_consecutive_gap = std::min(rep.min_consecutive_gap, d);
        rep.passed = rep.passed && d >= std::abs(a.target - b.target) - 2 * delta - 1e-12;
    }
    return rep;
}

OscillationReport oscillation_check(const FractalLevel& level, const LevelPlan& plan,
                                    const LocallyConstantPotential& phi, double delta) {
    OscillationReport rep;
    rep.passed = true;
    const int L = level.k;
    for (int k = 1; k <= L; ++k) {
        OscillationLevel l;
        l.k = k;
        l.t = plan.t(k);
        l.target = plan.family(k).target;
        l.min_avg = kInf;
        l.max_avg = -kInf;
        rep.levels.push_back(l);
    }
    for (const Atom& a : level.atoms) {
        double s = 0;
        long long pos = 0;
        for (int k = 1; k <= L; ++k) {
            for (; pos < plan.t(k); ++pos) s += phi.at(a.word, static_cast<std::size_t>(pos));
            auto& l = rep.levels[static_cast<std::size_t>(k - 1)];
            const double avg = s / static_cast<double>(plan.t(k));
            l.min_avg = std::min(l.min_avg, avg);
            l.max_avg = std::max(l.max_avg, avg);
        }
    }
    for (auto& l : rep.levels) {
        l.ok = std::abs(l.min_avg - l.target) <= delta && std::abs(l.max_avg - l.target) <= delta;
        rep.passed = rep.passed && l.ok;
    }
    rep.min_consecutive_gap = kInf;
    for (std::size_t i = 1; i < rep.levels.size(); ++i) {
        const auto& a = rep.levels[i - 1];
        const auto& b = rep.levels[i];
        const double d = std::max(b.min_avg - a.max_avg, a.min_avg - b.max_avg);
        rep.min_consecutive_gap = std::min(rep.min_consecutive_gap, d);
        rep.passed = rep.passed && d >= std::abs(a.target - b.target) - 2 * delta - 1e-12;
    }
    return rep;
}

}  // namespace historic
