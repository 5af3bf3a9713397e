#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "historic/moran.hpp"
#include "moran_internal.hpp"

namespace historic {

double ConstructionParams::delta_k(int k) const {
    if (k < 1) throw PreconditionError("level index starts at 1");
    if (delta_seq.empty()) return 0.9 * delta * std::pow(static_cast<double>(k), -0.25);
    if (static_cast<std::size_t>(k) > delta_seq.size())
        throw ConfigError("params/delta_seq", "no value for level " + std::to_string(k));
    return delta_seq[static_cast<std::size_t>(k - 1)];
}

int ConstructionParams::l_k(int k) const {
    if (k < 1) throw PreconditionError("level index starts at 1");
    if (l_seq.empty()) return k;
    if (static_cast<std::size_t>(k) > l_seq.size())
        throw ConfigError("params/l_seq", "no value for level " + std::to_string(k));
    return l_seq[static_cast<std::size_t>(k - 1)];
}

void ConstructionParams::validate() const {
    if (!(gamma > 0)) throw ConfigError("params/gamma", "must be positive");
    if (!(delta > 0)) throw ConfigError("params/delta", "must be positive");
    // Separation is read off depth n+m-2 prefixes.
    if (eps.m < 2) throw ConfigError("params/m", "construction needs m >= 2");
    if (depth < 2) throw ConfigError("params/depth", "needs at least two levels");
    for (std::size_t i = 0; i < delta_seq.size(); ++i) {
        const std::string f = "params/delta_seq/" + std::to_string(i);
        if (!(delta_seq[i] > 0)) throw ConfigError(f, "must be positive");
        if (i == 0 && !(delta_seq[i] < delta)) throw ConfigError(f, "delta_1 must be below delta");
        if (i > 0 && !(delta_seq[i] < delta_seq[i - 1])) throw ConfigError(f, "must decrease strictly");
    }
    for (std::size_t i = 0; i < l_seq.size(); ++i) {
        const std::string f = "params/l_seq/" + std::to_string(i);
        if (l_seq[i] < 1) throw ConfigError(f, "must be at least 1");
        if (i > 0 && l_seq[i] <= l_seq[i - 1]) throw ConfigError(f, "must increase strictly");
    }
    if (!(theta1_scale > 0)) throw ConfigError("params/theta1_scale", "must be positive");
    if (!(theta2_scale > 0)) throw ConfigError("params/theta2_scale", "must be positive");
    for (std::size_t i = 0; i < n_schedule.size(); ++i)
        if (n_schedule[i] < 1) throw ConfigError("params/N/" + std::to_string(i), "must be at least 1");
    if (n_cap < 1) throw ConfigError("params/n_cap", "must be positive");
    if (!(family_band > 0 && family_band <= 1)) throw ConfigError("params/family_band", "must lie in (0, 1]");
    if (!(composite_weight > 0 && composite_weight < 1)) throw ConfigError("params/w1", "must lie in (0, 1)");
    if (atom_cap < 1) throw ConfigError("params/atom_cap", "must be positive");
    if (t_cap < 1) throw ConfigError("params/t_cap", "must be positive");
}

int SeparatedFamily::segment_length() const {
    int s = 0;
    for (const auto& seg : segments) s += seg.second;
    return s;
}

namespace detail {

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_sum_exp(const std::vector<double>& v) {
    double hi = -kInf;
    for (double x : v) hi = std::max(hi, x);
    if (hi == -kInf) return -kInf;
    double s = 0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

std::size_t ipow(int k, int e) {
    std::size_t p = 1;
    for (int i = 0; i < e; ++i) p *= static_cast<std::size_t>(k);
    return p;
}

}  // namespace detail

using detail::kInf;

namespace {

bool in_band(double sum, int n, double target, double band) {
    return std::abs(sum - n * target) < n * band;
}

// Lag of a word class (its first symbol); -1 when the lag needs the whole word.
int class_lag(const LagFunction& lag, int symbol, int n) {
    if (lag.kind() == LagFunction::Kind::callback) return -1;
    return lag.value(Word{static_cast<Symbol>(symbol)}, n);
}

GoodSet good_set_by_enumeration(const MarkovMeasure& mu, const LocallyConstantPotential& phi, const LagFunction& lag,
                                GoodSet g, double gamma) {
    const int L = g.n + phi.range() - 1;
    const double budget = std::ldexp(1.0, -g.k);
    g.lag_ok = true;
    for (const Word& w : enumerate_words(mu.system(), L)) {
        const double ratio = static_cast<double>(lag.value(w, g.n)) / g.n;
        g.lag_ratio = std::max(g.lag_ratio, ratio);
        const bool lag_fine = ratio < budget;
        g.lag_ok = g.lag_ok && lag_fine;
        if (lag_fine && in_band(birkhoff_sum(phi, w, g.n), g.n, g.target, g.delta_k)) g.measure += mu.word_measure(w);
    }
    g.measure_ok = g.measure > 1 - gamma;
    return g;
}

}  // namespace

GoodSet build_good_set(const MarkovMeasure& mu, const LocallyConstantPotential& phi, const LagFunction& lag,
                       double gamma, int k, int n, double delta_k) {
    if (n < 1 || k < 1) throw PreconditionError("good set needs n >= 1 and k >= 1");
    const SymbolicSystem& sys = mu.system();
    if (phi.alphabet_size() != sys.alphabet_size()) throw PreconditionError("phi and measure use different alphabets");
    GoodSet g;
    g.k = k;
    g.n = n;
    g.target = integrate(phi, mu);
    g.delta_k = delta_k;

    const int K = sys.alphabet_size();
    const int r = phi.range();
    const int b = mu.block();
    const int L = n + r - 1;
    const int s = std::max({b, r - 1, 1});
    if (lag.kind() == LagFunction::Kind::callback || L < s) return good_set_by_enumeration(mu, phi, lag, g, gamma);

    const double budget = std::ldexp(1.0, -k);
    std::vector<char> class_ok(static_cast<std::size_t>(K));
    g.lag_ok = true;
    for (int a = 0; a < K; ++a) {
        const double ratio = static_cast<double>(class_lag(lag, a, n)) / n;
        g.lag_ratio = std::max(g.lag_ratio, ratio);
        class_ok[static_cast<std::size_t>(a)] = ratio < budget;
        g.lag_ok = g.lag_ok && ratio < budget;
    }
    const bool by_class = lag.depends_on_word();

    // Key: (word class, chain state, last t symbols, rounded sum) -> (probability, exact sum).
    const int t = std::max(r - 1, 1);
    const std::size_t t_mod = detail::ipow(K, t);
    using Key = std::tuple<int, int, std::size_t, long long>;
    std::map<Key, std::pair<double, double>> cur;
    auto key_of = [](double sum) { return std::llround(sum * 1e9); };
    for (const Word& u : enumerate_words(sys, s)) {
        const int cls = by_class ? u.front() : 0;
        if (by_class && !class_ok[static_cast<std::size_t>(cls)]) continue;
        double sum = 0;
        for (int i = 0; i + r <= s; ++i) sum += phi.at(u, static_cast<std::size_t>(i));
        const int st = mu.state_index(u, static_cast<std::size_t>(s - b));
        const std::size_t tail = word_code(u, static_cast<std::size_t>(s - t), t, K);
        auto& e = cur[Key{cls, st, tail, key_of(sum)}];
        e.first += mu.word_measure(u);
        e.second = sum;
    }
    if (!by_class && !g.lag_ok) cur.clear();
    const std::size_t state_cap = std::size_t{1} << 22;
    for (int step = s; step < L; ++step) {
        std::map<Key, std::pair<double, double>> next;
        for (const auto& [key, val] : cur) {
            const auto& [cls, st, tail, sk] = key;
            const int last = static_cast<int>(tail % static_cast<std::size_t>(K));
            for (int a : sys.successors(last)) {
                const int ns = mu.successor_state(st, a);
                if (ns < 0) continue;
                const double p = mu.stochastic()(st, ns);
                if (p <= 0) continue;
                const std::size_t code = r >= 2 ? tail * static_cast<std::size_t>(K) + static_cast<std::size_t>(a)
                                                : static_cast<std::size_t>(a);
                const double sum = val.second + phi.by_code(code);
                const std::size_t nt = (tail * static_cast<std::size_t>(K) + static_cast<std::size_t>(a)) % t_mod;
                auto& e = next[Key{cls, ns, nt, key_of(sum)}];
                e.first += val.first * p;
                e.second = sum;
            }
        }
        if (next.size() > state_cap) throw EnumerationCapError("good-set DP state space", state_cap);
        cur = std::move(next);
    }
    for (const auto& [key, val] : cur)
        if (in_band(val.second, n, g.target, delta_k)) g.measure += val.first;
    g.measure_ok = g.measure > 1 - gamma;
    return g;
}

GoodSet build_good_set(const MarkovMeasure& mu, const LocallyConstantPotential& phi, const LagFunction& lag,
                       const ConstructionParams& params, int k, int n) {
    if (!(lag.eps() == params.quarter())) throw ConfigError("lag/m", "lag must be stated at eps/4");
    if (n < params.l_k(k)) throw PreconditionError("good set below l_k");
    return build_good_set(mu, phi, lag, params.gamma, k, n, params.delta_k(k));
}

CylinderSet good_cylinders(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const LagFunction& lag,
                           const GoodSet& good, std::uint64_t cap) {
    const double budget = std::ldexp(1.0, -good.k);
    std::vector<Word> kept;
    for (const Word& w : enumerate_words(sys, good.n + phi.range() - 1, cap))
        if (static_cast<double>(lag.value(w, good.n)) / good.n < budget &&
            in_band(birkhoff_sum(phi, w, good.n), good.n, good.target, good.delta_k))
            kept.push_back(w);
    return CylinderSet::cylinders(sys, std::move(kept));
}

namespace {

struct FamilySearch {
    const SymbolicSystem& sys;
    const LocallyConstantPotential& phi;
    const LocallyConstantPotential& psi;
    const LagFunction& lag;
    int n, q, g, word_len, r, t, K, k;
    double target, band, stop_at, budget;
    bool minimal;
    std::uint64_t cap;
    std::size_t t_mod;
    // hi/lo[R][code]: extreme sum of the next R windows after a word ending in `code`.
    std::vector<std::vector<double>> hi, lo;
    SeparatedFamily* out;
    double log_M = -kInf;
    bool done = false;
    Word w;

    double window(std::size_t code, int a) const {
        const std::size_t c = r >= 2 ? code * static_cast<std::size_t>(K) + static_cast<std::size_t>(a)
                                     : static_cast<std::size_t>(a);
        return phi.by_code(c);
    }
    bool window_defined(std::size_t code, int a) const {
        if (r < 2) return true;
        return phi.defined(code * static_cast<std::size_t>(K) + static_cast<std::size_t>(a));
    }

    void tables() {
        hi.assign(static_cast<std::size_t>(n + 1), std::vector<double>(t_mod, -kInf));
        lo.assign(static_cast<std::size_t>(n + 1), std::vector<double>(t_mod, kInf));
        for (std::size_t c = 0; c < t_mod; ++c) hi[0][c] = lo[0][c] = 0;
        for (int R = 1; R <= n; ++R)
            for (std::size_t c = 0; c < t_mod; ++c) {
                const int last = static_cast<int>(c % static_cast<std::size_t>(K));
                for (int a : sys.successors(last)) {
                    if (!window_defined(c, a)) continue;
                    const std::size_t nc = (c * static_cast<std::size_t>(K) + static_cast<std::size_t>(a)) % t_mod;
                    const double v = window(c, a);
                    hi[static_cast<std::size_t>(R)][c] = std::max(hi[static_cast<std::size_t>(R)][c], v + hi[static_cast<std::size_t>(R - 1)][nc]);
                    lo[static_cast<std::size_t>(R)][c] = std::min(lo[static_cast<std::size_t>(R)][c], v + lo[static_cast<std::size_t>(R - 1)][nc]);
                }
            }
    }

    bool feasible(double sum) const {
        const int L = static_cast<int>(w.size());
        if (L < t) return true;
        const int R = std::max(0, n - std::max(0, L - r + 1));
        const std::size_t code = word_code(w, static_cast<std::size_t>(L - t), t, K);
        const double a = sum + lo[static_cast<std::size_t>(R)][code];
        const double b = sum + hi[static_cast<std::size_t>(R)][code];
        const double left = n * (target - band), right = n * (target + band);
        return a < right && b > left;
    }

    // Extend a complete good word to n + lookahead symbols, keeping the running average near the target.
    Word extend(double sum_n) const {
        if (static_cast<int>(w.size()) >= word_len) return w;
        Word best;
        double best_gap = kInf;
        for (const Word& e : enumerate_extensions(sys, w, word_len)) {
            double s = sum_n;
            const int last_window = word_len - r;
            for (int i = n; i <= last_window; ++i) s += phi.at(e, static_cast<std::size_t>(i));
            const double gap = std::abs(s / (last_window + 1) - target);
            if (gap < best_gap - 1e-15) {
                best_gap = gap;
                best = e;
            }
        }
        return best;
    }

    void emit(double sum_n) {
        const int p = lag.value(w, n);
        if (!(static_cast<double>(p) / n < budget)) return;
        if (out->words.size() >= cap) throw EnumerationCapError("separated family", cap);
        Word e = extend(sum_n);
        const double lw = birkhoff_sum(psi, e, n);
        out->words.push_back(std::move(e));
        out->log_weights.push_back(lw);
        out->lag = std::max(out->lag, p);
        log_M = detail::log_sum_exp(log_M, lw);
        if (minimal && log_M >= stop_at) done = true;
    }

    // Returns true when a word was emitted below this node.
    bool dfs(double sum) {
        const int L = static_cast<int>(w.size());
        if (!feasible(sum)) return false;
        if (L == g) {
            // Windows beyond n do not enter the condition; the sum covers exactly n windows here.
            if (!in_band(sum, n, target, band)) return false;
            const std::size_t before = out->words.size();
            emit(sum);
            return out->words.size() > before;
        }
        bool found = false;
        const std::vector<int>* succ = nullptr;
        std::vector<int> all;
        if (L == 0) {
            for (int a = 0; a < K; ++a) all.push_back(a);
            succ = &all;
        } else {
            succ = &sys.successors(w.back());
        }
        for (int a : *succ) {
            double s = sum;
            if (L + 1 >= r && L + 1 - r < n) {
                const std::size_t code = r >= 2 ? word_code(w, static_cast<std::size_t>(L - (r - 1)), r - 1, K) : 0;
                if (!window_defined(code, a)) continue;
                s += window(code, a);
            }
            w.push_back(static_cast<Symbol>(a));
            const bool hit = dfs(s);
            w.pop_back();
            found = found || hit;
            if (done) return found;
            // One representative per depth-q prefix.
            if (hit && L >= q) return true;
        }
        return found;
    }
};

}  // namespace

SeparatedFamily select_separated_family(const SymbolicSystem& sys, const LocallyConstantPotential& phi,
                                        const LocallyConstantPotential& psi, const LagFunction& lag,
                                        const GoodSet& good, const ConstructionParams& params, double rate,
                                        double band_fraction) {
    if (!good.passed()) throw PreconditionError("good set at n = " + std::to_string(good.n) + " failed its tests");
    const int m = params.eps.m;
    const int r = phi.range();
    if (r > params.lookahead() + 1 || psi.range() > params.lookahead())
        throw PreconditionError("potential range exceeds the lookahead window");
    const int n = good.n;
    const bool minimal = params.family_mode == FamilyMode::minimal;

    SeparatedFamily fam;
    fam.k = good.k;
    fam.n = n;
    fam.lookahead = params.lookahead();
    fam.segments = {{0, n}};
    fam.rate = rate;
    fam.target = good.target;

    FamilySearch s{sys, phi, psi, lag, n, n + m - 2, 0, n + params.lookahead(), r, std::max(r - 1, 1), sys.alphabet_size(), good.k,
                   good.target, (minimal ? band_fraction : 1.0) * good.delta_k, n * rate, std::ldexp(1.0, -good.k),
                   minimal, params.family_cap, 0, {}, {}, &fam, -detail::kInf, false, {}};
    s.g = std::max(s.q, n + r - 1);
    s.t_mod = detail::ipow(s.K, s.t);
    s.tables();
    s.dfs(0.0);

    fam.log_M = s.log_M;
    fam.bound_ok = !fam.words.empty() && fam.log_M >= rate * n;
    return fam;
}

SeparatedFamily compose_block(const SymbolicSystem& sys, const SeparatedFamily& first, const SeparatedFamily& second,
                              int k) {
    if (first.lookahead != second.lookahead) throw PreconditionError("composite blocks need equal lookahead");
    const int c = first.lag - first.lookahead;
    if (c < 0) throw PreconditionError("first block lag is shorter than its lookahead");
    SeparatedFamily fam;
    fam.k = k;
    fam.n = first.n + first.lag + second.n;
    fam.lookahead = second.lookahead;
    fam.lag = second.lag;
    fam.composite = true;
    fam.segments = {{0, first.n}, {first.n + first.lag, second.n}};
    fam.log_M = first.log_M + second.log_M;
    fam.words.reserve(first.size() * second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        const Word& a = first.words[i];
        for (std::size_t j = 0; j < second.size(); ++j) {
            const Word& b = second.words[j];
            auto u = connector(sys, a.back(), b.front(), c);
            if (!u) throw PreconditionError("no connector between composite blocks");
            Word w = a;
            w.insert(w.end(), u->begin(), u->end());
            w.insert(w.end(), b.begin(), b.end());
            fam.words.push_back(std::move(w));
            fam.log_weights.push_back(first.log_weights[i] + second.log_weights[j]);
        }
    }
    fam.bound_ok = first.bound_ok && second.bound_ok;
    return fam;
}

Schedule choose_schedule(const std::vector<SeparatedFamily>& families, const ConstructionParams& params) {
    const int D = static_cast<int>(families.size());
    if (D < 2) throw PreconditionError("schedule needs at least two levels");
    Schedule s;
    for (int k = 1; k <= D; ++k) {
        const auto& fam = families[static_cast<std::size_t>(k - 1)];
        long long N = 0;
        if (!params.n_schedule.empty()) {
            if (static_cast<std::size_t>(k) > params.n_schedule.size())
                throw ConfigError("params/N", "explicit schedule shorter than the depth");
            N = params.n_schedule[static_cast<std::size_t>(k - 1)];
        } else {
            N = s.N.back() + 1;
            if (k < D) {
                const auto& next = families[static_cast<std::size_t>(k)];
                N = std::max(N, static_cast<long long>(std::ceil(next.unit() / params.theta1(k) - 1e-12)));
            }
            if (k >= 2) N = std::max(N, static_cast<long long>(std::ceil(s.t.back() / params.theta2(k - 1) - 1e-12)));
        }
        const long long t = s.t.back() + N * fam.unit();
        if (t > params.t_cap || t < 0) {
            s.truncated = true;
            break;
        }
        ScheduleSlack sl;
        sl.k = k;
        if (k < D) {
            sl.ratio_next = static_cast<double>(families[static_cast<std::size_t>(k)].unit()) / static_cast<double>(N);
            sl.bound_next = params.theta1(k);
        }
        if (k >= 2) {
            sl.ratio_prev = static_cast<double>(s.t.back()) / static_cast<double>(N);
            sl.bound_prev = params.theta2(k - 1);
        }
        s.N.push_back(N);
        s.t.push_back(t);
        s.slack.push_back(sl);
        s.depth = k;
    }
    return s;
}

}  // namespace historic
