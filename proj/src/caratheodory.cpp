#include "historic/caratheodory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace historic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Word> canonical_cylinders(const SymbolicSystem& space, std::vector<Word> words) {
    if (words.empty()) throw PreconditionError("cylinder set needs at least one cylinder");
    for (const Word& w : words) space.require_admissible(w, "cylinder set");
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    std::vector<Word> out;
    // Sorted order puts every word right after its shortest kept prefix.
    for (const Word& w : words)
        if (out.empty() || !has_prefix(w, out.back())) out.push_back(w);
    return out;
}

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double top = std::max(a, b);
    return top + std::log(std::exp(a - top) + std::exp(b - top));
}

}  // namespace

CylinderSet CylinderSet::whole(const SymbolicSystem& sys) { return cylinders(sys, {Word{}}); }

CylinderSet CylinderSet::cylinders(const SymbolicSystem& sys, std::vector<Word> words) {
    CylinderSet z(sys);
    z.pieces_.push_back(Piece{std::nullopt, canonical_cylinders(sys, std::move(words)), std::nullopt});
    return z;
}

CylinderSet CylinderSet::subshift(const SymbolicSystem& sys, const SymbolicSystem& sub, std::vector<Word> words) {
    if (!sub.subsystem_of(sys)) throw PreconditionError("restriction is not a subsystem of the ambient shift");
    CylinderSet z(sys);
    z.pieces_.push_back(Piece{sub, canonical_cylinders(sub, std::move(words)), std::nullopt});
    return z;
}

CylinderSet CylinderSet::point(const SymbolicSystem& sys, const PointRep& x) {
    if (x.alphabet_size() != sys.alphabet_size()) throw PreconditionError("point alphabet differs from system");
    CylinderSet z(sys);
    z.pieces_.push_back(Piece{std::nullopt, {}, x});
    return z;
}

CylinderSet CylinderSet::unite(const CylinderSet& other) const {
    if (!(sys_ == other.sys_)) throw PreconditionError("cannot unite sets in different systems");
    CylinderSet z = *this;
    z.pieces_.insert(z.pieces_.end(), other.pieces_.begin(), other.pieces_.end());
    return z;
}

std::vector<Word> CylinderSet::words_meeting(int depth, std::uint64_t cap) const {
    if (depth < 1) throw PreconditionError("depth must be >= 1");
    std::set<Word> found;
    for (const Piece& p : pieces_) {
        if (p.point) {
            found.insert(p.point->take(static_cast<std::size_t>(depth)));
            continue;
        }
        const SymbolicSystem& y = p.restriction ? *p.restriction : sys_;
        for (const Word& c : p.cylinders) {
            if (static_cast<int>(c.size()) >= depth) {
                found.insert(prefix(c, static_cast<std::size_t>(depth)));
            } else {
                for (Word& w : enumerate_extensions(y, c, depth, cap)) found.insert(std::move(w));
            }
            if (found.size() > cap) throw EnumerationCapError("cylinder-set enumeration exceeded cap", cap);
        }
    }
    return {found.begin(), found.end()};
}

SpanningSeparated spanning_separated(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                                     int n, std::uint64_t cap) {
    if (n < 1) throw PreconditionError("n must be >= 1");
    const int depth = n + eps.m;
    const int full = std::max(depth, n + psi.range() - 1);
    const auto words = z.words_meeting(full, cap);
    SpanningSeparated out{0.0, 0.0};
    // Words sharing the depth prefix are adjacent; extremes of S_n are taken within each group.
    std::size_t i = 0;
    while (i < words.size()) {
        double lo = kInf, hi = -kInf;
        std::size_t j = i;
        for (; j < words.size() && std::equal(words[i].begin(), words[i].begin() + depth, words[j].begin()); ++j) {
            const double s = birkhoff_sum(psi, words[j], n);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        out.spanning += std::exp(lo);
        out.separated += std::exp(hi);
        i = j;
    }
    return out;
}

CaratheodoryValue caratheodory_value(const CylinderSet& z, double t, const LocallyConstantPotential& psi, int n,
                                     const Resolution& eps, int n_max, std::uint64_t cap) {
    if (n < 1) throw PreconditionError("n must be >= 1");
    if (n_max < n) throw PreconditionError("n_max must be >= n");
    const SymbolicSystem& sys = z.system();
    auto cost = [&](const Word& w, int order) { return std::exp(-t * order + sup_birkhoff(sys, psi, w, order)); };

    CaratheodoryValue out{0.0, 0.0};
    const int base = n + eps.m;
    for (const Word& w : z.words_meeting(base, cap)) out.uniform += cost(w, n);

    // Bottom-up over the tree of meeting words: keep a node or refine it into its children.
    std::vector<Word> level = z.words_meeting(n_max + eps.m, cap);
    std::vector<double> value(level.size());
    for (std::size_t i = 0; i < level.size(); ++i) value[i] = cost(level[i], n_max);
    for (int d = n_max + eps.m - 1; d >= base; --d) {
        std::vector<Word> parents;
        std::vector<double> parent_value;
        std::size_t i = 0;
        while (i < level.size()) {
            Word p = prefix(level[i], static_cast<std::size_t>(d));
            double children = 0.0;
            for (; i < level.size() && has_prefix(level[i], p); ++i) children += value[i];
            parent_value.push_back(std::min(cost(p, d - eps.m), children));
            parents.push_back(std::move(p));
        }
        level = std::move(parents);
        value = std::move(parent_value);
    }
    for (double v : value) out.mixed += v;
    return out;
}

const char* to_string(BoundMethod m) {
    switch (m) {
        case BoundMethod::natural_cover: return "natural-cover";
        case BoundMethod::distribution_principle: return "distribution-principle";
        case BoundMethod::exact_orbit: return "exact-orbit";
    }
    return "unknown";
}

double log_partition(const SymbolicSystem& sys, const LocallyConstantPotential& psi, int length, bool sup) {
    if (length < 1) throw PreconditionError("partition length must be >= 1");
    const int r = psi.range();
    const int s = r - 1;
    if (length < s || s == 0) {
        if (s > 0) {
            double acc = -kInf;
            for (const Word& w : enumerate_words(sys, length))
                acc = log_sum_exp(acc, sup ? sup_birkhoff(sys, psi, w, length) : inf_birkhoff(sys, psi, w, length));
            return acc;
        }
        // Range one: plain transfer over symbols.
        const int k = sys.alphabet_size();
        std::vector<double> v(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) v[static_cast<std::size_t>(a)] = std::exp(psi.value(Word{static_cast<Symbol>(a)}));
        double log_scale = 0.0;
        for (int step = 1; step < length; ++step) {
            std::vector<double> next(static_cast<std::size_t>(k), 0.0);
            for (int a = 0; a < k; ++a)
                for (int b : sys.successors(a))
                    next[static_cast<std::size_t>(b)] += v[static_cast<std::size_t>(a)] * std::exp(psi.value(Word{static_cast<Symbol>(b)}));
            const double top = *std::max_element(next.begin(), next.end());
            for (auto& x : next) x /= top;
            log_scale += std::log(top);
            v = std::move(next);
        }
        double total = 0.0;
        for (double x : v) total += x;
        return log_scale + std::log(total);
    }

    const auto states = enumerate_words(sys, s);
    const int k = sys.alphabet_size();
    std::vector<int> index(static_cast<std::size_t>(std::pow(k, s) + 0.5), -1);
    for (std::size_t i = 0; i < states.size(); ++i) index[word_code(states[i], 0, s, k)] = static_cast<int>(i);
    std::vector<double> v(states.size(), 1.0);
    double log_scale = 0.0;
    for (int len = s; len < length; ++len) {
        std::vector<double> next(states.size(), 0.0);
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (v[i] == 0.0) continue;
            for (int b : sys.successors(states[i].back())) {
                Word w = states[i];
                w.push_back(static_cast<Symbol>(b));
                const double weight = std::exp(psi.value(w));
                Word t(w.begin() + 1, w.end());
                next[static_cast<std::size_t>(index[word_code(t, 0, s, k)])] += v[i] * weight;
            }
        }
        const double top = *std::max_element(next.begin(), next.end());
        for (auto& x : next) x /= top;
        log_scale += std::log(top);
        v = std::move(next);
    }
    double acc = -kInf;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (v[i] == 0.0) continue;
        // Last s windows read into a continuation of length s.
        double ext = sup ? -kInf : kInf;
        for (const Word& e : enumerate_extensions(sys, states[i], 2 * s)) {
            double sum = 0.0;
            for (int q = 0; q < s; ++q) sum += psi.at(e, static_cast<std::size_t>(q));
            ext = sup ? std::max(ext, sum) : std::min(ext, sum);
        }
        acc = log_sum_exp(acc, std::log(v[i]) + ext);
    }
    return log_scale + acc;
}

namespace {

struct Bracket {
    double lower;
    double upper;
    BoundMethod lower_method;
    BoundMethod upper_method;
};

Bracket piece_bracket(const CylinderSet& z, const CylinderSet::Piece& p, const LocallyConstantPotential& psi,
                      const Resolution& eps, int n_max) {
    if (p.point) {
        const PointRep& x = *p.point;
        const std::size_t per = x.period().size();
        const std::size_t start = x.preperiod().size();
        Word w = x.take(start + per + static_cast<std::size_t>(psi.range()));
        double sum = 0.0;
        for (std::size_t i = 0; i < per; ++i) sum += psi.at(w, start + i);
        const double v = sum / static_cast<double>(per);
        return {v, v, BoundMethod::exact_orbit, BoundMethod::exact_orbit};
    }
    const SymbolicSystem& y = p.restriction ? *p.restriction : z.system();
    const int length = n_max + eps.m;
    Bracket b{-kInf, log_partition(y, psi, length, true) / length, BoundMethod::distribution_principle,
              BoundMethod::natural_cover};
    if (y.primitive()) {
        const int lag = y.primitivity_index();
        double min_psi = kInf;
        for (const auto& [w, v] : psi.entries())
            if (y.admissible(w)) min_psi = std::min(min_psi, v);
        b.lower = (log_partition(y, psi, length, false) + (lag - 1) * min_psi) / (length + lag - 1);
    }
    return b;
}

}  // namespace

PressureEstimate pressure_root(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                               int n_max, double tol) {
    if (n_max < 1) throw PreconditionError("n_max must be >= 1");
    if (psi.alphabet_size() != z.system().alphabet_size()) throw PreconditionError("potential alphabet differs");
    PressureEstimate e{-kInf, -kInf, eps, 1, n_max, BoundMethod::natural_cover, BoundMethod::distribution_principle, false};
    bool first = true;
    for (const auto& p : z.pieces()) {
        const Bracket b = piece_bracket(z, p, psi, eps, n_max);
        if (first || b.upper > e.t_upper) e.upper_method = b.upper_method;
        if (first || b.lower > e.t_lower) e.lower_method = b.lower_method;
        e.t_upper = std::max(e.t_upper, b.upper);
        e.t_lower = std::max(e.t_lower, b.lower);
        first = false;
    }
    // Outward rounding: the partition sums carry up to ~n_max ulps of relative error.
    auto slack = [&](double t) { return 64.0 * n_max * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(t)); };
    if (std::isfinite(e.t_upper)) e.t_upper += slack(e.t_upper);
    if (std::isfinite(e.t_lower)) e.t_lower -= slack(e.t_lower);
    e.finite_n_caveat = !(e.width() <= tol);
    return e;
}

std::pair<double, double> bisect_boundary(const std::function<bool(double)>& pred, double lo, double hi, double tol) {
    if (!pred(lo) || pred(hi)) throw PreconditionError("bisection interval does not bracket the boundary");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (pred(mid) ? lo : hi) = mid;
    }
    return {lo, hi};
}

DimensionBracket bs_dimension(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                              int n_max, double tol) {
    if (!(psi.min_value() > 0.0)) throw PreconditionError("BS dimension needs a strictly positive potential");
    auto estimate = [&](double s) { return pressure_root(z, psi.scaled(-s), eps, n_max, kInf); };
    double hi = 1.0;
    while (estimate(hi).t_upper >= 0.0) hi *= 2.0;
    const double step = tol / 4.0;
    DimensionBracket d{};
    // P(-s psi) is strictly decreasing in s; the true zero lies between the two crossings.
    auto upper_positive = [&](double s) { return estimate(s).t_upper >= 0.0; };
    auto lower_positive = [&](double s) { return estimate(s).t_lower >= 0.0; };
    d.s_upper = upper_positive(0.0) ? bisect_boundary(upper_positive, 0.0, hi, step).second : 0.0;
    d.s_lower = lower_positive(0.0) ? bisect_boundary(lower_positive, 0.0, hi, step).first : 0.0;
    d.finite_n_caveat = !(d.width() <= tol);
    return d;
}

}  // namespace historic
