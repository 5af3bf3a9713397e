#include "historic/potential.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace historic {

std::size_t word_code(const Word& w, std::size_t pos, int len, int k) {
    std::size_t c = 0;
    for (int i = 0; i < len; ++i) c = c * static_cast<std::size_t>(k) + w[pos + static_cast<std::size_t>(i)];
    return c;
}

namespace {

std::size_t ipow(int k, int r) {
    std::size_t v = 1;
    for (int i = 0; i < r; ++i) v *= static_cast<std::size_t>(k);
    return v;
}

Word decode(std::size_t code, int len, int k) {
    Word w(static_cast<std::size_t>(len));
    for (int i = len - 1; i >= 0; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<Symbol>(code % static_cast<std::size_t>(k));
        code /= static_cast<std::size_t>(k);
    }
    return w;
}

bool admissible_rows(const std::vector<std::vector<int>>& a, const Word& w) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (!a[w[i]][w[i + 1]]) return false;
    return true;
}

}  // namespace

LocallyConstantPotential::LocallyConstantPotential(const SymbolicSystem& sys, int range,
                                                   const std::map<std::string, double>& table)
    : k_(sys.alphabet_size()), r_(range), transition_(sys.transition()) {
    if (range < 1) throw ConfigError("range", "potential range must be >= 1");
    if (ipow(k_, r_) > (std::size_t{1} << 22)) throw ConfigError("range", "potential table too large");
    const std::size_t size = ipow(k_, r_);
    table_.assign(size, 0.0);
    defined_.assign(size, false);
    for (const auto& [key, value] : table) {
        Word w;
        try {
            w = parse_word(key);
        } catch (const ConfigError&) {
            throw ConfigError("table/" + key, "invalid word key");
        }
        if (static_cast<int>(w.size()) != r_) throw ConfigError("table/" + key, "key length differs from range");
        if (!sys.admissible(w)) throw ConfigError("table/" + key, "key is not an admissible word");
        if (!std::isfinite(value)) throw ConfigError("table/" + key, "value must be finite");
        const auto c = word_code(w, 0, r_, k_);
        table_[c] = value;
        defined_[c] = true;
    }
    for (std::size_t c = 0; c < size; ++c) {
        Word w = decode(c, r_, k_);
        if (sys.admissible(w) && !defined_[c])
            throw ConfigError("table/" + to_string(w), "missing value for admissible word");
    }
}

LocallyConstantPotential LocallyConstantPotential::constant(const SymbolicSystem& sys, double c) {
    std::map<std::string, double> t;
    for (int a = 0; a < sys.alphabet_size(); ++a) t[to_string(Word{static_cast<Symbol>(a)})] = c;
    return LocallyConstantPotential(sys, 1, t);
}

LocallyConstantPotential LocallyConstantPotential::indicator(const SymbolicSystem& sys, int symbol, double scale) {
    std::map<std::string, double> t;
    for (int a = 0; a < sys.alphabet_size(); ++a) t[to_string(Word{static_cast<Symbol>(a)})] = a == symbol ? scale : 0.0;
    return LocallyConstantPotential(sys, 1, t);
}

double LocallyConstantPotential::at(const Word& w, std::size_t pos) const {
    if (pos + static_cast<std::size_t>(r_) > w.size()) throw PreconditionError("word too short for potential window");
    const auto c = word_code(w, pos, r_, k_);
    if (!defined_[c]) throw PreconditionError("potential evaluated on inadmissible window");
    return table_[c];
}

double LocallyConstantPotential::min_value() const {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < table_.size(); ++c)
        if (defined_[c]) v = std::min(v, table_[c]);
    return v;
}

double LocallyConstantPotential::max_value() const {
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < table_.size(); ++c)
        if (defined_[c]) v = std::max(v, table_[c]);
    return v;
}

double LocallyConstantPotential::sup_norm() const { return std::max(std::abs(min_value()), std::abs(max_value())); }

LocallyConstantPotential LocallyConstantPotential::lifted(int new_range) const {
    if (new_range < r_) throw PreconditionError("cannot lower potential range");
    if (ipow(k_, new_range) > (std::size_t{1} << 22)) throw PreconditionError("lifted potential table too large");
    LocallyConstantPotential out(k_, new_range);
    out.transition_ = transition_;
    const std::size_t size = ipow(k_, new_range);
    out.table_.assign(size, 0.0);
    out.defined_.assign(size, false);
    for (std::size_t c = 0; c < size; ++c) {
        Word w = decode(c, new_range, k_);
        if (!admissible_rows(transition_, w)) continue;
        out.defined_[c] = true;
        out.table_[c] = table_[word_code(w, 0, r_, k_)];
    }
    return out;
}

LocallyConstantPotential LocallyConstantPotential::scaled(double c) const {
    LocallyConstantPotential out = *this;
    for (auto& v : out.table_) v *= c;
    return out;
}

LocallyConstantPotential LocallyConstantPotential::combined(double a, const LocallyConstantPotential& other,
                                                            double b) const {
    if (other.k_ != k_) throw PreconditionError("potentials on different alphabets");
    const int r = std::max(r_, other.r_);
    LocallyConstantPotential x = lifted(r);
    LocallyConstantPotential y = other.lifted(r);
    for (std::size_t c = 0; c < x.table_.size(); ++c)
        if (x.defined_[c]) x.table_[c] = a * x.table_[c] + b * y.table_[c];
    return x;
}

std::vector<std::pair<Word, double>> LocallyConstantPotential::entries() const {
    std::vector<std::pair<Word, double>> out;
    for (std::size_t c = 0; c < table_.size(); ++c)
        if (defined_[c]) out.emplace_back(decode(c, r_, k_), table_[c]);
    return out;
}

double birkhoff_sum(const LocallyConstantPotential& phi, const Word& w, int n) {
    if (n < 1) throw PreconditionError("Birkhoff sum needs n >= 1");
    if (static_cast<std::size_t>(n + phi.range() - 1) > w.size())
        throw PreconditionError("word too short: Birkhoff sum of length " + std::to_string(n) + " needs " +
                                std::to_string(n + phi.range() - 1) + " symbols");
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += phi.at(w, static_cast<std::size_t>(i));
    return s;
}

double birkhoff_sum(const LocallyConstantPotential& phi, const PointRep& x, int n) {
    if (n < 1) throw PreconditionError("Birkhoff sum needs n >= 1");
    return birkhoff_sum(phi, x.take(static_cast<std::size_t>(n + phi.range() - 1)), n);
}

double birkhoff_average(const LocallyConstantPotential& phi, const Word& w, int n) {
    return birkhoff_sum(phi, w, n) / n;
}

double birkhoff_average(const LocallyConstantPotential& phi, const PointRep& x, int n) {
    return birkhoff_sum(phi, x, n) / n;
}

namespace {

double extreme_birkhoff(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& stem, int n,
                        bool want_max) {
    if (n < 1) throw PreconditionError("Birkhoff sum needs n >= 1");
    const int r = phi.range();
    const std::size_t total = static_cast<std::size_t>(n + r - 1);
    if (stem.size() >= total) return birkhoff_sum(phi, stem, n);
    sys.require_admissible(stem, "birkhoff extremum");
    const std::size_t keep = static_cast<std::size_t>(std::max(r - 1, 1));

    // Known windows inside the stem.
    double base = 0.0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(r) <= stem.size() && i < static_cast<std::size_t>(n); ++i)
        base += phi.at(stem, i);

    std::map<Word, double> frontier;
    Word tail(stem.end() - static_cast<std::ptrdiff_t>(std::min(keep, stem.size())), stem.end());
    frontier[tail] = base;
    for (std::size_t len = stem.size(); len < total; ++len) {
        std::map<Word, double> next;
        for (const auto& [t, v] : frontier) {
            auto extend = [&](int b) {
                Word w = t;
                w.push_back(static_cast<Symbol>(b));
                double val = v;
                // window ending at the new symbol starts at len + 1 - r
                const long long start = static_cast<long long>(len) + 1 - r;
                if (start >= 0 && start < n) val += phi.at(w, w.size() - static_cast<std::size_t>(r));
                if (w.size() > keep) w.erase(w.begin());
                auto [it, inserted] = next.emplace(w, val);
                if (!inserted) it->second = want_max ? std::max(it->second, val) : std::min(it->second, val);
            };
            if (t.empty())
                for (int b = 0; b < sys.alphabet_size(); ++b) extend(b);
            else
                for (int b : sys.successors(t.back())) extend(b);
        }
        frontier = std::move(next);
    }
    double best = want_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (const auto& [t, v] : frontier) best = want_max ? std::max(best, v) : std::min(best, v);
    return best;
}

}  // namespace

double sup_birkhoff(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& stem, int n) {
    return extreme_birkhoff(sys, phi, stem, n, true);
}

double inf_birkhoff(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& stem, int n) {
    return extreme_birkhoff(sys, phi, stem, n, false);
}

double oscillation(const LocallyConstantPotential& psi, const Resolution& eps) {
    const int agree = eps.m + 1;
    if (agree >= psi.range()) return 0.0;
    std::map<Word, std::pair<double, double>> groups;
    for (const auto& [w, v] : psi.entries()) {
        Word key(w.begin(), w.begin() + agree);
        auto [it, inserted] = groups.emplace(key, std::make_pair(v, v));
        if (!inserted) {
            it->second.first = std::min(it->second.first, v);
            it->second.second = std::max(it->second.second, v);
        }
    }
    double var = 0.0;
    for (const auto& [k, mm] : groups) var = std::max(var, mm.second - mm.first);
    return var;
}

}  // namespace historic
