#include "historic/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace historic {

namespace {

int symbol_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'z') return c - 'a' + 10;
    return -1;
}

char symbol_char(Symbol s) {
    return s < 10 ? static_cast<char>('0' + s) : static_cast<char>('a' + (s - 10));
}

}  // namespace

Word parse_word(std::string_view text) {
    Word w;
    w.reserve(text.size());
    for (char c : text) {
        if (c == ' ') continue;
        int v = symbol_value(c);
        if (v < 0) throw ConfigError("", std::string("invalid symbol '") + c + "' in word");
        w.push_back(static_cast<Symbol>(v));
    }
    return w;
}

std::string to_string(const Word& w) {
    std::string s;
    s.reserve(w.size());
    for (Symbol x : w) s.push_back(symbol_char(x));
    return s;
}

Word prefix(const Word& w, std::size_t n) {
    if (n > w.size()) throw PreconditionError("prefix longer than word");
    return Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n));
}

bool has_prefix(const Word& w, const Word& p) {
    return p.size() <= w.size() && std::equal(p.begin(), p.end(), w.begin());
}

Resolution::Resolution(int m_) : m(m_) {
    if (m_ < 0) throw PreconditionError("resolution exponent must be >= 0");
}

double Resolution::radius() const { return std::ldexp(1.0, -m); }

Dyadic Dyadic::pow2(int exponent) {
    Dyadic d;
    d.zero_ = false;
    d.exponent_ = exponent;
    return d;
}

double Dyadic::value() const { return zero_ ? 0.0 : std::ldexp(1.0, -exponent_); }

bool Dyadic::exceeds(double c, int m) const {
    if (zero_) return false;
    // 2^{-e} > c 2^{-m}  <=>  2^{m-e} > c
    return std::ldexp(1.0, m - exponent_) > c;
}

bool Dyadic::less_than(const Resolution& eps) const { return zero_ || exponent_ > eps.m; }

std::strong_ordering Dyadic::operator<=>(const Dyadic& other) const {
    if (zero_ || other.zero_) return other.zero_ <=> zero_;
    // larger exponent means smaller value
    return other.exponent_ <=> exponent_;
}

SymbolicSystem::SymbolicSystem(int alphabet_size, std::vector<std::vector<int>> transition, std::string label)
    : k_(alphabet_size), rows_(std::move(transition)), label_(std::move(label)) {
    if (k_ < 2) throw ConfigError("alphabet", "alphabet size must be >= 2");
    if (k_ > 36) throw ConfigError("alphabet", "alphabet size must be <= 36");
    if (static_cast<int>(rows_.size()) != k_)
        throw ConfigError("transition", "expected " + std::to_string(k_) + " rows, got " + std::to_string(rows_.size()));
    a_.assign(static_cast<std::size_t>(k_ * k_), 0);
    succ_.assign(static_cast<std::size_t>(k_), {});
    for (int i = 0; i < k_; ++i) {
        const auto& row = rows_[static_cast<std::size_t>(i)];
        if (static_cast<int>(row.size()) != k_)
            throw ConfigError("transition/" + std::to_string(i),
                              "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(k_));
        for (int j = 0; j < k_; ++j) {
            int v = row[static_cast<std::size_t>(j)];
            if (v != 0 && v != 1)
                throw ConfigError("transition/" + std::to_string(i) + "/" + std::to_string(j),
                                  "row " + std::to_string(i) + " entry must be 0 or 1");
            a_[static_cast<std::size_t>(i * k_ + j)] = static_cast<std::uint8_t>(v);
            if (v) succ_[static_cast<std::size_t>(i)].push_back(j);
        }
        if (succ_[static_cast<std::size_t>(i)].empty())
            throw ConfigError("transition/" + std::to_string(i), "row " + std::to_string(i) + " has no allowed successor");
    }
    for (int j = 0; j < k_; ++j) {
        bool any = false;
        for (int i = 0; i < k_; ++i) any = any || allowed(i, j);
        if (!any) throw ConfigError("transition", "column " + std::to_string(j) + " has no allowed predecessor");
    }

    // Wielandt: primitive iff A^{(k-1)^2+1} > 0.
    const int limit = (k_ - 1) * (k_ - 1) + 1;
    std::vector<std::uint8_t> power = a_;
    for (int e = 1; e <= limit; ++e) {
        if (std::all_of(power.begin(), power.end(), [](std::uint8_t v) { return v != 0; })) {
            primitivity_index_ = e;
            break;
        }
        std::vector<std::uint8_t> next(power.size(), 0);
        for (int i = 0; i < k_; ++i)
            for (int l = 0; l < k_; ++l)
                if (power[static_cast<std::size_t>(i * k_ + l)])
                    for (int j : succ_[static_cast<std::size_t>(l)]) next[static_cast<std::size_t>(i * k_ + j)] = 1;
        power = std::move(next);
    }
}

SymbolicSystem SymbolicSystem::full_shift(int k) {
    return SymbolicSystem(k, std::vector<std::vector<int>>(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 1)),
                          "full " + std::to_string(k) + "-shift");
}

SymbolicSystem SymbolicSystem::golden_mean() { return SymbolicSystem(2, {{1, 1}, {1, 0}}, "golden mean shift"); }

bool SymbolicSystem::admissible(const Word& w) const {
    for (Symbol s : w)
        if (s >= k_) return false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (!allowed(w[i], w[i + 1])) return false;
    return true;
}

void SymbolicSystem::require_admissible(const Word& w, const char* what) const {
    if (!admissible(w)) throw PreconditionError(std::string(what) + ": word " + to_string(w) + " is not admissible");
}

bool SymbolicSystem::is_full_shift() const {
    return std::all_of(a_.begin(), a_.end(), [](std::uint8_t v) { return v != 0; });
}

int SymbolicSystem::primitivity_index() const {
    if (!primitivity_index_) throw PreconditionError("transition matrix of '" + label_ + "' is not primitive");
    return *primitivity_index_;
}

void SymbolicSystem::require_primitive(const char* what) const {
    if (!primitivity_index_)
        throw PreconditionError(std::string(what) + ": transition matrix of '" + label_ + "' is not primitive");
}

bool SymbolicSystem::subsystem_of(const SymbolicSystem& other) const {
    if (k_ != other.k_) return false;
    for (std::size_t i = 0; i < a_.size(); ++i)
        if (a_[i] && !other.a_[i]) return false;
    return true;
}

PointRep::PointRep(const SymbolicSystem& sys, Word preperiod, Word period)
    : k_(sys.alphabet_size()), pre_(std::move(preperiod)), per_(std::move(period)) {
    if (per_.empty()) throw PreconditionError("point period must be nonempty");
    Word probe = pre_;
    probe.insert(probe.end(), per_.begin(), per_.end());
    probe.insert(probe.end(), per_.begin(), per_.end());
    sys.require_admissible(probe, "point");
}

Symbol PointRep::at(std::size_t i) const {
    if (i < pre_.size()) return pre_[i];
    return per_[(i - pre_.size()) % per_.size()];
}

Word PointRep::take(std::size_t n) const {
    Word w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = at(i);
    return w;
}

bool PointRep::operator==(const PointRep& other) const {
    return k_ == other.k_ && !first_difference(*this, other).has_value();
}

bool Cylinder::contains(const PointRep& x) const {
    for (std::size_t i = 0; i < word.size(); ++i)
        if (x.at(i) != word[i]) return false;
    return true;
}

PointRep shift(const PointRep& x) {
    if (!x.pre_.empty()) return PointRep(x.k_, Word(x.pre_.begin() + 1, x.pre_.end()), x.per_);
    Word rotated(x.per_.begin() + 1, x.per_.end());
    rotated.push_back(x.per_.front());
    return PointRep(x.k_, {}, std::move(rotated));
}

std::optional<std::size_t> first_difference(const PointRep& x, const PointRep& y) {
    if (x.alphabet_size() != y.alphabet_size()) throw PreconditionError("points belong to different alphabets");
    // Both sequences are periodic beyond max preperiod with period lcm.
    const std::size_t horizon = std::max(x.preperiod().size(), y.preperiod().size()) +
                                std::lcm(x.period().size(), y.period().size());
    for (std::size_t i = 0; i < horizon; ++i)
        if (x.at(i) != y.at(i)) return i;
    return std::nullopt;
}

std::optional<std::size_t> first_difference(const Word& x, const Word& y) {
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] != y[i]) return i;
    return std::nullopt;
}

Dyadic distance(const PointRep& x, const PointRep& y) {
    auto j = first_difference(x, y);
    return j ? Dyadic::pow2(static_cast<int>(*j)) : Dyadic::zero();
}

Dyadic bowen_from_difference(std::optional<std::size_t> j, int n) {
    if (n < 1) throw PreconditionError("Bowen distance needs n >= 1");
    if (!j) return Dyadic::zero();
    const long long e = static_cast<long long>(*j) - n + 1;
    return Dyadic::pow2(static_cast<int>(std::max(0LL, e)));
}

Dyadic bowen_distance(const PointRep& x, const PointRep& y, int n) {
    if (n < 1) throw PreconditionError("Bowen distance needs n >= 1");
    return bowen_from_difference(first_difference(x, y), n);
}

Cylinder bowen_ball(const PointRep& x, int n, const Resolution& eps) {
    if (n < 1) throw PreconditionError("Bowen ball needs n >= 1");
    return Cylinder{x.take(static_cast<std::size_t>(n + eps.m))};
}

std::vector<Word> enumerate_extensions(const SymbolicSystem& sys, const Word& stem, int n, std::uint64_t cap) {
    if (n < 1) throw PreconditionError("word length must be >= 1");
    if (static_cast<int>(stem.size()) > n) throw PreconditionError("stem longer than requested length");
    sys.require_admissible(stem, "enumerate_extensions");
    std::vector<Word> out;
    Word w = stem;
    w.reserve(static_cast<std::size_t>(n));
    // DFS in lexicographic order.
    auto push_children = [&](auto&& self) -> void {
        if (static_cast<int>(w.size()) == n) {
            if (out.size() >= cap) throw EnumerationCapError("word enumeration exceeded cap", cap);
            out.push_back(w);
            return;
        }
        if (w.empty()) {
            for (int a = 0; a < sys.alphabet_size(); ++a) {
                w.push_back(static_cast<Symbol>(a));
                self(self);
                w.pop_back();
            }
            return;
        }
        for (int b : sys.successors(w.back())) {
            w.push_back(static_cast<Symbol>(b));
            self(self);
            w.pop_back();
        }
    };
    push_children(push_children);
    return out;
}

std::vector<Word> enumerate_words(const SymbolicSystem& sys, int n, std::uint64_t cap) {
    if (n < 1) throw PreconditionError("word length must be >= 1");
    if (count_words(sys, n) > cap) throw EnumerationCapError("word enumeration exceeded cap", cap);
    return enumerate_extensions(sys, {}, n, cap);
}

std::uint64_t count_words(const SymbolicSystem& sys, int n) {
    if (n < 1) throw PreconditionError("word length must be >= 1");
    const int k = sys.alphabet_size();
    std::vector<std::uint64_t> v(static_cast<std::size_t>(k), 1);
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    for (int step = 1; step < n; ++step) {
        std::vector<std::uint64_t> next(static_cast<std::size_t>(k), 0);
        for (int a = 0; a < k; ++a)
            for (int b : sys.successors(a)) {
                auto& slot = next[static_cast<std::size_t>(b)];
                if (slot > kMax - v[static_cast<std::size_t>(a)]) throw EnumerationCapError("word count overflows 64 bits", kMax);
                slot += v[static_cast<std::size_t>(a)];
            }
        v = std::move(next);
    }
    std::uint64_t total = 0;
    for (auto x : v) {
        if (total > kMax - x) throw EnumerationCapError("word count overflows 64 bits", kMax);
        total += x;
    }
    return total;
}

}  // namespace historic
