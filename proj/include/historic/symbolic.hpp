#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "historic/error.hpp"

namespace historic {

using Symbol = std::uint8_t;
using Word = std::vector<Symbol>;

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 24;

// Symbols are written as 0-9 then a-z, so alphabets up to 36 print as plain strings.
Word parse_word(std::string_view text);
std::string to_string(const Word& w);
Word prefix(const Word& w, std::size_t n);
bool has_prefix(const Word& w, const Word& p);

// epsilon = 2^{-m}
struct Resolution {
    int m = 0;

    Resolution() = default;
    explicit Resolution(int m_);
    double radius() const;
    Resolution finer(int steps) const { return Resolution(m + steps); }
    Resolution coarser(int steps) const { return Resolution(m - steps); }
    bool operator==(const Resolution&) const = default;
};

// Exact value 0 or 2^{-exponent}; the exponent may be negative only for scaled thresholds.
class Dyadic {
public:
    static Dyadic zero() { return Dyadic(); }
    static Dyadic pow2(int exponent);

    bool is_zero() const { return zero_; }
    int exponent() const { return exponent_; }
    double value() const;
    // True when this distance is strictly larger than c * 2^{-m}.
    bool exceeds(double c, int m) const;
    bool less_than(const Resolution& eps) const;

    std::strong_ordering operator<=>(const Dyadic& other) const;
    bool operator==(const Dyadic& other) const = default;

private:
    bool zero_ = true;
    int exponent_ = 0;
};

class SymbolicSystem {
public:
    SymbolicSystem(int alphabet_size, std::vector<std::vector<int>> transition, std::string label = "");

    static SymbolicSystem full_shift(int k);
    static SymbolicSystem golden_mean();

    int alphabet_size() const { return k_; }
    const std::string& label() const { return label_; }
    bool allowed(int a, int b) const { return a_[static_cast<std::size_t>(a * k_ + b)] != 0; }
    const std::vector<std::vector<int>>& transition() const { return rows_; }
    const std::vector<int>& successors(int a) const { return succ_[static_cast<std::size_t>(a)]; }

    bool admissible(const Word& w) const;
    void require_admissible(const Word& w, const char* what) const;
    bool is_full_shift() const;
    bool primitive() const { return primitivity_index_.has_value(); }
    // Smallest M with transition^M entrywise positive; throws when not primitive.
    int primitivity_index() const;
    void require_primitive(const char* what) const;
    // True when every allowed transition of this system is allowed in `other`.
    bool subsystem_of(const SymbolicSystem& other) const;

    bool operator==(const SymbolicSystem& other) const { return k_ == other.k_ && a_ == other.a_; }

private:
    int k_;
    std::vector<std::uint8_t> a_;
    std::vector<std::vector<int>> rows_;
    std::vector<std::vector<int>> succ_;
    std::string label_;
    std::optional<int> primitivity_index_;
};

// The eventually periodic point preperiod . period^infinity.
class PointRep {
public:
    PointRep(const SymbolicSystem& sys, Word preperiod, Word period);

    const Word& preperiod() const { return pre_; }
    const Word& period() const { return per_; }
    int alphabet_size() const { return k_; }
    Symbol at(std::size_t i) const;
    Word take(std::size_t n) const;
    bool operator==(const PointRep& other) const;

private:
    PointRep(int k, Word pre, Word per) : k_(k), pre_(std::move(pre)), per_(std::move(per)) {}
    friend PointRep shift(const PointRep& x);

    int k_;
    Word pre_;
    Word per_;
};

struct Cylinder {
    Word word;
    std::size_t depth() const { return word.size(); }
    bool contains(const Word& w) const { return has_prefix(w, word); }
    bool contains(const PointRep& x) const;
    bool operator==(const Cylinder&) const = default;
};

PointRep shift(const PointRep& x);
// Index of the first differing coordinate, empty when the points coincide.
std::optional<std::size_t> first_difference(const PointRep& x, const PointRep& y);
// Same for finite words, compared on their common length.
std::optional<std::size_t> first_difference(const Word& x, const Word& y);

Dyadic distance(const PointRep& x, const PointRep& y);
Dyadic bowen_distance(const PointRep& x, const PointRep& y, int n);
// Distance d_n computed from a first-difference index (nullopt means no difference).
Dyadic bowen_from_difference(std::optional<std::size_t> j, int n);
Cylinder bowen_ball(const PointRep& x, int n, const Resolution& eps);

std::vector<Word> enumerate_words(const SymbolicSystem& sys, int n,
                                  std::uint64_t cap = kDefaultEnumerationCap);
// Admissible extensions of `stem` to total length n, in lexicographic order.
std::vector<Word> enumerate_extensions(const SymbolicSystem& sys, const Word& stem, int n,
                                       std::uint64_t cap = kDefaultEnumerationCap);
std::uint64_t count_words(const SymbolicSystem& sys, int n);

}  // namespace historic
