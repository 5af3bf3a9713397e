#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "historic/symbolic.hpp"

namespace historic {

// Gap p(x, n, eps) needed before the next orbit segment can be shadowed at resolution eps.
class LagFunction {
public:
    enum class Kind { constant, table, callback };
    using Callback = std::function<int(const Word& x, int n)>;

    static LagFunction constant(int p, const Resolution& eps);
    // Per-n values p[n-1] for n = 1..size, optionally per first symbol of x (the word class).
    static LagFunction table(std::vector<int> by_n, const Resolution& eps,
                             std::map<int, std::vector<int>> by_class = {});
    static LagFunction callback(Callback f, const Resolution& eps, std::string label = "callback");

    Kind kind() const { return kind_; }
    const Resolution& eps() const { return eps_; }
    int value(const Word& x, int n) const;
    // Largest value over all words at this n; the callback kind cannot answer without words.
    int max_value(int n) const;
    bool depends_on_word() const { return kind_ == Kind::callback || !by_class_.empty(); }
    int table_size() const { return static_cast<int>(by_n_.size()); }
    std::string describe() const;

private:
    LagFunction(Kind kind, Resolution eps) : kind_(kind), eps_(eps) {}

    Kind kind_;
    Resolution eps_;
    int constant_ = 1;
    std::vector<int> by_n_;
    std::map<int, std::vector<int>> by_class_;
    Callback callback_;
    std::string label_;
};

// Smallest M with transition^M > 0 entrywise.
int mixing_index(const SymbolicSystem& sys);
// Constant lag M + m: segments carry m lookahead symbols, then a connector of M symbols.
LagFunction mixing_lag(const SymbolicSystem& sys, const Resolution& eps);

// Lexicographically smallest word u of length c with from.u.to admissible; to < 0 means no target.
std::optional<Word> connector(const SymbolicSystem& sys, int from, int to, int c);

// Segments are pre-extended: segment i has n_i + m symbols and stands for B_{n_i}(x_i, eps).
struct GluingSpec {
    std::vector<Word> segments;
    std::vector<int> gaps;
    Resolution eps;

    int orbit_length(std::size_t i) const { return static_cast<int>(segments[i].size()) - eps.m; }
};

struct ShadowCertificate {
    Word glued;
    std::vector<std::size_t> offsets;
    std::vector<std::string> transcript;
    Resolution eps;
    bool verified = false;
};

// Without a lag the gaps only need a connector path; with one they must also meet its values.
ShadowCertificate glue(const GluingSpec& spec, const SymbolicSystem& sys,
                       const std::optional<LagFunction>& lag = std::nullopt);

struct LagDensityReport {
    std::vector<double> ratios;  // p/n for n = 1..n_max
    double max_ratio = 0;
    int argmax_n = 0;
    double tail_max = 0;          // over n in (n_max/2, n_max]
    // tail_max below the maximum over (n_max/4, n_max/2]
    bool decaying = false;
    // Smallest l with p(n)/n < 2^{-k} for all n in [l, n_max]; 0 when none (k = 1, 2, ...).
    std::vector<int> budget_start;
    bool violation = false;
};

LagDensityReport verify_lag_density(const LagFunction& lag, int n_max, int budget_levels = 8);

}  // namespace historic
