#pragma once

#include <map>
#include <string>
#include <vector>

#include "historic/symbolic.hpp"

namespace historic {

// A real function of the first r coordinates.
class LocallyConstantPotential {
public:
    // Table keyed by r-symbol strings; must cover every admissible r-word.
    LocallyConstantPotential(const SymbolicSystem& sys, int range, const std::map<std::string, double>& table);

    static LocallyConstantPotential constant(const SymbolicSystem& sys, double c);
    // scale * 1_{[symbol]}
    static LocallyConstantPotential indicator(const SymbolicSystem& sys, int symbol, double scale = 1.0);

    int range() const { return r_; }
    int alphabet_size() const { return k_; }
    double at(const Word& w, std::size_t pos) const;
    double value(const Word& rword) const { return at(rword, 0); }
    bool defined(std::size_t code) const { return defined_[code]; }
    double by_code(std::size_t code) const { return table_[code]; }
    std::size_t table_size() const { return table_.size(); }

    double min_value() const;
    double max_value() const;
    double sup_norm() const;

    // Same function written with a longer range.
    LocallyConstantPotential lifted(int new_range) const;
    LocallyConstantPotential scaled(double c) const;
    // a*this + b*other, lifted to the common range.
    LocallyConstantPotential combined(double a, const LocallyConstantPotential& other, double b) const;

    // Admissible r-words with their values, lexicographic.
    std::vector<std::pair<Word, double>> entries() const;

private:
    LocallyConstantPotential(int k, int r) : k_(k), r_(r) {}

    int k_;
    int r_;
    std::vector<double> table_;
    std::vector<bool> defined_;
    std::vector<std::vector<int>> transition_;
};

// Base-k code of w[pos .. pos+len).
std::size_t word_code(const Word& w, std::size_t pos, int len, int k);

double birkhoff_sum(const LocallyConstantPotential& phi, const Word& w, int n);
double birkhoff_sum(const LocallyConstantPotential& phi, const PointRep& x, int n);
double birkhoff_average(const LocallyConstantPotential& phi, const Word& w, int n);
double birkhoff_average(const LocallyConstantPotential& phi, const PointRep& x, int n);

// Extremes of S_n over all admissible continuations of a (possibly short) prefix.
double sup_birkhoff(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& stem, int n);
double inf_birkhoff(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const Word& stem, int n);

// Var(psi, 2^{-m}): largest change of psi between points agreeing on m+1 coordinates.
double oscillation(const LocallyConstantPotential& psi, const Resolution& eps);

}  // namespace historic
