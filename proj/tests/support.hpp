#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "historic/potential.hpp"
#include "historic/symbolic.hpp"

namespace testsupport {

using namespace historic;

// Fixed-seed generators so every property run is reproducible.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    SymbolicSystem primitive_system(int max_symbols) {
        for (;;) {
            const int k = integer(2, max_symbols);
            std::vector<std::vector<int>> a(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k)));
            for (auto& row : a)
                for (auto& v : row) v = coin(0.65) ? 1 : 0;
            try {
                SymbolicSystem s(k, a, "random");
                if (s.primitive()) return s;
            } catch (const Error&) {
            }
        }
    }

    LocallyConstantPotential potential(const SymbolicSystem& sys, int range, double lo = -1.0, double hi = 1.0) {
        std::map<std::string, double> t;
        for (const Word& w : enumerate_words(sys, range)) t[to_string(w)] = real(lo, hi);
        return LocallyConstantPotential(sys, range, t);
    }

    Word word(const SymbolicSystem& sys, int n) {
        Word w;
        w.push_back(static_cast<Symbol>(integer(0, sys.alphabet_size() - 1)));
        while (static_cast<int>(w.size()) < n) {
            const auto& s = sys.successors(w.back());
            w.push_back(static_cast<Symbol>(s[static_cast<std::size_t>(integer(0, static_cast<int>(s.size()) - 1))]));
        }
        return w;
    }

    // A random eventually periodic point: random path closed into a cycle.
    PointRep point(const SymbolicSystem& sys, int pre_len, int max_period) {
        for (;;) {
            Word pre = pre_len > 0 ? word(sys, pre_len) : Word{};
            Word per = word(sys, integer(1, max_period));
            Word probe = pre;
            probe.insert(probe.end(), per.begin(), per.end());
            probe.insert(probe.end(), per.begin(), per.end());
            if (sys.admissible(probe)) return PointRep(sys, pre, per);
        }
    }
};

inline std::map<std::string, double> table(std::initializer_list<std::pair<const std::string, double>> v) {
    return std::map<std::string, double>(v);
}

}  // namespace testsupport
