#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "historic/potential.hpp"
#include "historic/symbolic.hpp"

namespace historic {

// A finite union of pieces. A piece is either a union of cylinders inside a sub-SFT
// (the ambient system when no restriction is given) or a single eventually periodic point.
class CylinderSet {
public:
    struct Piece {
        std::optional<SymbolicSystem> restriction;
        std::vector<Word> cylinders;  // canonical: sorted, no word extends another; {""} is everything
        std::optional<PointRep> point;
    };

    static CylinderSet whole(const SymbolicSystem& sys);
    static CylinderSet cylinders(const SymbolicSystem& sys, std::vector<Word> words);
    static CylinderSet subshift(const SymbolicSystem& sys, const SymbolicSystem& sub, std::vector<Word> words = {Word{}});
    static CylinderSet point(const SymbolicSystem& sys, const PointRep& x);

    CylinderSet unite(const CylinderSet& other) const;

    const SymbolicSystem& system() const { return sys_; }
    const std::vector<Piece>& pieces() const { return pieces_; }
    // Depth-L words w with [w] meeting the set, lexicographic and without repeats.
    std::vector<Word> words_meeting(int depth, std::uint64_t cap = kDefaultEnumerationCap) const;

private:
    explicit CylinderSet(const SymbolicSystem& sys) : sys_(sys) {}
    SymbolicSystem sys_;
    std::vector<Piece> pieces_;
};

struct SpanningSeparated {
    double spanning;   // Q_n: sum over meeting words of exp(inf S_n psi on the word within Z)
    double separated;  // P_n: same with sup
};

SpanningSeparated spanning_separated(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                                     int n, std::uint64_t cap = kDefaultEnumerationCap);

struct CaratheodoryValue {
    double uniform;  // cover by all order-n balls meeting Z
    double mixed;    // best cover with orders in [n, n_max]
};

CaratheodoryValue caratheodory_value(const CylinderSet& z, double t, const LocallyConstantPotential& psi, int n,
                                     const Resolution& eps, int n_max, std::uint64_t cap = kDefaultEnumerationCap);

enum class BoundMethod { natural_cover, distribution_principle, exact_orbit };
const char* to_string(BoundMethod m);

struct PressureEstimate {
    double t_lower;
    double t_upper;
    Resolution eps;
    int n_min;
    int n_max;
    BoundMethod upper_method;
    BoundMethod lower_method;
    bool finite_n_caveat;
    double width() const { return t_upper - t_lower; }
    bool contains(double t) const { return t_lower <= t && t <= t_upper; }
};

inline constexpr double kDefaultPressureTolerance = 1e-3;

// Log of sum over admissible length-L words of exp(extremal S_L psi over continuations).
double log_partition(const SymbolicSystem& sys, const LocallyConstantPotential& psi, int length, bool sup);

PressureEstimate pressure_root(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                               int n_max, double tol = kDefaultPressureTolerance);

struct DimensionBracket {
    double s_lower;
    double s_upper;
    bool finite_n_caveat;
    double width() const { return s_upper - s_lower; }
    bool contains(double s) const { return s_lower <= s && s <= s_upper; }
};

DimensionBracket bs_dimension(const CylinderSet& z, const LocallyConstantPotential& psi, const Resolution& eps,
                              int n_max, double tol = kDefaultPressureTolerance);

// Shrinks [lo, hi] with pred(lo) true and pred(hi) false for a monotone predicate; returns the final pair.
std::pair<double, double> bisect_boundary(const std::function<bool(double)>& pred, double lo, double hi, double tol);

}  // namespace historic
