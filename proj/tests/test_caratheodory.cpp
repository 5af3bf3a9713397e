#include <cmath>

#include "doctest.h"
#include "historic/caratheodory.hpp"
#include "historic/thermo.hpp"
#include "support.hpp"

using namespace historic;
using testsupport::Gen;

namespace {

const double kLog2 = std::log(2.0);
const double kLogGolden = std::log((1.0 + std::sqrt(5.0)) / 2.0);

// Oracle: every node subset of the word tree between depths lo and hi that covers all leaves.
double cover_oracle(const SymbolicSystem& sys, const LocallyConstantPotential& psi, double t, int lo, int hi) {
    std::vector<std::pair<Word, double>> nodes;
    for (int d = lo; d <= hi; ++d)
        for (const Word& w : enumerate_words(sys, d)) nodes.emplace_back(w, std::exp(-t * d + sup_birkhoff(sys, psi, w, d)));
    const auto leaves = enumerate_words(sys, hi);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nodes.size()); ++mask) {
        double cost = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (mask >> i & 1) cost += nodes[i].second;
        if (cost >= best) continue;
        bool covers = true;
        for (const Word& leaf : leaves) {
            bool hit = false;
            for (std::size_t i = 0; i < nodes.size() && !hit; ++i) hit = (mask >> i & 1) && has_prefix(leaf, nodes[i].first);
            if (!hit) {
                covers = false;
                break;
            }
        }
        if (covers) best = cost;
    }
    return best;
}

double log_partition_oracle(const SymbolicSystem& sys, const LocallyConstantPotential& psi, int length, bool sup) {
    double total = 0.0;
    for (const Word& w : enumerate_words(sys, length))
        total += std::exp(sup ? sup_birkhoff(sys, psi, w, length) : inf_birkhoff(sys, psi, w, length));
    return std::log(total);
}

}  // namespace

TEST_CASE("spanning and separated values") {
    auto full = SymbolicSystem::full_shift(2);
    auto zero = LocallyConstantPotential::constant(full, 0.0);
    for (int n = 1; n <= 8; ++n) {
        auto v = spanning_separated(CylinderSet::whole(full), zero, Resolution(0), n);
        CHECK(v.spanning == doctest::Approx(std::pow(2.0, n)));
        CHECK(v.separated == doctest::Approx(std::pow(2.0, n)));
    }
    CHECK(spanning_separated(CylinderSet::cylinders(full, {parse_word("0")}), zero, Resolution(0), 3).separated ==
          doctest::Approx(4.0));
    auto psi = LocallyConstantPotential::indicator(full, 1, kLog2);
    double oracle = 0.0;
    for (const Word& w : enumerate_words(full, 2)) oracle += std::exp(birkhoff_sum(psi, w, 2));
    CHECK(oracle == doctest::Approx(9.0));
    CHECK(spanning_separated(CylinderSet::whole(full), psi, Resolution(0), 2).separated == doctest::Approx(oracle));
}

TEST_CASE("spanning value never exceeds separated value") {
    Gen g(7);
    for (int trial = 0; trial < 30; ++trial) {
        auto sys = g.primitive_system(3);
        auto psi = g.potential(sys, g.integer(1, 3));
        auto z = CylinderSet::cylinders(sys, {g.word(sys, g.integer(1, 3))});
        const int n = g.integer(1, 6);
        auto v = spanning_separated(z, psi, Resolution(g.integer(0, 1)), n);
        CHECK(v.spanning <= v.separated * (1 + 1e-12));
        CHECK(v.spanning > 0.0);
    }
}

TEST_CASE("caratheodory value examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto zero = LocallyConstantPotential::constant(full, 0.0);
    auto all = CylinderSet::whole(full);
    for (int n = 1; n <= 10; ++n) CHECK(caratheodory_value(all, kLog2, zero, n, Resolution(0), n).uniform == doctest::Approx(1.0));
    CHECK(caratheodory_value(all, kLog2 + 0.1, zero, 12, Resolution(0), 12).uniform <= std::exp(-1.2) * (1 + 1e-12));
    CHECK(caratheodory_value(all, kLog2 - 0.1, zero, 12, Resolution(0), 12).uniform >= std::exp(1.2) * (1 - 1e-12));
    // Below the pressure, deeper orders only cost more, so mixed covers cannot beat the uniform one.
    auto below = caratheodory_value(all, kLog2 - 0.1, zero, 6, Resolution(0), 10);
    CHECK(below.mixed == doctest::Approx(below.uniform));
    auto above = caratheodory_value(all, kLog2 + 0.1, zero, 6, Resolution(0), 10);
    CHECK(above.mixed < above.uniform);
    CHECK(above.mixed == doctest::Approx(std::exp(-0.1 * 10)));
}

TEST_CASE("mixed-order cover matches exhaustive cover search") {
    Gen g(9);
    auto full = SymbolicSystem::full_shift(2);
    for (int trial = 0; trial < 8; ++trial) {
        auto psi = g.potential(full, g.integer(1, 2), -1.0, 1.0);
        const double t = g.real(0.2, 1.2);
        auto v = caratheodory_value(CylinderSet::whole(full), t, psi, 1, Resolution(0), 3);
        CHECK(v.mixed == doctest::Approx(cover_oracle(full, psi, t, 1, 3)).epsilon(1e-12));
        CHECK(v.mixed <= v.uniform * (1 + 1e-12));
    }
}

TEST_CASE("caratheodory value is nonincreasing in t") {
    auto gm = SymbolicSystem::golden_mean();
    Gen g(13);
    auto psi = g.potential(gm, 2);
    auto z = CylinderSet::cylinders(gm, {parse_word("10")});
    double prev = std::numeric_limits<double>::infinity();
    for (double t = -1.0; t <= 2.0; t += 0.25) {
        auto v = caratheodory_value(z, t, psi, 4, Resolution(1), 7);
        CHECK(v.uniform <= prev);
        prev = v.uniform;
    }
}

TEST_CASE("transfer partition function matches enumeration") {
    Gen g(19);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = g.primitive_system(3);
        auto psi = g.potential(sys, g.integer(1, 3));
        for (int length = 1; length <= 7; ++length) {
            CHECK(log_partition(sys, psi, length, true) == doctest::Approx(log_partition_oracle(sys, psi, length, true)).epsilon(1e-10));
            CHECK(log_partition(sys, psi, length, false) == doctest::Approx(log_partition_oracle(sys, psi, length, false)).epsilon(1e-10));
        }
    }
}

TEST_CASE("pressure brackets on reference sets") {
    auto full = SymbolicSystem::full_shift(2);
    auto zero = LocallyConstantPotential::constant(full, 0.0);
    auto whole = pressure_root(CylinderSet::whole(full), zero, Resolution(0), 14);
    CHECK(whole.contains(kLog2));
    CHECK(whole.width() <= 0.05);

    auto gm = SymbolicSystem::golden_mean();
    auto sub = pressure_root(CylinderSet::subshift(full, gm), zero, Resolution(0), 14);
    CHECK(sub.contains(kLogGolden));
    CHECK(sub.width() <= 0.05);
    CHECK(sub.finite_n_caveat);

    auto point = pressure_root(CylinderSet::point(full, PointRep(full, parse_word("01"), parse_word("0"))), zero, Resolution(0), 14);
    CHECK(point.contains(0.0));
    CHECK(point.upper_method == BoundMethod::exact_orbit);
}

TEST_CASE("pressure bracket of the whole space contains the Perron value") {
    Gen g(29);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = g.primitive_system(4);
        auto psi = g.potential(sys, g.integer(1, 2));
        const double perron = perron_pressure(sys, psi).pressure;
        for (int m : {0, 1}) {
            auto e = pressure_root(CylinderSet::whole(sys), psi, Resolution(m), 10);
            CHECK(e.contains(perron));
            CHECK(e.t_lower <= e.t_upper);
        }
    }
}

TEST_CASE("monotonicity and finite stability of pressure brackets") {
    Gen g(31);
    const double tol = 1e-9;
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = g.primitive_system(3);
        auto psi = g.potential(sys, g.integer(1, 2));
        // Pick a smaller set of several shapes inside the whole space.
        CylinderSet small = CylinderSet::whole(sys);
        switch (trial % 3) {
            case 0: small = CylinderSet::cylinders(sys, {g.word(sys, g.integer(1, 4))}); break;
            case 1: small = CylinderSet::point(sys, g.point(sys, g.integer(0, 3), 3)); break;
            default: {
                // Sub-SFT obtained by deleting one edge, when still well formed.
                auto rows = sys.transition();
                const int a = g.integer(0, sys.alphabet_size() - 1);
                const auto& s = sys.successors(a);
                if (s.size() > 1) rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(s.back())] = 0;
                try {
                    small = CylinderSet::subshift(sys, SymbolicSystem(sys.alphabet_size(), rows));
                } catch (const ConfigError&) {
                    small = CylinderSet::point(sys, g.point(sys, 0, 2));
                }
            }
        }
        auto big = CylinderSet::whole(sys);
        auto e_small = pressure_root(small, psi, Resolution(0), 10);
        auto e_big = pressure_root(big, psi, Resolution(0), 10);
        CHECK(e_small.t_upper <= e_big.t_upper + tol);
        auto other = CylinderSet::point(sys, g.point(sys, g.integer(0, 2), 2));
        auto e_other = pressure_root(other, psi, Resolution(0), 10);
        auto e_union = pressure_root(small.unite(other), psi, Resolution(0), 10);
        const double top = std::max(e_small.t_upper, e_other.t_upper);
        CHECK(e_union.t_upper == doctest::Approx(top));
        CHECK(e_union.t_lower == doctest::Approx(std::max(e_small.t_lower, e_other.t_lower)));
    }
}

TEST_CASE("BS dimension examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto one = LocallyConstantPotential::constant(full, 1.0);
    auto d = bs_dimension(CylinderSet::whole(full), one, Resolution(0), 14);
    CHECK(d.contains(kLog2));
    CHECK(d.width() <= 0.05);
    auto two = bs_dimension(CylinderSet::whole(full), LocallyConstantPotential::constant(full, 2.0), Resolution(0), 14);
    CHECK(two.contains(kLog2 / 2));
    auto gm = SymbolicSystem::golden_mean();
    auto g = bs_dimension(CylinderSet::whole(gm), LocallyConstantPotential::constant(gm, 1.0), Resolution(0), 14);
    CHECK(g.contains(kLogGolden));
    CHECK(g.width() <= 0.05);
    CHECK_THROWS_AS(bs_dimension(CylinderSet::whole(full), LocallyConstantPotential::indicator(full, 1), Resolution(0), 8),
                    PreconditionError);
}

TEST_CASE("cylinder sets canonicalize nested cylinders") {
    auto full = SymbolicSystem::full_shift(2);
    auto z = CylinderSet::cylinders(full, {parse_word("01"), parse_word("0"), parse_word("011"), parse_word("11")});
    REQUIRE(z.pieces().size() == 1);
    CHECK(z.pieces()[0].cylinders.size() == 2);
    CHECK(z.words_meeting(3).size() == 6);
    CHECK_THROWS_AS(CylinderSet::cylinders(SymbolicSystem::golden_mean(), {parse_word("11")}), PreconditionError);
}

TEST_CASE("closed-form brackets are rounded outward") {
    Gen g(37);
    auto full = SymbolicSystem::full_shift(2);
    for (int trial = 0; trial < 200; ++trial) {
        auto psi = g.potential(full, 1, -2.0, 2.0);
        const double perron = perron_pressure(full, psi).pressure;
        auto e = pressure_root(CylinderSet::whole(full), psi, Resolution(0), 14);
        CHECK(e.contains(perron));
        CHECK(e.width() < 1e-10);
    }
}
