#include <cmath>
#include <functional>

#include "doctest.h"
#include "historic/thermo.hpp"
#include "support.hpp"

using namespace historic;
using testsupport::Gen;
using testsupport::table;

namespace {

const double kLog2 = std::log(2.0);
const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

// Oracle: spectral radius by plain power iteration on the weighted block matrix.
double power_iteration_pressure(const SymbolicSystem& sys, const LocallyConstantPotential& psi) {
    const auto states = enumerate_words(sys, psi.range());
    const std::size_t n = states.size();
    std::vector<double> v(n, 1.0);
    double log_growth = 0.0;
    for (int it = 0; it < 4000; ++it) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const Word& a = states[i];
                const Word& b = states[j];
                bool link = sys.allowed(a.back(), b.back());
                for (std::size_t q = 1; q < a.size() && link; ++q) link = a[q] == b[q - 1];
                if (link) w[j] += v[i] * std::exp(psi.value(a));
            }
        double s = 0.0;
        for (double x : w) s += x;
        log_growth = std::log(s);
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / s;
    }
    return log_growth;
}

// Oracle: 1/n-free entropy of a t-mixture of Bernoulli(a), Bernoulli(b) by conditional block entropy.
double mixture_entropy(double t, double a, double b, int n) {
    auto block = [&](int len) {
        double h = 0.0;
        for (int j = 0; j <= len; ++j) {
            const double lc = std::lgamma(len + 1.0) - std::lgamma(j + 1.0) - std::lgamma(len - j + 1.0);
            const double la = j * std::log(a) + (len - j) * std::log(1 - a);
            const double lb = j * std::log(b) + (len - j) * std::log(1 - b);
            const double top = std::max(la, lb);
            const double lp = top + std::log(t * std::exp(la - top) + (1 - t) * std::exp(lb - top));
            h -= std::exp(lc + lp) * lp;
        }
        return h;
    };
    return block(n) - block(n - 1);
}

// Oracle for small item sets: every subset.
double subset_oracle(const std::vector<KnapsackItem>& items, double need) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = items.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double mass = 0.0, cost = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) {
                mass += items[i].mass;
                cost += items[i].cost;
            }
        if (mass >= need - 1e-12) best = std::min(best, cost);
    }
    return best;
}

// Oracle for Bernoulli(p) with psi depending on the number of ones: all count vectors.
double count_vector_oracle(int n, double p1, double weight_per_one, double need) {
    std::vector<int> size(static_cast<std::size_t>(n + 1));
    std::vector<double> mass(size.size()), cost(size.size());
    for (int j = 0; j <= n; ++j) {
        size[static_cast<std::size_t>(j)] = static_cast<int>(std::lround(std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0))));
        mass[static_cast<std::size_t>(j)] = std::pow(p1, j) * std::pow(1 - p1, n - j);
        cost[static_cast<std::size_t>(j)] = std::pow(weight_per_one, j);
    }
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, double, double)> rec = [&](int j, double m, double c) {
        if (j > n) {
            if (m >= need - 1e-12) best = std::min(best, c);
            return;
        }
        for (int take = 0; take <= size[static_cast<std::size_t>(j)]; ++take)
            rec(j + 1, m + take * mass[static_cast<std::size_t>(j)], c + take * cost[static_cast<std::size_t>(j)]);
    };
    rec(0, 0.0, 0.0);
    return best;
}

}  // namespace

TEST_CASE("entropy rate examples") {
    auto full = SymbolicSystem::full_shift(2);
    CHECK(entropy_rate(MarkovMeasure::bernoulli(full, {0.5, 0.5})) == doctest::Approx(kLog2).epsilon(1e-12));
    CHECK(entropy_rate(MarkovMeasure::bernoulli(full, {0.75, 0.25})) ==
          doctest::Approx(0.75 * std::log(4.0 / 3.0) + 0.25 * std::log(4.0)).epsilon(1e-12));
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd delta(2);
    delta << 1.0, 0.0;
    CHECK(entropy_rate(MarkovMeasure(full, 1, id, delta)) == 0.0);
}

TEST_CASE("integrate examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto phi = LocallyConstantPotential::indicator(full, 1);
    CHECK(integrate(phi, MarkovMeasure::bernoulli(full, {0.5, 0.5})) == doctest::Approx(0.5));
    CHECK(integrate(phi, MarkovMeasure::bernoulli(full, {0.75, 0.25})) == doctest::Approx(0.25));
    CHECK(integrate(LocallyConstantPotential::constant(full, 3.5), MarkovMeasure::bernoulli(full, {0.2, 0.8})) ==
          doctest::Approx(3.5));
    // Range-2 potential against a block-1 chain goes through word measures.
    LocallyConstantPotential two(full, 2, table({{"00", 1.0}, {"01", 0.0}, {"10", 0.0}, {"11", 0.0}}));
    CHECK(integrate(two, MarkovMeasure::bernoulli(full, {0.75, 0.25})) == doctest::Approx(0.5625));
}

TEST_CASE("markov measure validation") {
    auto gm = SymbolicSystem::golden_mean();
    Eigen::MatrixXd bad(2, 2);
    bad << 0.5, 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(MarkovMeasure(gm, 1, bad), ConfigError);
    Eigen::MatrixXd unnormalized(2, 2);
    unnormalized << 0.5, 0.6, 1.0, 0.0;
    CHECK_THROWS_AS(MarkovMeasure(gm, 1, unnormalized), ConfigError);
    Eigen::MatrixXd ok(2, 2);
    ok << 0.5, 0.5, 1.0, 0.0;
    MarkovMeasure mu(gm, 1, ok);
    CHECK(mu.stationarity_residual() < 1e-12);
    CHECK(mu.ergodic());
    CHECK(mu.word_measure(parse_word("11")) == 0.0);
    CHECK(mu.word_measure(parse_word("010")) == doctest::Approx(2.0 / 3.0 * 0.5 * 1.0));
}

TEST_CASE("perron pressure examples") {
    auto full = SymbolicSystem::full_shift(2);
    CHECK(perron_pressure(full, LocallyConstantPotential::constant(full, 0.0)).pressure == doctest::Approx(kLog2).epsilon(1e-12));
    auto psi = LocallyConstantPotential::indicator(full, 1, kLog2);
    CHECK(perron_pressure(full, psi).pressure == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    auto gm = SymbolicSystem::golden_mean();
    auto zero = LocallyConstantPotential::constant(gm, 0.0);
    CHECK(perron_pressure(gm, zero).pressure == doctest::Approx(std::log(kGolden)).epsilon(1e-12));
    CHECK(perron_pressure(gm, zero).pressure == doctest::Approx(power_iteration_pressure(gm, zero)).epsilon(1e-10));
    SymbolicSystem cycle(2, {{0, 1}, {1, 0}});
    CHECK_THROWS_AS(perron_pressure(cycle, LocallyConstantPotential::constant(cycle, 0.0)), PreconditionError);
}

TEST_CASE("perron pressure matches power iteration on random systems") {
    Gen g(101);
    for (int trial = 0; trial < 25; ++trial) {
        auto sys = g.primitive_system(4);
        auto psi = g.potential(sys, g.integer(1, 2));
        auto e = perron_pressure(sys, psi);
        CHECK(e.pressure == doctest::Approx(power_iteration_pressure(sys, psi)).epsilon(1e-9));
        CHECK(e.residual < 1e-10);
        CHECK(e.left.dot(e.right) == doctest::Approx(1.0));
        CHECK((e.right.array() > 0).all());
        CHECK((e.left.array() > 0).all());
    }
}

TEST_CASE("equilibrium measure examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto mme = equilibrium_measure(full, LocallyConstantPotential::constant(full, 0.0));
    CHECK(mme.stochastic()(0, 1) == doctest::Approx(0.5));
    CHECK(mme.stationary()(1) == doctest::Approx(0.5));

    auto psi = LocallyConstantPotential::indicator(full, 1, kLog2);
    auto mu = equilibrium_measure(full, psi);
    CHECK(mu.stochastic()(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(mu.stochastic()(1, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(free_energy(mu, psi) == doctest::Approx(std::log(3.0)).epsilon(1e-10));

    auto gm = SymbolicSystem::golden_mean();
    auto parry = equilibrium_measure(gm, LocallyConstantPotential::constant(gm, 0.0));
    const double f2 = kGolden * kGolden;
    CHECK(parry.stationary()(0) == doctest::Approx(f2 / (1 + f2)).epsilon(1e-12));
    CHECK(parry.stationary()(1) == doctest::Approx(1 / (1 + f2)).epsilon(1e-12));
    CHECK(entropy_rate(parry) == doctest::Approx(std::log(kGolden)).epsilon(1e-12));
}

TEST_CASE("equilibrium measures attain the pressure and satisfy a Gibbs bound") {
    Gen g(202);
    for (int trial = 0; trial < 15; ++trial) {
        auto sys = g.primitive_system(3);
        auto psi = g.potential(sys, g.integer(1, 2));
        auto e = perron_pressure(sys, psi);
        auto mu = equilibrium_measure(sys, psi);
        CHECK(std::abs(free_energy(mu, psi) - e.pressure) < 1e-8);
        CHECK(mu.stationarity_residual() < 1e-10);
        auto gibbs_constant = [&](int lo, int hi) {
            double k = 1.0;
            for (int n = lo; n <= hi; ++n)
                for (const Word& w : enumerate_words(sys, n)) {
                    const double ratio = mu.word_measure(w) / std::exp(-n * e.pressure + sup_birkhoff(sys, psi, w, n));
                    k = std::max({k, ratio, 1.0 / ratio});
                }
            return k;
        };
        const double k_short = gibbs_constant(1, 6);
        const double k_long = gibbs_constant(1, 12);
        CHECK(std::isfinite(k_long));
        CHECK(k_long <= k_short * (1 + 1e-9));
    }
}

TEST_CASE("entropy of the measure of maximal entropy is log of the spectral radius") {
    Gen g(303);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = g.primitive_system(4);
        auto zero = LocallyConstantPotential::constant(sys, 0.0);
        auto e = perron_pressure(sys, zero);
        CHECK(std::abs(entropy_rate(equilibrium_measure(sys, zero)) - std::log(e.spectral_radius)) < 1e-8);
    }
}

TEST_CASE("variational maximization examples") {
    auto full = SymbolicSystem::full_shift(2);
    CHECK(std::abs(maximize_variational(full, LocallyConstantPotential::constant(full, 0.0), 1e-6).value - kLog2) <= 1e-6);
    CHECK(std::abs(maximize_variational(full, LocallyConstantPotential::indicator(full, 1, kLog2), 1e-6).value -
                   std::log(3.0)) <= 1e-6);
    auto gm = SymbolicSystem::golden_mean();
    CHECK(std::abs(maximize_variational(gm, LocallyConstantPotential::constant(gm, 0.0), 1e-6).value - std::log(kGolden)) <=
          1e-6);
    CHECK_THROWS_AS(maximize_variational(full, LocallyConstantPotential::constant(full, 0.0), 0.0), PreconditionError);
}

TEST_CASE("variational consistency on random systems") {
    Gen g(404);
    const double tol = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
        auto sys = g.primitive_system(4);
        auto psi = g.potential(sys, g.integer(1, 2), -2.0, 2.0);
        const double perron = perron_pressure(sys, psi).pressure;
        auto v = maximize_variational(sys, psi, tol);
        CHECK(std::abs(perron - v.value) <= 2 * tol);
    }
}

TEST_CASE("free energy is affine along Bernoulli mixtures") {
    auto full = SymbolicSystem::full_shift(2);
    auto psi = LocallyConstantPotential::indicator(full, 1, 0.3);
    auto mu = MarkovMeasure::bernoulli(full, {0.75, 0.25});
    auto nu = MarkovMeasure::bernoulli(full, {0.25, 0.75});
    for (double t : {0.1, 0.5, 0.9}) {
        const double mixed_integral = t * integrate(psi, mu) + (1 - t) * integrate(psi, nu);
        const double lhs = mixture_entropy(t, 0.25, 0.75, 2000) + mixed_integral;
        CHECK(std::abs(lhs - (t * free_energy(mu, psi) + (1 - t) * free_energy(nu, psi))) < 1e-8);
    }
}

TEST_CASE("potential oscillation examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto r1 = LocallyConstantPotential(full, 1, table({{"0", 0.0}, {"1", 5.0}}));
    CHECK(oscillation(r1, Resolution(0)) == 0.0);
    CHECK(oscillation(r1, Resolution(3)) == 0.0);
    auto r2 = LocallyConstantPotential(full, 2, table({{"00", 0.0}, {"01", 3.0}, {"10", 1.0}, {"11", 2.0}}));
    CHECK(oscillation(r2, Resolution(0)) == 3.0);
    CHECK(oscillation(r2, Resolution(1)) == 0.0);
}

TEST_CASE("birkhoff sums") {
    auto full = SymbolicSystem::full_shift(2);
    auto phi = LocallyConstantPotential::indicator(full, 1);
    CHECK(birkhoff_average(phi, PointRep(full, {}, parse_word("01")), 4) == 0.5);
    CHECK(birkhoff_average(phi, parse_word("0001"), 4) == 0.25);
    CHECK(birkhoff_average(LocallyConstantPotential::constant(full, 1.5), parse_word("0110"), 3) == 1.5);
    auto two = LocallyConstantPotential(full, 2, table({{"00", 0.0}, {"01", 1.0}, {"10", 2.0}, {"11", 3.0}}));
    CHECK_THROWS_AS(birkhoff_sum(two, parse_word("0110"), 4), PreconditionError);
    // Extremes over continuations of a short stem: windows 01,1? with ? free.
    CHECK(sup_birkhoff(full, two, parse_word("01"), 2) == 4.0);
    CHECK(inf_birkhoff(full, two, parse_word("01"), 2) == 3.0);
}

TEST_CASE("katok partition examples") {
    auto full = SymbolicSystem::full_shift(2);
    auto mu = MarkovMeasure::bernoulli(full, {0.5, 0.5});
    auto zero = LocallyConstantPotential::constant(full, 0.0);
    auto r = katok_partition(mu, zero, 0.25, Resolution(2), 3);
    CHECK(r.value == doctest::Approx(24.0));
    CHECK(r.rate == doctest::Approx(std::log(24.0) / 3));
    CHECK(r.exact);
    CHECK(r.cylinders == 32);
    CHECK(katok_partition(mu, zero, 1e-9, Resolution(2), 3).value == doctest::Approx(32.0));
    CHECK_THROWS_AS(katok_partition(mu, zero, 1.0, Resolution(0), 3), PreconditionError);
}

TEST_CASE("exact cover agrees with a subset oracle") {
    Gen g(505);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<KnapsackItem> items;
        const int n = g.integer(1, 14);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            // Repeated values exercise class grouping.
            const double mass = g.coin(0.4) ? 0.1 : g.real(0.01, 0.3);
            items.push_back({mass, g.coin(0.4) ? 1.0 : g.real(0.5, 3.0)});
            total += mass;
        }
        const double need = g.real(0.05, 0.99) * total;
        CHECK(min_cost_cover(items, need) == doctest::Approx(subset_oracle(items, need)).epsilon(1e-12));
        CHECK(greedy_cost_cover(items, need) >= min_cost_cover(items, need) - 1e-12);
    }
}

TEST_CASE("katok exact value matches subset and count-vector oracles for n <= 6") {
    auto full = SymbolicSystem::full_shift(2);
    for (double p1 : {0.5, 0.25}) {
        auto mu = MarkovMeasure::bernoulli(full, {1 - p1, p1});
        for (double w : {1.0, 2.0}) {
            auto psi = LocallyConstantPotential::indicator(full, 1, std::log(w));
            for (int n = 1; n <= 6; ++n) {
                const double value = katok_partition(mu, psi, 0.25, Resolution(0), n).value;
                CHECK(value == doctest::Approx(count_vector_oracle(n, p1, w, 0.75)).epsilon(1e-12));
                if (n <= 4) {
                    std::vector<KnapsackItem> items;
                    for (const Word& word : enumerate_words(full, n))
                        items.push_back({mu.word_measure(word), std::exp(birkhoff_sum(psi, word, n))});
                    CHECK(value == doctest::Approx(subset_oracle(items, 0.75)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("katok monotonicity in gamma, n and m") {
    auto full = SymbolicSystem::full_shift(2);
    auto mu = MarkovMeasure::bernoulli(full, {0.7, 0.3});
    auto psi = LocallyConstantPotential::indicator(full, 1, 0.4);
    for (int n = 1; n <= 7; ++n) {
        double prev_gamma = std::numeric_limits<double>::infinity();
        for (double gamma : {0.05, 0.2, 0.4, 0.7}) {
            const double v = katok_partition(mu, psi, gamma, Resolution(0), n).value;
            CHECK(v <= prev_gamma + 1e-12);
            prev_gamma = v;
        }
        for (int m = 0; m < 3; ++m) {
            const double here = katok_partition(mu, psi, 0.3, Resolution(m), n).value;
            CHECK(katok_partition(mu, psi, 0.3, Resolution(m + 1), n).value >= here - 1e-12);
            CHECK(katok_partition(mu, psi, 0.3, Resolution(m), n + 1).value >= here - 1e-12);
        }
    }
}

TEST_CASE("level-set bracket: binary entropy on the full 2-shift") {
    auto sys = SymbolicSystem::full_shift(2);
    auto phi = LocallyConstantPotential::indicator(sys, 1);
    auto zero = LocallyConstantPotential::constant(sys, 0.0);
    for (double a : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double H = -a * std::log(a) - (1 - a) * std::log(1 - a);
        auto b = level_set_bracket(sys, phi, zero, a);
        CHECK(b.inside);
        CHECK(b.alpha_attained == doctest::Approx(a).epsilon(1e-9));
        CHECK(b.lower == doctest::Approx(H).epsilon(1e-8));
        CHECK(b.upper >= b.lower - 1e-12);
        CHECK(b.upper - b.lower < 1e-7);
    }
    CHECK_FALSE(level_set_bracket(sys, phi, zero, 1.5).inside);
}

TEST_CASE("level-set bracket obeys the Legendre inequality") {
    testsupport::Gen g(97);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = g.primitive_system(3);
        auto phi = g.potential(sys, g.integer(1, 2), 0.0, 1.0);
        auto psi = g.potential(sys, g.integer(1, 2));
        const double lo = level_set_bracket(sys, phi, psi, -10).alpha_attained;
        const double hi = level_set_bracket(sys, phi, psi, 10).alpha_attained;
        const double a = lo + g.real(0.2, 0.8) * (hi - lo);
        auto b = level_set_bracket(sys, phi, psi, a);
        CHECK(b.inside);
        CHECK(b.lower <= b.upper + 1e-9);
        for (int j = 0; j < 5; ++j) {
            const double s = g.real(-5, 5);
            CHECK(b.lower <= perron_pressure(sys, psi.combined(1.0, phi, s)).pressure - s * b.alpha_attained + 1e-8);
        }
    }
}
