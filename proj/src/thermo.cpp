#include "historic/thermo.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace historic {

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

std::size_t ipow(int k, int r) {
    std::size_t v = 1;
    for (int i = 0; i < r; ++i) v *= static_cast<std::size_t>(k);
    return v;
}

}  // namespace

Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& p) {
    const auto n = p.rows();
    Eigen::MatrixXd m = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    m.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() == n) {
        Eigen::VectorXd pi = lu.solve(rhs);
        for (auto i = 0; i < n; ++i)
            if (pi(i) < 0.0 && pi(i) > -1e-14) pi(i) = 0.0;
        return pi / pi.sum();
    }
    // Several closed classes: Cesaro average from the uniform start.
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(n);
    for (int i = 0; i < 20000; ++i) {
        acc += v;
        v = v * p;
    }
    Eigen::VectorXd pi = acc.transpose();
    return pi / pi.sum();
}

MarkovMeasure::MarkovMeasure(const SymbolicSystem& sys, int block, Eigen::MatrixXd stochastic)
    : sys_(sys), block_(block), p_(std::move(stochastic)) {
    build_states();
    if (p_.rows() != static_cast<Eigen::Index>(states_.size()) || p_.cols() != p_.rows())
        throw ConfigError("stochastic", "matrix size must equal the number of admissible " + std::to_string(block) +
                                            "-words (" + std::to_string(states_.size()) + ")");
    pi_ = stationary_vector(p_);
    validate();
}

MarkovMeasure::MarkovMeasure(const SymbolicSystem& sys, int block, Eigen::MatrixXd stochastic,
                             Eigen::VectorXd stationary)
    : sys_(sys), block_(block), p_(std::move(stochastic)), pi_(std::move(stationary)) {
    build_states();
    if (p_.rows() != static_cast<Eigen::Index>(states_.size()) || p_.cols() != p_.rows() || pi_.size() != p_.rows())
        throw ConfigError("stochastic", "matrix size must equal the number of admissible " + std::to_string(block) +
                                            "-words (" + std::to_string(states_.size()) + ")");
    validate();
}

MarkovMeasure MarkovMeasure::bernoulli(const SymbolicSystem& sys, const std::vector<double>& probs) {
    if (!sys.is_full_shift()) throw ConfigError("bernoulli", "Bernoulli measures need a full shift");
    const int k = sys.alphabet_size();
    if (static_cast<int>(probs.size()) != k) throw ConfigError("bernoulli", "need one probability per symbol");
    Eigen::MatrixXd p(k, k);
    Eigen::VectorXd pi(k);
    for (int a = 0; a < k; ++a) {
        pi(a) = probs[static_cast<std::size_t>(a)];
        for (int b = 0; b < k; ++b) p(a, b) = probs[static_cast<std::size_t>(b)];
    }
    return MarkovMeasure(sys, 1, p, pi);
}

void MarkovMeasure::build_states() {
    if (block_ < 1) throw ConfigError("block", "block length must be >= 1");
    const int k = sys_.alphabet_size();
    if (ipow(k, block_) > (std::size_t{1} << 16)) throw ConfigError("block", "block chain too large");
    states_ = enumerate_words(sys_, block_);
    code_to_state_.assign(ipow(k, block_), -1);
    for (std::size_t i = 0; i < states_.size(); ++i)
        code_to_state_[word_code(states_[i], 0, block_, k)] = static_cast<int>(i);
    next_.assign(states_.size() * static_cast<std::size_t>(k), -1);
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const Word& s = states_[i];
        for (int b : sys_.successors(s.back())) {
            Word t(s.begin() + 1, s.end());
            t.push_back(static_cast<Symbol>(b));
            next_[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(b)] =
                code_to_state_[word_code(t, 0, block_, k)];
        }
    }
}

void MarkovMeasure::validate() {
    const auto n = p_.rows();
    const int k = sys_.alphabet_size();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = p_(i, j);
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ConfigError("stochastic/" + std::to_string(i), "row " + std::to_string(i) + " has a negative entry");
            if (v == 0.0) continue;
            bool ok = false;
            for (int b = 0; b < k; ++b) ok = ok || successor_state(static_cast<int>(i), b) == j;
            if (!ok)
                throw ConfigError("stochastic/" + std::to_string(i),
                                  "row " + std::to_string(i) + " puts mass on a forbidden transition");
        }
    if (row_sum_residual() > 1e-12) throw ConfigError("stochastic", "rows must sum to 1 within 1e-12");
    if ((pi_.array() < -1e-15).any() || std::abs(pi_.sum() - 1.0) > 1e-10)
        throw ConfigError("stationary", "stationary vector must be a probability vector");
    if (stationarity_residual() > 1e-10) throw ConfigError("stationary", "stationary vector is not invariant");
}

int MarkovMeasure::state_index(const Word& w, std::size_t pos) const {
    if (pos + static_cast<std::size_t>(block_) > w.size()) return -1;
    for (std::size_t i = pos; i < pos + static_cast<std::size_t>(block_); ++i)
        if (w[i] >= sys_.alphabet_size()) return -1;
    return code_to_state_[word_code(w, pos, block_, sys_.alphabet_size())];
}

double MarkovMeasure::word_measure(const Word& w) const {
    if (w.empty()) return 1.0;
    if (static_cast<int>(w.size()) < block_) {
        double total = 0.0;
        for (std::size_t i = 0; i < states_.size(); ++i)
            if (has_prefix(states_[i], w)) total += pi_(static_cast<Eigen::Index>(i));
        return total;
    }
    int s = state_index(w, 0);
    if (s < 0) return 0.0;
    double m = pi_(s);
    for (std::size_t pos = static_cast<std::size_t>(block_); pos < w.size() && m > 0.0; ++pos) {
        const int t = successor_state(s, w[pos]);
        if (t < 0) return 0.0;
        m *= p_(s, t);
        s = t;
    }
    return m;
}

double MarkovMeasure::row_sum_residual() const {
    return (p_.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

double MarkovMeasure::stationarity_residual() const {
    return (pi_.transpose() * p_ - pi_.transpose()).cwiseAbs().maxCoeff();
}

bool MarkovMeasure::ergodic() const {
    std::vector<int> support;
    for (Eigen::Index i = 0; i < pi_.size(); ++i)
        if (pi_(i) > 1e-15) support.push_back(static_cast<int>(i));
    const std::size_t s = support.size();
    if (s == 0) return false;
    std::vector<std::uint8_t> a(s * s, 0);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) a[i * s + j] = p_(support[i], support[j]) > 0.0;
    std::vector<std::uint8_t> power = a;
    const std::size_t limit = (s - 1) * (s - 1) + 1;
    for (std::size_t e = 1; e <= limit; ++e) {
        if (std::all_of(power.begin(), power.end(), [](std::uint8_t v) { return v != 0; })) return true;
        std::vector<std::uint8_t> next(s * s, 0);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t l = 0; l < s; ++l)
                if (power[i * s + l])
                    for (std::size_t j = 0; j < s; ++j)
                        if (a[l * s + j]) next[i * s + j] = 1;
        power = std::move(next);
    }
    return false;
}

double entropy_rate(const MarkovMeasure& mu) {
    const auto& p = mu.stochastic();
    const auto& pi = mu.stationary();
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < p.cols(); ++j) row += xlogx(p(i, j));
        h -= pi(i) * row;
    }
    return std::max(h, 0.0);
}

double integrate(const LocallyConstantPotential& phi, const MarkovMeasure& mu) {
    if (phi.alphabet_size() != mu.system().alphabet_size()) throw PreconditionError("potential and measure differ");
    double total = 0.0;
    if (phi.range() <= mu.block()) {
        for (std::size_t i = 0; i < mu.states().size(); ++i)
            total += mu.stationary()(static_cast<Eigen::Index>(i)) * phi.at(mu.states()[i], 0);
        return total;
    }
    for (const Word& w : enumerate_words(mu.system(), phi.range())) total += mu.word_measure(w) * phi.value(w);
    return total;
}

double free_energy(const MarkovMeasure& mu, const LocallyConstantPotential& psi) {
    return entropy_rate(mu) + integrate(psi, mu);
}

namespace {

struct BlockGraph {
    std::vector<Word> states;
    Eigen::MatrixXd adjacency;
};

// States are admissible r-words; w -> v when v extends the overlap of w by one symbol.
BlockGraph block_graph(const SymbolicSystem& sys, int r) {
    BlockGraph g;
    g.states = enumerate_words(sys, r);
    const int k = sys.alphabet_size();
    std::vector<int> index(ipow(k, r), -1);
    for (std::size_t i = 0; i < g.states.size(); ++i) index[word_code(g.states[i], 0, r, k)] = static_cast<int>(i);
    const auto n = static_cast<Eigen::Index>(g.states.size());
    g.adjacency = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < g.states.size(); ++i) {
        const Word& s = g.states[i];
        for (int b : sys.successors(s.back())) {
            Word t = r == 1 ? Word{} : Word(s.begin() + 1, s.end());
            t.push_back(static_cast<Symbol>(b));
            g.adjacency(static_cast<Eigen::Index>(i), index[word_code(t, 0, r, k)]) = 1.0;
        }
    }
    return g;
}

Eigen::VectorXd perron_vector(const Eigen::MatrixXd& b, double* root) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(b);
    if (es.info() != Eigen::Success) throw NonConvergenceError("eigen-decomposition failed", 0.0, 0.0);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
    *root = es.eigenvalues()(best).real();
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    if (v.sum() < 0.0) v = -v;
    v = v.cwiseMax(0.0);
    v /= v.sum();
    // Polish with power steps; the Perron root is simple and dominant.
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd w = b * v;
        v = w / w.sum();
    }
    *root = (b * v).sum() / v.sum();
    return v;
}

}  // namespace

EigenData perron_pressure(const SymbolicSystem& sys, const LocallyConstantPotential& psi) {
    sys.require_primitive("perron_pressure");
    if (psi.alphabet_size() != sys.alphabet_size()) throw PreconditionError("potential alphabet differs from system");
    const int r = psi.range();
    BlockGraph g = block_graph(sys, r);
    const double shift = psi.max_value();
    const auto n = g.adjacency.rows();
    Eigen::MatrixXd shifted(n, n);
    EigenData out;
    out.weighted = Eigen::MatrixXd(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = psi.value(g.states[static_cast<std::size_t>(i)]);
        shifted.row(i) = g.adjacency.row(i) * std::exp(v - shift);
        out.weighted.row(i) = g.adjacency.row(i) * std::exp(v);
    }
    double root = 0.0;
    Eigen::VectorXd right = perron_vector(shifted, &root);
    double root_left = 0.0;
    Eigen::VectorXd left = perron_vector(shifted.transpose(), &root_left);
    left /= left.dot(right);
    out.states = std::move(g.states);
    out.spectral_radius = root * std::exp(shift);
    out.pressure = std::log(root) + shift;
    out.right = right;
    out.left = left;
    out.residual = (shifted * right - root * right).cwiseAbs().maxCoeff() / right.cwiseAbs().maxCoeff();
    return out;
}

MarkovMeasure equilibrium_measure(const SymbolicSystem& sys, const LocallyConstantPotential& psi) {
    EigenData e = perron_pressure(sys, psi);
    const auto n = e.weighted.rows();
    const double shift = psi.max_value();
    const double lambda = std::exp(e.pressure - shift);
    Eigen::MatrixXd p(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double wi = std::exp(psi.value(e.states[static_cast<std::size_t>(i)]) - shift);
        for (Eigen::Index j = 0; j < n; ++j)
            p(i, j) = e.weighted(i, j) > 0.0 ? wi * e.right(j) / (lambda * e.right(i)) : 0.0;
        p.row(i) /= p.row(i).sum();
    }
    Eigen::VectorXd pi = e.left.cwiseProduct(e.right);
    pi /= pi.sum();
    // Remove rounding drift so that the stationarity audit is tight.
    for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd next = (pi.transpose() * p).transpose();
        pi = next / next.sum();
    }
    return MarkovMeasure(sys, psi.range(), p, pi);
}

VariationalResult maximize_variational(const SymbolicSystem& sys, const LocallyConstantPotential& psi, double tol,
                                       int max_iterations) {
    if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
    sys.require_primitive("maximize_variational");
    const int r = psi.range();
    const int s = std::max(r - 1, 1);
    BlockGraph g = block_graph(sys, s);
    const auto n = g.adjacency.rows();
    // Edge reward: psi on the first r symbols of the (s+1)-word state.symbol.
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (g.adjacency(i, j) == 0.0) continue;
            Word w = g.states[static_cast<std::size_t>(i)];
            w.push_back(g.states[static_cast<std::size_t>(j)].back());
            reward(i, j) = psi.value(Word(w.begin(), w.begin() + r));
        }

    Eigen::MatrixXd p = g.adjacency;
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= p.row(i).sum();

    double gain = -std::numeric_limits<double>::infinity();
    double change = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iterations; ++it) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (p(i, j) > 0.0) c(i) += p(i, j) * (reward(i, j) - std::log(p(i, j)));
        // Unknowns h_1..h_{n-1}, g with h_0 = 0:  h_u + g - sum_v P_uv h_v = c_u.
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index u = 0; u < n; ++u) {
            for (Eigen::Index v = 1; v < n; ++v) m(u, v - 1) = (u == v ? 1.0 : 0.0) - p(u, v);
            m(u, n - 1) = 1.0;
        }
        Eigen::VectorXd sol = m.fullPivLu().solve(c);
        Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
        for (Eigen::Index v = 1; v < n; ++v) h(v) = sol(v - 1);
        const double g_new = sol(n - 1);
        change = std::abs(g_new - gain);
        gain = g_new;

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double top = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j)
                if (g.adjacency(i, j) > 0.0) top = std::max(top, reward(i, j) + h(j));
            for (Eigen::Index j = 0; j < n; ++j)
                if (g.adjacency(i, j) > 0.0) next(i, j) = std::exp(reward(i, j) + h(j) - top);
            next.row(i) /= next.row(i).sum();
        }
        const double policy_change = (next - p).cwiseAbs().maxCoeff();
        p = next;
        if (it > 0 && change <= 1e-4 * tol && policy_change <= 1e-9) break;
    }
    if (it >= max_iterations) throw NonConvergenceError("variational maximization did not converge", gain, change);
    MarkovMeasure mu(sys, s, p);
    return VariationalResult{mu, free_energy(mu, psi), it + 1, change};
}

namespace {

struct ItemClass {
    double mass;
    double cost;
    std::size_t count;
};

std::vector<ItemClass> group_items(const std::vector<KnapsackItem>& items) {
    std::map<std::pair<long long, long long>, ItemClass> groups;
    for (const auto& it : items) {
        if (!(it.mass > 0.0)) continue;
        const auto key = std::make_pair(std::llround(std::log(it.mass) * 1e10), std::llround(std::log(it.cost) * 1e10));
        auto [pos, inserted] = groups.emplace(key, ItemClass{it.mass, it.cost, 1});
        if (!inserted) ++pos->second.count;
    }
    std::vector<ItemClass> out;
    for (auto& [k, c] : groups) out.push_back(c);
    std::sort(out.begin(), out.end(), [](const ItemClass& a, const ItemClass& b) {
        const double ra = a.mass / a.cost, rb = b.mass / b.cost;
        if (ra != rb) return ra > rb;
        return a.mass > b.mass;
    });
    return out;
}

constexpr double kMassSlack = 1e-12;

struct CoverSearch {
    const std::vector<ItemClass>& classes;
    std::vector<double> suffix_mass;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_count = 0;

    explicit CoverSearch(const std::vector<ItemClass>& c) : classes(c), suffix_mass(c.size() + 1, 0.0) {
        for (std::size_t i = c.size(); i-- > 0;) suffix_mass[i] = suffix_mass[i + 1] + c[i].mass * static_cast<double>(c[i].count);
    }

    // Fractional relaxation over classes i.. (sorted by ratio) for the remaining need.
    double lp_bound(std::size_t i, double need) const {
        double cost = 0.0;
        for (; i < classes.size() && need > kMassSlack; ++i) {
            const double m = classes[i].mass * static_cast<double>(classes[i].count);
            if (m >= need) return cost + need / classes[i].mass * classes[i].cost;
            cost += classes[i].cost * static_cast<double>(classes[i].count);
            need -= m;
        }
        return need > kMassSlack ? std::numeric_limits<double>::infinity() : cost;
    }

    void run(std::size_t i, double need, double cost, std::size_t taken) {
        if (need <= kMassSlack) {
            if (cost < best) {
                best = cost;
                best_count = taken;
            }
            return;
        }
        if (i == classes.size() || suffix_mass[i] < need - kMassSlack) return;
        if (cost + lp_bound(i, need) >= best * (1.0 - 1e-14)) return;
        const ItemClass& c = classes[i];
        const auto useful = static_cast<std::size_t>(std::ceil((need - kMassSlack) / c.mass));
        const std::size_t top = std::min(c.count, std::max<std::size_t>(useful, 0));
        for (std::size_t take = top + 1; take-- > 0;) {
            const double d = static_cast<double>(take);
            run(i + 1, need - d * c.mass, cost + d * c.cost, taken + take);
        }
    }
};

}  // namespace

double min_cost_cover(const std::vector<KnapsackItem>& items, double need, std::size_t* chosen) {
    auto classes = group_items(items);
    CoverSearch search(classes);
    search.run(0, need, 0.0, 0);
    if (!std::isfinite(search.best)) throw PreconditionError("total mass below the requested cover mass");
    if (chosen) *chosen = search.best_count;
    return search.best;
}

double greedy_cost_cover(const std::vector<KnapsackItem>& items, double need, std::size_t* chosen) {
    std::vector<KnapsackItem> sorted;
    for (const auto& it : items)
        if (it.mass > 0.0) sorted.push_back(it);
    std::stable_sort(sorted.begin(), sorted.end(), [](const KnapsackItem& a, const KnapsackItem& b) {
        const double ra = a.mass / a.cost, rb = b.mass / b.cost;
        if (ra != rb) return ra > rb;
        return a.mass > b.mass;
    });
    double cost = 0.0;
    std::size_t n = 0;
    for (const auto& it : sorted) {
        if (need <= kMassSlack) break;
        need -= it.mass;
        cost += it.cost;
        ++n;
    }
    if (need > kMassSlack) throw PreconditionError("total mass below the requested cover mass");
    if (chosen) *chosen = n;
    return cost;
}

KatokResult katok_partition(const MarkovMeasure& mu, const LocallyConstantPotential& psi, double gamma,
                            const Resolution& eps, int n, const KatokOptions& options) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("gamma must lie in (0,1)");
    if (n < 1) throw PreconditionError("n must be >= 1");
    const SymbolicSystem& sys = mu.system();
    const auto words = enumerate_words(sys, n + eps.m, options.enumeration_cap);
    std::vector<KnapsackItem> items;
    items.reserve(words.size());
    for (const Word& w : words) {
        const double mass = mu.word_measure(w);
        if (mass <= 0.0) continue;
        items.push_back({mass, std::exp(sup_birkhoff(sys, psi, w, n))});
    }
    KatokResult out;
    out.cylinders = items.size();
    const double need = 1.0 - gamma;
    if (items.size() <= options.exact_cap) {
        out.value = min_cost_cover(items, need, &out.chosen);
        out.exact = true;
    } else {
        out.value = greedy_cost_cover(items, need, &out.chosen);
        out.exact = false;
    }
    out.rate = std::log(out.value) / n;
    return out;
}

}  // namespace historic

namespace historic {

LevelSetBracket level_set_bracket(const SymbolicSystem& sys, const LocallyConstantPotential& phi,
                                  const LocallyConstantPotential& psi, double alpha, double tol, double s_max) {
    LevelSetBracket b;
    b.alpha = alpha;
    auto at = [&](double s) {
        const auto pot = psi.combined(1.0, phi, s);
        return std::pair{integrate(phi, equilibrium_measure(sys, pot)), pot};
    };
    // Very large |s| concentrates the measure past what the stationary solve can resolve.
    double g_lo = 0, g_hi = 0;
    for (;; s_max *= 0.5) {
        if (s_max < 1e-3) throw NonConvergenceError("level-set bracket: no usable range of s", 0.0, s_max);
        try {
            g_lo = at(-s_max).first;
            g_hi = at(s_max).first;
            break;
        } catch (const Error&) {
        }
    }
    double lo = -s_max, hi = s_max;
    b.inside = g_lo <= alpha && alpha <= g_hi;
    // The phi-integral of the equilibrium state is nondecreasing in s.
    double s = alpha <= g_lo ? lo : hi;
    if (b.inside) {
        for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
            s = 0.5 * (lo + hi);
            const double g = at(s).first;
            if (std::abs(g - alpha) < tol) break;
            (g < alpha ? lo : hi) = s;
        }
    }
    const auto [g, pot] = at(s);
    const MarkovMeasure mu = equilibrium_measure(sys, pot);
    b.s = s;
    b.alpha_attained = g;
    b.lower = free_energy(mu, psi);
    b.upper = perron_pressure(sys, pot).pressure - s * alpha;
    return b;
}

}  // namespace historic
