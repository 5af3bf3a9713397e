#pragma once

#include <Eigen/Dense>
#include <vector>

#include "historic/potential.hpp"
#include "historic/symbolic.hpp"

namespace historic {

// Stationary Markov measure on the block chain whose states are admissible b-words.
class MarkovMeasure {
public:
    MarkovMeasure(const SymbolicSystem& sys, int block, Eigen::MatrixXd stochastic);
    MarkovMeasure(const SymbolicSystem& sys, int block, Eigen::MatrixXd stochastic, Eigen::VectorXd stationary);

    // i.i.d. measure on a full shift.
    static MarkovMeasure bernoulli(const SymbolicSystem& sys, const std::vector<double>& probs);

    const SymbolicSystem& system() const { return sys_; }
    int block() const { return block_; }
    const std::vector<Word>& states() const { return states_; }
    const Eigen::MatrixXd& stochastic() const { return p_; }
    const Eigen::VectorXd& stationary() const { return pi_; }
    // -1 when the b-word is not a state.
    int state_index(const Word& w, std::size_t pos = 0) const;
    // State reached from state i by appending symbol b; -1 when not admissible.
    int successor_state(int i, int b) const { return next_[static_cast<std::size_t>(i * sys_.alphabet_size() + b)]; }

    double word_measure(const Word& w) const;
    double row_sum_residual() const;
    double stationarity_residual() const;
    bool ergodic() const;

private:
    void build_states();
    void validate();

    SymbolicSystem sys_;
    int block_;
    std::vector<Word> states_;
    std::vector<int> code_to_state_;
    std::vector<int> next_;
    Eigen::MatrixXd p_;
    Eigen::VectorXd pi_;
};

// Stationary vector of a row-stochastic matrix (dense linear solve).
Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& p);

double entropy_rate(const MarkovMeasure& mu);
double integrate(const LocallyConstantPotential& phi, const MarkovMeasure& mu);
// h_mu + int psi dmu
double free_energy(const MarkovMeasure& mu, const LocallyConstantPotential& psi);

struct EigenData {
    double spectral_radius = 0.0;
    double pressure = 0.0;
    Eigen::VectorXd right;
    Eigen::VectorXd left;
    Eigen::MatrixXd weighted;
    std::vector<Word> states;
    double residual = 0.0;
};

EigenData perron_pressure(const SymbolicSystem& sys, const LocallyConstantPotential& psi);
MarkovMeasure equilibrium_measure(const SymbolicSystem& sys, const LocallyConstantPotential& psi);

struct VariationalResult {
    MarkovMeasure measure;
    double value;
    int iterations;
    double last_change;
};

// Entropy-regularized policy iteration; never calls an eigen-solver.
VariationalResult maximize_variational(const SymbolicSystem& sys, const LocallyConstantPotential& psi, double tol,
                                       int max_iterations = 10000);

struct KatokOptions {
    std::size_t exact_cap = std::size_t{1} << 16;
    std::uint64_t enumeration_cap = kDefaultEnumerationCap;
};

struct KatokResult {
    double value = 0.0;
    double rate = 0.0;  // log(value) / n
    bool exact = true;
    std::size_t cylinders = 0;
    std::size_t chosen = 0;
};

// Cheapest collection of depth-(n+m) cylinders of mass >= 1 - gamma, cost sum exp(sup S_n psi).
KatokResult katok_partition(const MarkovMeasure& mu, const LocallyConstantPotential& psi, double gamma,
                            const Resolution& eps, int n, const KatokOptions& options = {});

// Entropy spectrum at alpha: sup of h + int psi over invariant measures with int phi = alpha.
// lower is the free energy of the equilibrium state of psi + s phi, whose phi-integral is alpha_attained;
// upper is P(psi + s phi) - s alpha, an upper bound for every s.
struct LevelSetBracket {
    double alpha = 0;
    double s = 0;
    double alpha_attained = 0;
    double lower = 0;
    double upper = 0;
    bool inside = false;  // alpha reachable with |s| <= s_max
};

LevelSetBracket level_set_bracket(const SymbolicSystem& sys, const LocallyConstantPotential& phi,
                                  const LocallyConstantPotential& psi, double alpha, double tol = 1e-10,
                                  double s_max = 60.0);

// Exact 0/1 covering knapsack on (mass, cost) items grouped into equal classes.
struct KnapsackItem {
    double mass;
    double cost;
};
double min_cost_cover(const std::vector<KnapsackItem>& items, double need, std::size_t* chosen = nullptr);
double greedy_cost_cover(const std::vector<KnapsackItem>& items, double need, std::size_t* chosen = nullptr);

}  // namespace historic
