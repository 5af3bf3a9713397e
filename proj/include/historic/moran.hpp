#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "historic/caratheodory.hpp"
#include "historic/specification.hpp"
#include "historic/thermo.hpp"

namespace historic {

enum class FamilyMode { minimal, maximal };

struct ConstructionParams {
    double gamma = 0.14;
    double delta = 0.1;
    Resolution eps{2};
    std::vector<double> delta_seq;  // empty: delta_k = 0.9 delta k^{-1/4}
    std::vector<int> l_seq;         // empty: l_k = k
    int depth = 3;
    double theta1_scale = 1.0;      // theta_1(k) = theta1_scale / k
    double theta2_scale = 1.0;
    std::vector<long long> n_schedule;  // explicit N_k, overrides the threshold rule
    int n_cap = 4096;
    std::uint64_t family_cap = std::uint64_t{1} << 22;
    FamilyMode family_mode = FamilyMode::maximal;
    double family_band = 0.5;  // minimal mode first searches |avg - target| < band * delta_k
    std::uint64_t atom_cap = std::uint64_t{1} << 16;
    std::uint64_t symbol_cap = std::uint64_t{1} << 26;  // atoms times word length when materializing
    long long t_cap = 1LL << 40;
    long long full_sweep_limit = 4096;
    int sampled_sweep_points = 64;
    double composite_weight = 0.5;  // weight of mu1 inside mu2 on the composite route
    bool seedless = false;          // refuse sampled materialization

    int lookahead() const { return eps.m + 2; }
    Resolution quarter() const { return eps.finer(2); }
    double delta_k(int k) const;
    int l_k(int k) const;
    static int rho(int k) { return (k + 1) % 2 + 1; }
    double theta1(int k) const { return theta1_scale / k; }
    double theta2(int k) const { return theta2_scale / k; }
    void validate() const;
};

struct GoodSet {
    int k = 0;
    int n = 0;
    double target = 0;
    double delta_k = 0;
    double measure = 0;    // exact measure of the cylinders meeting both conditions
    double lag_ratio = 0;  // largest p(x, n, eps/4) / n
    bool lag_ok = false;
    bool measure_ok = false;
    bool passed() const { return lag_ok && measure_ok; }
};

// Depth n+r-1 words x with |S_n phi(x)/n - target| < delta_k and lag/n < 2^{-k}; measure by exact DP.
GoodSet build_good_set(const MarkovMeasure& mu, const LocallyConstantPotential& phi, const LagFunction& lag,
                       double gamma, int k, int n, double delta_k);
GoodSet build_good_set(const MarkovMeasure& mu, const LocallyConstantPotential& phi, const LagFunction& lag,
                       const ConstructionParams& params, int k, int n);
// The good cylinders themselves, for small n.
CylinderSet good_cylinders(const SymbolicSystem& sys, const LocallyConstantPotential& phi, const LagFunction& lag,
                           const GoodSet& good, std::uint64_t cap = kDefaultEnumerationCap);

struct SeparatedFamily {
    int k = 0;
    int n = 0;          // unit body length n_k
    int lookahead = 0;  // m + 2 symbols after the body
    int lag = 0;        // gap after each unit: max p(x, n_k, eps/4)
    std::vector<Word> words;  // lexicographic, n + lookahead symbols
    std::vector<double> log_weights;
    // Birkhoff segments inside a unit; the composite route has two.
    std::vector<std::pair<int, int>> segments;
    double log_M = 0;
    double rate = 0;  // required: log M >= rate * segment_length()
    bool bound_ok = false;
    bool composite = false;
    double display_rate = 0;  // composite only: (1-gamma)^2 n_k (C - 5 gamma) form
    bool display_ok = true;
    double target = 0;

    int unit() const { return n + lag; }
    int word_length() const { return n + lookahead; }
    int segment_length() const;
    std::size_t size() const { return words.size(); }
};

// Lexicographic search over the good set, one word per depth-(n+m-2) prefix; the minimal mode stops
// as soon as log M reaches n * rate.
SeparatedFamily select_separated_family(const SymbolicSystem& sys, const LocallyConstantPotential& phi,
                                        const LocallyConstantPotential& psi, const LagFunction& lag,
                                        const GoodSet& good, const ConstructionParams& params, double rate,
                                        double band_fraction = 1.0);

// Theta^1 x Theta^2 glued with the lag of Theta^1; weights multiply.
SeparatedFamily compose_block(const SymbolicSystem& sys, const SeparatedFamily& first, const SeparatedFamily& second,
                              int k);

struct ScheduleSlack {
    int k = 0;
    double ratio_next = 0;  // (n_{k+1} + p_{k+1}) / N_k
    double bound_next = 0;
    double ratio_prev = 0;  // t_{k-1} / N_k
    double bound_prev = 0;
};

struct Schedule {
    std::vector<long long> N{0};
    std::vector<long long> t{0};
    std::vector<ScheduleSlack> slack;
    int depth = 0;
    bool truncated = false;
};

Schedule choose_schedule(const std::vector<SeparatedFamily>& families, const ConstructionParams& params);

// Slot model of the nested construction: level k repeats units of family k, N_k times.
struct LevelPlan {
    SymbolicSystem sys;
    Resolution eps;
    std::vector<SeparatedFamily> families;
    Schedule schedule;

    int depth() const { return schedule.depth; }
    const SeparatedFamily& family(int k) const { return families[static_cast<std::size_t>(k - 1)]; }
    long long t(int k) const { return schedule.t[static_cast<std::size_t>(k)]; }
    long long N(int k) const { return schedule.N[static_cast<std::size_t>(k)]; }
    long long offset(int k, long long j) const { return t(k - 1) + (j - 1) * family(k).unit(); }
    double log_kappa(int k) const;
    // Symbols before the first connector that depends on level k+1.
    long long core_length(int k) const { return t(k) - family(k).lag + family(k).lookahead; }
};

struct Atom {
    std::vector<std::uint32_t> tuple;
    Word word;
    double log_weight = 0;
};

struct FractalLevel {
    int k = 0;
    long long t = 0;
    std::vector<Atom> atoms;
    double log_kappa = 0;          // exact weight sum when complete, product identity when sampled
    double log_kappa_product = 0;  // sum of N_i log M_i
    double total_atoms = 0;
    bool sampled = false;
    bool shadowing_verified = true;
};

FractalLevel build_fractal_level(const LevelPlan& plan, int k, std::uint64_t atom_cap, std::uint64_t symbol_cap);

struct SeparationReport {
    bool passed = true;
    bool exhaustive = false;
    std::uint64_t pairs = 0;
    std::optional<std::pair<std::size_t, std::size_t>> witness;
    std::string note;
};

// (t_k, 3 eps)-separation of the materialized atoms; literal pair scan up to pair_limit, else sorted neighbours.
SeparationReport check_separation(const FractalLevel& level, const Resolution& eps,
                                  std::uint64_t pair_limit = 20'000'000);
// Same property for every atom of the plan, from family distinctness and slot placement.
SeparationReport check_separation_structural(const LevelPlan& plan, int k);

struct DiscreteMeasure {
    std::vector<Word> support;
    std::vector<double> mass;
    double total = 0;
    double measure_of(const Word& prefix) const;
};

DiscreteMeasure build_measures(const FractalLevel& level);

struct BoundContext {
    double C = 0;
    double rate = 0;     // a: verified lower growth rate of every family
    double var_psi = 0;  // Var(psi, eps)
    double gamma = 0;
    double psi_norm = 0;
    double psi_min = 0;
    double bound_slope() const { return rate - 2 * var_psi - 3 * gamma; }
};

struct BallCheck {
    long long n = 0;
    int k = 0;
    long long j = 0;
    double log_mu = 0;
    double log_rhs = 0;   // 1/(kappa_k M^j) exp{S_n psi(q) + 2n Var + |psi| W}
    double log_rhs_de = 0;      // same with kappa_k M^j replaced by exp{a n - D - E}
    double log_rhs_simple = 0;  // exp{-n(a - 2Var - 3gamma) + S_n psi(q)}
    double D = 0;
    double E = 0;
    double W = 0;
    bool simple_applies = false;  // D/n, E/n and |psi| W / n all at most gamma
};

// One ball B_n(q, eps/2) against a materialized measure of depth > k.
BallCheck check_ball(const LevelPlan& plan, const DiscreteMeasure& mu, const LocallyConstantPotential& psi,
                     const BoundContext& ctx, const Word& q, long long n);

struct BallBoundReport {
    long long n_from = 0;
    long long n_to = 0;  // inclusive
    std::uint64_t orders = 0;
    std::uint64_t balls = 0;
    std::uint64_t violations = 0;
    double worst_ball = -1e300;   // max log(mu / rhs)
    double worst_de = -1e300;
    double worst_simple = -1e300;  // over orders where the simplified bound applies
    double worst_any_simple = -1e300;  // over all orders, for the implied constant
    long long threshold_n = 0;
    bool structural = false;
    bool passed = true;
    std::vector<long long> orders_list;
};

BallBoundReport verify_ball_bound(const LevelPlan& plan, const FractalLevel& deepest, const LocallyConstantPotential& psi,
                                  const BoundContext& ctx, long long n_from, long long n_to);
// Rigorous upper bound on log(mu_D(B)/rhs) over every ball of each listed order.
BallBoundReport verify_ball_bound_structural(const LevelPlan& plan, const LocallyConstantPotential& psi,
                                             const BoundContext& ctx, const std::vector<long long>& orders);

struct OscillationLevel {
    int k = 0;
    long long t = 0;
    double target = 0;
    double min_avg = 0;
    double max_avg = 0;
    bool ok = false;
};

struct OscillationReport {
    std::vector<OscillationLevel> levels;
    double min_consecutive_gap = 0;
    bool passed = false;
};

// Exact extremes of S_{t_k} phi / t_k over all atoms of the plan (max-plus products over slot classes).
OscillationReport oscillation_check(const LevelPlan& plan, const LocallyConstantPotential& phi, double delta);
// The same averages evaluated on materialized atoms.
OscillationReport oscillation_check(const FractalLevel& level, const LevelPlan& plan,
                                    const LocallyConstantPotential& phi, double delta);

struct FaultInjection {
    int duplicate_word_level = 0;  // append a copy of a family word at this level
};

struct CertifyInput {
    SymbolicSystem sys;
    LocallyConstantPotential phi;
    LocallyConstantPotential psi;
    MarkovMeasure mu1;
    std::optional<MarkovMeasure> mu2;
    std::optional<MarkovMeasure> nu;  // second component of mu2 on the composite route
    std::optional<LagFunction> lag;   // default: mixing lag at eps/4
    std::optional<double> C;          // default: P(X, psi)
    ConstructionParams params;
    FaultInjection fault;
};

struct LevelReport {
    int k = 0;
    int n = 0;
    int lag = 0;
    long long N = 0;
    long long t = 0;
    std::size_t family_size = 0;
    double log_M = 0;
    double required_log_M = 0;
    double target = 0;
    double delta_k = 0;
    std::vector<GoodSet> good_sets;
    bool composite = false;
    bool family_ok = false;
};

struct HistoricCertificate {
    std::string route;  // "standard" or "composite"
    double C = 0;
    double C_variational = 0;
    double var_psi = 0;
    double var_phi = 0;
    double integral_1 = 0;
    double integral_2 = 0;
    double free_energy_1 = 0;
    double free_energy_2 = 0;
    bool hypotheses_ok = false;
    std::vector<LevelReport> levels;
    Schedule schedule;
    int achieved_depth = 0;
    std::map<std::string, bool> checks;
    OscillationReport oscillation;
    OscillationReport oscillation_sampled;
    SeparationReport separation;
    SeparationReport separation_sampled;
    BallBoundReport ball_sweep;
    std::optional<BallBoundReport> ball_explicit;
    std::optional<double> lower_bound;
    std::optional<double> relaxed_bound;
    double rate = 0;
    double implied_K = 0;
    bool equality_annotation = false;
    std::string annotation;
    std::vector<std::string> caveats;
    std::vector<std::string> transcript;
    std::string failed_stage;

    bool passed() const { return failed_stage.empty() && lower_bound.has_value(); }
};

HistoricCertificate certify(const CertifyInput& input);

}  // namespace historic
