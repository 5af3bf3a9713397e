#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "historic/moran.hpp"
#include "moran_internal.hpp"

namespace historic {

namespace {

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

int next_n(int n) { return n + std::max(1, n / 32); }

// Smallest searched n >= start whose good set passes and whose family reaches n * rate.
std::optional<SeparatedFamily> search_family(const CertifyInput& in, const LagFunction& lag, const MarkovMeasure& mu, int k,
                                             double delta_k, int start, double rate, LevelReport& report,
                                             std::vector<std::string>& transcript, const std::string& tag) {
    const auto& P = in.params;
    // p/n < 2^{-k} cannot hold below the first n that meets it.
    int lag_floor = 1;
    if (lag.kind() != LagFunction::Kind::callback) {
        const double budget = std::ldexp(1.0, -k);
        while (lag_floor <= P.n_cap &&
               !(lag.kind() == LagFunction::Kind::table && lag_floor > lag.table_size()) &&
               !(static_cast<double>(lag.max_value(lag_floor)) / lag_floor < budget))
            ++lag_floor;
    }
    for (int n = std::max(start, lag_floor); n <= P.n_cap; n = next_n(n)) {
        if (lag.kind() == LagFunction::Kind::table && n > lag.table_size()) break;
        GoodSet good = build_good_set(mu, in.phi, lag, P.gamma, k, n, delta_k);
        if (!good.passed()) continue;
        std::vector<double> bands{1.0};
        if (P.family_mode == FamilyMode::minimal && P.family_band < 1) bands.insert(bands.begin(), P.family_band);
        for (double band : bands) {
            SeparatedFamily fam;
            try {
                fam = select_separated_family(in.sys, in.phi, in.psi, lag, good, P, rate, band);
            } catch (const EnumerationCapError& e) {
                // Larger n only needs more words.
                transcript.push_back(tag + ": n = " + std::to_string(n) + ", " + e.what());
                return std::nullopt;
            }
            if (!fam.bound_ok) continue;
            transcript.push_back(tag + ": n = " + std::to_string(n) + ", good measure " + fmt_num(good.measure) +
                                 ", |Theta| = " + std::to_string(fam.size()) + ", log M = " + fmt_num(fam.log_M) +
                                 " >= " + fmt_num(rate * n));
            report.good_sets.push_back(good);
            return fam;
        }
    }
    transcript.push_back(tag + ": no n <= " + std::to_string(P.n_cap) + " meets the measure and growth tests");
    return std::nullopt;
}

std::vector<long long> sweep_orders(const LevelPlan& plan, const ConstructionParams& P) {
    std::set<long long> orders;
    const long long lo = plan.t(1);
    const long long hi = plan.t(plan.depth()) - 1;
    const long long full_end = std::min(hi, P.full_sweep_limit - 1);
    for (long long n = lo; n <= full_end; ++n) orders.insert(n);
    const long long start = std::max(lo, P.full_sweep_limit);
    if (start <= hi && P.sampled_sweep_points > 0) {
        const double ratio = std::log(static_cast<double>(hi) / static_cast<double>(start));
        for (int s = 0; s < P.sampled_sweep_points; ++s) {
            const double f = P.sampled_sweep_points == 1 ? 0.0 : static_cast<double>(s) / (P.sampled_sweep_points - 1);
            orders.insert(std::clamp(static_cast<long long>(std::llround(start * std::exp(ratio * f))), start, hi));
        }
    }
    for (int k = 1; k <= plan.depth(); ++k)
        for (long long d : {-1LL, 0LL, 1LL}) {
            const long long n = plan.t(k) + d;
            if (n >= lo && n <= hi) orders.insert(n);
        }
    return {orders.begin(), orders.end()};
}

}  // namespace

HistoricCertificate certify(const CertifyInput& in) {
    const auto& P = in.params;
    P.validate();
    const SymbolicSystem& sys = in.sys;
    sys.require_primitive("certify");
    if (!(in.mu1.system() == sys)) throw ConfigError("measures/mu1", "measure lives on a different system");
    const int m = P.eps.m;
    if (in.phi.range() > m + 3) throw ConfigError("phi/range", "range exceeds m + 3");
    if (in.psi.range() > m + 2) throw ConfigError("psi/range", "range exceeds m + 2");
    const LagFunction lag = in.lag.value_or(mixing_lag(sys, P.quarter()));
    if (!(lag.eps() == P.quarter())) throw ConfigError("lag/m", "lag must be stated at eps/4 (m + 2)");

    HistoricCertificate cert;
    auto& tr = cert.transcript;
    cert.C_variational = perron_pressure(sys, in.psi).pressure;
    cert.C = in.C.value_or(cert.C_variational);
    cert.var_psi = oscillation(in.psi, P.eps);
    cert.var_phi = oscillation(in.phi, P.eps);
    cert.integral_1 = integrate(in.phi, in.mu1);
    cert.free_energy_1 = free_energy(in.mu1, in.psi);
    const double w1 = P.composite_weight;

    std::optional<double> nu_free, nu_integral;
    bool composite = false;
    if (in.mu2 && in.mu2->ergodic() && std::abs(integrate(in.phi, *in.mu2) - cert.integral_1) > 1e-12) {
        if (!(in.mu2->system() == sys)) throw ConfigError("measures/mu2", "measure lives on a different system");
        cert.integral_2 = integrate(in.phi, *in.mu2);
        cert.free_energy_2 = free_energy(*in.mu2, in.psi);
    } else if (in.nu) {
        if (!(in.nu->system() == sys)) throw ConfigError("measures/nu", "measure lives on a different system");
        composite = true;
        nu_integral = integrate(in.phi, *in.nu);
        nu_free = free_energy(*in.nu, in.psi);
        cert.integral_2 = w1 * cert.integral_1 + (1 - w1) * *nu_integral;
        cert.free_energy_2 = w1 * cert.free_energy_1 + (1 - w1) * *nu_free;
    } else if (in.mu2 && !in.mu2->ergodic()) {
        throw ConfigError("measures/nu", "a non-ergodic second measure needs its decomposition (nu, w1)");
    } else if (in.mu2) {
        throw PreconditionError("integrals of phi against mu1 and mu2 coincide; no oscillation is possible");
    } else {
        throw ConfigError("measures/mu2", "second measure missing");
    }
    cert.route = composite ? "composite" : "standard";
    tr.push_back("route " + cert.route + ", C = " + fmt_num(cert.C) + ", P(X, psi) = " + fmt_num(cert.C_variational));

    // Hypotheses.
    const double gamma = P.gamma;
    const double gap = std::abs(cert.integral_1 - cert.integral_2);
    std::vector<std::string> failed;
    if (!(cert.free_energy_1 > cert.C - gamma)) failed.push_back("h + int psi for mu1 is not above C - gamma");
    if (composite) {
        if (!(*nu_free > cert.C - gamma)) failed.push_back("h + int psi for nu is not above C - gamma");
    } else if (!(cert.free_energy_2 > cert.C - gamma)) {
        failed.push_back("h + int psi for mu2 is not above C - gamma");
    }
    if (!(4 * P.delta < gap)) failed.push_back("4 delta is not below the gap in int phi");
    if (!(cert.var_psi < gamma)) failed.push_back("Var(psi, eps) is not below gamma");
    if (!(cert.var_phi < P.delta / 4)) failed.push_back("Var(phi, eps) is not below delta / 4");
    cert.hypotheses_ok = failed.empty();
    cert.checks["hypotheses"] = cert.hypotheses_ok;
    for (const auto& f : failed) tr.push_back("hypothesis failed: " + f);
    if (!cert.hypotheses_ok) {
        cert.failed_stage = "hypotheses";
        return cert;
    }
    tr.push_back("hypotheses hold: gap " + fmt_num(gap) + " > 4 delta, Var(psi) = " + fmt_num(cert.var_psi));

    // Families.
    const double rate_std = cert.C - 4 * gamma;
    cert.rate = composite ? cert.C - 5 * gamma : rate_std;
    std::vector<SeparatedFamily> families;
    bool families_ok = true;
    for (int k = 1; k <= P.depth && families_ok; ++k) {
        LevelReport rep;
        rep.k = k;
        rep.delta_k = P.delta_k(k);
        const bool first_measure = ConstructionParams::rho(k) == 1;
        std::optional<SeparatedFamily> fam;
        const std::string tag = "level " + std::to_string(k);
        if (first_measure || !composite) {
            const MarkovMeasure& mu = first_measure ? in.mu1 : *in.mu2;
            fam = search_family(in, lag, mu, k, rep.delta_k, P.l_k(k), rate_std, rep, tr, tag);
        } else {
            rep.composite = true;
            const double d_prev = P.delta_k(k - 1);
            for (int nh = std::max(P.l_k(k), 2); nh <= P.n_cap && !fam; nh = next_n(nh)) {
                const int n1 = static_cast<int>(std::floor(w1 * nh));
                const int n2 = static_cast<int>(std::floor((1 - w1) * nh));
                if (n1 < 1 || n2 < 1) continue;
                GoodSet g1 = build_good_set(in.mu1, in.phi, lag, gamma, k, n1, d_prev);
                GoodSet g2 = build_good_set(*in.nu, in.phi, lag, gamma, k, n2, rep.delta_k);
                if (!g1.passed() || !g2.passed()) continue;
                auto pick = [&](const GoodSet& g, double rate) -> std::optional<SeparatedFamily> {
                    std::vector<double> bands{1.0};
                    if (P.family_mode == FamilyMode::minimal && P.family_band < 1) bands.insert(bands.begin(), P.family_band);
                    for (double band : bands) {
                        auto f = select_separated_family(sys, in.phi, in.psi, lag, g, P, rate, band);
                        if (f.bound_ok) return f;
                    }
                    return std::nullopt;
                };
                std::optional<SeparatedFamily> f1, f2;
                try {
                    f1 = pick(g1, cert.free_energy_1 - 4 * gamma);
                    f2 = pick(g2, *nu_free - 4 * gamma);
                } catch (const EnumerationCapError& e) {
                    tr.push_back(tag + " (composite): n_hat = " + std::to_string(nh) + ", " + e.what());
                    break;
                }
                if (!f1 || !f2) continue;
                SeparatedFamily c = compose_block(sys, *f1, *f2, k);
                c.rate = cert.rate;
                c.target = cert.integral_2;
                c.bound_ok = c.bound_ok && c.log_M >= cert.rate * c.segment_length();
                c.display_rate = (1 - gamma) * (1 - gamma) * c.n * cert.rate;
                c.display_ok = c.log_M >= c.display_rate;
                if (!c.bound_ok) continue;
                tr.push_back(tag + " (composite): n_hat = " + std::to_string(nh) + ", blocks " + std::to_string(n1) + " + " +
                             std::to_string(n2) + ", |Theta| = " + std::to_string(c.size()) + ", log M = " + fmt_num(c.log_M) +
                             " >= " + fmt_num(cert.rate * c.segment_length()));
                rep.good_sets = {g1, g2};
                fam = std::move(c);
            }
            if (!fam) tr.push_back(tag + " (composite): no n_hat <= " + std::to_string(P.n_cap) + " works");
        }
        if (!fam) {
            families_ok = false;
            rep.family_ok = false;
            cert.levels.push_back(rep);
            break;
        }
        if (in.fault.duplicate_word_level == k && !fam->words.empty()) {
            fam->words.push_back(fam->words.front());
            fam->log_weights.push_back(fam->log_weights.front());
            fam->log_M = detail::log_sum_exp(fam->log_weights);
            tr.push_back(tag + ": fault injected, first word duplicated");
        }
        rep.n = fam->n;
        rep.lag = fam->lag;
        rep.family_size = fam->size();
        rep.log_M = fam->log_M;
        rep.required_log_M = fam->rate * fam->segment_length();
        rep.target = fam->target;
        rep.composite = fam->composite;
        rep.family_ok = fam->bound_ok;
        cert.levels.push_back(rep);
        families.push_back(std::move(*fam));
    }
    cert.checks["families"] = families_ok;
    if (!families_ok) {
        cert.failed_stage = "families";
        return cert;
    }

    cert.schedule = choose_schedule(families, P);
    cert.achieved_depth = cert.schedule.depth;
    for (int k = 1; k <= cert.achieved_depth; ++k) {
        cert.levels[static_cast<std::size_t>(k - 1)].N = cert.schedule.N[static_cast<std::size_t>(k)];
        cert.levels[static_cast<std::size_t>(k - 1)].t = cert.schedule.t[static_cast<std::size_t>(k)];
    }
    if (cert.schedule.truncated) cert.caveats.push_back("schedule truncated by t_cap at depth " + std::to_string(cert.achieved_depth));
    if (cert.achieved_depth < 2) {
        cert.checks["schedule"] = false;
        cert.failed_stage = "schedule";
        tr.push_back("schedule reaches depth " + std::to_string(cert.achieved_depth) + " only");
        return cert;
    }
    cert.checks["schedule"] = true;
    families.resize(static_cast<std::size_t>(cert.achieved_depth));
    LevelPlan plan{sys, P.eps, std::move(families), cert.schedule};
    const int D = plan.depth();
    {
        std::ostringstream os;
        os << "schedule:";
        for (int k = 1; k <= D; ++k) os << " N_" << k << " = " << plan.N(k) << " (t = " << plan.t(k) << ")";
        tr.push_back(os.str());
    }

    // Separation for every atom, then a materialized cross-check with shadowing transcripts.
    cert.separation = check_separation_structural(plan, D);
    tr.push_back("separation (all atoms): " + std::string(cert.separation.passed ? "ok, " : "FAIL, ") + cert.separation.note);

    int L = 0;
    std::uint64_t atoms_at_L = 0;
    for (int k = 1; k <= D; ++k) {
        const auto len = static_cast<std::uint64_t>(plan.t(k) + plan.family(k).lookahead);
        if (len > P.symbol_cap || P.symbol_cap / len < 2) break;
        double log_total = 0;
        for (int i = 1; i <= k; ++i) log_total += static_cast<double>(plan.N(i)) * std::log(static_cast<double>(plan.family(i).size()));
        const double budget = static_cast<double>(std::min<std::uint64_t>(P.atom_cap, P.symbol_cap / len));
        const bool needs_sampling = log_total > std::log(budget) + 1e-9;
        if (needs_sampling && P.seedless) break;
        L = k;
        atoms_at_L = static_cast<std::uint64_t>(std::min(budget, std::exp(log_total)));
    }
    bool shadow_ok = true;
    std::optional<FractalLevel> level;
    if (L >= 1 && atoms_at_L >= 2) {
        level = build_fractal_level(plan, L, P.atom_cap, P.symbol_cap);
        shadow_ok = level->shadowing_verified;
        cert.separation_sampled = check_separation(*level, P.eps);
        tr.push_back("materialized level " + std::to_string(L) + ": " + std::to_string(level->atoms.size()) + " atoms" +
                     (level->sampled ? " (stratified sample)" : "") + ", shadowing " + (shadow_ok ? "ok" : "FAIL") +
                     ", pairwise separation " + (cert.separation_sampled.passed ? "ok" : "FAIL"));
        if (level->sampled) cert.caveats.push_back("level " + std::to_string(L) + " cross-checks use a stratified sample; kappa from the product identity");
    } else {
        cert.caveats.push_back("no level small enough to materialize without sampling");
    }
    cert.checks["shadowing"] = shadow_ok;
    cert.checks["separation"] = cert.separation.passed && cert.separation_sampled.passed;

    // Oscillation of the averages at every t_k.
    cert.oscillation = oscillation_check(plan, in.phi, P.delta);
    bool osc_ok = cert.oscillation.passed;
    if (level) {
        cert.oscillation_sampled = oscillation_check(*level, plan, in.phi, P.delta);
        osc_ok = osc_ok && cert.oscillation_sampled.passed;
    }
    cert.checks["oscillation"] = osc_ok;
    for (const auto& l : cert.oscillation.levels)
        tr.push_back("average at t_" + std::to_string(l.k) + " in [" + fmt_num(l.min_avg) + ", " + fmt_num(l.max_avg) +
                     "], target " + fmt_num(l.target) + (l.ok ? " ok" : " FAIL"));

    // Ball bounds.
    BoundContext ctx{cert.C, cert.rate, cert.var_psi, gamma, in.psi.sup_norm(), in.psi.min_value()};
    cert.ball_sweep = verify_ball_bound_structural(plan, in.psi, ctx, sweep_orders(plan, P));
    bool ball_ok = cert.ball_sweep.worst_ball <= 1e-9 * std::max(1.0, static_cast<double>(cert.ball_sweep.n_to)) &&
                   cert.ball_sweep.worst_de <= 1e-9 * std::max(1.0, static_cast<double>(cert.ball_sweep.n_to));
    bool simple_ok = cert.ball_sweep.passed;
    if (level && !level->sampled && L >= 2) {
        const long long hi = std::min(plan.t(L) - 1, plan.t(1) + P.full_sweep_limit - 1);
        try {
            cert.ball_explicit = verify_ball_bound(plan, *level, in.psi, ctx, plan.t(1), hi);
            ball_ok = ball_ok && cert.ball_explicit->worst_ball <= 1e-9 * static_cast<double>(hi) &&
                      cert.ball_explicit->worst_de <= 1e-9 * static_cast<double>(hi);
            simple_ok = simple_ok && cert.ball_explicit->passed;
        } catch (const EnumerationCapError&) {
            cert.caveats.push_back("explicit ball sweep skipped: prefix sums exceed the cap");
        }
    }
    cert.checks["ball_bound"] = ball_ok;
    cert.checks["ball_bound_simplified"] = simple_ok;
    cert.implied_K = std::exp(std::max(0.0, cert.ball_sweep.worst_any_simple));
    tr.push_back("ball sweep over " + std::to_string(cert.ball_sweep.orders) + " orders in [" +
                 std::to_string(cert.ball_sweep.n_from) + ", " + std::to_string(cert.ball_sweep.n_to) + "]: worst log ratio " +
                 fmt_num(cert.ball_sweep.worst_ball) + ", simplified from n = " + std::to_string(cert.ball_sweep.threshold_n) +
                 ", " + std::to_string(cert.ball_sweep.violations) + " violations");

    for (const char* name : {"families", "schedule", "shadowing", "separation", "oscillation", "ball_bound", "ball_bound_simplified"})
        if (!cert.checks[name]) {
            cert.failed_stage = name;
            tr.push_back("stage " + std::string(name) + " failed; no bound emitted");
            return cert;
        }

    const double extra = composite ? gamma : 0.0;
    cert.lower_bound = cert.C - 2 * cert.var_psi - 7 * gamma - extra;
    cert.relaxed_bound = cert.C - 9 * gamma - extra;
    tr.push_back("lower bound " + fmt_num(*cert.lower_bound) + ", relaxed " + fmt_num(*cert.relaxed_bound));
    cert.caveats.push_back("finite depth " + std::to_string(D) + ": the limits in the schedule are replaced by thresholds theta(k)");

    const MarkovMeasure eq = equilibrium_measure(sys, in.psi);
    if (std::abs(free_energy(eq, in.psi) - cert.C_variational) <= 1e-8 && std::abs(cert.C - cert.C_variational) <= 1e-12) {
        cert.equality_annotation = true;
        cert.annotation = "an equilibrium state for psi exists, so P(historic set, psi) = P(X, psi) = " + fmt_num(cert.C_variational);
    }
    return cert;
}

}  // namespace historic
