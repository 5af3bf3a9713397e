#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "historic/caratheodory.hpp"
#include "historic/cli.hpp"

namespace historic::cli {

namespace {

namespace fs = std::filesystem;

// Shortest round-trip text, so CSV and JSON agree on every digit.
std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::setprecision(17) << x;
    const std::string full = s.str();
    for (int p = 6; p < 17; ++p) {
        std::ostringstream t;
        t << std::setprecision(p) << x;
        if (std::stod(t.str()) == x) return t.str();
    }
    return full;
}

Json finite(double x) { return std::isfinite(x) ? Json(x) : Json(num(x)); }

template <class T>
T get(const RunConfig& c, const std::string& cmd, const std::string& key, T fallback) {
    const Json v = c.option(cmd, key, Json(fallback));
    try {
        return v.get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("options/" + cmd + "/" + key, "wrong type");
    }
}

Json json_words(const std::vector<Word>& ws) {
    Json a = Json::array();
    for (const Word& w : ws) a.push_back(to_string(w));
    return a;
}

Json system_json(const SymbolicSystem& sys) {
    return Json{{"label", sys.label()}, {"alphabet", sys.alphabet_size()}, {"transition", sys.transition()}};
}

RunResult run_pressure(const RunConfig& c) {
    const auto& sys = c.system();
    const auto psi = c.potential_psi();
    const Resolution eps(get<int>(c, "pressure", "m", 0));
    const int n_max = get<int>(c, "pressure", "n_max", 12);
    const double tol = get<double>(c, "pressure", "tol", kDefaultPressureTolerance);
    const auto eig = perron_pressure(sys, psi);
    const auto var = maximize_variational(sys, psi, 1e-11);
    const auto z = CylinderSet::whole(sys);
    const auto est = pressure_root(z, psi, eps, n_max, tol);
    const bool agree = std::abs(eig.pressure - var.value) <= 2e-6;
    const bool contains = est.contains(eig.pressure);

    RunResult r;
    r.output = Json{{"command", "pressure"},
                    {"system", system_json(sys)},
                    {"perron", {{"pressure", eig.pressure}, {"spectral_radius", eig.spectral_radius}, {"residual", eig.residual}}},
                    {"variational", {{"value", var.value}, {"iterations", var.iterations}, {"last_change", var.last_change}}},
                    {"bracket",
                     {{"t_lower", est.t_lower},
                      {"t_upper", est.t_upper},
                      {"width", est.width()},
                      {"m", est.eps.m},
                      {"n_min", est.n_min},
                      {"n_max", est.n_max},
                      {"lower_method", to_string(est.lower_method)},
                      {"upper_method", to_string(est.upper_method)},
                      {"finite_n_caveat", est.finite_n_caveat}}},
                    {"checks", {{"perron_matches_variational", agree}, {"bracket_contains_perron", contains}}}};
    std::ostringstream csv;
    csv << "n,t,uniform,mixed\n";
    for (int n = std::max(1, n_max - 4); n <= n_max; ++n)
        for (double t : {est.t_lower - 0.1, est.t_lower, eig.pressure, est.t_upper, est.t_upper + 0.1}) {
            const auto v = caratheodory_value(z, t, psi, n, eps, n_max);
            csv << n << ',' << num(t) << ',' << num(v.uniform) << ',' << num(v.mixed) << '\n';
        }
    r.csv = csv.str();
    r.checks_passed = agree && contains;
    if (!r.checks_passed) r.failure = agree ? "Caratheodory bracket misses the Perron value" : "Perron and variational values disagree";
    return r;
}

RunResult run_equilibrium(const RunConfig& c) {
    const auto& sys = c.system();
    const auto psi = c.potential_psi();
    const auto mu = equilibrium_measure(sys, psi);
    const auto eig = perron_pressure(sys, psi);
    const double fe = free_energy(mu, psi);
    const bool ok = std::abs(fe - eig.pressure) <= 1e-8;
    Json states = Json::array(), rows = Json::array();
    std::ostringstream csv;
    csv << "state,stationary\n";
    for (std::size_t i = 0; i < mu.states().size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        states.push_back({{"state", to_string(mu.states()[i])}, {"stationary", mu.stationary()(ii)}});
        Json row = Json::array();
        for (Eigen::Index j = 0; j < mu.stochastic().cols(); ++j) row.push_back(mu.stochastic()(ii, j));
        rows.push_back(row);
        csv << to_string(mu.states()[i]) << ',' << num(mu.stationary()(ii)) << '\n';
    }
    RunResult r;
    r.output = Json{{"command", "equilibrium"},
                    {"system", system_json(sys)},
                    {"block", mu.block()},
                    {"states", states},
                    {"stochastic", rows},
                    {"entropy", entropy_rate(mu)},
                    {"integral_psi", integrate(psi, mu)},
                    {"free_energy", fe},
                    {"pressure", eig.pressure},
                    {"checks", {{"free_energy_equals_pressure", ok}}}};
    r.csv = csv.str();
    r.checks_passed = ok;
    if (!ok) r.failure = "free energy of the equilibrium state differs from the pressure";
    return r;
}

RunResult run_katok(const RunConfig& c) {
    const auto psi = c.potential_psi();
    const auto& mu = c.measure(get<std::string>(c, "katok", "measure", "mu1"));
    const double gamma = get<double>(c, "katok", "gamma", c.params.gamma);
    const Resolution eps(get<int>(c, "katok", "m", 0));
    const int from = get<int>(c, "katok", "n_from", 4);
    const int to = get<int>(c, "katok", "n_to", 12);
    const double max_gap = get<double>(c, "katok", "max_gap", 0.08);
    if (from < 1 || to < from) throw ConfigError("options/katok/n_to", "need 1 <= n_from <= n_to");
    const double target = free_energy(mu, psi);
    Json rows = Json::array();
    std::ostringstream csv;
    csv << "n,rate,exact,chosen\n";
    double last = 0;
    for (int n = from; n <= to; ++n) {
        const auto k = katok_partition(mu, psi, gamma, eps, n);
        rows.push_back({{"n", n}, {"value", k.value}, {"rate", k.rate}, {"exact", k.exact}, {"chosen", k.chosen}, {"cylinders", k.cylinders}});
        csv << n << ',' << num(k.rate) << ',' << (k.exact ? 1 : 0) << ',' << k.chosen << '\n';
        last = k.rate;
    }
    const bool ok = std::abs(last - target) <= max_gap;
    RunResult r;
    r.output = Json{{"command", "katok"},
                    {"gamma", gamma},
                    {"m", eps.m},
                    {"target_free_energy", target},
                    {"rows", rows},
                    {"checks", {{"final_gap_within", ok}}},
                    {"max_gap", max_gap}};
    r.csv = csv.str();
    r.checks_passed = ok;
    if (!ok) r.failure = "Katok rate at n = " + std::to_string(to) + " is farther than " + num(max_gap) + " from h + int psi";
    return r;
}

RunResult run_glue(const RunConfig& c) {
    const auto& sys = c.system();
    GluingSpec spec;
    spec.eps = Resolution(get<int>(c, "glue", "m", 0));
    const Json segs = c.option("glue", "segments", Json::array());
    if (!segs.is_array() || segs.empty()) throw ConfigError("options/glue/segments", "expected a non-empty array of words");
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (!segs[i].is_string()) throw ConfigError("options/glue/segments/" + std::to_string(i), "expected a word");
        spec.segments.push_back(parse_word(segs[i].get<std::string>()));
    }
    spec.gaps = get<std::vector<int>>(c, "glue", "gaps", std::vector<int>(spec.segments.size() - 1, 0));
    std::optional<LagFunction> lag;
    if (c.lag) lag = c.lag_function(spec.eps);
    const auto cert = glue(spec, sys, lag);
    std::ostringstream csv;
    csv << "segment,offset,length\n";
    for (std::size_t i = 0; i < spec.segments.size(); ++i)
        csv << i << ',' << cert.offsets[i] << ',' << spec.segments[i].size() << '\n';
    RunResult r;
    r.output = Json{{"command", "glue"},
                    {"m", spec.eps.m},
                    {"segments", json_words(spec.segments)},
                    {"gaps", spec.gaps},
                    {"glued", to_string(cert.glued)},
                    {"offsets", cert.offsets},
                    {"transcript", cert.transcript},
                    {"checks", {{"shadowing_verified", cert.verified}}}};
    r.csv = csv.str();
    r.checks_passed = cert.verified;
    if (!cert.verified) r.failure = "glued orbit does not shadow every segment";
    return r;
}

RunResult run_bs_dim(const RunConfig& c) {
    const auto& sys = c.system();
    const auto psi = c.psi ? *c.psi : LocallyConstantPotential::constant(sys, 1.0);
    const Resolution eps(get<int>(c, "bs-dim", "m", 0));
    const int n_max = get<int>(c, "bs-dim", "n_max", 12);
    const double tol = get<double>(c, "bs-dim", "tol", kDefaultPressureTolerance);
    const double max_width = get<double>(c, "bs-dim", "max_width", 0.05);
    const auto b = bs_dimension(CylinderSet::whole(sys), psi, eps, n_max, tol);
    const double h_top = perron_pressure(sys, LocallyConstantPotential::constant(sys, 0.0)).pressure;
    const bool ok = b.width() <= max_width;
    RunResult r;
    r.output = Json{{"command", "bs-dim"},
                    {"system", system_json(sys)},
                    {"s_lower", b.s_lower},
                    {"s_upper", b.s_upper},
                    {"width", b.width()},
                    {"finite_n_caveat", b.finite_n_caveat},
                    {"topological_entropy", h_top},
                    {"checks", {{"width_within", ok}}}};
    std::ostringstream csv;
    csv << "s_lower,s_upper,topological_entropy\n" << num(b.s_lower) << ',' << num(b.s_upper) << ',' << num(h_top) << '\n';
    r.csv = csv.str();
    r.checks_passed = ok;
    if (!ok) r.failure = "bracket wider than " + num(max_width);
    return r;
}

RunResult run_spectrum(const RunConfig& c) {
    const auto& sys = c.system();
    const auto& phi = c.potential_phi();
    const auto psi = c.potential_psi();
    std::vector<double> alphas;
    if (c.option("spectrum", "alphas", Json()).is_array()) {
        alphas = get<std::vector<double>>(c, "spectrum", "alphas", {});
    } else {
        const double lo = level_set_bracket(sys, phi, psi, -1e300).alpha_attained;
        const double hi = level_set_bracket(sys, phi, psi, 1e300).alpha_attained;
        const double from = get<double>(c, "spectrum", "from", lo);
        const double to = get<double>(c, "spectrum", "to", hi);
        const int steps = get<int>(c, "spectrum", "steps", 21);
        if (steps < 2) throw ConfigError("options/spectrum/steps", "need at least 2 points");
        for (int i = 0; i < steps; ++i) alphas.push_back(from + (to - from) * i / (steps - 1));
    }
    Json rows = Json::array();
    std::ostringstream csv;
    csv << "alpha,alpha_attained,s,lower,upper,inside\n";
    bool ok = true;
    for (double a : alphas) {
        const auto b = level_set_bracket(sys, phi, psi, a);
        ok = ok && b.lower <= b.upper + 1e-9;
        rows.push_back({{"alpha", a}, {"alpha_attained", b.alpha_attained}, {"s", b.s}, {"lower", b.lower}, {"upper", b.upper}, {"inside", b.inside}});
        csv << num(a) << ',' << num(b.alpha_attained) << ',' << num(b.s) << ',' << num(b.lower) << ',' << num(b.upper) << ','
            << (b.inside ? 1 : 0) << '\n';
    }
    RunResult r;
    r.output = Json{{"command", "spectrum"}, {"rows", rows}, {"checks", {{"brackets_ordered", ok}}}};
    r.csv = csv.str();
    r.checks_passed = ok;
    if (!ok) r.failure = "a level-set bracket has lower > upper";
    return r;
}

RunResult run_certify(const RunConfig& c) {
    std::optional<MarkovMeasure> mu2, nu;
    if (c.measures.count("mu2")) mu2 = c.measure("mu2");
    if (c.measures.count("nu")) nu = c.measure("nu");
    std::optional<LagFunction> lag;
    if (c.lag) lag = c.lag_function(c.params.quarter());
    CertifyInput in{c.system(), c.potential_phi(), c.potential_psi(), c.measure("mu1"), mu2, nu, lag, c.C, c.params, c.fault};
    const auto cert = certify(in);
    RunResult r;
    r.output = to_json(cert);
    std::ostringstream csv;
    csv << "k,t,min_avg,max_avg,target\n";
    for (const auto& l : cert.oscillation.levels)
        csv << l.k << ',' << l.t << ',' << num(l.min_avg) << ',' << num(l.max_avg) << ',' << num(l.target) << '\n';
    r.csv = csv.str();
    std::ostringstream text;
    text << "route: " << cert.route << "\n";
    for (const auto& [name, ok] : cert.checks) text << "check " << name << ": " << (ok ? "pass" : "FAIL") << "\n";
    if (cert.lower_bound) text << "lower bound: " << num(*cert.lower_bound) << "\n";
    else text << "lower bound: withheld (" << cert.failed_stage << ")\n";
    if (!cert.annotation.empty()) text << cert.annotation << "\n";
    for (const auto& cv : cert.caveats) text << "caveat: " << cv << "\n";
    text << "\ntranscript:\n";
    for (const auto& line : cert.transcript) text << "  " << line << "\n";
    r.text = text.str();
    r.checks_passed = cert.passed();
    if (!r.checks_passed) r.failure = "certificate withheld, failed stage: " + cert.failed_stage;
    return r;
}

Json good_set_json(const GoodSet& g) {
    return Json{{"k", g.k}, {"n", g.n}, {"target", g.target}, {"delta_k", g.delta_k}, {"measure", g.measure},
                {"lag_ratio", g.lag_ratio}, {"lag_ok", g.lag_ok}, {"measure_ok", g.measure_ok}};
}

Json oscillation_json(const OscillationReport& o) {
    Json lv = Json::array();
    for (const auto& l : o.levels)
        lv.push_back({{"k", l.k}, {"t", l.t}, {"target", l.target}, {"min_avg", l.min_avg}, {"max_avg", l.max_avg}, {"ok", l.ok}});
    return Json{{"levels", lv}, {"min_consecutive_gap", o.min_consecutive_gap}, {"passed", o.passed}};
}

Json separation_json(const SeparationReport& s) {
    Json j{{"passed", s.passed}, {"exhaustive", s.exhaustive}, {"pairs", s.pairs}, {"note", s.note}};
    if (s.witness) j["witness"] = {s.witness->first, s.witness->second};
    return j;
}

Json ball_json(const BallBoundReport& b) {
    return Json{{"n_from", b.n_from},           {"n_to", b.n_to},
                {"orders", b.orders},           {"balls", b.balls},
                {"violations", b.violations},   {"worst_log_ratio", finite(b.worst_ball)},
                {"worst_log_ratio_de", finite(b.worst_de)},
                {"worst_log_ratio_simplified", finite(b.worst_simple)},
                {"simplified_from_n", b.threshold_n},
                {"structural", b.structural},   {"passed", b.passed}};
}

}  // namespace

Json to_json(const HistoricCertificate& cert) {
    Json levels = Json::array();
    for (const auto& l : cert.levels) {
        Json gs = Json::array();
        for (const auto& g : l.good_sets) gs.push_back(good_set_json(g));
        levels.push_back({{"k", l.k},
                          {"n", l.n},
                          {"lag", l.lag},
                          {"N", l.N},
                          {"t", l.t},
                          {"family_size", l.family_size},
                          {"log_M", l.log_M},
                          {"required_log_M", l.required_log_M},
                          {"target", l.target},
                          {"delta_k", l.delta_k},
                          {"composite", l.composite},
                          {"family_ok", l.family_ok},
                          {"good_sets", gs}});
    }
    Json slack = Json::array();
    for (const auto& s : cert.schedule.slack)
        slack.push_back({{"k", s.k}, {"ratio_next", s.ratio_next}, {"bound_next", s.bound_next},
                         {"ratio_prev", s.ratio_prev}, {"bound_prev", s.bound_prev}});
    Json checks = Json::object();
    for (const auto& [name, ok] : cert.checks) checks[name] = ok;
    Json j{{"command", "certify"},
           {"route", cert.route},
           {"passed", cert.passed()},
           {"failed_stage", cert.failed_stage},
           {"lower_bound", cert.lower_bound ? Json(*cert.lower_bound) : Json()},
           {"relaxed_bound", cert.relaxed_bound ? Json(*cert.relaxed_bound) : Json()},
           {"C", cert.C},
           {"C_variational", cert.C_variational},
           {"var_psi", cert.var_psi},
           {"var_phi", cert.var_phi},
           {"integral_1", cert.integral_1},
           {"integral_2", cert.integral_2},
           {"free_energy_1", cert.free_energy_1},
           {"free_energy_2", cert.free_energy_2},
           {"rate", cert.rate},
           {"implied_K", finite(cert.implied_K)},
           {"hypotheses_ok", cert.hypotheses_ok},
           {"achieved_depth", cert.achieved_depth},
           {"checks", checks},
           {"levels", levels},
           {"schedule", {{"N", cert.schedule.N}, {"t", cert.schedule.t}, {"depth", cert.schedule.depth},
                         {"truncated", cert.schedule.truncated}, {"slack", slack}}},
           {"oscillation", oscillation_json(cert.oscillation)},
           {"oscillation_sampled", oscillation_json(cert.oscillation_sampled)},
           {"separation", separation_json(cert.separation)},
           {"separation_sampled", separation_json(cert.separation_sampled)},
           {"ball_sweep", ball_json(cert.ball_sweep)},
           {"ball_explicit", cert.ball_explicit ? ball_json(*cert.ball_explicit) : Json()},
           {"equality_annotation", cert.equality_annotation},
           {"annotation", cert.annotation},
           {"caveats", cert.caveats},
           {"transcript", cert.transcript}};
    return j;
}

RunResult run(const std::string& command, const RunConfig& config) {
    RunResult r;
    if (command == "pressure") r = run_pressure(config);
    else if (command == "equilibrium") r = run_equilibrium(config);
    else if (command == "katok") r = run_katok(config);
    else if (command == "glue") r = run_glue(config);
    else if (command == "bs-dim") r = run_bs_dim(config);
    else if (command == "certify") r = run_certify(config);
    else if (command == "spectrum") r = run_spectrum(config);
    else throw ConfigError("command", "unknown command \"" + command + "\"");
    r.command = command;
    return r;
}

WrittenFiles write_artifacts(const RunResult& result, const fs::path& dir, bool json_only) {
    fs::create_directories(dir);
    WrittenFiles f;
    auto write = [](const fs::path& p, const std::string& body) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw ConfigError("output", "cannot write " + p.string());
        out << body;
    };
    f.json = dir / (result.command + ".json");
    write(f.json, result.output.dump(2) + "\n");
    if (!json_only) {
        f.csv = dir / (result.command + ".csv");
        write(f.csv, result.csv);
        if (!result.text.empty()) {
            f.text = dir / (result.command + ".txt");
            write(f.text, result.text);
        }
    }
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    f.sidecar = dir / (result.command + ".meta.json");
    write(f.sidecar, Json{{"command", result.command}, {"unix_time", secs}, {"passed", result.checks_passed}}.dump(2) + "\n");
    return f;
}

int execute(const std::string& command, const fs::path& config_path, const Overrides& ov, std::ostream& out,
            std::ostream& err) {
    try {
        RunConfig cfg = load_config(config_path);
        const std::string cmd = command.empty() ? cfg.command : command;
        if (cmd.empty()) throw ConfigError("command", "no command given on the command line or in the config");
        if (ov.depth) cfg.params.depth = *ov.depth;
        if (ov.atom_cap) cfg.params.atom_cap = *ov.atom_cap;
        if (ov.seedless) cfg.params.seedless = true;
        if (ov.out_dir) cfg.out_dir = *ov.out_dir;
        cfg.params.validate();
        const RunResult r = run(cmd, cfg);
        const WrittenFiles files = write_artifacts(r, cfg.out_dir, ov.json_only);
        out << cmd << ": " << (r.checks_passed ? "all checks passed" : "check failed") << ", wrote " << files.json.string()
            << "\n";
        if (!r.checks_passed) {
            err << "error: " << r.failure << "\n";
            err << "transcript: " << (files.text.empty() ? files.json : files.text).string() << "\n";
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        err << "precondition failed: " << e.what() << "\n";
        return 2;
    } catch (const EnumerationCapError& e) {
        err << "resource cap: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace historic::cli
