#include <fstream>

#include "historic/cli.hpp"

namespace historic::cli {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "/" + key; }

// The message of a ConfigError without its "field: " prefix.
std::string bare(const ConfigError& e) {
    const std::string w = e.what();
    return e.field().empty() ? w : w.substr(e.field().size() + 2);
}

Json read_json(const fs::path& file, const std::string& field) {
    std::ifstream in(file);
    if (!in) throw ConfigError(field, "cannot open " + file.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(field, file.string() + ": " + e.what());
    }
}

// A string value names a JSON file holding the object itself.
Json resolve(const Json& j, const fs::path& base, const std::string& field) {
    if (j.is_string()) return read_json(base / j.get<std::string>(), field);
    return j;
}

double number(const Json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    return j.get<double>();
}

long long integer(const Json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
    return j.get<long long>();
}

bool boolean(const Json& j, const std::string& field) {
    if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
    return j.get<bool>();
}

const Json& member(const Json& j, const std::string& key, const std::string& field) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(join(field, key), "missing");
    return j.at(key);
}

std::vector<double> numbers(const Json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], join(field, std::to_string(i))));
    return v;
}

Eigen::MatrixXd matrix(const Json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const std::string rf = join(field, std::to_string(i));
        auto row = numbers(j[static_cast<std::size_t>(i)], rf);
        if (static_cast<Eigen::Index>(row.size()) != rows)
            throw ConfigError(rf, "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries, expected " +
                                      std::to_string(rows));
        for (Eigen::Index c = 0; c < rows; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

SymbolicSystem parse_system(const Json& raw, const fs::path& base) {
    const std::string field = "system";
    const Json j = resolve(raw, base, field);
    if (!j.is_object()) throw ConfigError(field, "expected an object or a file name");
    if (j.contains("preset")) {
        const std::string p = j.at("preset").is_string() ? j.at("preset").get<std::string>() : "";
        if (p == "full_shift")
            return SymbolicSystem::full_shift(static_cast<int>(integer(member(j, "symbols", field), join(field, "symbols"))));
        if (p == "golden_mean") return SymbolicSystem::golden_mean();
        throw ConfigError(join(field, "preset"), "expected \"full_shift\" or \"golden_mean\"");
    }
    const int k = static_cast<int>(integer(member(j, "alphabet", field), join(field, "alphabet")));
    const Json& t = member(j, "transition", field);
    const std::string tf = join(field, "transition");
    if (!t.is_array()) throw ConfigError(tf, "expected an array of rows");
    std::vector<std::vector<int>> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string rf = join(tf, std::to_string(i));
        if (!t[i].is_array()) throw ConfigError(rf, "row " + std::to_string(i) + " is not an array");
        std::vector<int> row;
        for (std::size_t c = 0; c < t[i].size(); ++c) {
            if (!t[i][c].is_number_integer())
                throw ConfigError(join(rf, std::to_string(c)), "row " + std::to_string(i) + " entry must be 0 or 1");
            row.push_back(t[i][c].get<int>());
        }
        rows.push_back(std::move(row));
    }
    const std::string label = j.contains("label") && j.at("label").is_string() ? j.at("label").get<std::string>() : "config";
    try {
        return SymbolicSystem(k, std::move(rows), label);
    } catch (const ConfigError& e) {
        throw ConfigError(join(field, e.field()), bare(e));
    }
}

LocallyConstantPotential parse_potential(const SymbolicSystem& sys, const Json& raw, const fs::path& base,
                                         const std::string& field) {
    if (raw.is_number()) return LocallyConstantPotential::constant(sys, raw.get<double>());
    const Json j = resolve(raw, base, field);
    if (!j.is_object()) throw ConfigError(field, "expected a number, an object or a file name");
    if (j.contains("constant")) return LocallyConstantPotential::constant(sys, number(j.at("constant"), join(field, "constant")));
    if (j.contains("indicator")) {
        const auto sym = integer(j.at("indicator"), join(field, "indicator"));
        if (sym < 0 || sym >= sys.alphabet_size()) throw ConfigError(join(field, "indicator"), "symbol out of range");
        const double scale = j.contains("scale") ? number(j.at("scale"), join(field, "scale")) : 1.0;
        return LocallyConstantPotential::indicator(sys, static_cast<int>(sym), scale);
    }
    const int r = static_cast<int>(integer(member(j, "range", field), join(field, "range")));
    const Json& t = member(j, "table", field);
    if (!t.is_object()) throw ConfigError(join(field, "table"), "expected an object keyed by words");
    std::map<std::string, double> table;
    for (const auto& [key, v] : t.items()) table[key] = number(v, join(join(field, "table"), key));
    try {
        return LocallyConstantPotential(sys, r, table);
    } catch (const Error& e) {
        throw ConfigError(join(field, "table"), e.what());
    }
}

MarkovMeasure parse_measure(const SymbolicSystem& sys, const Json& raw, const fs::path& base, const std::string& field) {
    const Json j = resolve(raw, base, field);
    if (!j.is_object()) throw ConfigError(field, "expected an object or a file name");
    try {
        if (j.contains("bernoulli")) return MarkovMeasure::bernoulli(sys, numbers(j.at("bernoulli"), join(field, "bernoulli")));
        if (j.contains("equilibrium"))
            return equilibrium_measure(sys, parse_potential(sys, j.at("equilibrium"), base, join(field, "equilibrium")));
        if (j.contains("markov")) {
            const Json& mk = j.at("markov");
            const std::string mf = join(field, "markov");
            const int block = mk.contains("block") ? static_cast<int>(integer(mk.at("block"), join(mf, "block"))) : 1;
            return MarkovMeasure(sys, block, matrix(member(mk, "matrix", mf), join(mf, "matrix")));
        }
    } catch (const ConfigError& e) {
        if (e.field().rfind(field, 0) == 0) throw;
        throw ConfigError(field, e.what());
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
    throw ConfigError(field, "expected one of bernoulli, equilibrium, markov");
}

void parse_params(const Json& j, RunConfig& c) {
    const std::string field = "params";
    if (!j.is_object()) throw ConfigError(field, "expected an object");
    auto& p = c.params;
    for (const auto& [key, v] : j.items()) {
        const std::string f = join(field, key);
        if (key == "gamma") p.gamma = number(v, f);
        else if (key == "delta") p.delta = number(v, f);
        else if (key == "m") p.eps = Resolution(static_cast<int>(integer(v, f)));
        else if (key == "delta_seq") p.delta_seq = numbers(v, f);
        else if (key == "l_seq") {
            p.l_seq.clear();
            for (double x : numbers(v, f)) p.l_seq.push_back(static_cast<int>(x));
        } else if (key == "depth") p.depth = static_cast<int>(integer(v, f));
        else if (key == "theta1_scale") p.theta1_scale = number(v, f);
        else if (key == "theta2_scale") p.theta2_scale = number(v, f);
        else if (key == "n_schedule") {
            p.n_schedule.clear();
            for (double x : numbers(v, f)) p.n_schedule.push_back(static_cast<long long>(x));
        } else if (key == "n_cap") p.n_cap = static_cast<int>(integer(v, f));
        else if (key == "family_cap") p.family_cap = static_cast<std::uint64_t>(integer(v, f));
        else if (key == "family_mode") {
            const std::string mode = v.is_string() ? v.get<std::string>() : "";
            if (mode == "minimal") p.family_mode = FamilyMode::minimal;
            else if (mode == "maximal") p.family_mode = FamilyMode::maximal;
            else throw ConfigError(f, "expected \"minimal\" or \"maximal\"");
        } else if (key == "family_band") p.family_band = number(v, f);
        else if (key == "atom_cap") p.atom_cap = static_cast<std::uint64_t>(integer(v, f));
        else if (key == "symbol_cap") p.symbol_cap = static_cast<std::uint64_t>(integer(v, f));
        else if (key == "t_cap") p.t_cap = integer(v, f);
        else if (key == "full_sweep_limit") p.full_sweep_limit = integer(v, f);
        else if (key == "sampled_sweep_points") p.sampled_sweep_points = static_cast<int>(integer(v, f));
        else if (key == "composite_weight") p.composite_weight = number(v, f);
        else if (key == "seedless") p.seedless = boolean(v, f);
        else if (key == "C") c.C = number(v, f);
        else throw ConfigError(f, "unknown parameter");
    }
    if (p.eps.m < 0) throw ConfigError(join(field, "m"), "must be >= 0");
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(join(field, e.field().substr(e.field().find('/') + 1)), bare(e));
    }
}

}  // namespace

const SymbolicSystem& RunConfig::system() const {
    if (!sys) throw ConfigError("system", "missing");
    return *sys;
}

const LocallyConstantPotential& RunConfig::potential_phi() const {
    if (!phi) throw ConfigError("potentials/phi", "missing");
    return *phi;
}

LocallyConstantPotential RunConfig::potential_psi() const {
    return psi ? *psi : LocallyConstantPotential::constant(system(), 0.0);
}

const MarkovMeasure& RunConfig::measure(const std::string& name) const {
    auto it = measures.find(name);
    if (it == measures.end()) throw ConfigError("measures/" + name, "missing");
    return it->second;
}

LagFunction RunConfig::lag_function(const Resolution& eps) const {
    if (!lag || (lag->is_string() && lag->get<std::string>() == "mixing")) return mixing_lag(system(), eps);
    const Json& j = *lag;
    if (j.is_object() && j.contains("constant")) {
        const auto p = integer(j.at("constant"), "lag/constant");
        if (p < 0) throw ConfigError("lag/constant", "must be >= 0");
        return LagFunction::constant(static_cast<int>(p), eps);
    }
    if (j.is_object() && j.contains("table")) {
        std::vector<int> by_n;
        for (double x : numbers(j.at("table"), "lag/table")) by_n.push_back(static_cast<int>(x));
        std::map<int, std::vector<int>> by_class;
        if (j.contains("by_class")) {
            if (!j.at("by_class").is_object()) throw ConfigError("lag/by_class", "expected an object keyed by symbol");
            for (const auto& [key, v] : j.at("by_class").items()) {
                std::vector<int> row;
                for (double x : numbers(v, "lag/by_class/" + key)) row.push_back(static_cast<int>(x));
                by_class[std::stoi(key)] = std::move(row);
            }
        }
        return LagFunction::table(std::move(by_n), eps, std::move(by_class));
    }
    throw ConfigError("lag", "expected \"mixing\", {\"constant\": p} or {\"table\": [...]}");
}

Json RunConfig::option(const std::string& cmd, const std::string& key, const Json& fallback) const {
    if (options.contains(cmd) && options.at(cmd).is_object() && options.at(cmd).contains(key)) return options.at(cmd).at(key);
    return fallback;
}

RunConfig parse_config(const Json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    RunConfig c;
    c.base_dir = base_dir;
    for (const auto& [key, v] : doc.items()) {
        static const std::vector<std::string> known{"command", "system", "potentials", "measures", "lag",
                                                    "params", "fault", "options", "output"};
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown section");
    }
    if (doc.contains("command")) {
        if (!doc.at("command").is_string()) throw ConfigError("command", "expected a string");
        c.command = doc.at("command").get<std::string>();
    }
    if (doc.contains("output")) {
        if (!doc.at("output").is_string()) throw ConfigError("output", "expected a directory name");
        c.out_dir = base_dir / doc.at("output").get<std::string>();
    }
    if (doc.contains("system")) c.sys = parse_system(doc.at("system"), base_dir);
    if (doc.contains("potentials")) {
        const Json& p = doc.at("potentials");
        if (!p.is_object()) throw ConfigError("potentials", "expected an object with phi and psi");
        for (const auto& [key, v] : p.items()) {
            if (key != "phi" && key != "psi") throw ConfigError("potentials/" + key, "expected phi or psi");
            auto pot = parse_potential(c.system(), v, base_dir, "potentials/" + key);
            (key == "phi" ? c.phi : c.psi) = std::move(pot);
        }
    }
    if (doc.contains("measures")) {
        const Json& m = doc.at("measures");
        if (!m.is_object()) throw ConfigError("measures", "expected an object of named measures");
        for (const auto& [key, v] : m.items()) c.measures.emplace(key, parse_measure(c.system(), v, base_dir, "measures/" + key));
    }
    if (doc.contains("lag")) c.lag = doc.at("lag");
    if (doc.contains("params")) parse_params(doc.at("params"), c);
    if (doc.contains("fault")) {
        const Json& f = doc.at("fault");
        c.fault.duplicate_word_level =
            static_cast<int>(integer(member(f, "duplicate_word_level", "fault"), "fault/duplicate_word_level"));
    }
    if (doc.contains("options")) {
        if (!doc.at("options").is_object()) throw ConfigError("options", "expected an object keyed by command");
        c.options = doc.at("options");
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    const Json doc = read_json(path, "config");
    return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

}  // namespace historic::cli
