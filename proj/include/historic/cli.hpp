#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "historic/moran.hpp"
#include "json.hpp"

namespace historic::cli {

using Json = nlohmann::ordered_json;

// Parsed configuration. Relative file references resolve against the config's directory.
struct RunConfig {
    std::filesystem::path base_dir;
    std::optional<SymbolicSystem> sys;
    std::optional<LocallyConstantPotential> phi;
    std::optional<LocallyConstantPotential> psi;
    std::map<std::string, MarkovMeasure> measures;
    std::optional<Json> lag;  // built per resolution
    ConstructionParams params;
    std::optional<double> C;
    FaultInjection fault;
    Json options = Json::object();
    std::string command;
    std::filesystem::path out_dir = "out";

    const SymbolicSystem& system() const;
    const LocallyConstantPotential& potential_phi() const;
    // psi defaults to 0.
    LocallyConstantPotential potential_psi() const;
    const MarkovMeasure& measure(const std::string& name) const;
    LagFunction lag_function(const Resolution& eps) const;
    Json option(const std::string& command, const std::string& key, const Json& fallback) const;
};

// Errors carry the JSON path of the offending field, e.g. "system/transition/1".
RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

struct Overrides {
    std::optional<int> depth;
    std::optional<std::size_t> atom_cap;
    bool seedless = false;
    bool json_only = false;
    std::optional<std::filesystem::path> out_dir;
};

struct RunResult {
    std::string command;
    Json output;
    std::string csv;
    std::string text;  // human-readable summary; empty when the command has none
    bool checks_passed = true;
    std::string failure;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> all{"pressure", "equilibrium", "katok", "glue", "bs-dim", "certify", "spectrum"};
    return all;
}

RunResult run(const std::string& command, const RunConfig& config);

struct WrittenFiles {
    std::filesystem::path json, csv, text, sidecar;
};

// The timestamp lives only in the sidecar so the other files are byte-identical across runs.
WrittenFiles write_artifacts(const RunResult& result, const std::filesystem::path& dir, bool json_only);

// Load, run and write; returns the process exit status (0 ok, 2 config or precondition, 3 failed check).
int execute(const std::string& command, const std::filesystem::path& config_path, const Overrides& overrides,
            std::ostream& out, std::ostream& err);

Json to_json(const HistoricCertificate& cert);

}  // namespace historic::cli
