#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "historic/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Pressure, gluing and historic-set certificates on subshifts of finite type"};
    app.require_subcommand(1);
    std::string config;
    std::string out;
    int depth = 0;
    std::size_t atom_cap = 0;
    historic::cli::Overrides ov;
    const std::map<std::string, std::string> about{
        {"pressure", "topological pressure by three routes, with a Caratheodory bracket"},
        {"equilibrium", "equilibrium state of a potential"},
        {"katok", "Katok entropy of a Markov measure against its growth rate"},
        {"glue", "glue orbit segments with the specification property"},
        {"bs-dim", "Bowen root bracket for a positive potential"},
        {"certify", "build the Moran fractal and certify the historic-set lower bound"},
        {"spectrum", "Legendre brackets for level sets of Birkhoff averages"}};
    for (const auto& name : historic::cli::commands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (default: the config's \"output\", else ./out)");
        sub->add_option("--depth", depth, "construction depth for certify")->check(CLI::PositiveNumber);
        sub->add_option("--atom-cap", atom_cap, "largest number of materialized atoms")->check(CLI::PositiveNumber);
        sub->add_flag("--seedless", ov.seedless, "forbid sampled materialization; fail instead");
        sub->add_flag("--json-only", ov.json_only, "skip CSV and text outputs");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 maps usage errors to 106 and friends; the tool reports them as config errors.
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    if (depth > 0) ov.depth = depth;
    if (atom_cap > 0) ov.atom_cap = atom_cap;
    if (!out.empty()) ov.out_dir = out;
    return historic::cli::execute(command, config, ov, std::cout, std::cerr);
}
