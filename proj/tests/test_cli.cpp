#include <fstream>
#include <sstream>

#include "doctest.h"
#include "historic/cli.hpp"

using namespace historic;
using namespace historic::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("historic_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const Json& doc) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << doc.dump(2);
    return p;
}

Json desk() {
    return Json::parse(R"({
      "system": {"preset": "full_shift", "symbols": 2},
      "potentials": {"phi": {"indicator": 1}, "psi": 0},
      "measures": {"mu1": {"bernoulli": [0.25, 0.75]}, "mu2": {"bernoulli": [0.75, 0.25]}},
      "params": {"gamma": 0.14, "delta": 0.1, "m": 2, "depth": 3, "theta1_scale": 2.0, "family_mode": "minimal"}
    })");
}

std::string field_of(const Json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST_CASE("config errors name the offending field") {
    auto bad_row = Json::parse(R"({"system": {"alphabet": 3, "transition": [[1,1,0],[1,0],[0,1,1]]}})");
    CHECK(field_of(bad_row) == "system/transition/1");
    try {
        parse_config(bad_row);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
    CHECK(field_of(Json::parse(R"({"system": {"alphabet": 2, "transition": [[1,2],[1,1]]}})")) == "system/transition/0/1");
    CHECK(field_of(Json::parse(R"({"system": {"preset": "tent"}})")) == "system/preset");
    auto d = desk();
    d["params"]["gamma"] = "big";
    CHECK(field_of(d) == "params/gamma");
    d = desk();
    d["params"]["warp"] = 1;
    CHECK(field_of(d) == "params/warp");
    d = desk();
    d["params"]["delta_seq"] = {0.05, 0.06};
    CHECK(field_of(d) == "params/delta_seq/1");
    d = desk();
    d["measures"]["mu1"] = {{"bernoulli", {0.5, 0.6}}};
    CHECK(field_of(d) == "measures/mu1");
    d = desk();
    d["potentials"]["phi"] = {{"range", 2}, {"table", {{"00", 1.0}}}};
    CHECK(field_of(d) == "potentials/phi/table");
    CHECK(field_of(Json::parse(R"({"sytem": {}})")) == "sytem");
    CHECK(field_of(desk()).empty());
}

TEST_CASE("config parsing builds the objects") {
    auto c = parse_config(desk());
    CHECK(c.system().alphabet_size() == 2);
    CHECK(c.params.eps.m == 2);
    CHECK(c.params.family_mode == FamilyMode::minimal);
    CHECK(integrate(c.potential_phi(), c.measure("mu1")) == doctest::Approx(0.75));
    CHECK(c.potential_psi().sup_norm() == 0.0);
    CHECK_THROWS_AS(c.measure("nu"), ConfigError);
    CHECK(c.lag_function(Resolution(4)).kind() == LagFunction::Kind::constant);
}

TEST_CASE("pressure command on the full 2-shift") {
    auto c = parse_config(Json::parse(R"({"system": {"preset": "full_shift", "symbols": 2}, "options": {"pressure": {"n_max": 10}}})"));
    auto r = run("pressure", c);
    CHECK(r.checks_passed);
    const double p = r.output["perron"]["pressure"].get<double>();
    CHECK(std::abs(p - 0.693147) <= 1e-6);
    CHECK(r.output["bracket"]["t_lower"].get<double>() <= p);
    CHECK(r.output["bracket"]["t_upper"].get<double>() >= p);
    CHECK(r.csv.rfind("n,t,uniform,mixed\n", 0) == 0);
}

TEST_CASE("glue, bs-dim, katok, spectrum and equilibrium commands") {
    auto g = parse_config(Json::parse(
        R"({"system": {"preset": "full_shift", "symbols": 2}, "options": {"glue": {"segments": ["000", "111"], "gaps": [0]}}})"));
    auto gr = run("glue", g);
    CHECK(gr.checks_passed);
    CHECK(gr.output["glued"].get<std::string>() == "000111");

    auto b = parse_config(Json::parse(R"({"system": {"preset": "golden_mean"}, "potentials": {"psi": 1}, "options": {"bs-dim": {"n_max": 12}}})"));
    auto br = run("bs-dim", b);
    const double phi_gold = std::log((1 + std::sqrt(5.0)) / 2);
    CHECK(br.output["s_lower"].get<double>() <= phi_gold);
    CHECK(br.output["s_upper"].get<double>() >= phi_gold);

    auto k = parse_config(Json::parse(R"({"system": {"preset": "full_shift", "symbols": 2},
        "measures": {"mu1": {"bernoulli": [0.5, 0.5]}}, "options": {"katok": {"gamma": 0.3, "n_to": 10}}})"));
    auto kr = run("katok", k);
    CHECK(kr.checks_passed);
    CHECK(kr.output["rows"].size() == 7u);

    auto s = parse_config(Json::parse(R"({"system": {"preset": "full_shift", "symbols": 2}, "potentials": {"phi": {"indicator": 1}},
        "options": {"spectrum": {"alphas": [0.5]}}})"));
    auto sr = run("spectrum", s);
    CHECK(sr.output["rows"][0]["lower"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-8));

    auto e = parse_config(Json::parse(R"({"system": {"preset": "golden_mean"}})"));
    auto er = run("equilibrium", e);
    CHECK(er.checks_passed);
    CHECK(er.output["entropy"].get<double>() == doctest::Approx(phi_gold).epsilon(1e-9));
    CHECK_THROWS_AS(run("plot", e), ConfigError);
}

TEST_CASE("execute maps outcomes to exit codes and writes deterministic files") {
    const auto dir = scratch("exec");
    std::ostringstream out, err;
    const auto bad = write_config(dir, Json::parse(R"({"system": {"alphabet": 2, "transition": [[1,1]]}})"));
    CHECK(execute("pressure", bad, {}, out, err) == 2);
    CHECK(err.str().find("system/transition") != std::string::npos);

    const auto cfg = write_config(dir, desk());
    Overrides ov;
    ov.out_dir = dir / "run1";
    CHECK(execute("certify", cfg, ov, out, err) == 0);
    ov.out_dir = dir / "run2";
    CHECK(execute("certify", cfg, ov, out, err) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "run1" / "certify.json") == slurp(dir / "run2" / "certify.json"));
    CHECK(slurp(dir / "run1" / "certify.csv") == slurp(dir / "run2" / "certify.csv"));
    CHECK(fs::exists(dir / "run1" / "certify.meta.json"));
    const auto cert = Json::parse(slurp(dir / "run1" / "certify.json"));
    for (const auto& [name, ok] : cert["checks"].items()) CHECK_MESSAGE(ok.get<bool>(), name);
    CHECK(cert["var_psi"].get<double>() == 0.0);

    auto faulty = desk();
    faulty["fault"] = {{"duplicate_word_level", 2}};
    const auto fcfg = write_config(dir, faulty);
    ov.out_dir = dir / "fault";
    ov.json_only = true;
    std::ostringstream ferr;
    CHECK(execute("certify", fcfg, ov, out, ferr) == 3);
    CHECK(ferr.str().find("transcript:") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "fault" / "certify.csv"));
    const auto fc = Json::parse(slurp(dir / "fault" / "certify.json"));
    CHECK(fc["lower_bound"].is_null());
    CHECK(fc["failed_stage"].get<std::string>() == "separation");
    CHECK(execute("", cfg, ov, out, err) == 2);
}
