#include <doctest.h>

#include <fstream>

#include "rdlab/config.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/orchestrator.hpp"
#include "rdlab/presets.hpp"

using namespace rdlab;

namespace {

const char* MINIMAL = R"(
[environment]
kind = iid
marginal = 1.0
seed = 1

[system]
family = circle
k_base = 2
state0.eps = 0
state0.shape = none

[potential]
kind = neg_log_deriv

[observable]
kind = cos

[path]
offset = 0
length = 300
seed = 2

[discretization]
scheme = ulam
resolution = 32

[analysis]
run = rpf
burn_in = 32
tol = 1e-8

[output]
dir = /tmp/rdlab-test/minimal
)";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config parser reports line numbers") {
    try {
        parse_config("[env]\nfoo\n");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("key = 1\n"), ConfigError);   // key outside a section
    CHECK_THROWS_AS(parse_config("[broken\n"), ConfigError);
    Config c = parse_config("[a]\nx = 1 2 3 # trailing comment\n");
    CHECK(c.get_doubles("a", "x").size() == 3);
}

TEST_CASE("missing sections fail before any work is done") {
    Config c = parse_config(MINIMAL);
    c.sections.erase("system");
    RunOptions opt;
    opt.write_files = false;
    CHECK_THROWS_AS(run_experiment(c, opt), ConfigError);
}

TEST_CASE("unknown analysis keywords are config errors") {
    Config c = parse_config(MINIMAL);
    c.sections["analysis"]["run"] = "rpf plot";
    RunOptions opt;
    opt.write_files = false;
    CHECK_THROWS_AS(run_experiment(c, opt), ConfigError);
}

TEST_CASE("empty analysis list is a valid no-op run") {
    Config c = parse_config(MINIMAL);
    c.sections["analysis"]["run"] = "";
    RunOptions opt;
    opt.write_files = false;
    RunReport rep = run_experiment(c, opt);
    CHECK(rep.all_pass());
    CHECK(rep.assertions.empty());
}

TEST_CASE("runs are bit-reproducible and the echo round-trips") {
    Config c = parse_config(MINIMAL);
    RunOptions opt;
    opt.write_files = false;
    RunReport a = run_experiment(c, opt);
    RunReport b = run_experiment(c, opt);
    CHECK(a.stable_hash() == b.stable_hash());

    RunReport c2 = run_experiment(parse_config(a.config_text), opt);
    CHECK(c2.stable_hash() == a.stable_hash());

    RunOptions opt2 = opt;
    opt2.seed_override = 77;
    RunReport d = run_experiment(c, opt2);
    CHECK(d.config_hash != a.config_hash);
}

TEST_CASE("preset catalog") {
    CHECK(presets().size() >= 5);
    bool has_doubling = false;
    for (const auto& p : presets()) {
        CHECK(!p.description.empty());
        if (p.name == "uniform-doubling") has_doubling = true;
    }
    CHECK(has_doubling);
    CHECK(find_preset("uniform-doubling") != nullptr);
    CHECK(find_preset("nope") == nullptr);
}

TEST_CASE("every preset runs end-to-end under its default tolerances") {
    for (const auto& p : presets()) {
        CAPTURE(p.name);
        Config cfg = parse_config(p.config);
        RunOptions opt;
        opt.write_files = true;
        opt.out_dir_override = "/tmp/rdlab-test/" + p.name;
        RunReport rep = run_experiment(cfg, opt);
        for (const auto& a : rep.assertions) {
            CAPTURE(a.name);
            CAPTURE(a.measured);
            CHECK(a.pass);
        }
    }
}

TEST_CASE("clt preset emits one ks row per grid entry") {
    const Preset* p = find_preset("perturbed-circle");
    REQUIRE(p != nullptr);
    Config cfg = parse_config(p->config);
    auto grid = cfg.get_longs("analysis", "clt.n_grid");
    RunOptions opt;
    opt.out_dir_override = "/tmp/rdlab-test/ks-rows";
    RunReport rep = run_experiment(cfg, opt);
    std::ifstream f("/tmp/rdlab-test/ks-rows/ks_table.csv");
    REQUIRE(f.good());
    std::string line;
    long rows = -1;  // header
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == long(grid.size()));
}

TEST_SUITE_END();
