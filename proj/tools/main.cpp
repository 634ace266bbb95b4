#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "rdlab/config.hpp"
#include "rdlab/errors.hpp"
#include "rdlab/orchestrator.hpp"
#include "rdlab/presets.hpp"

int main(int argc, char** argv) {
    CLI::App app{"transfer-operator cocycle laboratory"};
    app.require_subcommand(1);

    std::string target;
    rdlab::RunOptions opt;
    long seed_override = -1;

    CLI::App* run = app.add_subcommand("run", "run an experiment config or preset");
    run->add_option("config", target, "config file path or preset name")->required();
    run->add_option("--seed-override", seed_override, "replace the environment seed");
    run->add_option("--out-dir", opt.out_dir_override, "output directory");
    run->add_option("--threads", opt.threads, "worker threads (default: RDLAB_THREADS or hardware)");

    CLI::App* lp = app.add_subcommand("list-presets", "list built-in experiment presets");

    CLI11_PARSE(app, argc, argv);

    if (lp->parsed()) {
        for (const auto& p : rdlab::presets())
            std::printf("%-18s %s\n", p.name.c_str(), p.description.c_str());
        return 0;
    }

    try {
        rdlab::Config cfg;
        if (const rdlab::Preset* p = rdlab::find_preset(target)) {
            cfg = rdlab::parse_config(p->config);
        } else if (std::filesystem::exists(target)) {
            cfg = rdlab::load_config_file(target);
        } else {
            std::fprintf(stderr, "error: '%s' is neither a preset nor a config file\n",
                         target.c_str());
            return 2;
        }
        if (seed_override >= 0) opt.seed_override = std::uint64_t(seed_override);
        rdlab::RunReport rep = rdlab::run_experiment(cfg, opt);
        for (const auto& a : rep.assertions)
            std::printf("[%s] %s: measured=%.6g bound=%.6g%s\n", a.pass ? "PASS" : "FAIL",
                        a.name.c_str(), a.measured, a.bound,
                        a.note.empty() ? "" : (" (" + a.note + ")").c_str());
        std::printf("report hash 0x%016llx, wall time %.0f ms\n",
                    static_cast<unsigned long long>(rep.stable_hash()), rep.wall_time_ms);
        return rep.all_pass() ? 0 : 1;
    } catch (const rdlab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
