#include "runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace burgers::lab;

    CLI::App app{"Stochastic Burgers control lab"};
    app.require_subcommand(1, 1);

    RunOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    for (const char* name : {"simulate", "hjb", "verify", "diagnose"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "TOML experiment file")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--workers", opts.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output root directory");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    CLI::App* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--out")) opts.out = out;

    const RunResult r = run(opts, std::cerr);
    if (!r.directory.empty()) {
        std::cout << r.directory.string() << '\n';
        if (r.report.contains("checks")) {
            for (const auto& ch : r.report["checks"]) {
                const bool skipped = ch.value("skipped", false);
                std::cout << (skipped ? "SKIP" : ch["pass"].get<bool>() ? "PASS" : "FAIL") << "  "
                          << ch["name"].get<std::string>() << '\n';
            }
        }
        if (r.report.contains("error")) {
            std::cerr << "divergence: " << r.report["error"]["message"].get<std::string>() << '\n';
        }
    }
    return r.exit_code;
}
