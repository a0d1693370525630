#include <exception>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nmrl/cli.hpp"
#include "nmrl/common.hpp"
#include "nmrl/kernels.hpp"

int main(int argc, char** argv) {
    CLI::App app{"neuromodulated meta-RL experiments"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, spn_path, npn_path;
    std::size_t steps = 4, tasks = 20, workers = 4;
    std::optional<std::uint64_t> seed;

    CLI::App* train = app.add_subcommand("train", "meta-train from a config file");
    train->add_option("--config", config_path, "run config (INI)")->required();
    train->add_option("--workers", workers, "rollout threads, never affects results (default 4)");

    CLI::App* test = app.add_subcommand("test", "meta-test a checkpoint");
    test->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    test->add_option("--steps", steps, "inner gradient steps (default 4)");
    test->add_option("--tasks", tasks, "number of fresh tasks (default 20)");
    test->add_option("--seed", seed, "override the checkpoint's seed");

    CLI::App* analyze = app.add_subcommand("analyze", "CKA similarity tables for a checkpoint");
    analyze->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

    CLI::App* compare =
        app.add_subcommand("compare", "SPN vs NPN vs parameter-matched SPN (trains missing runs)");
    compare->add_option("--spn", spn_path, "standard-policy run config")->required();
    compare->add_option("--npn", npn_path, "neuromodulated-policy run config")->required();
    compare->add_option("--workers", workers, "rollout threads, never affects results (default 4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad invocation is a config error
    }

    try {
        if (train->parsed()) return nmrl::cmd_train(config_path, workers);
        if (test->parsed()) return nmrl::cmd_test(checkpoint_path, steps, tasks, seed);
        if (analyze->parsed()) return nmrl::cmd_analyze(checkpoint_path);
        return nmrl::cmd_compare(spn_path, npn_path, workers);
    } catch (const nmrl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nmrl::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
