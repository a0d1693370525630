#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace nmrl {

// Subcommand bodies; each returns a process exit code (0 = success) and
// throws ConfigError (exit 2) or NumericalError (exit 3) through to main.
// `workers` is rollout parallelism; it never affects results.
int cmd_train(const std::string& config_path, std::size_t workers = 4);
int cmd_test(const std::string& checkpoint_path, std::size_t steps, std::size_t tasks,
             std::optional<std::uint64_t> seed);
int cmd_analyze(const std::string& checkpoint_path);
int cmd_compare(const std::string& spn_config_path, const std::string& npn_config_path,
                std::size_t workers = 4);

} // namespace nmrl
