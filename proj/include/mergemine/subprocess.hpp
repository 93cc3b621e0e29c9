#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mergemine {

struct command_result {
    int exit_code = -1;
    std::string out;
    std::string err;

    bool ok() const { return exit_code == 0; }
};

// Runs argv[0] with the given arguments, no shell involved. Captures both
// output streams. Signal termination maps to 128+signo. Throws
// std::runtime_error when the process cannot be started at all.
command_result run_command(const std::vector<std::string>& argv,
                           const std::optional<std::filesystem::path>& cwd = std::nullopt,
                           const std::vector<std::pair<std::string, std::string>>& extra_env = {});

// "a b 'c d'" rendering for audit logs.
std::string render_command_line(const std::vector<std::string>& argv);

}  // namespace mergemine
