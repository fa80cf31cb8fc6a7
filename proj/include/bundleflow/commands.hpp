#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bundleflow {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitSolver = 2,
    kExitIntegrator = 3,
    kExitVerification = 4,
};

struct CommandRequest {
    /// einstein | classify | flow | portrait | verify | reconstruct
    std::string command;
    /// JSON document text; empty means defaults.
    std::string config_text;
    std::string out_dir = ".";
    /// verify only.
    std::string family;
};

const std::vector<std::string>& command_names();

/// Runs one command, writes its files into out_dir and returns the exit code.
/// Diagnostics go to `err`. No file is written when the config is rejected.
int run_command(const CommandRequest& req, std::ostream& err);

/// Reads a file into a string; throws ConfigError if it cannot be read.
std::string read_text_file(const std::string& path);

}  // namespace bundleflow
