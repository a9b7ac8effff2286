#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "chiral/shell/config.hpp"

namespace chiral::shell {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kInvalid = 2,
    kNotConverged = 3,
    kDiverged = 4,
};

const std::vector<std::string>& subcommands();

/// Fills in per-subcommand defaults for keys the user did not set (for example
/// `modes` works on a six-atom fully chiral chain unless told otherwise).
void apply_subcommand_defaults(const std::string& subcommand, RunConfig& cfg);

/// Runs one subcommand, writing tables and the manifest under cfg.output_dir and the
/// manifest JSON to `out`. Errors are reported as a JSON record on `err`; the return
/// value is the process exit code.
int run_command(const std::string& subcommand, const RunConfig& cfg, std::ostream& out,
                std::ostream& err);

/// Machine-readable error record.
nlohmann::json error_record(const std::string& type, const std::string& message, int exit_code,
                            const std::string& key = {}, int line = 0);

}  // namespace chiral::shell
