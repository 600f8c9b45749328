#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace fedpt::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Entry point of the `fedpt` executable. Errors go to `err` as one line:
///   fedpt: error[config] key=<key> line=<line>: <message>
///   fedpt: error[io]: <message>
///   fedpt: error[runtime]: <message>
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedpt::cli
