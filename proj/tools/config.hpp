#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace CLI {
class App;
}

namespace rawvid::cli {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Flat `key = value` file; `#` starts a comment, blank lines are ignored.
ConfigEntries read_config_file(const std::filesystem::path& path);

/// `args` excludes the program name. Finds --config in args and splices its entries in as `--key=value` arguments:
/// global keys before the subcommand, the rest right after it, so flags given on
/// the command line come later and win. Keys that only belong to other
/// subcommands are skipped; keys nobody knows are an error.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app);

}  // namespace rawvid::cli
