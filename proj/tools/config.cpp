#include "config.hpp"

#include <CLI11.hpp>
#include <fstream>

#include "rawvid/image.hpp"

namespace rawvid::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Global options that take a value, so their argument is not mistaken for the subcommand.
bool takes_value(const CLI::App& app, const std::string& arg) {
    if (arg.rfind("--", 0) != 0 || arg.find('=') != std::string::npos) return false;
    const CLI::Option* opt = app.get_option_no_throw(arg);
    return opt != nullptr && opt->get_type_size() != 0;
}

}  // namespace

ConfigEntries read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    ConfigEntries out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        if (key.empty()) throw Error(path.string() + ":" + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
    std::string config_path;
    std::ptrdiff_t sub_pos = -1;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
        } else if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        }
        if (sub_pos < 0 && !a.empty() && a[0] != '-') {
            const bool is_value = i > 0 && takes_value(app, args[i - 1]);
            if (!is_value) sub_pos = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (config_path.empty()) return args;

    const CLI::App* sub = nullptr;
    if (sub_pos >= 0) sub = app.get_subcommand_no_throw(args[sub_pos]);
    std::vector<std::string> global_args, sub_args;
    for (const auto& [key, value] : read_config_file(config_path)) {
        const std::string flag = "--" + key;
        if (key == "config") throw Error("config files cannot include other config files");
        if (app.get_option_no_throw(flag) != nullptr) {
            global_args.push_back(flag + "=" + value);
            continue;
        }
        if (sub != nullptr && sub->get_option_no_throw(flag) != nullptr) {
            sub_args.push_back(flag + "=" + value);
            continue;
        }
        bool known = false;
        for (const CLI::App* other : app.get_subcommands([](const CLI::App*) { return true; })) {
            known = known || other->get_option_no_throw(flag) != nullptr;
        }
        if (!known) throw Error("unknown config key '" + key + "'");
    }

    // config values go first so that anything given on the command line overrides them
    std::vector<std::string> out = global_args;
    const std::size_t split = sub_pos >= 0 ? static_cast<std::size_t>(sub_pos) : args.size();
    out.insert(out.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(split));
    if (sub_pos >= 0) {
        out.push_back(args[split]);
        out.insert(out.end(), sub_args.begin(), sub_args.end());
        out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(split) + 1, args.end());
    }
    return out;
}

}  // namespace rawvid::cli
