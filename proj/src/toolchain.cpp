#include "dbgdiff/toolchain.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dbgdiff/errors.hpp"

namespace dbgdiff {

namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t count_placeholder(const std::string& tmpl, const std::string& name) {
    const std::string pattern = "{" + name + "}";
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = tmpl.find(pattern, pos)) != std::string::npos) {
        ++count;
        pos += pattern.size();
    }
    return count;
}

void require_placeholders_once(const std::string& tmpl, const std::string& what,
                               std::vector<std::string>& problems) {
    for (const char* name : {"src", "out", "opt"}) {
        if (count_placeholder(tmpl, name) != 1) {
            problems.push_back(what + " must contain {" + name + "} exactly once: \"" + tmpl +
                               "\"");
        }
    }
}

bool has_token(const std::vector<std::string>& argv, const std::string& token) {
    for (const auto& arg : argv) {
        if (arg == token) {
            return true;
        }
    }
    return false;
}

} // namespace

void validate_config(const ToolchainConfig& config) {
    std::vector<std::string> problems;
    require_placeholders_once(config.compiler_template, "compiler template", problems);
    if (config.baseline.empty()) {
        problems.push_back("baseline optimization flag must be set");
    }
    for (const auto& level : config.levels) {
        if (level == config.baseline) {
            problems.push_back("level under test equals the baseline flag: " + level);
        }
    }
    std::set<std::string> labels;
    for (const auto& version : config.versions) {
        if (version.label.empty()) {
            problems.push_back("version with empty label");
        }
        if (!labels.insert(version.label).second) {
            problems.push_back("duplicate version label: " + version.label);
        }
        require_placeholders_once(version.compiler_template, "version " + version.label, problems);
        if (version.bisect_limit_flag &&
            count_placeholder(*version.bisect_limit_flag, "limit") != 1) {
            problems.push_back("version " + version.label +
                               " bisect flag must contain {limit} exactly once");
        }
        if (version.bisect_limit_flag.has_value() != version.pass_list_command.has_value()) {
            problems.push_back("version " + version.label +
                               " must configure both bisect_limit_flag and pass_list_command, "
                               "or neither");
        }
    }
    if (config.debugger.backend != "gdb-mi") {
        problems.push_back("unknown debugger backend: " + config.debugger.backend);
    }
    if (config.step_limit < 1) {
        problems.push_back("step_limit must be >= 1");
    }
    if (!problems.empty()) {
        std::string message = "invalid config:";
        for (const auto& p : problems) {
            message += "\n  - " + p;
        }
        throw ConfigInvalid(message);
    }
}

ToolchainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigInvalid("cannot open config file: " + path.string());
    }
    ordered_json j;
    try {
        j = ordered_json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const std::exception& e) {
        throw ConfigInvalid("config is not valid JSON: " + std::string(e.what()));
    }

    ToolchainConfig config;
    try {
        config.compiler_template = j.at("compiler").get<std::string>();
        config.debug_flag = j.value("debug_flag", config.debug_flag);
        if (j.contains("debugger")) {
            const auto& d = j.at("debugger");
            config.debugger.backend = d.value("backend", config.debugger.backend);
            config.debugger.binary = d.value("binary", config.debugger.binary);
            if (d.contains("extra_args")) {
                config.debugger.extra_args = d.at("extra_args").get<std::vector<std::string>>();
            }
        }
        if (j.contains("levels")) {
            config.levels = j.at("levels").get<std::vector<std::string>>();
        }
        config.baseline = j.value("baseline", config.baseline);
        config.generator_template = j.value("generator", std::string());
        if (j.contains("ub_filter")) {
            config.ub_filter_template = j.at("ub_filter").get<std::string>();
        }
        if (j.contains("reducer")) {
            config.reducer_template = j.at("reducer").get<std::string>();
        }
        for (const auto& vj : j.value("versions", ordered_json::array())) {
            VersionDescriptor version;
            version.label = vj.at("label").get<std::string>();
            version.compiler_template = vj.at("compiler").get<std::string>();
            if (vj.contains("bisect_limit_flag")) {
                version.bisect_limit_flag = vj.at("bisect_limit_flag").get<std::string>();
            }
            if (vj.contains("pass_list_command")) {
                version.pass_list_command = vj.at("pass_list_command").get<std::string>();
            }
            config.versions.push_back(std::move(version));
        }
        config.entry_symbol = j.value("entry_symbol", config.entry_symbol);
        config.step_limit = j.value("step_limit", config.step_limit);
        if (j.contains("command_timeout_sec")) {
            config.command_timeout =
                std::chrono::milliseconds(j.at("command_timeout_sec").get<int>() * 1000);
        }
        if (j.contains("tool_timeout_sec")) {
            config.tool_timeout =
                std::chrono::milliseconds(j.at("tool_timeout_sec").get<int>() * 1000);
        }
        if (j.contains("reducer_timeout_sec")) {
            config.reducer_timeout =
                std::chrono::milliseconds(j.at("reducer_timeout_sec").get<int>() * 1000);
        }
        config.collect_globals = j.value("collect_globals", config.collect_globals);
        config.descend_into_other_units =
            j.value("descend_into_other_units", config.descend_into_other_units);
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigInvalid("config field error: " + std::string(e.what()));
    }

    validate_config(config);
    return config;
}

std::string config_to_json(const ToolchainConfig& config) {
    ordered_json j;
    j["compiler"] = config.compiler_template;
    j["debug_flag"] = config.debug_flag;
    j["debugger"] = {{"backend", config.debugger.backend},
                     {"binary", config.debugger.binary},
                     {"extra_args", config.debugger.extra_args}};
    j["levels"] = config.levels;
    j["baseline"] = config.baseline;
    j["generator"] = config.generator_template;
    if (config.ub_filter_template) {
        j["ub_filter"] = *config.ub_filter_template;
    }
    if (config.reducer_template) {
        j["reducer"] = *config.reducer_template;
    }
    ordered_json versions = ordered_json::array();
    for (const auto& version : config.versions) {
        ordered_json vj;
        vj["label"] = version.label;
        vj["compiler"] = version.compiler_template;
        if (version.bisect_limit_flag) {
            vj["bisect_limit_flag"] = *version.bisect_limit_flag;
        }
        if (version.pass_list_command) {
            vj["pass_list_command"] = *version.pass_list_command;
        }
        versions.push_back(std::move(vj));
    }
    j["versions"] = std::move(versions);
    j["entry_symbol"] = config.entry_symbol;
    j["step_limit"] = config.step_limit;
    j["command_timeout_sec"] =
        static_cast<int>(std::chrono::duration_cast<std::chrono::seconds>(config.command_timeout)
                             .count());
    j["tool_timeout_sec"] = static_cast<int>(
        std::chrono::duration_cast<std::chrono::seconds>(config.tool_timeout).count());
    j["collect_globals"] = config.collect_globals;
    j["descend_into_other_units"] = config.descend_into_other_units;
    return j.dump(2);
}

TestCase generate_case(const ToolchainConfig& config, std::uint64_t seed,
                       const std::filesystem::path& source_path, const std::string& id) {
    if (config.generator_template.empty()) {
        throw GeneratorFailure("no generator command configured");
    }
    std::vector<std::string> argv =
        render_command(config.generator_template, {{"seed", std::to_string(seed)},
                                                   {"out", source_path.string()}});
    RunOptions options;
    options.timeout = config.tool_timeout;
    RunResult result = run_command(argv, options);
    if (!result.ok()) {
        throw GeneratorFailure("generator failed (" + join_argv(argv) +
                               "): " + (result.timed_out ? "timeout" : result.err));
    }
    std::error_code ec;
    if (!std::filesystem::exists(source_path, ec) ||
        std::filesystem::file_size(source_path, ec) == 0) {
        throw GeneratorFailure("generator produced no output at " + source_path.string());
    }
    TestCase test_case;
    test_case.id = id;
    test_case.source = source_path;
    test_case.provenance = Provenance::Generated;
    test_case.seed = seed;
    return test_case;
}

TestCase import_case(const std::filesystem::path& source, const std::string& id) {
    std::error_code ec;
    if (!std::filesystem::exists(source, ec) || std::filesystem::file_size(source, ec) == 0) {
        throw Error("case source missing or empty: " + source.string());
    }
    TestCase test_case;
    test_case.id = id;
    test_case.source = source;
    test_case.provenance = Provenance::Imported;
    return test_case;
}

FilterResult filter_ub(const TestCase& test_case, const ToolchainConfig& config) {
    FilterResult result;
    if (!config.ub_filter_template) {
        result.outcome = FilterOutcome::FilterUnavailable;
        return result;
    }
    std::vector<std::string> argv =
        render_command(*config.ub_filter_template, {{"src", test_case.source.string()}});
    RunOptions options;
    options.timeout = config.tool_timeout;
    RunResult run = run_command(argv, options);
    if (run.timed_out || run.signaled || (run.exit_code != 0 && run.exit_code != 1)) {
        result.outcome = FilterOutcome::Rejected;
        result.filter_crashed = true;
        result.detail = run.timed_out ? "filter timeout"
                                      : "filter exited abnormally (" +
                                            std::to_string(run.signaled ? -run.term_signal
                                                                        : run.exit_code) +
                                            ")";
        return result;
    }
    result.outcome = run.exit_code == 0 ? FilterOutcome::Clean : FilterOutcome::Rejected;
    return result;
}

std::filesystem::path compile(const TestCase& test_case, const std::string& opt_flag,
                              const VersionDescriptor& version, std::optional<int> pass_limit,
                              const std::filesystem::path& output, const ToolchainConfig& config) {
    if (pass_limit && !version.supports_bisect()) {
        throw PassLimitUnsupported("version " + version.label + " has no pass bisect mechanism");
    }
    std::vector<std::string> argv =
        render_command(version.compiler_template, {{"src", test_case.source.string()},
                                                   {"out", output.string()},
                                                   {"opt", opt_flag}});
    if (!has_token(argv, config.debug_flag)) {
        argv.push_back(config.debug_flag);
    }
    if (pass_limit) {
        for (auto& token :
             render_command(*version.bisect_limit_flag, {{"limit", std::to_string(*pass_limit)}})) {
            argv.push_back(std::move(token));
        }
    }
    // Exact command line kept beside the binary for replay; binaries may be
    // deleted after tracing, the sidecar stays.
    {
        std::ofstream cmd(output.string() + ".cmd");
        cmd << join_argv(argv) << '\n';
    }
    RunOptions options;
    options.timeout = config.tool_timeout;
    RunResult result = run_command(argv, options);
    if (!result.ok()) {
        throw CompileFailure("compilation failed for " + test_case.id + " at " + opt_flag +
                                 (result.timed_out ? " (timeout)" : ""),
                             join_argv(argv), result.err);
    }
    std::error_code ec;
    if (!std::filesystem::exists(output, ec)) {
        throw CompileFailure("compiler exited 0 but produced no binary", join_argv(argv),
                             result.err);
    }
    return output;
}

BinaryPair build_pair(const TestCase& test_case, const std::string& opt_flag,
                      const VersionDescriptor& version, const std::filesystem::path& work_dir,
                      const ToolchainConfig& config) {
    if (opt_flag == config.baseline) {
        throw RefusedSameLevel("optimized flag equals the baseline: " + opt_flag);
    }
    std::filesystem::create_directories(work_dir);
    BinaryPair pair;
    pair.unopt = compile(test_case, config.baseline, version, std::nullopt,
                         work_dir / "unopt.bin", config);
    pair.opt =
        compile(test_case, opt_flag, version, std::nullopt, work_dir / "opt.bin", config);
    return pair;
}

VersionDescriptor main_version(const ToolchainConfig& config) {
    if (!config.versions.empty()) {
        return config.versions.front();
    }
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    return version;
}

} // namespace dbgdiff
