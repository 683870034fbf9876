#include "dbgdiff/triage.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "dbgdiff/driver.hpp"
#include "dbgdiff/errors.hpp"

namespace dbgdiff {

std::string FingerprintEntry::to_string() const {
    switch (kind) {
    case Kind::Pass: return pass_name;
    case Kind::NoViolation: return "<no-violation>";
    case Kind::Unsupported: return "<unsupported>";
    }
    return "?";
}

std::string Fingerprint::to_string() const {
    std::string out = "[";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0) {
            out += " | ";
        }
        out += entries[i].to_string();
    }
    out += "]";
    return out;
}

Fingerprint fingerprint_from_string(const std::string& text) {
    if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
        throw Error("malformed fingerprint: " + text);
    }
    Fingerprint fp;
    std::string body = text.substr(1, text.size() - 2);
    if (body.empty()) {
        return fp;
    }
    std::size_t pos = 0;
    for (;;) {
        std::size_t sep = body.find(" | ", pos);
        std::string item =
            sep == std::string::npos ? body.substr(pos) : body.substr(pos, sep - pos);
        FingerprintEntry entry;
        if (item == "<no-violation>") {
            entry.kind = FingerprintEntry::Kind::NoViolation;
        } else if (item == "<unsupported>") {
            entry.kind = FingerprintEntry::Kind::Unsupported;
        } else {
            entry.kind = FingerprintEntry::Kind::Pass;
            entry.pass_name = item;
        }
        fp.entries.push_back(std::move(entry));
        if (sep == std::string::npos) {
            break;
        }
        pos = sep + 3;
    }
    return fp;
}

BisectResult bisect_first_violation(int pass_count,
                                    const std::function<bool(std::optional<int>)>& violates,
                                    const std::string& version_label) {
    BisectResult result;
    std::map<int, bool> cache;
    // Every predicate evaluation is logged; -1 stands for the unlimited
    // build. The verification and fallback probes bypass the cache on
    // purpose: re-executing is what catches a predicate that is not stable
    // over N (flaky traces, probe-order effects).
    auto fresh_probe = [&](std::optional<int> limit) {
        bool violated = violates(limit);
        result.probes.emplace_back(limit ? *limit : -1, violated);
        if (limit) {
            cache[*limit] = violated;
        }
        return violated;
    };
    auto cached_probe = [&](int limit) {
        auto it = cache.find(limit);
        if (it != cache.end()) {
            return it->second;
        }
        return fresh_probe(limit);
    };

    if (!fresh_probe(std::nullopt)) {
        return result; // clean even unlimited
    }
    if (pass_count <= 0) {
        throw BisectAborted("unlimited build violates but there are no bisectable passes",
                            version_label);
    }

    // Scans 1..pass_count with fresh probes; trusted over any earlier result.
    auto linear_scan = [&]() -> int {
        for (int n = 1; n <= pass_count; ++n) {
            if (fresh_probe(n)) {
                return n;
            }
        }
        throw BisectAborted("unlimited build violates but no pass-limited build does",
                            version_label);
    };

    int first_n;
    bool below_clean;
    if (!cached_probe(pass_count)) {
        // All passes enabled behaves differently from the unlimited build;
        // do not trust bisection at all.
        result.linear_fallback = true;
        first_n = linear_scan();
        below_clean = first_n > 1 || !fresh_probe(0);
    } else {
        int lo = 1;
        int hi = pass_count;
        while (lo < hi) {
            int mid = lo + (hi - lo) / 2;
            if (cached_probe(mid)) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        first_n = lo;
        // Minimality verification: one fresh probe just below the answer.
        if (fresh_probe(first_n - 1)) {
            if (first_n == 1) {
                throw BisectAborted("violation present with every bisectable pass disabled",
                                    version_label);
            }
            result.linear_fallback = true;
            first_n = linear_scan();
            below_clean = first_n > 1 || !fresh_probe(0);
        } else {
            below_clean = true;
        }
    }
    if (!below_clean) {
        throw BisectAborted("violation present with every bisectable pass disabled",
                            version_label);
    }
    result.first_n = first_n;
    return result;
}

std::vector<std::string> list_passes(const TestCase& test_case, const std::string& opt_flag,
                                     const VersionDescriptor& version,
                                     const ToolchainConfig& config,
                                     const std::filesystem::path& work_dir) {
    if (!version.pass_list_command) {
        throw BisectAborted("no pass listing command", version.label);
    }
    std::filesystem::create_directories(work_dir);
    std::filesystem::path out = work_dir / "passlist.bin";
    std::vector<std::string> argv =
        render_command(*version.pass_list_command, {{"src", test_case.source.string()},
                                                    {"opt", opt_flag},
                                                    {"out", out.string()}});
    RunOptions options;
    options.timeout = config.tool_timeout;
    RunResult run = run_command(argv, options);
    if (run.timed_out || run.signaled || run.exit_code != 0) {
        throw BisectAborted("pass listing command failed: " + join_argv(argv), version.label);
    }

    std::vector<std::string> passes;
    std::istringstream in(run.out + run.err);
    std::string line;
    const std::string marker = "BISECT: running pass (";
    while (std::getline(in, line)) {
        std::size_t start = line.find(marker);
        if (start == std::string::npos) {
            continue;
        }
        std::size_t num_start = start + marker.size();
        std::size_t close = line.find(')', num_start);
        if (close == std::string::npos) {
            continue;
        }
        int number = 0;
        try {
            number = std::stoi(line.substr(num_start, close - num_start));
        } catch (const std::exception&) {
            continue;
        }
        std::string rest = line.substr(close + 1);
        if (!rest.empty() && rest.front() == ' ') {
            rest.erase(0, 1);
        }
        std::size_t on = rest.rfind(" on ");
        std::string name = on == std::string::npos ? rest : rest.substr(0, on);
        if (number != static_cast<int>(passes.size()) + 1) {
            throw BisectAborted("pass listing numbers are not consecutive", version.label);
        }
        passes.push_back(std::move(name));
    }
    return passes;
}

FingerprintEntry first_violating_pass(const TestCase& test_case, const std::string& opt_flag,
                                      const VersionDescriptor& version,
                                      const ToolchainConfig& config,
                                      const std::filesystem::path& work_dir) {
    if (!version.supports_bisect()) {
        return {FingerprintEntry::Kind::Unsupported, ""};
    }
    try {
        std::filesystem::create_directories(work_dir);
        std::vector<std::string> passes = list_passes(test_case, opt_flag, version, config,
                                                      work_dir);

        DriverOptions driver = driver_options(config);
        std::filesystem::path baseline_bin = compile(test_case, config.baseline, version,
                                                     std::nullopt, work_dir / "baseline.bin",
                                                     config);
        Trace baseline_trace = extract_trace(baseline_bin, driver);

        auto violates = [&](std::optional<int> limit) {
            std::string tag = limit ? std::to_string(*limit) : "full";
            std::filesystem::path bin = work_dir / ("probe_" + tag + ".bin");
            compile(test_case, opt_flag, version, limit, bin, config);
            Trace probe_trace = extract_trace(bin, driver);
            bool violated = !check_all(probe_trace, baseline_trace).empty();
            std::filesystem::remove(bin);
            return violated;
        };

        BisectResult result =
            bisect_first_violation(static_cast<int>(passes.size()), violates, version.label);
        if (!result.first_n) {
            return {FingerprintEntry::Kind::NoViolation, ""};
        }
        return {FingerprintEntry::Kind::Pass, passes[static_cast<std::size_t>(*result.first_n) - 1]};
    } catch (const BisectAborted&) {
        throw;
    } catch (const Error& e) {
        throw BisectAborted(e.what(), version.label);
    }
}

Fingerprint fingerprint_case(const TestCase& test_case, const std::string& opt_flag,
                             const ToolchainConfig& config,
                             const std::filesystem::path& work_dir,
                             const std::function<void(const std::string&)>& log) {
    Fingerprint fingerprint;
    for (const auto& version : config.versions) {
        try {
            fingerprint.entries.push_back(first_violating_pass(
                test_case, opt_flag, version, config, work_dir / version.label));
        } catch (const BisectAborted& e) {
            if (log) {
                log("bisect aborted for " + test_case.id + " on " + version.label + ": " +
                    e.what());
            }
            fingerprint.entries.push_back({FingerprintEntry::Kind::Unsupported, ""});
        }
    }
    return fingerprint;
}

std::vector<Cluster> cluster_cases(const std::map<std::string, Fingerprint>& fingerprints,
                                   std::uint64_t seed) {
    std::map<Fingerprint, std::set<std::string>> groups;
    for (const auto& [case_id, fingerprint] : fingerprints) {
        groups[fingerprint].insert(case_id);
    }
    std::mt19937_64 rng(seed);
    std::vector<Cluster> clusters;
    for (const auto& [fingerprint, case_ids] : groups) {
        Cluster cluster;
        cluster.fingerprint = fingerprint;
        cluster.case_ids = case_ids;
        std::uniform_int_distribution<std::size_t> pick(0, case_ids.size() - 1);
        cluster.representative = *std::next(case_ids.begin(),
                                            static_cast<std::ptrdiff_t>(pick(rng)));
        clusters.push_back(std::move(cluster));
    }
    return clusters;
}

bool reduction_predicate(const std::filesystem::path& source, const std::string& opt_flag,
                         Invariant invariant, const FingerprintEntry& expected_entry,
                         const ToolchainConfig& config, const std::filesystem::path& scratch_dir) {
    try {
        TestCase candidate = import_case(source, "reduce-probe");
        VersionDescriptor version = main_version(config);
        std::filesystem::create_directories(scratch_dir);
        BinaryPair pair = build_pair(candidate, opt_flag, version, scratch_dir, config);
        DriverOptions driver = driver_options(config);
        Trace t_unopt = extract_trace(pair.unopt, driver);
        Trace t_opt = extract_trace(pair.opt, driver);
        bool fires = false;
        for (const auto& violation : check_all(t_opt, t_unopt)) {
            if (violation.invariant == invariant) {
                fires = true;
                break;
            }
        }
        if (!fires) {
            return false;
        }
        if (expected_entry.kind == FingerprintEntry::Kind::Pass && version.supports_bisect()) {
            FingerprintEntry entry =
                first_violating_pass(candidate, opt_flag, version, config, scratch_dir / "bisect");
            return entry == expected_entry;
        }
        return true;
    } catch (const Error&) {
        return false; // a candidate that breaks the pipeline is not interesting
    }
}

std::filesystem::path reduce_representative(const ReducePlan& plan, const ToolchainConfig& config,
                                            const std::filesystem::path& work_dir,
                                            const std::filesystem::path& config_path,
                                            const std::filesystem::path& self_binary) {
    if (!config.reducer_template) {
        throw ReducerFailure("unconfigured: no reducer command in the config");
    }
    std::filesystem::create_directories(work_dir);
    std::filesystem::path source_copy = work_dir / plan.source.filename();
    std::filesystem::copy_file(plan.source, source_copy,
                               std::filesystem::copy_options::overwrite_existing);

    // The reducer runs the predicate in scratch directories containing a
    // candidate copy of the source, so the script resolves it by basename.
    std::filesystem::path predicate = work_dir / "predicate.sh";
    {
        std::ofstream script(predicate);
        script << "#!/bin/sh\n";
        script << "exec " << self_binary.string() << " reduce-check"
               << " --config " << std::filesystem::absolute(config_path).string()
               << " --source " << plan.source.filename().string()
               << " --level " << plan.opt_flag
               << " --invariant " << to_string(plan.invariant);
        if (plan.main_entry.kind == FingerprintEntry::Kind::Pass) {
            script << " --expect-pass '" << plan.main_entry.pass_name << "'";
        }
        script << "\n";
    }
    std::filesystem::permissions(predicate, std::filesystem::perms::owner_all |
                                                std::filesystem::perms::group_read |
                                                std::filesystem::perms::others_read);

    auto predicate_holds = [&](const std::filesystem::path& candidate) {
        return reduction_predicate(candidate, plan.opt_flag, plan.invariant, plan.main_entry,
                                   config, work_dir / "probe");
    };

    // Two validation runs on the original; a predicate that cannot decide
    // the unreduced input twice in a row would send the reducer astray.
    if (!predicate_holds(source_copy) || !predicate_holds(source_copy)) {
        throw PredicateFlaky("predicate does not hold reliably on the original source");
    }

    std::vector<std::string> argv =
        render_command(*config.reducer_template, {{"src", source_copy.string()},
                                                  {"predicate", predicate.string()}});
    RunOptions options;
    options.timeout = config.reducer_timeout;
    options.cwd = work_dir;
    RunResult run = run_command(argv, options);
    if (!run.ok()) {
        throw ReducerFailure("reducer failed (" + join_argv(argv) +
                             "): " + (run.timed_out ? "timeout" : run.err));
    }
    if (!predicate_holds(source_copy)) {
        throw PredicateFlaky("reduced output no longer exhibits the violation; original kept");
    }
    return source_copy;
}

} // namespace dbgdiff
