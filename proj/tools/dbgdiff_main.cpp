#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <unistd.h>

#include "dbgdiff/campaign.hpp"
#include "dbgdiff/trace_io.hpp"
#include "dbgdiff/driver.hpp"
#include "dbgdiff/errors.hpp"
#include "dbgdiff/report.hpp"
#include "dbgdiff/toolchain.hpp"
#include "dbgdiff/triage.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dbgdiff;

// Exit codes: 0 success, 1 violations found (check-pair), 2 usage/config
// error, 3 toolchain/canary error.
constexpr int kOk = 0;
constexpr int kViolations = 1;
constexpr int kUsage = 2;
constexpr int kToolchain = 3;

fs::path self_executable() {
    char buf[4096];
    ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) {
        return "dbgdiff";
    }
    buf[n] = '\0';
    return fs::path(buf);
}

void log_line(const std::string& text) {
    std::cerr << text << "\n";
}

struct CommonArgs {
    std::string config_path;
};

int cmd_gen(const CommonArgs& common, std::size_t count, std::uint64_t seed,
            const fs::path& out_dir) {
    ToolchainConfig config = load_config(common.config_path);
    fs::create_directories(out_dir);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t case_seed = derive_case_seed(seed, "gen", i);
        std::string id = make_case_id("gen", i);
        fs::path source = out_dir / (id + ".c");
        TestCase test_case = generate_case(config, case_seed, source, id);
        FilterResult filter = filter_ub(test_case, config);
        const char* verdict = "kept";
        if (filter.outcome == FilterOutcome::Rejected) {
            verdict = filter.filter_crashed ? "rejected (filter crash)" : "rejected";
        } else if (filter.outcome == FilterOutcome::FilterUnavailable) {
            verdict = "kept (no filter configured)";
        }
        if (filter.outcome != FilterOutcome::Rejected) {
            ++kept;
        }
        std::cout << source.string() << "  seed=" << case_seed << "  " << verdict << "\n";
    }
    std::cout << kept << "/" << count << " cases kept\n";
    return kOk;
}

int cmd_run(const CommonArgs& common, const fs::path& campaign_dir, std::string id,
            std::vector<std::string> levels, std::size_t cases, double hours, std::size_t workers,
            std::uint64_t seed, bool keep_binaries, bool self_check) {
    ToolchainConfig config = load_config(common.config_path);
    if (levels.empty()) {
        levels = config.levels;
    }
    if (self_check && levels.empty()) {
        levels = {config.baseline}; // labels only; the pair is one baseline binary
    }
    if (id.empty()) {
        id = campaign_dir.filename().string();
    }
    CampaignPlan plan;
    plan.levels = levels;
    plan.cases_per_level = cases;
    plan.wall_budget = std::chrono::milliseconds(static_cast<long long>(hours * 3600.0 * 1000.0));
    plan.workers = workers;
    plan.seed = seed;
    plan.keep_binaries = keep_binaries;
    plan.self_check = self_check;

    CampaignRecord record = run_campaign(config, plan, campaign_dir, id);
    CampaignReport report = build_report(record);
    std::cout << render_text(report, load_clusters(campaign_dir));
    return kOk;
}

int cmd_trace(const std::string& config_path, const fs::path& binary, const fs::path& out_path) {
    DriverOptions options;
    if (!config_path.empty()) {
        options = driver_options(load_config(config_path));
    }
    Trace trace = extract_trace(binary, options);
    if (out_path == "-") {
        write_trace(trace, std::cout);
    } else {
        write_trace_file(trace, out_path);
    }
    std::cerr << trace.steps().size() << " step(s)" << (trace.truncated() ? " (truncated)" : "")
              << "\n";
    return kOk;
}

int cmd_check_pair(const fs::path& opt_path, const fs::path& unopt_path,
                   const std::string& case_id, bool si_universal, const std::string& format) {
    for (const fs::path& path : {opt_path, unopt_path}) {
        if (!fs::exists(path)) {
            throw SchemaError("no such trace file: " + path.string(), 0);
        }
    }
    CheckOptions options;
    options.si_universal = si_universal;
    std::vector<Violation> violations = check_pair(opt_path, unopt_path, options, case_id);
    if (format == "records") {
        write_violations(violations, std::cout);
    } else {
        for (const auto& violation : violations) {
            std::cout << describe(violation) << "\n";
        }
        std::cout << violations.size() << " violation(s)\n";
    }
    return violations.empty() ? kOk : kViolations;
}

int cmd_fingerprint(const CommonArgs& common, const fs::path& source, const std::string& level,
                    fs::path work_dir) {
    ToolchainConfig config = load_config(common.config_path);
    bool scratch = work_dir.empty();
    if (scratch) {
        work_dir = fs::temp_directory_path() /
                   ("dbgdiff-fp-" + std::to_string(::getpid()));
    }
    TestCase test_case = import_case(source, source.stem().string());
    Fingerprint fingerprint = fingerprint_case(test_case, level, config, work_dir, log_line);
    if (scratch) {
        std::error_code ec;
        fs::remove_all(work_dir, ec);
    }
    std::cout << fingerprint.to_string() << "\n";
    return kOk;
}

Invariant first_violated_invariant(const CaseOutcome& outcome) {
    for (Invariant inv : {Invariant::LI, Invariant::BI, Invariant::SI, Invariant::PI}) {
        auto it = outcome.violation_counts.find(inv);
        if (it != outcome.violation_counts.end() && it->second > 0) {
            return inv;
        }
    }
    return Invariant::LI;
}

int cmd_triage(const CommonArgs& common, const fs::path& campaign_dir, bool reduce,
               std::uint64_t seed) {
    ToolchainConfig config = load_config(common.config_path);
    CampaignRecord record = load_campaign(campaign_dir);

    std::map<std::string, std::map<std::string, Fingerprint>> fingerprints_by_level;
    std::map<std::string, CaseOutcome> outcomes_by_id;
    for (auto& outcome : record.outcomes) {
        if (outcome.status != CaseStatus::Violating) {
            continue;
        }
        fs::path case_dir = case_directory(campaign_dir, outcome.case_id);
        TestCase test_case = import_case(case_dir / "source.c", outcome.case_id);
        if (!outcome.fingerprint) {
            log_line("fingerprinting " + outcome.case_id + " at " + outcome.level);
            outcome.fingerprint = fingerprint_case(test_case, outcome.level, config,
                                                   case_dir / "triage", log_line);
            save_case_outcome(campaign_dir, outcome);
        }
        fingerprints_by_level[outcome.level][outcome.case_id] = *outcome.fingerprint;
        outcomes_by_id[outcome.case_id] = outcome;
    }

    std::map<std::string, std::vector<Cluster>> clusters_by_level;
    for (const auto& [level, fingerprints] : fingerprints_by_level) {
        clusters_by_level[level] = cluster_cases(fingerprints, seed);
    }

    if (reduce) {
        for (auto& [level, clusters] : clusters_by_level) {
            for (auto& cluster : clusters) {
                const CaseOutcome& outcome = outcomes_by_id.at(cluster.representative);
                fs::path case_dir = case_directory(campaign_dir, cluster.representative);
                ReducePlan plan;
                plan.source = case_dir / "source.c";
                plan.opt_flag = level;
                plan.invariant = first_violated_invariant(outcome);
                plan.main_entry = outcome.fingerprint && !outcome.fingerprint->entries.empty()
                                      ? outcome.fingerprint->entries.front()
                                      : FingerprintEntry{FingerprintEntry::Kind::Unsupported, ""};
                try {
                    cluster.reduced_source =
                        reduce_representative(plan, config, case_dir / "reduce",
                                              common.config_path, self_executable());
                } catch (const Error& e) {
                    log_line("reduction failed for " + cluster.representative + ": " + e.what());
                }
            }
        }
    }

    save_clusters(campaign_dir, clusters_by_level);
    std::size_t total = 0;
    for (const auto& [level, clusters] : clusters_by_level) {
        total += clusters.size();
        std::cout << level << ": " << clusters.size() << " cluster(s)\n";
        for (const auto& cluster : clusters) {
            std::cout << "  " << cluster.fingerprint.to_string() << " size="
                      << cluster.case_ids.size() << " rep=" << cluster.representative << "\n";
        }
    }
    std::cout << total << " cluster(s) total\n";
    return kOk;
}

int cmd_report(const fs::path& campaign_dir, const std::string& format) {
    CampaignRecord record = load_campaign(campaign_dir);
    CampaignReport report = build_report(record);
    auto clusters = load_clusters(campaign_dir);
    if (format == "records") {
        std::cout << render_records(report, clusters);
    } else {
        std::cout << render_text(report, clusters);
    }
    return kOk;
}

int cmd_reduce_check(const CommonArgs& common, const fs::path& source, const std::string& level,
                     const std::string& invariant_name, const std::string& expect_pass) {
    ToolchainConfig config = load_config(common.config_path);
    auto invariant = invariant_from_string(invariant_name);
    if (!invariant) {
        throw ConfigInvalid("unknown invariant: " + invariant_name);
    }
    FingerprintEntry entry{FingerprintEntry::Kind::Unsupported, ""};
    if (!expect_pass.empty()) {
        entry = {FingerprintEntry::Kind::Pass, expect_pass};
    }
    fs::path scratch = fs::temp_directory_path() /
                       ("dbgdiff-reduce-" + std::to_string(::getpid()));
    bool interesting = reduction_predicate(source, level, *invariant, entry, config, scratch);
    std::error_code ec;
    fs::remove_all(scratch, ec);
    return interesting ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"differential tester for debug information in optimized binaries"};
    app.require_subcommand(1);

    CommonArgs common;

    auto* gen = app.add_subcommand("gen", "generate (and filter) test cases");
    std::size_t gen_count = 10;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "cases";
    gen->add_option("--config", common.config_path, "toolchain config file")->required();
    gen->add_option("--count", gen_count, "number of cases");
    gen->add_option("--seed", gen_seed, "campaign seed");
    gen->add_option("--out", gen_out, "output directory");

    auto* run = app.add_subcommand("run", "run a full campaign");
    std::string run_campaign_dir;
    std::string run_id;
    std::string run_levels;
    std::size_t run_cases = 0;
    double run_hours = 0.0;
    std::size_t run_workers = 0;
    std::uint64_t run_seed = 1;
    bool run_keep = false;
    bool run_selfcheck = false;
    run->add_option("--config", common.config_path, "toolchain config file")->required();
    run->add_option("--campaign", run_campaign_dir, "campaign directory")->required();
    run->add_option("--id", run_id, "campaign id (default: directory name)");
    run->add_option("--levels", run_levels, "comma-separated levels (default: from config)");
    run->add_option("--cases", run_cases, "case budget per level")->required();
    run->add_option("--hours", run_hours, "wall-clock budget in hours (0 = none)");
    run->add_option("--workers", run_workers, "worker count (0 = cores)");
    run->add_option("--seed", run_seed, "campaign seed");
    run->add_flag("--keep-binaries", run_keep, "keep compiled binaries after tracing");
    run->add_flag("--selfcheck", run_selfcheck,
                  "trace one baseline binary twice per case (harness self-test)");

    auto* trace_cmd = app.add_subcommand("trace", "extract one stepping trace from a binary");
    std::string trace_config;
    std::string trace_binary;
    std::string trace_out = "-";
    trace_cmd->add_option("--config", trace_config, "toolchain config file (optional)");
    trace_cmd->add_option("binary", trace_binary, "binary with debug info")->required();
    trace_cmd->add_option("--out", trace_out, "trace file path, - for stdout");

    auto* check = app.add_subcommand("check-pair", "check two recorded traces offline");
    std::string check_opt;
    std::string check_unopt;
    std::string check_case_id;
    bool check_si_universal = false;
    std::string check_format = "text";
    check->add_option("opt_trace", check_opt, "optimized trace file")->required();
    check->add_option("unopt_trace", check_unopt, "unoptimized trace file")->required();
    check->add_option("--case-id", check_case_id, "case id to stamp on violations");
    check->add_flag("--si-universal", check_si_universal,
                    "use the universal scope-invariant variant");
    check->add_option("--format", check_format, "text | records");

    auto* fp = app.add_subcommand("fingerprint", "fingerprint a single case");
    std::string fp_source;
    std::string fp_level;
    std::string fp_workdir;
    fp->add_option("--config", common.config_path, "toolchain config file")->required();
    fp->add_option("--source", fp_source, "case source file")->required();
    fp->add_option("--level", fp_level, "optimization level flag")->required();
    fp->add_option("--workdir", fp_workdir, "scratch directory");

    auto* triage = app.add_subcommand("triage", "fingerprint, cluster and reduce violations");
    std::string triage_campaign;
    bool triage_reduce = false;
    std::uint64_t triage_seed = 1;
    triage->add_option("--config", common.config_path, "toolchain config file")->required();
    triage->add_option("--campaign", triage_campaign, "campaign directory")->required();
    triage->add_flag("--reduce", triage_reduce, "reduce cluster representatives");
    triage->add_option("--seed", triage_seed, "representative selection seed");

    auto* report = app.add_subcommand("report", "render a campaign summary");
    std::string report_campaign;
    std::string report_format = "text";
    report->add_option("--campaign", report_campaign, "campaign directory")->required();
    report->add_option("--format", report_format, "text | records");

    auto* reduce_check =
        app.add_subcommand("reduce-check", "interestingness predicate used during reduction");
    std::string rc_source;
    std::string rc_level;
    std::string rc_invariant;
    std::string rc_expect_pass;
    reduce_check->add_option("--config", common.config_path, "toolchain config file")->required();
    reduce_check->add_option("--source", rc_source, "candidate source")->required();
    reduce_check->add_option("--level", rc_level, "optimization level flag")->required();
    reduce_check->add_option("--invariant", rc_invariant, "invariant kind to preserve")
        ->required();
    reduce_check->add_option("--expect-pass", rc_expect_pass,
                             "first-violating pass that must be preserved");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(common, gen_count, gen_seed, gen_out);
        }
        if (run->parsed()) {
            std::vector<std::string> levels;
            std::string item;
            std::istringstream in(run_levels);
            while (std::getline(in, item, ',')) {
                if (!item.empty()) {
                    levels.push_back(item);
                }
            }
            return cmd_run(common, run_campaign_dir, run_id, levels, run_cases, run_hours,
                           run_workers, run_seed, run_keep, run_selfcheck);
        }
        if (trace_cmd->parsed()) {
            return cmd_trace(trace_config, trace_binary, trace_out);
        }
        if (check->parsed()) {
            return cmd_check_pair(check_opt, check_unopt, check_case_id, check_si_universal,
                                  check_format);
        }
        if (fp->parsed()) {
            return cmd_fingerprint(common, fp_source, fp_level, fp_workdir);
        }
        if (triage->parsed()) {
            return cmd_triage(common, triage_campaign, triage_reduce, triage_seed);
        }
        if (report->parsed()) {
            return cmd_report(report_campaign, report_format);
        }
        if (reduce_check->parsed()) {
            return cmd_reduce_check(common, rc_source, rc_level, rc_invariant, rc_expect_pass);
        }
    } catch (const CanaryFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kToolchain;
    } catch (const DebuggerLaunchFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kToolchain;
    } catch (const ConfigInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnknownCampaign& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kToolchain;
    }
    return kUsage;
}
