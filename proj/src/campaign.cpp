#include "dbgdiff/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dbgdiff/driver.hpp"
#include "dbgdiff/errors.hpp"
#include "dbgdiff/trace_io.hpp"

namespace dbgdiff {

namespace {

using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kCampaignFile = "campaign.json";
constexpr const char* kOutcomeFile = "outcome.json";
constexpr const char* kAttemptsFile = "attempts";
constexpr const char* kClustersFile = "clusters.jsonl";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash = (hash ^ c) * 0x100000001b3ULL;
    }
    return hash;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

ordered_json outcome_to_json(const CaseOutcome& outcome) {
    ordered_json j;
    j["case_id"] = outcome.case_id;
    j["level"] = outcome.level;
    j["seed"] = outcome.seed;
    j["status"] = to_string(outcome.status);
    ordered_json counts;
    for (Invariant inv : {Invariant::LI, Invariant::BI, Invariant::SI, Invariant::PI}) {
        auto it = outcome.violation_counts.find(inv);
        counts[to_string(inv)] = it == outcome.violation_counts.end() ? 0 : it->second;
    }
    j["violations"] = std::move(counts);
    j["fingerprint"] = outcome.fingerprint ? ordered_json(outcome.fingerprint->to_string())
                                           : ordered_json(nullptr);
    j["filter_unavailable"] = outcome.filter_unavailable;
    j["truncated_pair"] = outcome.truncated_pair;
    j["error_detail"] = outcome.error_detail;
    j["duration_ms"] = outcome.duration_ms;
    j["completed_executions"] = outcome.completed_executions;
    return j;
}

CaseOutcome outcome_from_json(const ordered_json& j) {
    CaseOutcome outcome;
    outcome.case_id = j.at("case_id").get<std::string>();
    outcome.level = j.at("level").get<std::string>();
    outcome.seed = j.at("seed").get<std::uint64_t>();
    auto status = case_status_from_string(j.at("status").get<std::string>());
    if (!status) {
        throw Error("unknown case status in " + outcome.case_id);
    }
    outcome.status = *status;
    for (Invariant inv : {Invariant::LI, Invariant::BI, Invariant::SI, Invariant::PI}) {
        outcome.violation_counts[inv] = j.at("violations").at(to_string(inv)).get<std::size_t>();
    }
    if (!j.at("fingerprint").is_null()) {
        outcome.fingerprint = fingerprint_from_string(j.at("fingerprint").get<std::string>());
    }
    outcome.filter_unavailable = j.at("filter_unavailable").get<bool>();
    outcome.truncated_pair = j.at("truncated_pair").get<bool>();
    outcome.error_detail = j.at("error_detail").get<std::string>();
    outcome.duration_ms = j.at("duration_ms").get<double>();
    outcome.completed_executions = j.at("completed_executions").get<std::size_t>();
    return outcome;
}

// Aggregate tallies persisted with the record and re-derived on load. Every
// key is always present so the comparison is shape-stable regardless of
// whether outcomes came fresh from a run or back from disk.
ordered_json compute_tallies(const std::vector<CaseOutcome>& outcomes) {
    std::map<std::string, std::map<std::string, std::size_t>> by_level;
    for (const auto& outcome : outcomes) {
        auto& bucket = by_level[outcome.level];
        if (bucket.empty()) {
            for (CaseStatus status : {CaseStatus::Clean, CaseStatus::Violating,
                                      CaseStatus::RejectedUb, CaseStatus::Error}) {
                bucket[to_string(status)] = 0;
            }
            for (Invariant inv :
                 {Invariant::LI, Invariant::BI, Invariant::SI, Invariant::PI}) {
                bucket[std::string("raw_") + to_string(inv)] = 0;
            }
        }
        bucket["cases"] += 1;
        bucket[to_string(outcome.status)] += 1;
        for (const auto& [inv, count] : outcome.violation_counts) {
            bucket[std::string("raw_") + to_string(inv)] += count;
        }
    }
    ordered_json j = ordered_json::object();
    for (const auto& [level, bucket] : by_level) {
        ordered_json lj = ordered_json::object();
        for (const auto& [key, value] : bucket) {
            lj[key] = value;
        }
        j[level] = std::move(lj);
    }
    return j;
}

struct CaseTask {
    std::string level;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string case_id;
};

} // namespace

const char* to_string(CaseStatus status) {
    switch (status) {
    case CaseStatus::Clean: return "clean";
    case CaseStatus::Violating: return "violating";
    case CaseStatus::RejectedUb: return "rejected_ub";
    case CaseStatus::Error: return "error";
    }
    return "?";
}

std::optional<CaseStatus> case_status_from_string(const std::string& name) {
    if (name == "clean") return CaseStatus::Clean;
    if (name == "violating") return CaseStatus::Violating;
    if (name == "rejected_ub") return CaseStatus::RejectedUb;
    if (name == "error") return CaseStatus::Error;
    return std::nullopt;
}

std::uint64_t derive_case_seed(std::uint64_t campaign_seed, const std::string& level,
                               std::size_t index) {
    return splitmix64(campaign_seed ^ fnv1a(level) ^ (0x10001ULL * (index + 1)));
}

std::string make_case_id(const std::string& level, std::size_t index) {
    std::string clean_level;
    for (char c : level) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            clean_level += c;
        }
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return clean_level + "-" + buf;
}

std::filesystem::path case_directory(const std::filesystem::path& campaign_dir,
                                     const std::string& case_id) {
    return campaign_dir / "cases" / case_id;
}

void run_canary(const ToolchainConfig& config, const std::filesystem::path& scratch_dir) {
    try {
        std::filesystem::create_directories(scratch_dir);
        std::filesystem::path source = scratch_dir / "canary.c";
        {
            std::ofstream out(source);
            out << "int main(void) { return 0; }\n";
        }
        TestCase canary = import_case(source, "canary");
        VersionDescriptor version;
        version.label = "main";
        version.compiler_template = config.compiler_template;
        std::filesystem::path binary = compile(canary, config.baseline, version, std::nullopt,
                                               scratch_dir / "canary.bin", config);
        Trace trace = extract_trace(binary, driver_options(config));
        if (trace.steps().empty()) {
            throw Error("canary trace is empty");
        }
        for (const auto& step : trace.steps()) {
            if (!step.backtrace().contains(config.entry_symbol)) {
                throw Error("canary backtrace misses the entry symbol");
            }
        }
    } catch (const Error& e) {
        throw CanaryFailure(std::string("canary failed: ") + e.what());
    }
}

namespace {

class CaseRunner {
public:
    CaseRunner(const ToolchainConfig& config, const CampaignPlan& plan,
               std::filesystem::path campaign_dir)
        : config_(config), plan_(plan), campaign_dir_(std::move(campaign_dir)) {
        tested_version_.label = "main";
        tested_version_.compiler_template = config_.compiler_template;
    }

    CaseOutcome run(const CaseTask& task) const {
        auto started = Clock::now();
        std::filesystem::path dir = case_directory(campaign_dir_, task.case_id);
        std::error_code ec;
        if (std::filesystem::exists(dir, ec)) {
            std::filesystem::remove_all(dir, ec); // stale partial run
        }
        std::filesystem::create_directories(dir);
        {
            std::ofstream attempts(dir / kAttemptsFile, std::ios::app);
            attempts << "started seed=" << task.seed << "\n";
        }

        CaseOutcome outcome;
        outcome.case_id = task.case_id;
        outcome.level = task.level;
        outcome.seed = task.seed;
        try {
            execute_pipeline(task, dir, outcome);
        } catch (const Error& e) {
            outcome.status = CaseStatus::Error;
            outcome.error_detail = e.what();
        } catch (const std::exception& e) {
            outcome.status = CaseStatus::Error;
            outcome.error_detail = std::string("unexpected: ") + e.what();
        }
        outcome.duration_ms = std::chrono::duration<double, std::milli>(Clock::now() - started)
                                  .count();
        return outcome;
    }

private:
    void execute_pipeline(const CaseTask& task, const std::filesystem::path& dir,
                          CaseOutcome& outcome) const {
        TestCase test_case = generate_case(config_, task.seed, dir / "source.c", task.case_id);

        FilterResult filter = filter_ub(test_case, config_);
        if (filter.outcome == FilterOutcome::Rejected) {
            outcome.status = CaseStatus::RejectedUb;
            outcome.error_detail = filter.detail;
            return;
        }
        outcome.filter_unavailable = filter.outcome == FilterOutcome::FilterUnavailable;

        BinaryPair pair;
        if (plan_.self_check) {
            // One baseline binary traced twice; the toolchain is out of the
            // loop, so violations here indict the harness.
            pair.unopt = compile(test_case, config_.baseline, tested_version_, std::nullopt,
                                 dir / "unopt.bin", config_);
            pair.opt = pair.unopt;
        } else {
            pair = build_pair(test_case, task.level, tested_version_, dir, config_);
        }

        DriverOptions driver = driver_options(config_);
        Trace t_unopt = extract_trace(pair.unopt, driver);
        Trace t_opt = extract_trace(pair.opt, driver);
        write_trace_file(t_unopt, dir / "unopt.trace");
        write_trace_file(t_opt, dir / "opt.trace");
        outcome.truncated_pair = t_unopt.truncated() || t_opt.truncated();

        std::vector<Violation> violations = check_all(t_opt, t_unopt);
        for (auto& violation : violations) {
            violation.case_id = task.case_id;
        }
        {
            std::ofstream out(dir / "violations.jsonl");
            write_violations(violations, out);
        }
        for (const auto& violation : violations) {
            outcome.violation_counts[violation.invariant] += violation.occurrences;
        }
        outcome.status = violations.empty() ? CaseStatus::Clean : CaseStatus::Violating;

        if (!plan_.keep_binaries) {
            std::error_code ec;
            std::filesystem::remove(dir / "unopt.bin", ec);
            std::filesystem::remove(dir / "opt.bin", ec);
        }
    }

    const ToolchainConfig& config_;
    const CampaignPlan& plan_;
    std::filesystem::path campaign_dir_;
    VersionDescriptor tested_version_;
};

std::vector<CaseOutcome> load_outcomes(const std::filesystem::path& campaign_dir) {
    std::vector<CaseOutcome> outcomes;
    std::filesystem::path cases_dir = campaign_dir / "cases";
    std::error_code ec;
    if (!std::filesystem::exists(cases_dir, ec)) {
        return outcomes;
    }
    for (const auto& entry : std::filesystem::directory_iterator(cases_dir)) {
        if (!entry.is_directory()) {
            continue;
        }
        std::filesystem::path outcome_path = entry.path() / kOutcomeFile;
        if (!std::filesystem::exists(outcome_path, ec)) {
            continue; // killed mid-case; will be re-run on resume
        }
        std::ifstream in(outcome_path);
        try {
            outcomes.push_back(outcome_from_json(ordered_json::parse(in)));
        } catch (const std::exception&) {
            continue; // corrupt outcome; treated as incomplete
        }
    }
    std::sort(outcomes.begin(), outcomes.end(),
              [](const CaseOutcome& a, const CaseOutcome& b) { return a.case_id < b.case_id; });
    return outcomes;
}

} // namespace

void save_case_outcome(const std::filesystem::path& campaign_dir, const CaseOutcome& outcome) {
    std::filesystem::path dir = case_directory(campaign_dir, outcome.case_id);
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / kOutcomeFile, outcome_to_json(outcome).dump(2) + "\n");
}

CampaignRecord run_campaign(const ToolchainConfig& config, const CampaignPlan& plan,
                            const std::filesystem::path& campaign_dir, const std::string& id) {
    validate_config(config);
    if (plan.levels.empty() && plan.cases_per_level > 0 && !plan.self_check) {
        throw ConfigInvalid("no optimization levels selected");
    }

    CampaignRecord record;
    record.id = id;
    record.seed = plan.seed;
    record.levels = plan.levels;
    record.cases_per_level = plan.cases_per_level;
    record.self_check = plan.self_check;
    record.config_json = config_to_json(config);

    std::filesystem::create_directories(campaign_dir / "cases");
    ordered_json header;
    header["id"] = record.id;
    header["seed"] = record.seed;
    header["levels"] = record.levels;
    header["cases_per_level"] = record.cases_per_level;
    header["self_check"] = record.self_check;
    header["config"] = ordered_json::parse(record.config_json);
    write_file_atomic(campaign_dir / kCampaignFile, header.dump(2) + "\n");

    if (plan.cases_per_level == 0) {
        write_file_atomic(campaign_dir / kCampaignFile,
                          [&] {
                              header["tallies"] = compute_tallies({});
                              return header.dump(2) + "\n";
                          }());
        return record;
    }

    run_canary(config, campaign_dir / "canary");

    // Completed cases are the resume boundary: their directories hold an
    // outcome record and are never re-executed.
    std::vector<CaseOutcome> completed = load_outcomes(campaign_dir);
    std::set<std::string> done_ids;
    for (const auto& outcome : completed) {
        done_ids.insert(outcome.case_id);
    }

    std::vector<CaseTask> pending;
    for (const auto& level : plan.levels) {
        for (std::size_t index = 0; index < plan.cases_per_level; ++index) {
            CaseTask task;
            task.level = level;
            task.index = index;
            task.seed = derive_case_seed(plan.seed, level, index);
            task.case_id = make_case_id(level, index);
            if (!done_ids.contains(task.case_id)) {
                pending.push_back(std::move(task));
            }
        }
    }

    const std::size_t worker_count =
        plan.workers > 0 ? plan.workers
                         : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const bool has_deadline = plan.wall_budget.count() > 0;
    const auto deadline = Clock::now() + plan.wall_budget;

    std::atomic<std::size_t> next_task{0};
    std::atomic<bool> wall_budget_tripped{false};
    std::mutex sink_mutex;
    std::vector<CaseOutcome> fresh;
    CaseRunner runner(config, plan, campaign_dir);

    auto worker_body = [&] {
        for (;;) {
            std::size_t slot = next_task.fetch_add(1);
            if (slot >= pending.size()) {
                return;
            }
            if (has_deadline && Clock::now() >= deadline) {
                wall_budget_tripped = true;
                return; // remaining cases stay pending for a resume
            }
            const CaseTask& task = pending[slot];
            try {
                CaseOutcome outcome = runner.run(task);
                save_case_outcome(campaign_dir, outcome);
                std::lock_guard<std::mutex> lock(sink_mutex);
                fresh.push_back(std::move(outcome));
                std::cerr << "[" << (completed.size() + fresh.size()) << "] " << task.case_id
                          << ": " << to_string(fresh.back().status) << "\n";
            } catch (const std::exception& e) {
                // Persistence failure for one case must not take the pool
                // down; the case stays incomplete and a resume retries it.
                std::lock_guard<std::mutex> lock(sink_mutex);
                std::cerr << task.case_id << ": not recorded (" << e.what() << ")\n";
            }
        }
    };

    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < std::min(worker_count, pending.size()); ++i) {
        workers.emplace_back(worker_body);
    }
    for (auto& worker : workers) {
        worker.join();
    }
    if (wall_budget_tripped) {
        std::cerr << "wall-clock budget tripped before the case budget; "
                  << (pending.size() - std::min(next_task.load(), pending.size()))
                  << "+ case(s) left pending\n";
    } else if (!pending.empty()) {
        std::cerr << "case budget reached for all levels\n";
    }

    record.outcomes = std::move(completed);
    for (auto& outcome : fresh) {
        record.outcomes.push_back(std::move(outcome));
    }
    std::sort(record.outcomes.begin(), record.outcomes.end(),
              [](const CaseOutcome& a, const CaseOutcome& b) { return a.case_id < b.case_id; });

    header["tallies"] = compute_tallies(record.outcomes);
    write_file_atomic(campaign_dir / kCampaignFile, header.dump(2) + "\n");
    return record;
}

CampaignRecord load_campaign(const std::filesystem::path& campaign_dir) {
    std::filesystem::path header_path = campaign_dir / kCampaignFile;
    std::ifstream in(header_path);
    if (!in) {
        throw UnknownCampaign("no campaign at " + campaign_dir.string());
    }
    ordered_json header;
    try {
        header = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw CampaignStateError("corrupt campaign header: " + std::string(e.what()));
    }

    CampaignRecord record;
    try {
        record.id = header.at("id").get<std::string>();
        record.seed = header.at("seed").get<std::uint64_t>();
        record.levels = header.at("levels").get<std::vector<std::string>>();
        record.cases_per_level = header.at("cases_per_level").get<std::size_t>();
        record.self_check = header.value("self_check", false);
        record.config_json = header.at("config").dump(2);
    } catch (const std::exception& e) {
        throw CampaignStateError("campaign header fields: " + std::string(e.what()));
    }
    record.outcomes = load_outcomes(campaign_dir);

    if (header.contains("tallies")) {
        ordered_json recomputed = compute_tallies(record.outcomes);
        if (ordered_json(header.at("tallies")) != recomputed) {
            throw CampaignStateError("stored tallies disagree with per-case records");
        }
    }
    return record;
}

std::vector<Violation> check_pair(const std::filesystem::path& opt_trace_path,
                                  const std::filesystem::path& unopt_trace_path,
                                  const CheckOptions& options, const std::string& case_id) {
    Trace t_opt = read_trace_file(opt_trace_path);
    Trace t_unopt = read_trace_file(unopt_trace_path);
    std::vector<Violation> violations = check_all(t_opt, t_unopt, options);
    for (auto& violation : violations) {
        violation.case_id = case_id;
    }
    return violations;
}

void save_clusters(const std::filesystem::path& campaign_dir,
                   const std::map<std::string, std::vector<Cluster>>& clusters_by_level) {
    std::ostringstream out;
    for (const auto& [level, clusters] : clusters_by_level) {
        for (const auto& cluster : clusters) {
            ordered_json j;
            j["level"] = level;
            ordered_json entries = ordered_json::array();
            for (const auto& entry : cluster.fingerprint.entries) {
                entries.push_back(entry.to_string());
            }
            j["fingerprint"] = std::move(entries);
            j["size"] = cluster.case_ids.size();
            j["cases"] = cluster.case_ids;
            j["representative"] = cluster.representative;
            j["reduced"] = cluster.reduced_source ? ordered_json(cluster.reduced_source->string())
                                                  : ordered_json(nullptr);
            out << j.dump() << '\n';
        }
    }
    write_file_atomic(campaign_dir / kClustersFile, out.str());
}

std::map<std::string, std::vector<Cluster>> load_clusters(
    const std::filesystem::path& campaign_dir) {
    std::map<std::string, std::vector<Cluster>> by_level;
    std::ifstream in(campaign_dir / kClustersFile);
    if (!in) {
        return by_level;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        ordered_json j = ordered_json::parse(line);
        Cluster cluster;
        for (const auto& entry_text : j.at("fingerprint")) {
            std::string text = entry_text.get<std::string>();
            FingerprintEntry entry;
            if (text == "<no-violation>") {
                entry.kind = FingerprintEntry::Kind::NoViolation;
            } else if (text == "<unsupported>") {
                entry.kind = FingerprintEntry::Kind::Unsupported;
            } else {
                entry.kind = FingerprintEntry::Kind::Pass;
                entry.pass_name = text;
            }
            cluster.fingerprint.entries.push_back(std::move(entry));
        }
        for (const auto& case_id : j.at("cases")) {
            cluster.case_ids.insert(case_id.get<std::string>());
        }
        cluster.representative = j.at("representative").get<std::string>();
        if (!j.at("reduced").is_null()) {
            cluster.reduced_source = j.at("reduced").get<std::string>();
        }
        by_level[j.at("level").get<std::string>()].push_back(std::move(cluster));
    }
    return by_level;
}

} // namespace dbgdiff
