#include "dbgdiff/report.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dbgdiff {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr Invariant kInvariants[] = {Invariant::LI, Invariant::SI, Invariant::BI, Invariant::PI};

} // namespace

CampaignReport build_report(const CampaignRecord& record) {
    CampaignReport report;
    report.campaign_id = record.id;

    std::vector<std::string> level_order = record.levels;
    for (const auto& outcome : record.outcomes) {
        if (std::find(level_order.begin(), level_order.end(), outcome.level) ==
            level_order.end()) {
            level_order.push_back(outcome.level);
        }
    }

    for (const auto& level : level_order) {
        LevelReport lr;
        lr.level = level;
        for (Invariant inv : kInvariants) {
            lr.raw_violations[inv] = 0;
            lr.unique_fingerprints[inv] = 0;
        }
        std::map<Invariant, std::set<std::string>> fingerprints_per_invariant;
        std::set<std::string> fingerprints_total;
        for (const auto& outcome : record.outcomes) {
            if (outcome.level != level) {
                continue;
            }
            lr.cases_total += 1;
            switch (outcome.status) {
            case CaseStatus::Clean: lr.clean += 1; break;
            case CaseStatus::Violating: lr.violating += 1; break;
            case CaseStatus::RejectedUb: lr.rejected_ub += 1; break;
            case CaseStatus::Error: lr.errors += 1; break;
            }
            if (outcome.status != CaseStatus::Violating) {
                continue; // error cases are counted, never mixed into stats
            }
            for (const auto& [inv, count] : outcome.violation_counts) {
                lr.raw_violations[inv] += count;
            }
            if (outcome.fingerprint) {
                std::string fp = outcome.fingerprint->to_string();
                fingerprints_total.insert(fp);
                for (const auto& [inv, count] : outcome.violation_counts) {
                    if (count > 0) {
                        fingerprints_per_invariant[inv].insert(fp);
                    }
                }
            }
        }
        for (Invariant inv : kInvariants) {
            lr.unique_fingerprints[inv] = fingerprints_per_invariant[inv].size();
        }
        lr.total_unique_fingerprints = fingerprints_total.size();
        report.levels.push_back(std::move(lr));
    }
    return report;
}

std::string render_text(const CampaignReport& report,
                        const std::map<std::string, std::vector<Cluster>>& clusters_by_level) {
    std::ostringstream out;
    out << "campaign " << report.campaign_id << "\n\n";
    out << std::left << std::setw(8) << "level";
    out << "| " << std::setw(24) << "all violations";
    out << "| " << std::setw(24) << "unique fingerprints";
    out << "| total\n";
    out << std::setw(8) << "";
    for (int half = 0; half < 2; ++half) {
        out << "| ";
        for (Invariant inv : kInvariants) {
            out << std::setw(6) << to_string(inv);
        }
    }
    out << "|\n";
    out << std::string(8 + 2 + 24 + 2 + 24 + 8, '-') << "\n";
    for (const auto& lr : report.levels) {
        out << std::setw(8) << lr.level;
        out << "| ";
        for (Invariant inv : kInvariants) {
            out << std::setw(6) << lr.raw_violations.at(inv);
        }
        out << "| ";
        for (Invariant inv : kInvariants) {
            out << std::setw(6) << lr.unique_fingerprints.at(inv);
        }
        out << "| " << lr.total_unique_fingerprints << "\n";
    }
    out << "\n";
    for (const auto& lr : report.levels) {
        out << lr.level << ": " << lr.cases_total << " cases (" << lr.clean << " clean, "
            << lr.violating << " violating, " << lr.rejected_ub << " rejected, " << lr.errors
            << " errors)\n";
    }

    for (const auto& [level, clusters] : clusters_by_level) {
        out << "\nclusters at " << level << ":\n";
        for (const auto& cluster : clusters) {
            out << "  " << cluster.fingerprint.to_string() << "  size=" << cluster.case_ids.size()
                << "  representative=" << cluster.representative;
            if (cluster.reduced_source) {
                out << "  reduced=" << cluster.reduced_source->string();
            }
            out << "\n";
        }
    }
    return out.str();
}

std::string render_records(const CampaignReport& report,
                           const std::map<std::string, std::vector<Cluster>>& clusters_by_level) {
    std::ostringstream out;
    for (const auto& lr : report.levels) {
        ordered_json j;
        j["record"] = "level";
        j["campaign"] = report.campaign_id;
        j["level"] = lr.level;
        ordered_json raw;
        ordered_json unique;
        for (Invariant inv : kInvariants) {
            raw[to_string(inv)] = lr.raw_violations.at(inv);
            unique[to_string(inv)] = lr.unique_fingerprints.at(inv);
        }
        j["violations"] = std::move(raw);
        j["unique_fingerprints"] = std::move(unique);
        j["total_unique_fingerprints"] = lr.total_unique_fingerprints;
        j["cases"] = {{"total", lr.cases_total},
                      {"clean", lr.clean},
                      {"violating", lr.violating},
                      {"rejected_ub", lr.rejected_ub},
                      {"error", lr.errors}};
        out << j.dump() << '\n';
    }
    for (const auto& [level, clusters] : clusters_by_level) {
        for (const auto& cluster : clusters) {
            ordered_json j;
            j["record"] = "cluster";
            j["level"] = level;
            ordered_json entries = ordered_json::array();
            for (const auto& entry : cluster.fingerprint.entries) {
                entries.push_back(entry.to_string());
            }
            j["fingerprint"] = std::move(entries);
            j["size"] = cluster.case_ids.size();
            j["representative"] = cluster.representative;
            j["reduced"] = cluster.reduced_source ? ordered_json(cluster.reduced_source->string())
                                                  : ordered_json(nullptr);
            out << j.dump() << '\n';
        }
    }
    return out.str();
}

} // namespace dbgdiff
