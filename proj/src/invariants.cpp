#include "dbgdiff/invariants.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dbgdiff/errors.hpp"

namespace dbgdiff {

const char* to_string(Invariant inv) {
    switch (inv) {
    case Invariant::LI: return "LI";
    case Invariant::BI: return "BI";
    case Invariant::SI: return "SI";
    case Invariant::PI: return "PI";
    }
    return "?";
}

std::optional<Invariant> invariant_from_string(const std::string& name) {
    if (name == "LI") return Invariant::LI;
    if (name == "BI") return Invariant::BI;
    if (name == "SI") return Invariant::SI;
    if (name == "PI") return Invariant::PI;
    return std::nullopt;
}

bool violation_before(const Violation& a, const Violation& b) {
    if (a.invariant != b.invariant) {
        return a.invariant < b.invariant;
    }
    if (a.opt_step != b.opt_step) {
        return a.opt_step < b.opt_step;
    }
    return a.evidence < b.evidence;
}

namespace {

std::map<SourceLine, std::vector<const Step*>> steps_by_line(const Trace& trace) {
    std::map<SourceLine, std::vector<const Step*>> by_line;
    for (const auto& step : trace.steps()) {
        by_line[step.line()].push_back(&step);
    }
    return by_line;
}

// Parameter keys with a pointer-typed observation anywhere in either trace;
// memory layout is not stable across executions, so these are discarded
// wholesale.
std::set<ParameterKey> pointer_tainted_parameters(const Trace& a, const Trace& b) {
    std::set<ParameterKey> tainted;
    for (const Trace* trace : {&a, &b}) {
        for (const auto& step : trace->steps()) {
            for (const auto& var : step.variables()) {
                if (var.kind == VariableKind::Parameter && var.is_pointer) {
                    tainted.insert({var.owner_function, var.name});
                }
            }
        }
    }
    return tainted;
}

} // namespace

std::vector<Violation> check_li(const Trace& t_opt, const Trace& t_unopt) {
    std::set<SourceLine> unopt_lines = lines_of(t_unopt);
    // line -> (first opt step, occurrence count)
    std::map<SourceLine, std::pair<std::size_t, std::size_t>> offending;
    for (const auto& step : t_opt.steps()) {
        if (step.line().is_bottom() || unopt_lines.contains(step.line())) {
            continue;
        }
        auto [it, inserted] = offending.try_emplace(step.line(), step.index(), 0);
        it->second.second += 1;
    }
    std::vector<Violation> violations;
    for (const auto& [line, hit] : offending) {
        Violation v;
        v.invariant = Invariant::LI;
        v.opt_step = hit.first;
        v.evidence = LineEvidence{line};
        v.occurrences = hit.second;
        violations.push_back(std::move(v));
    }
    std::sort(violations.begin(), violations.end(), violation_before);
    return violations;
}

std::vector<Violation> check_bi(const Trace& t_opt, const Trace& t_unopt) {
    auto unopt_by_line = steps_by_line(t_unopt);
    // (line, extra frames) -> violation being merged
    std::map<std::pair<SourceLine, std::set<std::string>>, Violation> merged;
    for (const auto& step : t_opt.steps()) {
        auto match = unopt_by_line.find(step.line());
        if (match == unopt_by_line.end()) {
            continue; // the line itself is missing; that is LI's finding
        }
        bool subset_somewhere = false;
        std::set<std::string> frame_union;
        for (const Step* unopt_step : match->second) {
            if (std::includes(unopt_step->backtrace().begin(), unopt_step->backtrace().end(),
                              step.backtrace().begin(), step.backtrace().end())) {
                subset_somewhere = true;
                break;
            }
            frame_union.insert(unopt_step->backtrace().begin(), unopt_step->backtrace().end());
        }
        if (subset_somewhere) {
            continue;
        }
        std::set<std::string> extra;
        std::set_difference(step.backtrace().begin(), step.backtrace().end(), frame_union.begin(),
                            frame_union.end(), std::inserter(extra, extra.end()));
        auto key = std::make_pair(step.line(), extra);
        auto it = merged.find(key);
        if (it == merged.end()) {
            Violation v;
            v.invariant = Invariant::BI;
            v.opt_step = step.index();
            v.unopt_step = match->second.front()->index();
            v.evidence = BacktraceEvidence{step.line(), std::move(extra)};
            merged.emplace(std::move(key), std::move(v));
        } else {
            it->second.occurrences += 1;
        }
    }
    std::vector<Violation> violations;
    for (auto& [key, v] : merged) {
        violations.push_back(std::move(v));
    }
    std::sort(violations.begin(), violations.end(), violation_before);
    return violations;
}

std::vector<Violation> check_si(const Trace& t_opt, const Trace& t_unopt,
                                const CheckOptions& options) {
    auto unopt_by_line = steps_by_line(t_unopt);
    std::map<std::pair<SourceLine, std::set<VariableKey>>, Violation> merged;
    for (const auto& step : t_opt.steps()) {
        if (step.line().is_bottom()) {
            continue; // no meaningful scope to compare
        }
        auto match = unopt_by_line.find(step.line());
        if (match == unopt_by_line.end()) {
            continue;
        }
        std::set<VariableKey> opt_keys = step.variable_keys();
        if (options.si_universal) {
            bool subset_somewhere = false;
            std::set<VariableKey> key_union;
            for (const Step* unopt_step : match->second) {
                std::set<VariableKey> unopt_keys = unopt_step->variable_keys();
                if (std::includes(unopt_keys.begin(), unopt_keys.end(), opt_keys.begin(),
                                  opt_keys.end())) {
                    subset_somewhere = true;
                    break;
                }
                key_union.merge(unopt_keys);
            }
            if (subset_somewhere) {
                continue;
            }
            std::set<VariableKey> extra;
            std::set_difference(opt_keys.begin(), opt_keys.end(), key_union.begin(),
                                key_union.end(), std::inserter(extra, extra.end()));
            auto key = std::make_pair(step.line(), extra);
            auto it = merged.find(key);
            if (it == merged.end()) {
                Violation v;
                v.invariant = Invariant::SI;
                v.opt_step = step.index();
                v.unopt_step = match->second.front()->index();
                v.evidence = ScopeEvidence{step.line(), std::move(extra)};
                merged.emplace(std::move(key), std::move(v));
            } else {
                it->second.occurrences += 1;
            }
        } else {
            for (const Step* unopt_step : match->second) {
                std::set<VariableKey> unopt_keys = unopt_step->variable_keys();
                if (std::includes(unopt_keys.begin(), unopt_keys.end(), opt_keys.begin(),
                                  opt_keys.end())) {
                    continue;
                }
                std::set<VariableKey> extra;
                std::set_difference(opt_keys.begin(), opt_keys.end(), unopt_keys.begin(),
                                    unopt_keys.end(), std::inserter(extra, extra.end()));
                auto key = std::make_pair(step.line(), extra);
                auto it = merged.find(key);
                if (it == merged.end()) {
                    Violation v;
                    v.invariant = Invariant::SI;
                    v.opt_step = step.index();
                    v.unopt_step = unopt_step->index();
                    v.evidence = ScopeEvidence{step.line(), std::move(extra)};
                    merged.emplace(std::move(key), std::move(v));
                } else {
                    it->second.occurrences += 1;
                }
            }
        }
    }
    std::vector<Violation> violations;
    for (auto& [key, v] : merged) {
        violations.push_back(std::move(v));
    }
    std::sort(violations.begin(), violations.end(), violation_before);
    return violations;
}

std::vector<Violation> check_pi(const Trace& t_opt, const Trace& t_unopt) {
    std::set<ParameterKey> opt_params = parameters_of(t_opt);
    std::set<ParameterKey> unopt_params = parameters_of(t_unopt);
    std::set<ParameterKey> tainted = pointer_tainted_parameters(t_opt, t_unopt);

    std::vector<Violation> violations;
    for (const auto& key : opt_params) {
        if (!unopt_params.contains(key) || tainted.contains(key)) {
            continue;
        }
        std::set<Value> unopt_values = values_of(t_unopt, key);
        std::set<Value> offending;
        for (const auto& value : values_of(t_opt, key)) {
            if (!value.is_optimized_out() && !unopt_values.contains(value)) {
                offending.insert(value);
            }
        }
        if (offending.empty()) {
            continue;
        }
        std::size_t first_step = 0;
        std::size_t occurrences = 0;
        bool found = false;
        for (const auto& step : t_opt.steps()) {
            for (const auto& var : step.variables()) {
                if (var.kind == VariableKind::Parameter && var.owner_function == key.owner_function &&
                    var.name == key.name && offending.contains(var.value)) {
                    if (!found) {
                        first_step = step.index();
                        found = true;
                    }
                    occurrences += 1;
                }
            }
        }
        Violation v;
        v.invariant = Invariant::PI;
        v.opt_step = first_step;
        v.evidence = ParameterEvidence{key, std::move(offending)};
        v.occurrences = occurrences;
        violations.push_back(std::move(v));
    }
    std::sort(violations.begin(), violations.end(), violation_before);
    return violations;
}

std::vector<Violation> check_all(const Trace& t_opt, const Trace& t_unopt,
                                 const CheckOptions& options) {
    std::vector<Violation> all = check_li(t_opt, t_unopt);
    auto append = [&all](std::vector<Violation> part) {
        for (auto& v : part) {
            all.push_back(std::move(v));
        }
    };
    append(check_bi(t_opt, t_unopt));
    append(check_si(t_opt, t_unopt, options));
    append(check_pi(t_opt, t_unopt));
    return all;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json line_to_json(SourceLine line) {
    if (line.is_bottom()) {
        return nullptr;
    }
    return line.number();
}

SourceLine line_from_json(const ordered_json& j) {
    return j.is_null() ? SourceLine::bottom() : SourceLine::at(j.get<int>());
}

ordered_json evidence_to_json(const Evidence& evidence) {
    ordered_json out;
    if (const auto* li = std::get_if<LineEvidence>(&evidence)) {
        out["line"] = line_to_json(li->line);
    } else if (const auto* bi = std::get_if<BacktraceEvidence>(&evidence)) {
        out["line"] = line_to_json(bi->line);
        out["extra_frames"] = bi->extra_frames;
    } else if (const auto* si = std::get_if<ScopeEvidence>(&evidence)) {
        out["line"] = line_to_json(si->line);
        ordered_json vars = ordered_json::array();
        for (const auto& key : si->extra_variables) {
            vars.push_back({{"name", key.name},
                            {"kind", to_string(key.kind)},
                            {"fn", key.owner_function}});
        }
        out["extra_vars"] = std::move(vars);
    } else if (const auto* pi = std::get_if<ParameterEvidence>(&evidence)) {
        out["fn"] = pi->key.owner_function;
        out["name"] = pi->key.name;
        ordered_json values = ordered_json::array();
        for (const auto& value : pi->offending_values) {
            values.push_back(value.rendering());
        }
        out["values"] = std::move(values);
    }
    return out;
}

Evidence evidence_from_json(Invariant inv, const ordered_json& j) {
    switch (inv) {
    case Invariant::LI:
        return LineEvidence{line_from_json(j.at("line"))};
    case Invariant::BI: {
        BacktraceEvidence e;
        e.line = line_from_json(j.at("line"));
        for (const auto& f : j.at("extra_frames")) {
            e.extra_frames.insert(f.get<std::string>());
        }
        return e;
    }
    case Invariant::SI: {
        ScopeEvidence e;
        e.line = line_from_json(j.at("line"));
        for (const auto& v : j.at("extra_vars")) {
            VariableKey key;
            key.name = v.at("name").get<std::string>();
            std::string kind = v.at("kind").get<std::string>();
            if (kind == "global") {
                key.kind = VariableKind::Global;
            } else if (kind == "local") {
                key.kind = VariableKind::Local;
            } else if (kind == "param") {
                key.kind = VariableKind::Parameter;
            } else {
                throw Error("unknown variable kind in evidence: " + kind);
            }
            key.owner_function = v.at("fn").get<std::string>();
            e.extra_variables.insert(std::move(key));
        }
        return e;
    }
    case Invariant::PI: {
        ParameterEvidence e;
        e.key.owner_function = j.at("fn").get<std::string>();
        e.key.name = j.at("name").get<std::string>();
        for (const auto& v : j.at("values")) {
            e.offending_values.insert(Value::text(v.get<std::string>()));
        }
        return e;
    }
    }
    throw Error("unreachable invariant kind");
}

} // namespace

std::string violation_to_record(const Violation& violation) {
    ordered_json rec;
    rec["case_id"] = violation.case_id;
    rec["invariant"] = to_string(violation.invariant);
    rec["opt_step"] = violation.opt_step;
    if (violation.unopt_step) {
        rec["unopt_step"] = *violation.unopt_step;
    } else {
        rec["unopt_step"] = nullptr;
    }
    rec["evidence"] = evidence_to_json(violation.evidence);
    rec["occurrences"] = violation.occurrences;
    return rec.dump();
}

Violation violation_from_record(const std::string& record_line, std::size_t record_index) {
    try {
        ordered_json rec = ordered_json::parse(record_line);
        Violation v;
        v.case_id = rec.at("case_id").get<std::string>();
        auto inv = invariant_from_string(rec.at("invariant").get<std::string>());
        if (!inv) {
            throw Error("unknown invariant " + rec.at("invariant").get<std::string>());
        }
        v.invariant = *inv;
        v.opt_step = rec.at("opt_step").get<std::size_t>();
        if (!rec.at("unopt_step").is_null()) {
            v.unopt_step = rec.at("unopt_step").get<std::size_t>();
        }
        v.evidence = evidence_from_json(v.invariant, rec.at("evidence"));
        v.occurrences = rec.at("occurrences").get<std::size_t>();
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("bad violation record: ") + e.what(), record_index);
    }
}

void write_violations(const std::vector<Violation>& violations, std::ostream& out) {
    for (const auto& v : violations) {
        out << violation_to_record(v) << '\n';
    }
}

std::vector<Violation> read_violations(std::istream& in) {
    std::vector<Violation> violations;
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            violations.push_back(violation_from_record(line, index));
        }
        ++index;
    }
    return violations;
}

std::string describe(const Violation& violation) {
    std::ostringstream out;
    out << to_string(violation.invariant) << " at opt step " << violation.opt_step;
    if (const auto* li = std::get_if<LineEvidence>(&violation.evidence)) {
        out << ": line " << li->line.number() << " never executed unoptimized";
    } else if (const auto* bi = std::get_if<BacktraceEvidence>(&violation.evidence)) {
        out << ": line "
            << (bi->line.is_bottom() ? std::string("<bottom>")
                                     : std::to_string(bi->line.number()))
            << " shows spurious frames {";
        bool first = true;
        for (const auto& f : bi->extra_frames) {
            out << (first ? "" : ", ") << f;
            first = false;
        }
        out << "}";
    } else if (const auto* si = std::get_if<ScopeEvidence>(&violation.evidence)) {
        out << ": line " << si->line.number() << " shows out-of-scope variables {";
        bool first = true;
        for (const auto& key : si->extra_variables) {
            out << (first ? "" : ", ") << key.name;
            first = false;
        }
        out << "}";
    } else if (const auto* pi = std::get_if<ParameterEvidence>(&violation.evidence)) {
        out << ": parameter " << pi->key.name << " of " << pi->key.owner_function
            << " assumes {";
        bool first = true;
        for (const auto& value : pi->offending_values) {
            out << (first ? "" : ", ") << value.rendering();
            first = false;
        }
        out << "} never seen unoptimized";
    }
    out << " (x" << violation.occurrences << ")";
    return out.str();
}

} // namespace dbgdiff
