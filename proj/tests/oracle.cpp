#include "oracle.hpp"

#include <algorithm>

namespace dbgdiff::testing {

namespace {

// Linear-scan helpers; the whole point is to avoid the production code's
// indexed lookups.

bool name_in(const std::string& name, const std::set<std::string>& names) {
    for (const auto& candidate : names) {
        if (candidate == name) {
            return true;
        }
    }
    return false;
}

bool backtrace_subset(const Step& a, const Step& b) {
    for (const auto& name : a.backtrace()) {
        if (!name_in(name, b.backtrace())) {
            return false;
        }
    }
    return true;
}

bool key_in(const VariableKey& key, const Step& step) {
    for (const auto& obs : step.variables()) {
        if (obs.key() == key) {
            return true;
        }
    }
    return false;
}

bool keys_subset(const Step& a, const Step& b) {
    for (const auto& obs : a.variables()) {
        if (!key_in(obs.key(), b)) {
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<Violation> oracle_check_li(const Trace& t_opt, const Trace& t_unopt) {
    std::vector<Violation> out;
    for (const Step& s : t_opt.steps()) {
        if (s.line().is_bottom()) {
            continue; // L(unopt) ∪ {⊥} always contains ⊥
        }
        bool executed_unopt = false;
        for (const Step& u : t_unopt.steps()) {
            if (u.line() == s.line()) {
                executed_unopt = true;
            }
        }
        if (executed_unopt) {
            continue;
        }
        bool earlier = false;
        for (const Step& prior : t_opt.steps()) {
            if (prior.index() < s.index() && prior.line() == s.line()) {
                earlier = true;
            }
        }
        if (earlier) {
            continue; // already reported, cited at its first step
        }
        std::size_t occurrences = 0;
        for (const Step& again : t_opt.steps()) {
            if (again.line() == s.line()) {
                ++occurrences;
            }
        }
        Violation v;
        v.invariant = Invariant::LI;
        v.opt_step = s.index();
        v.evidence = LineEvidence{s.line()};
        v.occurrences = occurrences;
        out.push_back(std::move(v));
    }
    std::sort(out.begin(), out.end(), violation_before);
    return out;
}

std::vector<Violation> oracle_check_bi(const Trace& t_opt, const Trace& t_unopt) {
    std::vector<Violation> out;
    for (const Step& s : t_opt.steps()) {
        bool has_same_line = false;
        bool subset_of_some = false;
        for (const Step& u : t_unopt.steps()) {
            if (u.line() == s.line()) {
                has_same_line = true;
                if (backtrace_subset(s, u)) {
                    subset_of_some = true;
                }
            }
        }
        if (!has_same_line || subset_of_some) {
            continue; // a missing line is LI's finding
        }
        std::set<std::string> extra;
        for (const auto& name : s.backtrace()) {
            bool seen = false;
            for (const Step& u : t_unopt.steps()) {
                if (u.line() == s.line() && name_in(name, u.backtrace())) {
                    seen = true;
                }
            }
            if (!seen) {
                extra.insert(name);
            }
        }
        std::size_t first_unopt = 0;
        bool found_unopt = false;
        for (const Step& u : t_unopt.steps()) {
            if (u.line() == s.line() && !found_unopt) {
                first_unopt = u.index();
                found_unopt = true;
            }
        }
        bool merged = false;
        for (Violation& prior : out) {
            const auto& evidence = std::get<BacktraceEvidence>(prior.evidence);
            if (evidence.line == s.line() && evidence.extra_frames == extra) {
                prior.occurrences += 1;
                merged = true;
            }
        }
        if (!merged) {
            Violation v;
            v.invariant = Invariant::BI;
            v.opt_step = s.index();
            v.unopt_step = first_unopt;
            v.evidence = BacktraceEvidence{s.line(), std::move(extra)};
            out.push_back(std::move(v));
        }
    }
    std::sort(out.begin(), out.end(), violation_before);
    return out;
}

std::vector<Violation> oracle_check_si(const Trace& t_opt, const Trace& t_unopt,
                                       bool si_universal) {
    std::vector<Violation> out;
    auto merge_or_insert = [&out](const Step& s, std::size_t unopt_index,
                                  std::set<VariableKey> extra) {
        bool merged = false;
        for (Violation& prior : out) {
            const auto& evidence = std::get<ScopeEvidence>(prior.evidence);
            if (evidence.line == s.line() && evidence.extra_variables == extra) {
                prior.occurrences += 1;
                merged = true;
            }
        }
        if (!merged) {
            Violation v;
            v.invariant = Invariant::SI;
            v.opt_step = s.index();
            v.unopt_step = unopt_index;
            v.evidence = ScopeEvidence{s.line(), std::move(extra)};
            out.push_back(std::move(v));
        }
    };

    for (const Step& s : t_opt.steps()) {
        if (s.line().is_bottom()) {
            continue; // no meaningful scope at a bottom stop
        }
        if (si_universal) {
            bool has_same_line = false;
            bool subset_of_some = false;
            for (const Step& u : t_unopt.steps()) {
                if (u.line() == s.line()) {
                    has_same_line = true;
                    if (keys_subset(s, u)) {
                        subset_of_some = true;
                    }
                }
            }
            if (!has_same_line || subset_of_some) {
                continue;
            }
            std::set<VariableKey> extra;
            for (const auto& obs : s.variables()) {
                bool seen = false;
                for (const Step& u : t_unopt.steps()) {
                    if (u.line() == s.line() && key_in(obs.key(), u)) {
                        seen = true;
                    }
                }
                if (!seen) {
                    extra.insert(obs.key());
                }
            }
            std::size_t first_unopt = 0;
            bool found_unopt = false;
            for (const Step& u : t_unopt.steps()) {
                if (u.line() == s.line() && !found_unopt) {
                    first_unopt = u.index();
                    found_unopt = true;
                }
            }
            merge_or_insert(s, first_unopt, std::move(extra));
        } else {
            for (const Step& u : t_unopt.steps()) {
                if (u.line() != s.line() || u.line().is_bottom()) {
                    continue;
                }
                if (keys_subset(s, u)) {
                    continue;
                }
                std::set<VariableKey> extra;
                for (const auto& obs : s.variables()) {
                    if (!key_in(obs.key(), u)) {
                        extra.insert(obs.key());
                    }
                }
                merge_or_insert(s, u.index(), std::move(extra));
            }
        }
    }
    std::sort(out.begin(), out.end(), violation_before);
    return out;
}

std::vector<Violation> oracle_check_pi(const Trace& t_opt, const Trace& t_unopt) {
    std::vector<Violation> out;
    std::vector<ParameterKey> processed;
    for (const Step& s : t_opt.steps()) {
        for (const auto& obs : s.variables()) {
            if (obs.kind != VariableKind::Parameter) {
                continue;
            }
            ParameterKey key{obs.owner_function, obs.name};
            bool done = false;
            for (const auto& prior : processed) {
                if (prior == key) {
                    done = true;
                }
            }
            if (done) {
                continue;
            }
            processed.push_back(key);

            bool in_unopt = false;
            for (const Step& u : t_unopt.steps()) {
                for (const auto& uobs : u.variables()) {
                    if (uobs.kind == VariableKind::Parameter &&
                        uobs.owner_function == key.owner_function && uobs.name == key.name) {
                        in_unopt = true;
                    }
                }
            }
            if (!in_unopt) {
                continue;
            }

            bool pointer_tainted = false;
            for (const Trace* trace : {&t_opt, &t_unopt}) {
                for (const Step& any : trace->steps()) {
                    for (const auto& aobs : any.variables()) {
                        if (aobs.kind == VariableKind::Parameter && aobs.is_pointer &&
                            aobs.owner_function == key.owner_function && aobs.name == key.name) {
                            pointer_tainted = true;
                        }
                    }
                }
            }
            if (pointer_tainted) {
                continue;
            }

            std::set<Value> offending;
            for (const Step& o : t_opt.steps()) {
                for (const auto& oobs : o.variables()) {
                    if (oobs.kind != VariableKind::Parameter ||
                        oobs.owner_function != key.owner_function || oobs.name != key.name ||
                        oobs.value.is_optimized_out()) {
                        continue;
                    }
                    bool seen_unopt = false;
                    for (const Step& u : t_unopt.steps()) {
                        for (const auto& uobs : u.variables()) {
                            if (uobs.kind == VariableKind::Parameter &&
                                uobs.owner_function == key.owner_function &&
                                uobs.name == key.name && uobs.value == oobs.value) {
                                seen_unopt = true;
                            }
                        }
                    }
                    if (!seen_unopt) {
                        offending.insert(oobs.value);
                    }
                }
            }
            if (offending.empty()) {
                continue;
            }

            std::size_t first_step = 0;
            std::size_t occurrences = 0;
            bool found = false;
            for (const Step& o : t_opt.steps()) {
                for (const auto& oobs : o.variables()) {
                    if (oobs.kind == VariableKind::Parameter &&
                        oobs.owner_function == key.owner_function && oobs.name == key.name) {
                        bool is_offending = false;
                        for (const auto& value : offending) {
                            if (value == oobs.value) {
                                is_offending = true;
                            }
                        }
                        if (is_offending) {
                            if (!found) {
                                first_step = o.index();
                                found = true;
                            }
                            ++occurrences;
                        }
                    }
                }
            }
            Violation v;
            v.invariant = Invariant::PI;
            v.opt_step = first_step;
            v.evidence = ParameterEvidence{key, std::move(offending)};
            v.occurrences = occurrences;
            out.push_back(std::move(v));
        }
    }
    std::sort(out.begin(), out.end(), violation_before);
    return out;
}

std::vector<Violation> oracle_check_all(const Trace& t_opt, const Trace& t_unopt,
                                        bool si_universal) {
    std::vector<Violation> all = oracle_check_li(t_opt, t_unopt);
    for (auto& v : oracle_check_bi(t_opt, t_unopt)) {
        all.push_back(std::move(v));
    }
    for (auto& v : oracle_check_si(t_opt, t_unopt, si_universal)) {
        all.push_back(std::move(v));
    }
    for (auto& v : oracle_check_pi(t_opt, t_unopt)) {
        all.push_back(std::move(v));
    }
    return all;
}

} // namespace dbgdiff::testing
