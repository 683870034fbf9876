#include "dbgdiff/trace.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <utility>

namespace dbgdiff {

SourceLine SourceLine::at(int line) {
    if (line < 1) {
        throw std::invalid_argument("source line must be >= 1, got " + std::to_string(line));
    }
    return SourceLine(line);
}

int SourceLine::number() const {
    if (is_bottom()) {
        throw std::logic_error("bottom line has no number");
    }
    return number_;
}

namespace {

bool is_integer_rendering(const std::string& s) {
    std::size_t i = (s.size() > 0 && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
    if (i >= s.size()) {
        return false;
    }
    return std::all_of(s.begin() + i, s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// No leading zeros, no '+', and no '-' on zero, so integer equality is
// textual equality.
std::string canonical_integer(const std::string& s) {
    bool negative = s[0] == '-';
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    while (i + 1 < s.size() && s[i] == '0') {
        ++i;
    }
    std::string digits = s.substr(i);
    if (negative && digits != "0") {
        return "-" + digits;
    }
    return digits;
}

} // namespace

Value Value::text(std::string rendering) {
    if (is_integer_rendering(rendering)) {
        rendering = canonical_integer(rendering);
    }
    return Value(std::move(rendering));
}

const std::string& Value::rendering() const {
    if (optimized_out_) {
        throw std::logic_error("optimized-out value has no rendering");
    }
    return text_;
}

const char* to_string(VariableKind kind) {
    switch (kind) {
    case VariableKind::Global: return "global";
    case VariableKind::Local: return "local";
    case VariableKind::Parameter: return "param";
    }
    return "?";
}

Step::Step(std::size_t index, SourceLine line, std::set<std::string> backtrace,
           std::vector<VariableObservation> variables)
    : index_(index), line_(line), backtrace_(std::move(backtrace)),
      variables_(std::move(variables)) {
    std::set<VariableKey> seen;
    for (const auto& var : variables_) {
        if (var.name.empty()) {
            throw std::invalid_argument("variable observation with empty name");
        }
        if ((var.kind == VariableKind::Parameter) != !var.owner_function.empty()) {
            throw std::invalid_argument("owner function must be set exactly for parameters: " +
                                        var.name);
        }
        if (!seen.insert(var.key()).second) {
            throw std::invalid_argument("duplicate variable key in step: " + var.name);
        }
    }
}

std::set<VariableKey> Step::variable_keys() const {
    std::set<VariableKey> keys;
    for (const auto& var : variables_) {
        keys.insert(var.key());
    }
    return keys;
}

Trace::Trace(std::vector<Step> steps, std::string binary_id, bool truncated)
    : steps_(std::move(steps)), binary_id_(std::move(binary_id)), truncated_(truncated) {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        if (steps_[i].index() != i) {
            throw std::invalid_argument("step indices must be consecutive from 0");
        }
    }
}

std::set<SourceLine> lines_of(const Trace& trace) {
    std::set<SourceLine> lines;
    for (const auto& step : trace.steps()) {
        lines.insert(step.line());
    }
    return lines;
}

std::set<ParameterKey> parameters_of(const Trace& trace) {
    std::set<ParameterKey> keys;
    for (const auto& step : trace.steps()) {
        for (const auto& var : step.variables()) {
            if (var.kind == VariableKind::Parameter) {
                keys.insert({var.owner_function, var.name});
            }
        }
    }
    return keys;
}

std::set<Value> values_of(const Trace& trace, const ParameterKey& key) {
    std::set<Value> values;
    for (const auto& step : trace.steps()) {
        for (const auto& var : step.variables()) {
            if (var.kind == VariableKind::Parameter && var.owner_function == key.owner_function &&
                var.name == key.name) {
                values.insert(var.value);
            }
        }
    }
    return values;
}

Trace mask_pointer_values(const Trace& trace) {
    std::vector<Step> steps;
    steps.reserve(trace.steps().size());
    for (const auto& step : trace.steps()) {
        std::vector<VariableObservation> vars = step.variables();
        for (auto& var : vars) {
            if (var.is_pointer && !var.value.is_optimized_out()) {
                var.value = Value::text("<masked pointer>");
            }
        }
        steps.emplace_back(step.index(), step.line(), step.backtrace(), std::move(vars));
    }
    return Trace(std::move(steps), trace.binary_id(), trace.truncated());
}

} // namespace dbgdiff
