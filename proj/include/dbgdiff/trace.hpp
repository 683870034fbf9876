#ifndef DBGDIFF_TRACE_HPP
#define DBGDIFF_TRACE_HPP

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace dbgdiff {

// A source line observed at a debugger stop. The bottom sentinel models
// dropped line information (e.g. the artificial line 0 some compilers emit);
// it is distinct from every real line number.
class SourceLine {
public:
    static SourceLine bottom() { return SourceLine(0); }
    static SourceLine at(int line); // line >= 1, throws std::invalid_argument otherwise

    bool is_bottom() const { return number_ == 0; }
    int number() const; // throws std::logic_error on bottom

    auto operator<=>(const SourceLine&) const = default;

private:
    explicit SourceLine(int n) : number_(n) {}
    int number_; // 0 encodes bottom
};

// A variable's rendering at one stop: either the debugger's textual value or
// the optimized-out sentinel. Integer renderings are canonicalized so that
// "01", "+1" and "1" compare equal; everything else is exact debugger text.
class Value {
public:
    static Value optimized_out() { return Value(); }
    static Value text(std::string rendering);

    bool is_optimized_out() const { return optimized_out_; }
    const std::string& rendering() const; // throws std::logic_error when optimized out

    auto operator<=>(const Value&) const = default;

private:
    Value() : optimized_out_(true) {}
    explicit Value(std::string t) : optimized_out_(false), text_(std::move(t)) {}
    bool optimized_out_;
    std::string text_; // empty when optimized out
};

enum class VariableKind { Global, Local, Parameter };

const char* to_string(VariableKind kind); // "global" | "local" | "param"

// Identity of a function parameter: two functions may reuse a parameter name,
// so the pair is the unit the parameters invariant reasons about.
struct ParameterKey {
    std::string owner_function;
    std::string name;

    auto operator<=>(const ParameterKey&) const = default;
};

// Identity of any visible variable, used for scope comparisons.
struct VariableKey {
    std::string name;
    VariableKind kind = VariableKind::Local;
    std::string owner_function; // nonempty iff kind == Parameter

    auto operator<=>(const VariableKey&) const = default;
};

struct VariableObservation {
    std::string name;
    VariableKind kind = VariableKind::Local;
    std::string owner_function; // nonempty iff kind == Parameter
    bool is_pointer = false;
    Value value = Value::optimized_out();

    VariableKey key() const { return {name, kind, owner_function}; }

    auto operator<=>(const VariableObservation&) const = default;
};

// One debugger stop: the reported line, the set of function names on the
// stack, and the variables visible in the current frame. Backtraces are
// unordered; no two observations share a (name, kind, owner) key.
class Step {
public:
    Step(std::size_t index, SourceLine line, std::set<std::string> backtrace,
         std::vector<VariableObservation> variables); // throws std::invalid_argument

    std::size_t index() const { return index_; }
    SourceLine line() const { return line_; }
    const std::set<std::string>& backtrace() const { return backtrace_; }
    const std::vector<VariableObservation>& variables() const { return variables_; }

    std::set<VariableKey> variable_keys() const;

    bool operator==(const Step&) const = default;

private:
    std::size_t index_;
    SourceLine line_;
    std::set<std::string> backtrace_;
    std::vector<VariableObservation> variables_;
};

// An extracted stepping trace. Immutable after construction; step indices are
// consecutive from 0. `truncated` records that a step limit or timeout ended
// extraction before the program exited, so downstream consumers can treat the
// result as lower confidence.
class Trace {
public:
    Trace(std::vector<Step> steps, std::string binary_id, bool truncated);

    const std::vector<Step>& steps() const { return steps_; }
    const std::string& binary_id() const { return binary_id_; }
    bool truncated() const { return truncated_; }

    bool operator==(const Trace&) const = default;

private:
    std::vector<Step> steps_;
    std::string binary_id_;
    bool truncated_;
};

// L(P): every line the trace stops on, bottom included when present.
std::set<SourceLine> lines_of(const Trace& trace);

// Par(P): every (owner function, name) pair observed as a parameter.
std::set<ParameterKey> parameters_of(const Trace& trace);

// Values(v, P): every value the parameter assumes across the trace,
// optimized-out included when observed.
std::set<Value> values_of(const Trace& trace, const ParameterKey& key);

// Copy with every pointer-typed observation's value replaced by a fixed
// marker. Used when comparing traces across runs, where ASLR perturbs
// pointer renderings.
Trace mask_pointer_values(const Trace& trace);

} // namespace dbgdiff

#endif
