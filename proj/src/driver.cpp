#include "dbgdiff/driver.hpp"

#include <algorithm>
#include <map>

#include "dbgdiff/errors.hpp"
#include "dbgdiff/mi_parser.hpp"
#include "dbgdiff/subprocess.hpp"

namespace dbgdiff {

DriverOptions driver_options(const ToolchainConfig& config) {
    DriverOptions options;
    options.debugger_binary = config.debugger.binary;
    options.extra_args = config.debugger.extra_args;
    options.entry_symbol = config.entry_symbol;
    options.step_limit = config.step_limit;
    options.command_timeout = config.command_timeout;
    options.collect_globals = config.collect_globals;
    options.descend_into_other_units = config.descend_into_other_units;
    return options;
}

namespace {

constexpr const char* kOptimizedOutText = "<optimized out>";

std::string strip_frame_decorations(const std::string& name) {
    // "printf@plt" and friends; the set semantics want bare names.
    std::size_t at = name.find('@');
    if (at != std::string::npos) {
        return name.substr(0, at);
    }
    return name;
}

// One gdb subprocess speaking the machine interface over its stdio.
class GdbMiSession {
public:
    GdbMiSession(const std::filesystem::path& binary, const DriverOptions& options)
        : timeout_(options.command_timeout) {
        // Extra flags go before the positional executable; gdb would read a
        // trailing argument as a core file.
        std::vector<std::string> argv{options.debugger_binary, "--interpreter=mi2", "-nx", "-q"};
        for (const auto& arg : options.extra_args) {
            argv.push_back(arg);
        }
        argv.push_back(binary.string());
        try {
            process_.emplace(argv);
        } catch (const Error& e) {
            throw DebuggerLaunchFailure(e.what());
        }
        // Banner block ends with the first prompt.
        if (!read_until_prompt(nullptr)) {
            throw DebuggerLaunchFailure("debugger produced no prompt");
        }
    }

    struct CommandOutcome {
        mi::Record result;                // the ^... record; klass empty on timeout
        std::vector<mi::Record> async;    // *,+,= records seen before completion
        bool timed_out = false;
    };

    // Sends a command and reads its response block (through the prompt).
    CommandOutcome command(const std::string& text) {
        CommandOutcome outcome;
        if (!process_->write_line(text, timeout_)) {
            throw ProtocolError("debugger went away while sending: " + text);
        }
        if (!read_until_prompt(&outcome)) {
            outcome.timed_out = true;
        }
        return outcome;
    }

    // Sends an execution command (^running) and waits for the next *stopped.
    CommandOutcome exec(const std::string& text) {
        CommandOutcome outcome = command(text);
        if (outcome.timed_out || outcome.result.klass == "error") {
            return outcome;
        }
        if (find_stopped(outcome.async) != nullptr) {
            return outcome;
        }
        // The stop arrives asynchronously, followed by its own prompt.
        for (;;) {
            CommandOutcome wait;
            if (!read_until_prompt(&wait)) {
                outcome.timed_out = true;
                return outcome;
            }
            for (auto& record : wait.async) {
                outcome.async.push_back(std::move(record));
            }
            if (find_stopped(outcome.async) != nullptr) {
                return outcome;
            }
        }
    }

    static const mi::Record* find_stopped(const std::vector<mi::Record>& records) {
        for (const auto& record : records) {
            if (record.kind == mi::RecordKind::ExecAsync && record.klass == "stopped") {
                return &record;
            }
        }
        return nullptr;
    }

private:
    // Collects records until a prompt. Returns false on timeout or EOF.
    bool read_until_prompt(CommandOutcome* outcome) {
        auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                return false;
            }
            PipeProcess::ReadResult read = process_->read_line(left);
            if (read.status == PipeProcess::ReadResult::Status::Timeout) {
                return false;
            }
            if (read.status == PipeProcess::ReadResult::Status::Eof) {
                return false;
            }
            mi::Record record = mi::parse_line(read.line);
            switch (record.kind) {
            case mi::RecordKind::Prompt:
                return true;
            case mi::RecordKind::Result:
                if (outcome != nullptr) {
                    outcome->result = std::move(record);
                }
                break;
            case mi::RecordKind::ExecAsync:
            case mi::RecordKind::StatusAsync:
            case mi::RecordKind::NotifyAsync:
                if (outcome != nullptr) {
                    outcome->async.push_back(std::move(record));
                }
                break;
            default:
                break; // stream records and inferior noise
            }
        }
    }

    std::optional<PipeProcess> process_;
    std::chrono::milliseconds timeout_;
};

struct FrameInfo {
    std::string func;
    std::optional<int> line;
    std::string fullname; // empty when the frame has no source info
};

std::optional<int> parse_int_field(const mi::Tuple& tuple, std::string_view name) {
    auto text = tuple.string_field(name);
    if (!text) {
        return std::nullopt;
    }
    try {
        return std::stoi(*text);
    } catch (const std::exception&) {
        throw ProtocolError("non-numeric field " + std::string(name) + ": " + *text);
    }
}

FrameInfo parse_frame(const mi::Tuple& frame) {
    FrameInfo info;
    info.func = frame.string_field("func").value_or("??");
    info.line = parse_int_field(frame, "line");
    info.fullname = frame.string_field("fullname").value_or("");
    if (info.fullname.empty()) {
        info.fullname = frame.string_field("file").value_or("");
    }
    return info;
}

std::vector<FrameInfo> parse_frame_list(const mi::Record& result) {
    std::vector<FrameInfo> frames;
    const mi::Value* stack = result.results.find("stack");
    if (stack == nullptr || !stack->is_list()) {
        throw ProtocolError("missing stack in frame listing");
    }
    for (const auto& [name, value] : stack->as_list().entries) {
        if (!value.is_tuple()) {
            throw ProtocolError("frame entry is not a tuple");
        }
        frames.push_back(parse_frame(value.as_tuple()));
    }
    return frames;
}

bool type_is_pointer(const std::string& type) {
    return type.find('*') != std::string::npos;
}

struct GlobalVariable {
    std::string name;
    bool is_pointer = false;
};

} // namespace

Step normalize_stop(const RawStop& raw, std::size_t index) {
    if (raw.reason != RawStop::Reason::StepComplete) {
        throw ProtocolError("cannot normalize a non-step stop");
    }
    SourceLine line = SourceLine::bottom();
    if (raw.line && *raw.line > 0) {
        line = SourceLine::at(*raw.line);
    } else if (raw.line && *raw.line < 0) {
        throw ProtocolError("negative line number " + std::to_string(*raw.line));
    }

    std::set<std::string> backtrace;
    for (const auto& frame : raw.frames) {
        std::string name = strip_frame_decorations(frame);
        if (!name.empty() && name != "??") {
            backtrace.insert(std::move(name));
        }
    }

    // Dedup by key, last observation wins (shadowed variables are reported
    // once per scope by some debuggers).
    std::map<VariableKey, VariableObservation> by_key;
    for (const auto& raw_var : raw.variables) {
        if (raw_var.name.empty() || raw_var.name.find('@') != std::string::npos) {
            continue; // "name@entry" style synthetics
        }
        VariableObservation obs;
        obs.name = raw_var.name;
        obs.kind = raw_var.kind;
        obs.owner_function = raw_var.kind == VariableKind::Parameter
                                 ? strip_frame_decorations(raw_var.owner_function)
                                 : "";
        if (obs.kind == VariableKind::Parameter && obs.owner_function.empty()) {
            throw ProtocolError("parameter " + obs.name + " with no owning function");
        }
        obs.is_pointer = raw_var.is_pointer;
        if (!raw_var.text || *raw_var.text == kOptimizedOutText) {
            obs.value = Value::optimized_out();
        } else {
            obs.value = Value::text(*raw_var.text);
        }
        by_key[obs.key()] = std::move(obs);
    }
    std::vector<VariableObservation> variables;
    variables.reserve(by_key.size());
    for (auto& [key, obs] : by_key) {
        variables.push_back(std::move(obs));
    }
    return Step(index, line, std::move(backtrace), std::move(variables));
}

namespace {

class TraceExtractor {
public:
    TraceExtractor(const std::filesystem::path& binary, const DriverOptions& options)
        : binary_(binary), options_(options), session_(binary, options) {}

    Trace run() {
        hit_entry_breakpoint();
        if (options_.collect_globals) {
            discover_globals();
        }

        std::vector<Step> steps;
        bool truncated = false;
        std::size_t skip_ops = 0;
        for (;;) {
            StopInfo stop = inspect_current_stop();
            if (!stop.in_unit && !stop.entry_on_stack) {
                break; // left the program's own code for good
            }
            if (!stop.in_unit && stop.has_source && !options_.descend_into_other_units) {
                // Out-of-unit stop with the entry still below: step out
                // instead of descending.
                if (++skip_ops > 4096) {
                    truncated = true;
                    break;
                }
                StepOutcome outcome = issue("-exec-finish");
                if (outcome == StepOutcome::Exited) {
                    break;
                }
                if (outcome == StepOutcome::Timeout) {
                    truncated = true;
                    break;
                }
                continue;
            }
            // In-unit stops, stops with no source info at all (recorded as
            // bottom), and any sourced stop when descending is enabled.
            steps.push_back(normalize_stop(collect_raw_stop(stop), steps.size()));
            if (steps.size() >= options_.step_limit) {
                truncated = true;
                break;
            }
            StepOutcome outcome = issue("-exec-step");
            if (outcome == StepOutcome::Exited) {
                break;
            }
            if (outcome == StepOutcome::Timeout) {
                truncated = true;
                break;
            }
        }
        return Trace(std::move(steps), binary_.filename().string(), truncated);
    }

private:
    enum class StepOutcome { Stopped, Exited, Timeout };

    struct StopInfo {
        std::vector<FrameInfo> frames;
        bool in_unit = false;
        bool has_source = false;
        bool entry_on_stack = false;
    };

    void hit_entry_breakpoint() {
        // Cross-run pointer stability; best effort (fails in containers
        // without the personality syscall, which only costs a warning).
        session_.command("-gdb-set disable-randomization on");
        auto insert = session_.command("-break-insert " + options_.entry_symbol);
        if (insert.timed_out) {
            throw DebuggerLaunchFailure("timeout inserting entry breakpoint");
        }
        if (insert.result.klass != "done") {
            throw EntryBreakpointNotHit("cannot break at " + options_.entry_symbol + ": " +
                                        insert.result.results.string_field("msg").value_or(""));
        }
        auto run = session_.exec("-exec-run");
        if (run.timed_out) {
            throw DebuggerLaunchFailure("timeout launching inferior");
        }
        if (run.result.klass == "error") {
            throw DebuggerLaunchFailure("run failed: " +
                                        run.result.results.string_field("msg").value_or(""));
        }
        const mi::Record* stopped = GdbMiSession::find_stopped(run.async);
        if (stopped == nullptr) {
            throw DebuggerLaunchFailure("no stop after run");
        }
        std::string reason = stopped->results.string_field("reason").value_or("");
        if (reason == "signal-received") {
            throw InferiorCrashed("inferior crashed before reaching " + options_.entry_symbol,
                                  stopped->results.string_field("signal-name").value_or("?"));
        }
        if (reason != "breakpoint-hit") {
            throw EntryBreakpointNotHit("program never reached " + options_.entry_symbol +
                                        " (stop reason: " + reason + ")");
        }
        const mi::Value* frame = stopped->results.find("frame");
        if (frame == nullptr || !frame->is_tuple()) {
            throw ProtocolError("breakpoint stop without frame");
        }
        traced_fullname_ = parse_frame(frame->as_tuple()).fullname;
        if (traced_fullname_.empty()) {
            throw EntryBreakpointNotHit("entry symbol has no source info (missing debug info?)");
        }
    }

    void discover_globals() {
        auto outcome = session_.command("-symbol-info-variables");
        if (outcome.timed_out || outcome.result.klass != "done") {
            return; // older debugger; globals are simply not collected
        }
        const mi::Value* symbols = outcome.result.results.find("symbols");
        if (symbols == nullptr || !symbols->is_tuple()) {
            return;
        }
        const mi::Value* debug = symbols->as_tuple().find("debug");
        if (debug == nullptr || !debug->is_list()) {
            return;
        }
        for (const auto& [name, file_entry] : debug->as_list().entries) {
            if (!file_entry.is_tuple()) {
                continue;
            }
            const mi::Tuple& file_tuple = file_entry.as_tuple();
            std::string fullname = file_tuple.string_field("fullname").value_or("");
            if (fullname != traced_fullname_) {
                continue;
            }
            const mi::Value* syms = file_tuple.find("symbols");
            if (syms == nullptr || !syms->is_list()) {
                continue;
            }
            for (const auto& [sym_name, sym] : syms->as_list().entries) {
                if (!sym.is_tuple()) {
                    continue;
                }
                auto var_name = sym.as_tuple().string_field("name");
                if (!var_name) {
                    continue;
                }
                GlobalVariable global;
                global.name = *var_name;
                global.is_pointer =
                    type_is_pointer(sym.as_tuple().string_field("type").value_or(""));
                globals_.push_back(std::move(global));
            }
        }
    }

    StopInfo inspect_current_stop() {
        auto outcome = session_.command("-stack-list-frames");
        if (outcome.timed_out) {
            throw ProtocolError("timeout listing frames");
        }
        if (outcome.result.klass != "done") {
            throw ProtocolError("frame listing failed: " +
                                outcome.result.results.string_field("msg").value_or(""));
        }
        StopInfo info;
        info.frames = parse_frame_list(outcome.result);
        if (info.frames.empty()) {
            throw ProtocolError("empty stack at a stop");
        }
        info.has_source = !info.frames.front().fullname.empty();
        info.in_unit = info.frames.front().fullname == traced_fullname_;
        for (const auto& frame : info.frames) {
            if (frame.func == options_.entry_symbol) {
                info.entry_on_stack = true;
                break;
            }
        }
        return info;
    }

    RawStop collect_raw_stop(const StopInfo& stop) {
        RawStop raw;
        raw.reason = RawStop::Reason::StepComplete;
        raw.line = stop.frames.front().line;
        for (const auto& frame : stop.frames) {
            raw.frames.push_back(frame.func);
        }
        collect_frame_variables(stop.frames.front().func, raw.variables);
        if (stop.in_unit) {
            collect_globals(raw.variables);
        }
        return raw;
    }

    void collect_frame_variables(const std::string& innermost_func,
                                 std::vector<RawVariable>& out) {
        auto outcome = session_.command("-stack-list-variables --simple-values");
        if (outcome.timed_out) {
            throw ProtocolError("timeout listing variables");
        }
        if (outcome.result.klass != "done") {
            return; // e.g. no symbol table for this frame
        }
        const mi::Value* variables = outcome.result.results.find("variables");
        if (variables == nullptr || !variables->is_list()) {
            throw ProtocolError("missing variables list");
        }
        for (const auto& [name, entry] : variables->as_list().entries) {
            if (!entry.is_tuple()) {
                throw ProtocolError("variable entry is not a tuple");
            }
            const mi::Tuple& tuple = entry.as_tuple();
            RawVariable var;
            auto var_name = tuple.string_field("name");
            if (!var_name) {
                throw ProtocolError("variable without a name");
            }
            var.name = *var_name;
            bool is_arg = tuple.string_field("arg").value_or("0") == "1";
            var.kind = is_arg ? VariableKind::Parameter : VariableKind::Local;
            var.owner_function = is_arg ? innermost_func : "";
            var.is_pointer = type_is_pointer(tuple.string_field("type").value_or(""));
            auto value = tuple.string_field("value");
            if (value) {
                var.text = *value;
            } else {
                // Aggregates get no value under --simple-values.
                var.text = evaluate_expression(var.name);
            }
            out.push_back(std::move(var));
        }
    }

    void collect_globals(std::vector<RawVariable>& out) {
        for (const auto& global : globals_) {
            RawVariable var;
            var.name = global.name;
            var.kind = VariableKind::Global;
            var.is_pointer = global.is_pointer;
            var.text = evaluate_expression(global.name);
            out.push_back(std::move(var));
        }
    }

    std::optional<std::string> evaluate_expression(const std::string& name) {
        auto outcome = session_.command("-data-evaluate-expression " + name);
        if (outcome.timed_out) {
            throw ProtocolError("timeout evaluating " + name);
        }
        if (outcome.result.klass != "done") {
            return "<unreadable>";
        }
        return outcome.result.results.string_field("value");
    }

    StepOutcome issue(const std::string& exec_command) {
        auto outcome = session_.exec(exec_command);
        if (outcome.timed_out) {
            return StepOutcome::Timeout;
        }
        if (outcome.result.klass == "error") {
            throw ProtocolError(exec_command + " failed: " +
                                outcome.result.results.string_field("msg").value_or(""));
        }
        const mi::Record* stopped = GdbMiSession::find_stopped(outcome.async);
        if (stopped == nullptr) {
            throw ProtocolError("no stop record after " + exec_command);
        }
        std::string reason = stopped->results.string_field("reason").value_or("");
        if (reason == "exited-normally" || reason == "exited") {
            return StepOutcome::Exited;
        }
        if (reason == "signal-received" || reason == "exited-signalled") {
            throw InferiorCrashed("inferior received a signal while stepping",
                                  stopped->results.string_field("signal-name").value_or("?"));
        }
        return StepOutcome::Stopped;
    }

    std::filesystem::path binary_;
    DriverOptions options_;
    GdbMiSession session_;
    std::string traced_fullname_;
    std::vector<GlobalVariable> globals_;
};

} // namespace

Trace extract_trace(const std::filesystem::path& binary, const DriverOptions& options) {
    if (options.step_limit < 1) {
        throw Error("step_limit must be >= 1");
    }
    std::error_code ec;
    if (!std::filesystem::exists(binary, ec)) {
        throw BinaryNotFound("no such binary: " + binary.string());
    }
    TraceExtractor extractor(binary, options);
    return extractor.run();
}

} // namespace dbgdiff
