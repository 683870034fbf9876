#ifndef DBGDIFF_MI_PARSER_HPP
#define DBGDIFF_MI_PARSER_HPP

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dbgdiff::mi {

// Parser for the gdb machine interface (gdb/mi) output grammar:
//
//   result-record    → [token] "^" result-class ("," result)*
//   async-record     → [token] ("*" | "+" | "=") async-class ("," result)*
//   stream-record    → ("~" | "@" | "&") c-string
//   result           → variable "=" value
//   value            → c-string | tuple | list
//   tuple            → "{}" | "{" result ("," result)* "}"
//   list             → "[]" | "[" value ("," value)* "]" | "[" result ("," result)* "]"
//
// Lines that do not start with a record prefix (inferior output, prompts from
// CLI passthrough, blank lines) are reported as Unknown rather than rejected,
// since gdb interleaves them freely with MI records.

struct Value;

// Tuples keep entry order and tolerate duplicate keys; gdb emits both.
struct Tuple {
    std::vector<std::pair<std::string, Value>> entries;

    const Value* find(std::string_view name) const;
    std::optional<std::string> string_field(std::string_view name) const;
};

struct List {
    // Bare values carry an empty name; "result" elements carry their key.
    std::vector<std::pair<std::string, Value>> entries;
};

struct Value {
    std::variant<std::string, Tuple, List> data;

    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_tuple() const { return std::holds_alternative<Tuple>(data); }
    bool is_list() const { return std::holds_alternative<List>(data); }
    const std::string& as_string() const { return std::get<std::string>(data); }
    const Tuple& as_tuple() const { return std::get<Tuple>(data); }
    const List& as_list() const { return std::get<List>(data); }
};

enum class RecordKind {
    Result,        // ^done, ^running, ^error, ^exit, ^connected
    ExecAsync,     // *stopped, *running
    StatusAsync,   // +download, ...
    NotifyAsync,   // =thread-created, ...
    ConsoleStream, // ~"..."
    TargetStream,  // @"..."
    LogStream,     // &"..."
    Prompt,        // (gdb)
    Unknown,       // anything else (inferior output)
};

struct Record {
    RecordKind kind = RecordKind::Unknown;
    std::string token;   // leading digits, if any
    std::string klass;   // result-class or async-class
    Tuple results;       // top-level results of result/async records
    std::string text;    // stream payload (unescaped) or the raw unknown line
};

// Parses one line of debugger output (without the trailing newline).
// Throws ProtocolError when a line that starts like an MI record is malformed.
Record parse_line(std::string_view line);

} // namespace dbgdiff::mi

#endif
