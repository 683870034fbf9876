#include "dbgdiff/mi_parser.hpp"

#include <cctype>

#include "dbgdiff/errors.hpp"

namespace dbgdiff::mi {

const Value* Tuple::find(std::string_view name) const {
    for (const auto& [key, value] : entries) {
        if (key == name) {
            return &value;
        }
    }
    return nullptr;
}

std::optional<std::string> Tuple::string_field(std::string_view name) const {
    const Value* v = find(name);
    if (v == nullptr || !v->is_string()) {
        return std::nullopt;
    }
    return v->as_string();
}

namespace {

class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    char take() { return text_[pos_++]; }

    bool accept(char c) {
        if (!done() && peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw ProtocolError("malformed mi record: " + why + " at offset " +
                            std::to_string(pos_) + " in \"" + std::string(text_) + "\"");
    }

    // c-string with gdb's escaping: backslash escapes plus octal for
    // non-ASCII bytes.
    std::string cstring() {
        expect('"');
        std::string out;
        while (!done()) {
            char c = take();
            if (c == '"') {
                return out;
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            if (done()) {
                fail("dangling escape");
            }
            char e = take();
            switch (e) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case 'f': out += '\f'; break;
            case 'v': out += '\v'; break;
            case 'b': out += '\b'; break;
            case 'a': out += '\a'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default:
                if (e >= '0' && e <= '7') {
                    int v = e - '0';
                    for (int i = 0; i < 2 && !done() && peek() >= '0' && peek() <= '7'; ++i) {
                        v = v * 8 + (take() - '0');
                    }
                    out += static_cast<char>(v);
                } else {
                    out += e;
                }
                break;
            }
        }
        fail("unterminated c-string");
    }

    std::string identifier() {
        std::string out;
        while (!done()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
                out += take();
            } else {
                break;
            }
        }
        if (out.empty()) {
            fail("expected identifier");
        }
        return out;
    }

    Value value() {
        if (done()) {
            fail("expected value");
        }
        switch (peek()) {
        case '"':
            return Value{cstring()};
        case '{': {
            take();
            Tuple tuple;
            if (!accept('}')) {
                do {
                    tuple.entries.push_back(result());
                } while (accept(','));
                expect('}');
            }
            return Value{std::move(tuple)};
        }
        case '[': {
            take();
            List list;
            if (!accept(']')) {
                do {
                    if (peek() == '"' || peek() == '{' || peek() == '[') {
                        list.entries.emplace_back(std::string(), value());
                    } else {
                        list.entries.push_back(result());
                    }
                } while (accept(','));
                expect(']');
            }
            return Value{std::move(list)};
        }
        default:
            fail("expected value");
        }
    }

    std::pair<std::string, Value> result() {
        std::string name = identifier();
        expect('=');
        return {std::move(name), value()};
    }

    Tuple result_sequence() {
        Tuple tuple;
        while (accept(',')) {
            tuple.entries.push_back(result());
        }
        if (!done()) {
            fail("trailing garbage");
        }
        return tuple;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

Record parse_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.remove_suffix(1);
    }

    Record record;
    if (line.empty()) {
        record.text = std::string(line);
        return record;
    }
    if (line == "(gdb)" || line == "(gdb) ") {
        record.kind = RecordKind::Prompt;
        return record;
    }

    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        ++i;
    }
    std::string token(line.substr(0, i));
    if (i >= line.size()) {
        record.text = std::string(line);
        return record;
    }

    char prefix = line[i];
    std::string_view rest = line.substr(i + 1);
    switch (prefix) {
    case '^': record.kind = RecordKind::Result; break;
    case '*': record.kind = RecordKind::ExecAsync; break;
    case '+': record.kind = RecordKind::StatusAsync; break;
    case '=': record.kind = RecordKind::NotifyAsync; break;
    case '~': record.kind = RecordKind::ConsoleStream; break;
    case '@': record.kind = RecordKind::TargetStream; break;
    case '&': record.kind = RecordKind::LogStream; break;
    default:
        record.text = std::string(line);
        return record;
    }
    record.token = std::move(token);

    Cursor cursor(rest);
    switch (record.kind) {
    case RecordKind::ConsoleStream:
    case RecordKind::TargetStream:
    case RecordKind::LogStream:
        record.text = cursor.cstring();
        break;
    default:
        record.klass = cursor.identifier();
        record.results = cursor.result_sequence();
        break;
    }
    return record;
}

} // namespace dbgdiff::mi
