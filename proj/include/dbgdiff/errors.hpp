#ifndef DBGDIFF_ERRORS_HPP
#define DBGDIFF_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dbgdiff {

// Base for everything this library throws on its own behalf.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A trace (or other record) file does not match its schema.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::size_t record_index)
        : Error(what + " (record " + std::to_string(record_index) + ")"),
          record_index_(record_index) {}
    std::size_t record_index() const { return record_index_; }

private:
    std::size_t record_index_;
};

// Debugger driver errors.
class BinaryNotFound : public Error {
public:
    using Error::Error;
};
class DebuggerLaunchFailure : public Error {
public:
    using Error::Error;
};
class EntryBreakpointNotHit : public Error {
public:
    using Error::Error;
};
// Machine-interface output we could not make sense of.
class ProtocolError : public Error {
public:
    using Error::Error;
};
// The inferior received a fatal signal. Generated programs are expected not
// to crash, so this is reported distinctly from ordinary trace termination.
class InferiorCrashed : public Error {
public:
    InferiorCrashed(const std::string& what, std::string signal_name)
        : Error(what), signal_name_(std::move(signal_name)) {}
    const std::string& signal_name() const { return signal_name_; }

private:
    std::string signal_name_;
};

// Toolchain harness errors.
class GeneratorFailure : public Error {
public:
    using Error::Error;
};
class CompileFailure : public Error {
public:
    CompileFailure(const std::string& what, std::string command_line, std::string stderr_text)
        : Error(what), command_line_(std::move(command_line)), stderr_text_(std::move(stderr_text)) {}
    const std::string& command_line() const { return command_line_; }
    const std::string& stderr_text() const { return stderr_text_; }

private:
    std::string command_line_;
    std::string stderr_text_;
};
class PassLimitUnsupported : public Error {
public:
    using Error::Error;
};
class RefusedSameLevel : public Error {
public:
    using Error::Error;
};

// Triage errors.
class BisectAborted : public Error {
public:
    BisectAborted(const std::string& what, std::string version_label)
        : Error(what + " [version " + version_label + "]"),
          version_label_(std::move(version_label)) {}
    const std::string& version_label() const { return version_label_; }

private:
    std::string version_label_;
};
class ReducerFailure : public Error {
public:
    using Error::Error;
};
class PredicateFlaky : public Error {
public:
    using Error::Error;
};

// Campaign / CLI errors.
class ConfigInvalid : public Error {
public:
    using Error::Error;
};
class CanaryFailure : public Error {
public:
    using Error::Error;
};
class UnknownCampaign : public Error {
public:
    using Error::Error;
};
// Stored aggregate tallies disagree with the per-case records they summarize.
class CampaignStateError : public Error {
public:
    using Error::Error;
};

} // namespace dbgdiff

#endif
