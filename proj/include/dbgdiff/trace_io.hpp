#ifndef DBGDIFF_TRACE_IO_HPP
#define DBGDIFF_TRACE_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dbgdiff/trace.hpp"

namespace dbgdiff {

// Trace files are line-delimited JSON records, UTF-8, newline-terminated:
// one header record {"binary_id", "truncated", "schema_version":"1"} followed
// by one record per step {"i", "line", "bt", "vars"} where a null line
// encodes the bottom sentinel and a null variable value encodes optimized-out.

void write_trace(const Trace& trace, std::ostream& out);
void write_trace_file(const Trace& trace, const std::filesystem::path& path);

// Both throw SchemaError with the offending record index.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::filesystem::path& path);

std::string trace_schema_version();

} // namespace dbgdiff

#endif
