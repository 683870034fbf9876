#include "dbgdiff/trace_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbgdiff/errors.hpp"

namespace dbgdiff {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kSchemaVersion = "1";

ordered_json step_to_json(const Step& step) {
    ordered_json rec;
    rec["i"] = step.index();
    if (step.line().is_bottom()) {
        rec["line"] = nullptr;
    } else {
        rec["line"] = step.line().number();
    }
    rec["bt"] = step.backtrace();
    ordered_json vars = ordered_json::array();
    for (const auto& var : step.variables()) {
        ordered_json v;
        v["name"] = var.name;
        v["kind"] = to_string(var.kind);
        v["fn"] = var.owner_function;
        v["ptr"] = var.is_pointer;
        if (var.value.is_optimized_out()) {
            v["val"] = nullptr;
        } else {
            v["val"] = var.value.rendering();
        }
        vars.push_back(std::move(v));
    }
    rec["vars"] = std::move(vars);
    return rec;
}

VariableKind kind_from_string(const std::string& s, std::size_t record_index) {
    if (s == "global") {
        return VariableKind::Global;
    }
    if (s == "local") {
        return VariableKind::Local;
    }
    if (s == "param") {
        return VariableKind::Parameter;
    }
    throw SchemaError("unknown variable kind \"" + s + "\"", record_index);
}

Step step_from_json(const ordered_json& rec, std::size_t record_index) {
    try {
        std::size_t index = rec.at("i").get<std::size_t>();
        SourceLine line = rec.at("line").is_null()
                              ? SourceLine::bottom()
                              : SourceLine::at(rec.at("line").get<int>());
        std::set<std::string> backtrace;
        for (const auto& fn : rec.at("bt")) {
            backtrace.insert(fn.get<std::string>());
        }
        std::vector<VariableObservation> vars;
        for (const auto& v : rec.at("vars")) {
            VariableObservation obs;
            obs.name = v.at("name").get<std::string>();
            obs.kind = kind_from_string(v.at("kind").get<std::string>(), record_index);
            obs.owner_function = v.at("fn").get<std::string>();
            obs.is_pointer = v.at("ptr").get<bool>();
            obs.value = v.at("val").is_null() ? Value::optimized_out()
                                              : Value::text(v.at("val").get<std::string>());
            vars.push_back(std::move(obs));
        }
        return Step(index, line, std::move(backtrace), std::move(vars));
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("bad step record: ") + e.what(), record_index);
    }
}

} // namespace

std::string trace_schema_version() {
    return kSchemaVersion;
}

void write_trace(const Trace& trace, std::ostream& out) {
    ordered_json header;
    header["binary_id"] = trace.binary_id();
    header["truncated"] = trace.truncated();
    header["schema_version"] = kSchemaVersion;
    out << header.dump() << '\n';
    for (const auto& step : trace.steps()) {
        out << step_to_json(step).dump() << '\n';
    }
}

void write_trace_file(const Trace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open trace file for writing: " + path.string());
    }
    write_trace(trace, out);
    out.flush();
    if (!out) {
        throw Error("failed writing trace file: " + path.string());
    }
}

Trace read_trace(std::istream& in) {
    std::string line;
    std::size_t record_index = 0;
    if (!std::getline(in, line)) {
        throw SchemaError("missing trace header record", 0);
    }
    std::string binary_id;
    bool truncated = false;
    try {
        ordered_json header = ordered_json::parse(line);
        if (header.at("schema_version").get<std::string>() != kSchemaVersion) {
            throw SchemaError("unsupported schema version", 0);
        }
        binary_id = header.at("binary_id").get<std::string>();
        truncated = header.at("truncated").get<bool>();
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("bad trace header: ") + e.what(), 0);
    }

    std::vector<Step> steps;
    while (std::getline(in, line)) {
        ++record_index;
        if (line.empty()) {
            continue;
        }
        ordered_json rec;
        try {
            rec = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw SchemaError(std::string("unparsable step record: ") + e.what(), record_index);
        }
        steps.push_back(step_from_json(rec, record_index));
    }
    try {
        return Trace(std::move(steps), std::move(binary_id), truncated);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("inconsistent trace: ") + e.what(), record_index);
    }
}

Trace read_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open trace file: " + path.string());
    }
    return read_trace(in);
}

} // namespace dbgdiff
