#include "dbgdiff/trace.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "dbgdiff/errors.hpp"
#include "dbgdiff/trace_io.hpp"
#include "synthetic.hpp"

namespace dbgdiff {
namespace {

using testing::SynthConfig;

Step make_step(std::size_t index, SourceLine line,
               std::vector<VariableObservation> vars = {}) {
    return Step(index, line, {"main"}, std::move(vars));
}

VariableObservation param(const std::string& fn, const std::string& name,
                          const Value& value) {
    VariableObservation obs;
    obs.name = name;
    obs.kind = VariableKind::Parameter;
    obs.owner_function = fn;
    obs.value = value;
    return obs;
}

TEST(SourceLineTest, BottomIsDistinctFromEveryLine) {
    EXPECT_TRUE(SourceLine::bottom().is_bottom());
    EXPECT_NE(SourceLine::bottom(), SourceLine::at(1));
    EXPECT_EQ(SourceLine::at(4), SourceLine::at(4));
    EXPECT_THROW(SourceLine::at(0), std::invalid_argument);
    EXPECT_THROW(SourceLine::at(-3), std::invalid_argument);
    EXPECT_THROW(SourceLine::bottom().number(), std::logic_error);
}

TEST(ValueTest, IntegerRenderingsAreCanonical) {
    EXPECT_EQ(Value::text("01"), Value::text("1"));
    EXPECT_EQ(Value::text("+7"), Value::text("7"));
    EXPECT_EQ(Value::text("-0"), Value::text("0"));
    EXPECT_EQ(Value::text("-042"), Value::text("-42"));
    EXPECT_NE(Value::text("1"), Value::text("-1"));
    EXPECT_EQ(Value::text("0x10"), Value::text("0x10")); // not an integer rendering
    EXPECT_NE(Value::text("<unreadable>"), Value::optimized_out());
    EXPECT_TRUE(Value::optimized_out().is_optimized_out());
}

TEST(StepTest, RejectsDuplicateVariableKeys) {
    std::vector<VariableObservation> vars{param("f", "x", Value::text("1")),
                                          param("f", "x", Value::text("2"))};
    EXPECT_THROW(Step(0, SourceLine::at(1), {"main"}, vars), std::invalid_argument);
}

TEST(StepTest, ParameterRequiresOwnerAndViceVersa) {
    VariableObservation bad_param;
    bad_param.name = "x";
    bad_param.kind = VariableKind::Parameter;
    EXPECT_THROW(Step(0, SourceLine::at(1), {}, {bad_param}), std::invalid_argument);

    VariableObservation bad_local;
    bad_local.name = "y";
    bad_local.kind = VariableKind::Local;
    bad_local.owner_function = "f";
    EXPECT_THROW(Step(0, SourceLine::at(1), {}, {bad_local}), std::invalid_argument);

    VariableObservation unnamed;
    unnamed.kind = VariableKind::Local;
    EXPECT_THROW(Step(0, SourceLine::at(1), {}, {unnamed}), std::invalid_argument);
}

TEST(TraceTest, RequiresConsecutiveIndices) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::at(1)));
    steps.push_back(make_step(2, SourceLine::at(2)));
    EXPECT_THROW(Trace(std::move(steps), "bin", false), std::invalid_argument);
}

TEST(LinesOfTest, EmptyTraceHasNoLines) {
    EXPECT_TRUE(lines_of(Trace({}, "bin", false)).empty());
}

TEST(LinesOfTest, SetSemanticsWithDuplicates) {
    std::vector<Step> steps;
    for (int line : {1, 2, 2, 4}) {
        steps.push_back(make_step(steps.size(), SourceLine::at(line)));
    }
    Trace trace(std::move(steps), "bin", false);
    EXPECT_EQ(lines_of(trace),
              (std::set<SourceLine>{SourceLine::at(1), SourceLine::at(2), SourceLine::at(4)}));
}

TEST(LinesOfTest, BottomIsAMemberLikeAnyLine) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::at(1)));
    steps.push_back(make_step(1, SourceLine::bottom()));
    Trace trace(std::move(steps), "bin", false);
    EXPECT_EQ(lines_of(trace),
              (std::set<SourceLine>{SourceLine::at(1), SourceLine::bottom()}));
}

TEST(ParametersOfTest, GlobalsAndLocalsAreNotParameters) {
    VariableObservation global;
    global.name = "g";
    global.kind = VariableKind::Global;
    global.value = Value::text("0");
    Trace trace({make_step(0, SourceLine::at(1), {global})}, "bin", false);
    EXPECT_TRUE(parameters_of(trace).empty());
}

TEST(ParametersOfTest, KeyIsOwnerFunctionAndName) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::at(1)));
    steps.push_back(make_step(1, SourceLine::at(2)));
    steps.push_back(make_step(2, SourceLine::at(3)));
    steps.push_back(make_step(3, SourceLine::at(6),
                              {param("fun", "p_6", Value::text("-1"))}));
    Trace trace(std::move(steps), "bin", false);
    EXPECT_EQ(parameters_of(trace), (std::set<ParameterKey>{{"fun", "p_6"}}));
}

TEST(ParametersOfTest, RepeatedObservationYieldsOneKey) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::at(1), {param("f", "x", Value::text("1"))}));
    steps.push_back(make_step(1, SourceLine::at(2), {param("f", "x", Value::text("2"))}));
    Trace trace(std::move(steps), "bin", false);
    EXPECT_EQ(parameters_of(trace).size(), 1u);
}

TEST(ValuesOfTest, UnknownKeyIsEmpty) {
    Trace trace({}, "bin", false);
    EXPECT_TRUE(values_of(trace, {"f", "x"}).empty());
}

TEST(ValuesOfTest, SetSemanticsAcrossSteps) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::at(1), {param("f", "x", Value::text("1"))}));
    steps.push_back(make_step(1, SourceLine::at(2), {param("f", "x", Value::text("1"))}));
    steps.push_back(make_step(2, SourceLine::at(3), {param("f", "x", Value::text("-1"))}));
    Trace trace(std::move(steps), "bin", false);
    EXPECT_EQ(values_of(trace, {"f", "x"}),
              (std::set<Value>{Value::text("1"), Value::text("-1")}));
}

TEST(ValuesOfTest, OptimizedOutIsObservable) {
    Trace trace({make_step(0, SourceLine::at(1), {param("f", "x", Value::optimized_out())})},
                "bin", false);
    EXPECT_EQ(values_of(trace, {"f", "x"}), (std::set<Value>{Value::optimized_out()}));
}

TEST(TraceIoTest, RoundTripsRandomTraces) {
    std::mt19937_64 rng(0xD1FF5EED);
    for (int i = 0; i < 200; ++i) {
        Trace trace = testing::random_trace(rng);
        std::stringstream buffer;
        write_trace(trace, buffer);
        Trace round = read_trace(buffer);
        EXPECT_EQ(trace, round) << "iteration " << i;
    }
}

TEST(TraceIoTest, RoundTripsBottomAndOptimizedOut) {
    std::vector<Step> steps;
    steps.push_back(make_step(0, SourceLine::bottom(),
                              {param("f", "x", Value::optimized_out())}));
    Trace trace(std::move(steps), "edge", true);
    std::stringstream buffer;
    write_trace(trace, buffer);
    Trace round = read_trace(buffer);
    EXPECT_EQ(trace, round);
    EXPECT_TRUE(round.truncated());
    EXPECT_TRUE(round.steps().at(0).line().is_bottom());
    EXPECT_TRUE(round.steps().at(0).variables().at(0).value.is_optimized_out());
}

TEST(TraceIoTest, MissingHeaderIsSchemaError) {
    std::stringstream buffer;
    EXPECT_THROW(read_trace(buffer), SchemaError);
}

TEST(TraceIoTest, TruncatedRecordIsSchemaErrorWithIndex) {
    std::stringstream buffer;
    buffer << R"({"binary_id":"b","truncated":false,"schema_version":"1"})" << "\n";
    buffer << R"({"i":0,"line":1,"bt":[],"vars":[]})" << "\n";
    buffer << R"({"i":1,"line":2,"bt":[)" << "\n"; // cut mid-record
    try {
        read_trace(buffer);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.record_index(), 2u);
    }
}

TEST(TraceIoTest, UnknownKindIsSchemaError) {
    std::stringstream buffer;
    buffer << R"({"binary_id":"b","truncated":false,"schema_version":"1"})" << "\n";
    buffer << R"({"i":0,"line":1,"bt":[],"vars":[{"name":"x","kind":"static","fn":"","ptr":false,"val":"0"}]})"
           << "\n";
    EXPECT_THROW(read_trace(buffer), SchemaError);
}

TEST(MaskPointerValuesTest, OnlyPointerValuesChange) {
    VariableObservation pointer;
    pointer.name = "p";
    pointer.kind = VariableKind::Global;
    pointer.is_pointer = true;
    pointer.value = Value::text("0x7ffe12 <g>");
    VariableObservation scalar;
    scalar.name = "x";
    scalar.kind = VariableKind::Global;
    scalar.value = Value::text("3");
    Trace trace({make_step(0, SourceLine::at(1), {pointer, scalar})}, "bin", false);
    Trace masked = mask_pointer_values(trace);
    EXPECT_EQ(masked.steps().at(0).variables().at(0).value, Value::text("<masked pointer>"));
    EXPECT_EQ(masked.steps().at(0).variables().at(1).value, Value::text("3"));
}

// lines_of and parameters_of are monotone under step addition.
TEST(TraceProperties, SubsequenceMonotonicity) {
    std::mt19937_64 rng(0xBADC0DE);
    for (int i = 0; i < 100; ++i) {
        Trace big = testing::random_trace(rng);
        if (big.steps().empty()) {
            continue;
        }
        // Take a subsequence and reindex.
        std::vector<Step> subset;
        for (const auto& step : big.steps()) {
            if (std::bernoulli_distribution(0.5)(rng)) {
                subset.emplace_back(subset.size(), step.line(), step.backtrace(),
                                    step.variables());
            }
        }
        Trace small(std::move(subset), big.binary_id(), false);
        auto small_lines = lines_of(small);
        auto big_lines = lines_of(big);
        EXPECT_TRUE(std::includes(big_lines.begin(), big_lines.end(), small_lines.begin(),
                                  small_lines.end()));
        auto small_params = parameters_of(small);
        auto big_params = parameters_of(big);
        EXPECT_TRUE(std::includes(big_params.begin(), big_params.end(), small_params.begin(),
                                  small_params.end()));
    }
}

} // namespace
} // namespace dbgdiff
