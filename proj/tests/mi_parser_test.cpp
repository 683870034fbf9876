#include "dbgdiff/mi_parser.hpp"

#include <gtest/gtest.h>

#include "dbgdiff/errors.hpp"

namespace dbgdiff::mi {
namespace {

TEST(MiParserTest, ResultRecordDone) {
    Record r = parse_line("^done");
    EXPECT_EQ(r.kind, RecordKind::Result);
    EXPECT_EQ(r.klass, "done");
    EXPECT_TRUE(r.results.entries.empty());
}

TEST(MiParserTest, ResultRecordWithToken) {
    Record r = parse_line("42^error,msg=\"no symbol\"");
    EXPECT_EQ(r.kind, RecordKind::Result);
    EXPECT_EQ(r.token, "42");
    EXPECT_EQ(r.klass, "error");
    EXPECT_EQ(r.results.string_field("msg"), "no symbol");
}

TEST(MiParserTest, Prompt) {
    EXPECT_EQ(parse_line("(gdb)").kind, RecordKind::Prompt);
    EXPECT_EQ(parse_line("(gdb) ").kind, RecordKind::Prompt);
}

TEST(MiParserTest, StoppedRecordFromRealGdb) {
    // Captured from gdb 12 --interpreter=mi2.
    Record r = parse_line(
        R"(*stopped,reason="end-stepping-range",frame={addr="0x0000560811a86137",)"
        R"(func="add",args=[{name="x",value="1"},{name="y",value="2"}],file="t2.c",)"
        R"(fullname="/tmp/t2.c",line="2",arch="i386:x86-64"},thread-id="1",)"
        R"(stopped-threads="all",core="0")");
    EXPECT_EQ(r.kind, RecordKind::ExecAsync);
    EXPECT_EQ(r.klass, "stopped");
    EXPECT_EQ(r.results.string_field("reason"), "end-stepping-range");
    const Value* frame = r.results.find("frame");
    ASSERT_NE(frame, nullptr);
    ASSERT_TRUE(frame->is_tuple());
    EXPECT_EQ(frame->as_tuple().string_field("func"), "add");
    EXPECT_EQ(frame->as_tuple().string_field("line"), "2");
    const Value* args = frame->as_tuple().find("args");
    ASSERT_NE(args, nullptr);
    ASSERT_TRUE(args->is_list());
    ASSERT_EQ(args->as_list().entries.size(), 2u);
    EXPECT_EQ(args->as_list().entries[0].second.as_tuple().string_field("name"), "x");
}

TEST(MiParserTest, StackListFramesList) {
    Record r = parse_line(
        R"(^done,stack=[frame={level="0",func="add",line="1"},)"
        R"(frame={level="1",func="main",line="2"}])");
    const Value* stack = r.results.find("stack");
    ASSERT_NE(stack, nullptr);
    ASSERT_TRUE(stack->is_list());
    ASSERT_EQ(stack->as_list().entries.size(), 2u);
    EXPECT_EQ(stack->as_list().entries[0].first, "frame");
    EXPECT_EQ(stack->as_list().entries[1].second.as_tuple().string_field("func"), "main");
}

TEST(MiParserTest, VariablesWithArgMarker) {
    Record r = parse_line(
        R"(^done,variables=[{name="a",arg="1",type="int",value="27"},)"
        R"({name="c",type="int",value="5"}])");
    const Value* variables = r.results.find("variables");
    ASSERT_NE(variables, nullptr);
    const auto& entries = variables->as_list().entries;
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].second.as_tuple().string_field("arg"), "1");
    EXPECT_EQ(entries[1].second.as_tuple().string_field("arg"), std::nullopt);
}

TEST(MiParserTest, ConsoleStreamUnescapes) {
    Record r = parse_line(R"(~"Breakpoint 1, main () at t.c:2\n")");
    EXPECT_EQ(r.kind, RecordKind::ConsoleStream);
    EXPECT_EQ(r.text, "Breakpoint 1, main () at t.c:2\n");
}

TEST(MiParserTest, OctalEscapes) {
    Record r = parse_line("~\"caf\\303\\251\\n\"");
    EXPECT_EQ(r.text, "caf\xc3\xa9\n");
}

TEST(MiParserTest, NotifyAndStatusAsync) {
    EXPECT_EQ(parse_line("=thread-created,id=\"1\",group-id=\"i1\"").kind,
              RecordKind::NotifyAsync);
    EXPECT_EQ(parse_line("+download,section=\".text\"").kind, RecordKind::StatusAsync);
}

TEST(MiParserTest, EmptyTupleAndList) {
    Record r = parse_line(R"(*stopped,frame={},args=[])");
    EXPECT_TRUE(r.results.find("frame")->as_tuple().entries.empty());
    EXPECT_TRUE(r.results.find("args")->as_list().entries.empty());
}

TEST(MiParserTest, ListOfBareValues) {
    Record r = parse_line(R"(^done,thread-groups=["i1","i2"])");
    const auto& entries = r.results.find("thread-groups")->as_list().entries;
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].first, "");
    EXPECT_EQ(entries[0].second.as_string(), "i1");
}

TEST(MiParserTest, DuplicateKeysAreKept) {
    Record r = parse_line(R"(^done,x="1",x="2")");
    EXPECT_EQ(r.results.entries.size(), 2u);
    EXPECT_EQ(r.results.string_field("x"), "1"); // first wins on lookup
}

TEST(MiParserTest, InferiorNoiseIsUnknownNotError) {
    EXPECT_EQ(parse_line("checksum = 5FCA6B8D").kind, RecordKind::Unknown);
    EXPECT_EQ(parse_line("").kind, RecordKind::Unknown);
    EXPECT_EQ(parse_line("12345").kind, RecordKind::Unknown);
}

TEST(MiParserTest, MalformedRecordThrowsProtocolError) {
    EXPECT_THROW(parse_line("^done,msg=\"unterminated"), ProtocolError);
    EXPECT_THROW(parse_line("*stopped,frame={func=\"a\""), ProtocolError);
    EXPECT_THROW(parse_line("^done,=\"novar\""), ProtocolError);
    EXPECT_THROW(parse_line("^done,x=\"1\"garbage"), ProtocolError);
}

TEST(MiParserTest, CarriageReturnsAreStripped) {
    Record r = parse_line("^running\r");
    EXPECT_EQ(r.klass, "running");
}

TEST(MiParserTest, DeeplyNestedRealWorldRecord) {
    // Shape of -symbol-info-variables output.
    Record r = parse_line(
        R"(^done,symbols={debug=[{filename="t.c",fullname="/tmp/t.c",)"
        R"(symbols=[{line="1",name="g1",type="int",description="int g1;"},)"
        R"({line="1",name="gp",type="int *",description="int *gp;"}]}]})");
    const Value* symbols = r.results.find("symbols");
    ASSERT_TRUE(symbols->is_tuple());
    const Value* debug = symbols->as_tuple().find("debug");
    ASSERT_TRUE(debug->is_list());
    const auto& file = debug->as_list().entries.at(0).second.as_tuple();
    EXPECT_EQ(file.string_field("fullname"), "/tmp/t.c");
    const auto& syms = file.find("symbols")->as_list().entries;
    ASSERT_EQ(syms.size(), 2u);
    EXPECT_EQ(syms[1].second.as_tuple().string_field("type"), "int *");
}

} // namespace
} // namespace dbgdiff::mi
