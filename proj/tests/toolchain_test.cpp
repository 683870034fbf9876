#include "dbgdiff/toolchain.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "dbgdiff/errors.hpp"
#include "test_util.hpp"

namespace dbgdiff {
namespace {

using testing::TempDir;
using testing::minigen_path;
using testing::write_text;

ToolchainConfig gcc_config() {
    ToolchainConfig config;
    config.compiler_template = "gcc {opt} {src} -o {out}";
    config.levels = {"-O1"};
    config.generator_template = minigen_path() + " --seed {seed} --out {out}";
    return config;
}

TEST(ConfigValidationTest, AcceptsAWellFormedConfig) {
    EXPECT_NO_THROW(validate_config(gcc_config()));
}

TEST(ConfigValidationTest, RejectsMissingPlaceholders) {
    ToolchainConfig config = gcc_config();
    config.compiler_template = "gcc {src} -o {out}"; // no {opt}
    EXPECT_THROW(validate_config(config), ConfigInvalid);
    config.compiler_template = "gcc {opt} {opt} {src} -o {out}"; // twice
    EXPECT_THROW(validate_config(config), ConfigInvalid);
}

TEST(ConfigValidationTest, RejectsBaselineAmongLevels) {
    ToolchainConfig config = gcc_config();
    config.levels = {"-O0"};
    EXPECT_THROW(validate_config(config), ConfigInvalid);
}

TEST(ConfigValidationTest, RejectsDuplicateVersionLabels) {
    ToolchainConfig config = gcc_config();
    VersionDescriptor v;
    v.label = "v1";
    v.compiler_template = config.compiler_template;
    config.versions = {v, v};
    EXPECT_THROW(validate_config(config), ConfigInvalid);
}

TEST(ConfigLoadTest, ParsesJsonWithDefaults) {
    TempDir dir("config");
    std::filesystem::path path = dir.path() / "tc.json";
    write_text(path, R"({
      "compiler": "gcc {opt} {src} -o {out}",
      "levels": ["-O1", "-O2"],
      "generator": "minigen --seed {seed} --out {out}",
      "versions": [
        {"label": "gcc-11", "compiler": "gcc {opt} {src} -o {out}"}
      ]
    })");
    ToolchainConfig config = load_config(path);
    EXPECT_EQ(config.baseline, "-O0");
    EXPECT_EQ(config.debug_flag, "-g");
    EXPECT_EQ(config.debugger.backend, "gdb-mi");
    EXPECT_EQ(config.levels.size(), 2u);
    EXPECT_EQ(config.step_limit, 50'000u);
    EXPECT_EQ(config.command_timeout, std::chrono::milliseconds(10'000));
    ASSERT_EQ(config.versions.size(), 1u);
    EXPECT_FALSE(config.versions[0].supports_bisect());
}

TEST(ConfigLoadTest, RejectsUnknownBackendAndBadJson) {
    TempDir dir("config");
    std::filesystem::path path = dir.path() / "tc.json";
    write_text(path, R"({"compiler": "gcc {opt} {src} -o {out}",
                         "debugger": {"backend": "windbg"}})");
    EXPECT_THROW(load_config(path), ConfigInvalid);
    write_text(path, "{not json");
    EXPECT_THROW(load_config(path), ConfigInvalid);
    EXPECT_THROW(load_config(dir.path() / "missing.json"), ConfigInvalid);
}

TEST(GenerateCaseTest, SeedDeterminism) {
    TempDir dir("gen");
    ToolchainConfig config = gcc_config();
    TestCase first = generate_case(config, 1, dir.path() / "a.c", "a");
    TestCase second = generate_case(config, 1, dir.path() / "b.c", "b");
    std::ifstream fa(first.source), fb(second.source);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb);
    EXPECT_EQ(first.provenance, Provenance::Generated);
    EXPECT_EQ(first.seed, 1u);
}

TEST(GenerateCaseTest, DistinctSeedsDiffer) {
    TempDir dir("gen");
    ToolchainConfig config = gcc_config();
    TestCase first = generate_case(config, 7, dir.path() / "a.c", "a");
    TestCase second = generate_case(config, 8, dir.path() / "b.c", "b");
    std::ifstream fa(first.source), fb(second.source);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    EXPECT_NE(sa, sb);
}

TEST(GenerateCaseTest, EmptyOutputIsGeneratorFailure) {
    TempDir dir("gen");
    ToolchainConfig config = gcc_config();
    config.generator_template = "touch {out}"; // creates an empty file
    EXPECT_THROW(generate_case(config, 1, dir.path() / "a.c", "a"), GeneratorFailure);
    config.generator_template = "false";
    EXPECT_THROW(generate_case(config, 1, dir.path() / "b.c", "b"), GeneratorFailure);
}

TEST(FilterUbTest, ExitCodeContract) {
    TempDir dir("filter");
    write_text(dir.path() / "case.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "case.c", "case");

    ToolchainConfig config = gcc_config();
    EXPECT_EQ(filter_ub(test_case, config).outcome, FilterOutcome::FilterUnavailable);

    config.ub_filter_template = "true";
    EXPECT_EQ(filter_ub(test_case, config).outcome, FilterOutcome::Clean);

    config.ub_filter_template = "false";
    EXPECT_EQ(filter_ub(test_case, config).outcome, FilterOutcome::Rejected);

    // Other exit codes are filter crashes: rejected and flagged.
    write_text(dir.path() / "crash.sh", "#!/bin/sh\nexit 7\n");
    std::filesystem::permissions(dir.path() / "crash.sh", std::filesystem::perms::owner_all);
    config.ub_filter_template = (dir.path() / "crash.sh").string() + " {src}";
    FilterResult crash = filter_ub(test_case, config);
    EXPECT_EQ(crash.outcome, FilterOutcome::Rejected);
    EXPECT_TRUE(crash.filter_crashed);
}

TEST(FilterUbTest, SanitizerFilterRejectsKnownUb) {
    TempDir dir("filter");
    // Reachable division by zero; a dynamic UB filter must reject it.
    write_text(dir.path() / "ub.c",
               "int main(void){volatile int x=1; volatile int y=0; return x/y;}\n");
    write_text(dir.path() / "ok.c", "int main(void){return 0;}\n");
    std::filesystem::path script = dir.path() / "ubfilter.sh";
    write_text(script,
               "#!/bin/sh\n"
               "bin=$(mktemp)\n"
               "clang -fsanitize=undefined -O0 \"$1\" -o \"$bin\" 2>/dev/null || exit 2\n"
               "if \"$bin\" >/dev/null 2>&1; then rm -f \"$bin\"; exit 0; "
               "else rm -f \"$bin\"; exit 1; fi\n");
    std::filesystem::permissions(script, std::filesystem::perms::owner_all);

    ToolchainConfig config = gcc_config();
    config.ub_filter_template = script.string() + " {src}";

    TestCase bad = import_case(dir.path() / "ub.c", "ub");
    EXPECT_EQ(filter_ub(bad, config).outcome, FilterOutcome::Rejected);
    TestCase good = import_case(dir.path() / "ok.c", "ok");
    EXPECT_EQ(filter_ub(good, config).outcome, FilterOutcome::Clean);
}

TEST(CompileTest, ProducesARunnableBinary) {
    TempDir dir("compile");
    write_text(dir.path() / "min.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "min.c", "min");
    ToolchainConfig config = gcc_config();
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    std::filesystem::path binary =
        compile(test_case, "-O0", version, std::nullopt, dir.path() / "min.bin", config);
    EXPECT_TRUE(std::filesystem::exists(binary));
    EXPECT_EQ(run_command({binary.string()}).exit_code, 0);

    // The exact command line is kept for replay.
    std::ifstream cmd(dir.path() / "min.bin.cmd");
    std::string recorded((std::istreambuf_iterator<char>(cmd)), std::istreambuf_iterator<char>());
    EXPECT_NE(recorded.find("min.c"), std::string::npos);
    EXPECT_NE(recorded.find("-g"), std::string::npos);
}

TEST(CompileTest, InvalidSourceIsCompileFailure) {
    TempDir dir("compile");
    write_text(dir.path() / "bad.c", "int main( {\n");
    TestCase test_case = import_case(dir.path() / "bad.c", "bad");
    ToolchainConfig config = gcc_config();
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    try {
        compile(test_case, "-O0", version, std::nullopt, dir.path() / "bad.bin", config);
        FAIL() << "expected CompileFailure";
    } catch (const CompileFailure& e) {
        EXPECT_FALSE(e.stderr_text().empty());
        EXPECT_NE(e.command_line().find("bad.c"), std::string::npos);
    }
}

TEST(CompileTest, PassLimitOnUnsupportedVersion) {
    TempDir dir("compile");
    write_text(dir.path() / "min.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "min.c", "min");
    ToolchainConfig config = gcc_config();
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    EXPECT_THROW(compile(test_case, "-O1", version, 3, dir.path() / "min.bin", config),
                 PassLimitUnsupported);
}

TEST(CompileTest, DebugFlagIsAlwaysAppended) {
    TempDir dir("compile");
    write_text(dir.path() / "min.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "min.c", "min");
    ToolchainConfig config = gcc_config(); // template has no -g
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    std::filesystem::path binary =
        compile(test_case, "-O0", version, std::nullopt, dir.path() / "min.bin", config);
    // Debug info present: the binary carries a .debug_info section.
    RunResult r = run_command({"readelf", "-S", binary.string()});
    EXPECT_NE(r.out.find(".debug_info"), std::string::npos);
}

TEST(BuildPairTest, TwoBinariesFromOneSource) {
    TempDir dir("pair");
    write_text(dir.path() / "min.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "min.c", "min");
    ToolchainConfig config = gcc_config();
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    BinaryPair pair = build_pair(test_case, "-O1", version, dir.path() / "work", config);
    EXPECT_TRUE(std::filesystem::exists(pair.unopt));
    EXPECT_TRUE(std::filesystem::exists(pair.opt));
    EXPECT_NE(pair.unopt, pair.opt);
}

TEST(BuildPairTest, RefusesBaselineAsOptLevel) {
    TempDir dir("pair");
    write_text(dir.path() / "min.c", "int main(void){return 0;}\n");
    TestCase test_case = import_case(dir.path() / "min.c", "min");
    ToolchainConfig config = gcc_config();
    VersionDescriptor version;
    version.label = "main";
    version.compiler_template = config.compiler_template;
    EXPECT_THROW(build_pair(test_case, "-O0", version, dir.path() / "work", config),
                 RefusedSameLevel);
}

} // namespace
} // namespace dbgdiff
