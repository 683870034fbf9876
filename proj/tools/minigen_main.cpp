// Seed-deterministic generator of small, closed, terminating C programs.
// Every program is UB-free by construction: value-carrying arithmetic stays
// in unsigned types, shift amounts and loop bounds are masked, divisions are
// guarded, all locals are initialized at declaration, and calls form a DAG.
// Intended as the default program source for differential debug-info
// campaigns when no external generator (csmith, yarpgen) is configured.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace {

class ProgramBuilder {
public:
    explicit ProgramBuilder(std::uint64_t seed) : rng_(seed) {}

    std::string build() {
        make_globals();
        int function_count = pick(2, 4);
        for (int i = 0; i < function_count; ++i) {
            make_function(i);
        }
        make_main();
        return source_.str();
    }

private:
    std::uint64_t pick(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
    }
    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

    std::string global(std::size_t i) const { return "g_" + std::to_string(i); }

    void make_globals() {
        global_count_ = pick(3, 6);
        for (std::size_t i = 0; i < global_count_; ++i) {
            source_ << "static unsigned " << global(i) << " = " << pick(0, 97) << "u;\n";
        }
        if (chance(0.7)) {
            pointer_target_ = pick(0, global_count_ - 1);
            source_ << "static unsigned *gp_0 = &" << global(*pointer_target_) << ";\n";
        }
        source_ << "\n";
    }

    // Expression over the names in scope; pure unsigned arithmetic.
    std::string expr(const std::vector<std::string>& vars, int depth = 0) {
        if (depth >= 2 || chance(0.35)) {
            if (chance(0.5) && !vars.empty()) {
                return vars[pick(0, vars.size() - 1)];
            }
            return std::to_string(pick(0, 31)) + "u";
        }
        std::string lhs = expr(vars, depth + 1);
        std::string rhs = expr(vars, depth + 1);
        switch (pick(0, 6)) {
        case 0: return "(" + lhs + " + " + rhs + ")";
        case 1: return "(" + lhs + " - " + rhs + ")";
        case 2: return "(" + lhs + " ^ " + rhs + ")";
        case 3: return "(" + lhs + " | " + rhs + ")";
        case 4: return "(" + lhs + " & " + rhs + ")";
        case 5: return "(" + lhs + " << (" + rhs + " & 7u))";
        default: return "(" + lhs + " / ((" + rhs + " & 15u) | 1u))";
        }
    }

    std::string condition(const std::vector<std::string>& vars) {
        static const char* ops[] = {"<", ">", "<=", ">=", "==", "!="};
        return "(" + expr(vars, 1) + " " + ops[pick(0, 5)] + " " + expr(vars, 1) + ")";
    }

    void make_function(int index) {
        std::size_t param_count = pick(1, 3);
        std::vector<std::string> scope;
        std::ostringstream signature;
        signature << "static unsigned fn_" << index << "(";
        for (std::size_t p = 0; p < param_count; ++p) {
            std::string name = "p_" + std::to_string(p);
            signature << (p > 0 ? ", " : "") << "unsigned " << name;
            scope.push_back(name);
        }
        signature << ")";
        function_signatures_.push_back("fn_" + std::to_string(index));
        function_arity_.push_back(param_count);

        source_ << signature.str() << " {\n";
        std::size_t local_count = pick(1, 2);
        for (std::size_t l = 0; l < local_count; ++l) {
            std::string name = "v_" + std::to_string(l);
            source_ << "    unsigned " << name << " = " << expr(scope) << ";\n";
            scope.push_back(name);
        }
        for (std::size_t i = 0; i < global_count_; ++i) {
            scope.push_back(global(i));
        }

        std::size_t statement_count = pick(2, 4);
        for (std::size_t s = 0; s < statement_count; ++s) {
            emit_statement(scope, index);
        }
        source_ << "    return " << expr(scope) << ";\n";
        source_ << "}\n\n";
    }

    void emit_statement(std::vector<std::string>& scope, int index) {
        switch (pick(0, 3)) {
        case 0: { // bounded loop
            std::string bound = std::to_string(pick(1, 6));
            source_ << "    for (unsigned i_" << loop_counter_ << " = 0u; i_" << loop_counter_
                    << " < " << bound << "u; ++i_" << loop_counter_ << ") {\n";
            source_ << "        " << scope[pick(0, scope.size() - 1)] << " = " << expr(scope)
                    << ";\n";
            source_ << "    }\n";
            ++loop_counter_;
            break;
        }
        case 1: { // branch
            source_ << "    if " << condition(scope) << " {\n";
            source_ << "        " << scope[pick(0, scope.size() - 1)] << " = " << expr(scope)
                    << ";\n";
            source_ << "    } else {\n";
            source_ << "        " << scope[pick(0, scope.size() - 1)] << " = " << expr(scope)
                    << ";\n";
            source_ << "    }\n";
            break;
        }
        case 2: { // call an earlier function, keeping the call graph acyclic
            if (index > 0) {
                std::size_t callee = pick(0, index - 1);
                source_ << "    " << scope[pick(0, scope.size() - 1)] << " = "
                        << call(callee, scope) << ";\n";
                break;
            }
            [[fallthrough]];
        }
        default:
            source_ << "    " << scope[pick(0, scope.size() - 1)] << " = " << expr(scope)
                    << ";\n";
            break;
        }
    }

    std::string call(std::size_t callee, const std::vector<std::string>& scope) {
        std::ostringstream out;
        out << function_signatures_[callee] << "(";
        for (std::size_t a = 0; a < function_arity_[callee]; ++a) {
            out << (a > 0 ? ", " : "") << expr(scope, 1);
        }
        out << ")";
        return out.str();
    }

    void make_main() {
        source_ << "int main(void) {\n";
        std::vector<std::string> scope;
        source_ << "    unsigned acc = " << pick(0, 9) << "u;\n";
        scope.push_back("acc");
        for (std::size_t i = 0; i < global_count_; ++i) {
            scope.push_back(global(i));
        }
        std::size_t call_count = pick(2, 5);
        for (std::size_t c = 0; c < call_count; ++c) {
            std::size_t callee = pick(0, function_signatures_.size() - 1);
            source_ << "    acc = acc ^ " << call(callee, scope) << ";\n";
            if (chance(0.4)) {
                source_ << "    " << global(pick(0, global_count_ - 1)) << " = " << expr(scope, 1)
                        << ";\n";
            }
        }
        if (pointer_target_) {
            source_ << "    *gp_0 = acc & 255u;\n";
        }
        source_ << "    return 0;\n";
        source_ << "}\n";
    }

    std::mt19937_64 rng_;
    std::ostringstream source_;
    std::size_t global_count_ = 0;
    std::optional<std::size_t> pointer_target_;
    std::vector<std::string> function_signatures_;
    std::vector<std::size_t> function_arity_;
    int loop_counter_ = 0;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic small C program generator"};
    std::uint64_t seed = 1;
    std::string out_path;
    app.add_option("--seed", seed, "generator seed")->required();
    app.add_option("--out", out_path, "output source path")->required();
    CLI11_PARSE(app, argc, argv);

    ProgramBuilder builder(seed);
    std::string source = builder.build();
    if (out_path == "-") {
        std::cout << source;
        return 0;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "minigen: cannot open " << out_path << "\n";
        return 1;
    }
    out << source;
    return out ? 0 : 1;
}
