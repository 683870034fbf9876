#ifndef DBGDIFF_SUBPROCESS_HPP
#define DBGDIFF_SUBPROCESS_HPP

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <sys/types.h>

namespace dbgdiff {

// Command templates are split on whitespace first, then placeholders like
// {src} are substituted inside each token, so substituted paths never get
// re-split. Commands run without shell interpretation.
std::vector<std::string> split_command_template(std::string_view tmpl);
std::vector<std::string> render_command(std::string_view tmpl,
                                        const std::map<std::string, std::string>& placeholders);
std::string join_argv(const std::vector<std::string>& argv);

struct RunOptions {
    std::chrono::milliseconds timeout{60'000};
    std::optional<std::filesystem::path> cwd;
};

struct RunResult {
    int exit_code = -1; // valid when !timed_out && !signaled
    bool timed_out = false;
    bool signaled = false;
    int term_signal = 0;
    std::string out;
    std::string err;

    bool ok() const { return !timed_out && !signaled && exit_code == 0; }
};

// Runs argv to completion (or timeout, at which point the process is killed).
// Throws Error when the command cannot be spawned at all.
RunResult run_command(const std::vector<std::string>& argv, const RunOptions& options = {});

// A child process with piped stdin and a merged stdout/stderr stream, read
// line by line under deadlines. Used to drive interactive debuggers.
class PipeProcess {
public:
    explicit PipeProcess(const std::vector<std::string>& argv); // throws Error on spawn failure
    ~PipeProcess();

    PipeProcess(const PipeProcess&) = delete;
    PipeProcess& operator=(const PipeProcess&) = delete;

    // Appends '\n'. Returns false when the child has gone away.
    bool write_line(std::string_view line, std::chrono::milliseconds timeout);

    struct ReadResult {
        enum class Status { Line, Eof, Timeout } status;
        std::string line;
    };
    ReadResult read_line(std::chrono::milliseconds timeout);

    bool running();
    void kill_child();
    // Returns the raw waitpid status, or nullopt if the child outlived the
    // timeout (it is then killed and reaped).
    std::optional<int> wait_exit(std::chrono::milliseconds timeout);

    pid_t pid() const { return pid_; }

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    bool saw_eof_ = false;
    bool reaped_ = false;
    int wait_status_ = 0;
};

} // namespace dbgdiff

#endif
