#include "dbgdiff/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "dbgdiff/errors.hpp"

namespace dbgdiff {

std::vector<std::string> split_command_template(std::string_view tmpl) {
    std::vector<std::string> tokens;
    std::istringstream in{std::string(tmpl)};
    std::string token;
    while (in >> token) {
        tokens.push_back(token);
    }
    return tokens;
}

std::vector<std::string> render_command(std::string_view tmpl,
                                        const std::map<std::string, std::string>& placeholders) {
    std::vector<std::string> tokens = split_command_template(tmpl);
    for (auto& token : tokens) {
        for (const auto& [name, value] : placeholders) {
            const std::string pattern = "{" + name + "}";
            std::size_t pos = 0;
            while ((pos = token.find(pattern, pos)) != std::string::npos) {
                token.replace(pos, pattern.size(), value);
                pos += value.size();
            }
        }
    }
    return tokens;
}

std::string join_argv(const std::vector<std::string>& argv) {
    std::string out;
    for (const auto& arg : argv) {
        if (!out.empty()) {
            out += ' ';
        }
        if (arg.find(' ') != std::string::npos) {
            out += '\'' + arg + '\'';
        } else {
            out += arg;
        }
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
    int read_fd = -1;
    int write_fd = -1;

    Pipe() {
        int fds[2];
        if (pipe(fds) != 0) {
            throw Error(std::string("pipe failed: ") + std::strerror(errno));
        }
        read_fd = fds[0];
        write_fd = fds[1];
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (read_fd >= 0) {
            ::close(read_fd);
            read_fd = -1;
        }
    }
    void close_write() {
        if (write_fd >= 0) {
            ::close(write_fd);
            write_fd = -1;
        }
    }
    int release_read() { return std::exchange(read_fd, -1); }
    int release_write() { return std::exchange(write_fd, -1); }
};

[[noreturn]] void exec_child(const std::vector<std::string>& argv, int exec_err_fd,
                             const std::optional<std::filesystem::path>& cwd) {
    if (cwd && chdir(cwd->c_str()) != 0) {
        int err = errno;
        (void)!write(exec_err_fd, &err, sizeof err);
        _exit(127);
    }
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& arg : argv) {
        cargv.push_back(const_cast<char*>(arg.c_str()));
    }
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    int err = errno;
    (void)!write(exec_err_fd, &err, sizeof err);
    _exit(127);
}

// Reports exec/chdir failure back to the parent through a CLOEXEC pipe.
void check_exec_error(Pipe& exec_pipe, pid_t pid, const std::vector<std::string>& argv) {
    exec_pipe.close_write();
    int err = 0;
    ssize_t n = read(exec_pipe.read_fd, &err, sizeof err);
    if (n > 0) {
        waitpid(pid, nullptr, 0);
        throw Error("cannot exec '" + argv[0] + "': " + std::strerror(err));
    }
}

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() < 0) {
        return 0;
    }
    if (left.count() > 60'000) {
        return 60'000;
    }
    return static_cast<int>(left.count());
}

} // namespace

RunResult run_command(const std::vector<std::string>& argv, const RunOptions& options) {
    if (argv.empty()) {
        throw Error("empty command");
    }
    Pipe out_pipe;
    Pipe err_pipe;
    Pipe exec_pipe;
    fcntl(exec_pipe.write_fd, F_SETFD, FD_CLOEXEC);

    pid_t pid = fork();
    if (pid < 0) {
        throw Error(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        dup2(out_pipe.write_fd, STDOUT_FILENO);
        dup2(err_pipe.write_fd, STDERR_FILENO);
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) {
            dup2(devnull, STDIN_FILENO);
        }
        out_pipe.close_read();
        err_pipe.close_read();
        exec_pipe.close_read();
        setpgid(0, 0); // own process group so a timeout kill reaps helpers too
        exec_child(argv, exec_pipe.write_fd, options.cwd);
    }

    out_pipe.close_write();
    err_pipe.close_write();
    check_exec_error(exec_pipe, pid, argv);

    RunResult result;
    auto deadline = Clock::now() + options.timeout;
    bool out_open = true;
    bool err_open = true;
    char buf[4096];
    while (out_open || err_open) {
        pollfd fds[2];
        nfds_t nfds = 0;
        int out_slot = -1;
        int err_slot = -1;
        if (out_open) {
            out_slot = nfds;
            fds[nfds++] = {out_pipe.read_fd, POLLIN, 0};
        }
        if (err_open) {
            err_slot = nfds;
            fds[nfds++] = {err_pipe.read_fd, POLLIN, 0};
        }
        int rc = poll(fds, nfds, remaining_ms(deadline));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(std::string("poll failed: ") + std::strerror(errno));
        }
        if (rc == 0) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            break;
        }
        if (out_slot >= 0 && (fds[out_slot].revents & (POLLIN | POLLHUP))) {
            ssize_t n = read(out_pipe.read_fd, buf, sizeof buf);
            if (n > 0) {
                result.out.append(buf, static_cast<std::size_t>(n));
            } else {
                out_open = false;
            }
        }
        if (err_slot >= 0 && (fds[err_slot].revents & (POLLIN | POLLHUP))) {
            ssize_t n = read(err_pipe.read_fd, buf, sizeof buf);
            if (n > 0) {
                result.err.append(buf, static_cast<std::size_t>(n));
            } else {
                err_open = false;
            }
        }
    }

    int status = 0;
    waitpid(pid, &status, 0);
    if (!result.timed_out) {
        if (WIFEXITED(status)) {
            result.exit_code = WEXITSTATUS(status);
        } else if (WIFSIGNALED(status)) {
            result.signaled = true;
            result.term_signal = WTERMSIG(status);
        }
    }
    return result;
}

PipeProcess::PipeProcess(const std::vector<std::string>& argv) {
    // A child that dies mid-conversation must surface as a failed write, not
    // kill this process. Process-wide, idempotent.
    signal(SIGPIPE, SIG_IGN);
    if (argv.empty()) {
        throw Error("empty command");
    }
    Pipe to_child;
    Pipe from_child;
    Pipe exec_pipe;
    fcntl(exec_pipe.write_fd, F_SETFD, FD_CLOEXEC);

    pid_t pid = fork();
    if (pid < 0) {
        throw Error(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        dup2(to_child.read_fd, STDIN_FILENO);
        dup2(from_child.write_fd, STDOUT_FILENO);
        dup2(from_child.write_fd, STDERR_FILENO); // merged; the MI parser skips noise
        to_child.close_write();
        from_child.close_read();
        exec_pipe.close_read();
        setpgid(0, 0);
        exec_child(argv, exec_pipe.write_fd, std::nullopt);
    }

    to_child.close_read();
    from_child.close_write();
    check_exec_error(exec_pipe, pid, argv);

    pid_ = pid;
    stdin_fd_ = to_child.release_write();
    stdout_fd_ = from_child.release_read();
    fcntl(stdout_fd_, F_SETFL, O_NONBLOCK);
}

PipeProcess::~PipeProcess() {
    kill_child();
    wait_exit(std::chrono::milliseconds(2000));
    if (stdin_fd_ >= 0) {
        ::close(stdin_fd_);
    }
    if (stdout_fd_ >= 0) {
        ::close(stdout_fd_);
    }
}

bool PipeProcess::write_line(std::string_view line, std::chrono::milliseconds timeout) {
    if (stdin_fd_ < 0) {
        return false;
    }
    std::string data = std::string(line) + "\n";
    auto deadline = Clock::now() + timeout;
    std::size_t written = 0;
    while (written < data.size()) {
        pollfd pfd{stdin_fd_, POLLOUT, 0};
        int rc = poll(&pfd, 1, remaining_ms(deadline));
        if (rc <= 0) {
            return false;
        }
        ssize_t n = write(stdin_fd_, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) {
                continue;
            }
            return false;
        }
        written += static_cast<std::size_t>(n);
    }
    return true;
}

PipeProcess::ReadResult PipeProcess::read_line(std::chrono::milliseconds timeout) {
    auto deadline = Clock::now() + timeout;
    for (;;) {
        std::size_t eol = buffer_.find('\n');
        if (eol != std::string::npos) {
            std::string line = buffer_.substr(0, eol);
            buffer_.erase(0, eol + 1);
            return {ReadResult::Status::Line, std::move(line)};
        }
        if (saw_eof_) {
            if (!buffer_.empty()) {
                std::string line = std::move(buffer_);
                buffer_.clear();
                return {ReadResult::Status::Line, std::move(line)};
            }
            return {ReadResult::Status::Eof, {}};
        }
        pollfd pfd{stdout_fd_, POLLIN, 0};
        int rc = poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(std::string("poll failed: ") + std::strerror(errno));
        }
        if (rc == 0) {
            return {ReadResult::Status::Timeout, {}};
        }
        char buf[4096];
        ssize_t n = read(stdout_fd_, buf, sizeof buf);
        if (n > 0) {
            buffer_.append(buf, static_cast<std::size_t>(n));
        } else if (n == 0) {
            saw_eof_ = true;
        } else if (errno != EINTR && errno != EAGAIN) {
            saw_eof_ = true;
        }
    }
}

bool PipeProcess::running() {
    if (pid_ < 0 || reaped_) {
        return false;
    }
    int status = 0;
    pid_t rc = waitpid(pid_, &status, WNOHANG);
    if (rc == pid_) {
        reaped_ = true;
        wait_status_ = status;
        return false;
    }
    return rc == 0;
}

void PipeProcess::kill_child() {
    if (pid_ >= 0 && !reaped_) {
        ::kill(-pid_, SIGKILL);
        ::kill(pid_, SIGKILL);
    }
}

std::optional<int> PipeProcess::wait_exit(std::chrono::milliseconds timeout) {
    if (pid_ < 0) {
        return std::nullopt;
    }
    if (reaped_) {
        return wait_status_;
    }
    auto deadline = Clock::now() + timeout;
    for (;;) {
        int status = 0;
        pid_t rc = waitpid(pid_, &status, WNOHANG);
        if (rc == pid_) {
            reaped_ = true;
            wait_status_ = status;
            return status;
        }
        if (Clock::now() >= deadline) {
            kill_child();
            waitpid(pid_, &status, 0);
            reaped_ = true;
            wait_status_ = status;
            return std::nullopt;
        }
        usleep(2000);
    }
}

} // namespace dbgdiff
