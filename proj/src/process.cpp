#include "bidsbox/process.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <stdexcept>

namespace bidsbox {

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe()
    {
        if (::pipe2(fd, O_CLOEXEC) != 0)
            throw std::runtime_error(std::string("pipe2: ") + std::strerror(errno));
    }
    ~Pipe() { close_all(); }
    void close_end(int i)
    {
        if (fd[i] >= 0) {
            ::close(fd[i]);
            fd[i] = -1;
        }
    }
    void close_all()
    {
        close_end(0);
        close_end(1);
    }
};

} // namespace

ProcessResult run_process(const std::vector<std::string> &argv, std::chrono::milliseconds timeout,
                          std::size_t output_cap)
{
    ProcessResult result;
    if (argv.empty()) {
        result.launch_failed = true;
        return result;
    }

    std::vector<char *> cargs;
    cargs.reserve(argv.size() + 1);
    for (const auto &a : argv)
        cargs.push_back(const_cast<char *>(a.c_str()));
    cargs.push_back(nullptr);

    Pipe out;
    Pipe status; // child writes errno here if exec fails; closes on success (CLOEXEC)

    auto start = Clock::now();
    pid_t pid = ::fork();
    if (pid < 0)
        throw std::runtime_error(std::string("fork: ") + std::strerror(errno));

    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out.fd[1], STDOUT_FILENO);
        ::dup2(out.fd[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0)
            ::dup2(devnull, STDIN_FILENO);
        ::execvp(cargs[0], cargs.data());
        int err = errno;
        [[maybe_unused]] auto n = ::write(status.fd[1], &err, sizeof err);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out.close_end(1);
    status.close_end(1);

    int exec_errno = 0;
    if (::read(status.fd[0], &exec_errno, sizeof exec_errno) == sizeof exec_errno)
        result.launch_failed = true;
    status.close_end(0);

    auto deadline = start + timeout;
    char buf[8192];
    bool open = true;
    while (open) {
        auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (remaining.count() <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd pfd{out.fd[0], POLLIN, 0};
        int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            break;
        }
        if (rc == 0)
            continue;
        ssize_t n = ::read(out.fd[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0) {
            open = false;
            break;
        }
        std::size_t room = output_cap > result.output.size() ? output_cap - result.output.size() : 0;
        std::size_t take = std::min<std::size_t>(room, static_cast<std::size_t>(n));
        result.output.append(buf, take);
        if (take < static_cast<std::size_t>(n))
            result.truncated = true;
    }

    if (result.timed_out)
        ::kill(-pid, SIGKILL);

    int wstatus = 0;
    while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
    }
    result.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
    if (!result.timed_out) {
        if (WIFEXITED(wstatus))
            result.exit_code = WEXITSTATUS(wstatus);
        else if (WIFSIGNALED(wstatus))
            result.exit_code = 128 + WTERMSIG(wstatus);
    }
    return result;
}

} // namespace bidsbox
