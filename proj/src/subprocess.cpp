#include "mergemine/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace mergemine {

namespace {

struct pipe_pair {
    int read_fd = -1;
    int write_fd = -1;
};

pipe_pair make_pipe() {
    int fds[2];
    if (::pipe(fds) != 0) {
        throw std::runtime_error("pipe failed: " + std::string(std::strerror(errno)));
    }
    return {fds[0], fds[1]};
}

void drain(int fd, std::string& sink, bool& open_flag) {
    char buf[4096];
    for (;;) {
        ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n > 0) {
            sink.append(buf, static_cast<std::size_t>(n));
            continue;
        }
        if (n == 0) {
            open_flag = false;
        }
        return;
    }
}

}  // namespace

command_result run_command(const std::vector<std::string>& argv,
                           const std::optional<std::filesystem::path>& cwd,
                           const std::vector<std::pair<std::string, std::string>>& extra_env) {
    if (argv.empty()) {
        throw std::runtime_error("run_command: empty argv");
    }

    auto out_pipe = make_pipe();
    auto err_pipe = make_pipe();

    pid_t pid = ::fork();
    if (pid < 0) {
        throw std::runtime_error("fork failed: " + std::string(std::strerror(errno)));
    }

    if (pid == 0) {
        ::close(out_pipe.read_fd);
        ::close(err_pipe.read_fd);
        if (::dup2(out_pipe.write_fd, STDOUT_FILENO) < 0 ||
            ::dup2(err_pipe.write_fd, STDERR_FILENO) < 0) {
            _exit(127);
        }
        ::close(out_pipe.write_fd);
        ::close(err_pipe.write_fd);
        if (cwd && ::chdir(cwd->c_str()) != 0) {
            _exit(127);
        }
        for (const auto& [key, value] : extra_env) {
            ::setenv(key.c_str(), value.c_str(), 1);
        }
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& arg : argv) {
            cargv.push_back(const_cast<char*>(arg.c_str()));
        }
        cargv.push_back(nullptr);
        ::execvp(cargv[0], cargv.data());
        _exit(127);
    }

    ::close(out_pipe.write_fd);
    ::close(err_pipe.write_fd);

    command_result result;
    bool out_open = true;
    bool err_open = true;
    while (out_open || err_open) {
        struct pollfd fds[2];
        nfds_t nfds = 0;
        if (out_open) {
            fds[nfds++] = {out_pipe.read_fd, POLLIN, 0};
        }
        if (err_open) {
            fds[nfds++] = {err_pipe.read_fd, POLLIN, 0};
        }
        int rc = ::poll(fds, nfds, -1);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        for (nfds_t i = 0; i < nfds; ++i) {
            if (fds[i].revents == 0) {
                continue;
            }
            if (fds[i].fd == out_pipe.read_fd) {
                drain(out_pipe.read_fd, result.out, out_open);
            } else {
                drain(err_pipe.read_fd, result.err, err_open);
            }
        }
    }
    ::close(out_pipe.read_fd);
    ::close(err_pipe.read_fd);

    int status = 0;
    if (::waitpid(pid, &status, 0) < 0) {
        throw std::runtime_error("waitpid failed: " + std::string(std::strerror(errno)));
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    } else {
        result.exit_code = -1;
    }
    return result;
}

std::string render_command_line(const std::vector<std::string>& argv) {
    std::string out;
    for (std::size_t i = 0; i < argv.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        bool plain = !argv[i].empty() &&
                     argv[i].find_first_of(" \t\n'\"\\$&|;<>()*?[]{}") == std::string::npos;
        if (plain) {
            out += argv[i];
        } else {
            out.push_back('\'');
            for (char c : argv[i]) {
                if (c == '\'') {
                    out += "'\\''";
                } else {
                    out.push_back(c);
                }
            }
            out.push_back('\'');
        }
    }
    return out;
}

}  // namespace mergemine
