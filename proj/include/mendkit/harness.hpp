#pragma once

#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mendkit/errors.hpp"
#include "mendkit/line_range.hpp"
#include "mendkit/text.hpp"
#include "mendkit/validate.hpp"

extern char** environ;

namespace mendkit {

struct HunkLocation {
    std::string id;
    std::string file;  // relative to the project root
    LineRange range;
};

// File text split into lines, remembering whether it ended with a newline.
struct SourceText {
    std::vector<std::string> lines;
    bool trailing_newline = true;

    static SourceText parse(std::string_view text) {
        return {split_lines(text), text.empty() || text.back() == '\n'};
    }

    std::string str() const {
        std::string out = join_lines(lines);
        if (trailing_newline && !lines.empty()) out.push_back('\n');
        return out;
    }
};

// Replaces each patched hunk's line range by the patch lines. Ranges are
// applied bottom-up per file; overlapping hunks or unknown ids conflict.
inline std::map<std::string, SourceText> apply_patchset(const std::map<std::string, SourceText>& originals,
                                                       const std::vector<HunkLocation>& hunks,
                                                       const PatchSet& patches) {
    std::map<std::string, const HunkLocation*> by_id;
    for (const auto& h : hunks) by_id[h.id] = &h;
    std::map<std::string, std::vector<std::pair<const HunkLocation*, const std::string*>>> per_file;
    for (const auto& [id, text] : patches) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw PatchConflict("patch names unknown hunk '" + id + "'");
        per_file[it->second->file].push_back({it->second, &text});
    }

    std::map<std::string, SourceText> out;
    for (auto& [file, edits] : per_file) {
        auto src = originals.find(file);
        if (src == originals.end()) throw PatchConflict("no source loaded for " + file);
        SourceText patched = src->second;
        // Bottom-up; at a shared start line the replacement goes before the
        // insertion so the inserted lines land above it.
        std::sort(edits.begin(), edits.end(), [](const auto& a, const auto& b) {
            if (a.first->range.start != b.first->range.start) return a.first->range.start > b.first->range.start;
            return a.first->range.length > b.first->range.length;
        });
        for (std::size_t i = 0; i < edits.size(); ++i) {
            const LineRange& r = edits[i].first->range;
            if (!r.within(patched.lines.size())) {
                throw PatchConflict("hunk '" + edits[i].first->id + "' lies outside " + file);
            }
            if (i > 0 && r.overlaps(edits[i - 1].first->range)) {
                throw PatchConflict("hunks '" + edits[i].first->id + "' and '" + edits[i - 1].first->id +
                                    "' overlap");
            }
            auto repl = split_lines(*edits[i].second);
            auto first = patched.lines.begin() + static_cast<long>(r.start - 1);
            patched.lines.erase(first, first + static_cast<long>(r.length));
            patched.lines.insert(patched.lines.begin() + static_cast<long>(r.start - 1), repl.begin(), repl.end());
        }
        out[file] = std::move(patched);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subprocess
// ---------------------------------------------------------------------------

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

// Runs `command` through /bin/sh in its own process group. On timeout the
// whole group is killed.
inline ProcessResult run_process(const std::string& command, const std::filesystem::path& cwd,
                                 const std::map<std::string, std::string>& env, Seconds timeout) {
    std::map<std::string, std::string> merged;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        const auto eq = kv.find('=');
        if (eq != std::string_view::npos) merged[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
    for (const auto& [k, v] : env) merged[k] = v;
    std::vector<std::string> env_strings;
    for (const auto& [k, v] : merged) env_strings.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::string sh = "/bin/sh";
    std::string dash_c = "-c";
    std::string cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const std::string dir = cwd.string();

    int out_pipe[2];
    int err_pipe[2];
    if (pipe2(out_pipe, O_CLOEXEC) != 0) throw SandboxError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(err_pipe, O_CLOEXEC) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        throw SandboxError(std::string("pipe: ") + std::strerror(errno));
    }

    const pid_t pid = fork();
    if (pid < 0) throw SandboxError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(dir.c_str()) != 0) _exit(127);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        const int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        execve(argv[0], argv, envp.data());
        _exit(127);
    }
    setpgid(pid, pid);
    close(out_pipe[1]);
    close(err_pipe[1]);

    ProcessResult res;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::nanoseconds>(timeout);
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&res.out, &res.err};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        int wait_ms = -1;
        if (!res.timed_out) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                res.timed_out = true;
                kill(-pid, SIGKILL);
                continue;
            }
            wait_ms = static_cast<int>(std::min<long long>(left.count() + 1, 1000));
        }
        const int rc = poll(fds, 2, wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t got = read(fds[i].fd, buf, sizeof buf);
            if (got > 0) {
                sinks[i]->append(buf, static_cast<std::size_t>(got));
            } else if (got == 0 || errno != EINTR) {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    for (auto& f : fds)
        if (f.fd >= 0) close(f.fd);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!res.timed_out) kill(-pid, SIGKILL);  // stray grandchildren holding no pipes
    if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) res.exit_code = 128 + WTERMSIG(status);
    return res;
}

// `<test-id> <pass|fail|error>` per line; other lines are ignored. The status
// is the last whitespace-separated field, the id everything before it.
inline std::map<TestId, Outcome> parse_test_output(std::string_view out) {
    std::map<TestId, Outcome> outcomes;
    for (const auto& raw : split_lines(out)) {
        const auto line = trim(raw);
        const auto sp = line.find_last_of(" \t");
        if (sp == std::string_view::npos) continue;
        const auto status = line.substr(sp + 1);
        const auto id = trim(line.substr(0, sp));
        if (id.empty()) continue;
        if (status == "pass") outcomes[std::string(id)] = Outcome::pass;
        else if (status == "fail") outcomes[std::string(id)] = Outcome::fail;
        else if (status == "error") outcomes[std::string(id)] = Outcome::error;
    }
    return outcomes;
}

// Scratch root: $MENDKIT_SANDBOX_DIR, else the system temp directory.
inline std::filesystem::path sandbox_root() {
    if (const char* d = std::getenv("MENDKIT_SANDBOX_DIR"); d && *d) return d;
    return std::filesystem::temp_directory_path();
}

struct CommandSpec {
    std::string build;  // optional
    std::string test;
    std::map<std::string, std::string> env;
    Seconds timeout{60};
};

// Runs a bug's build/test commands in a private copy of its project. Patched
// files are rewritten before each run and restored afterwards. The ids of
// skipped tests reach the test command as a comma-separated
// MENDKIT_SKIP_TESTS; any that are reported anyway are dropped.
class CommandHarness final : public TestHarness {
public:
    CommandHarness(const std::filesystem::path& project_root, std::vector<HunkLocation> hunks, CommandSpec spec,
                   const std::filesystem::path& scratch = sandbox_root())
        : hunks_(std::move(hunks)), spec_(std::move(spec)) {
        namespace fs = std::filesystem;
        if (spec_.test.empty()) throw ManifestError("test command is required");
        static std::atomic<unsigned> counter{0};
        std::error_code ec;
        fs::create_directories(scratch, ec);
        for (int attempt = 0; attempt < 100; ++attempt) {
            fs::path candidate = scratch / ("mendkit-" + std::to_string(getpid()) + "-" +
                                            std::to_string(counter.fetch_add(1)));
            if (fs::create_directory(candidate, ec)) {
                workdir_ = candidate;
                break;
            }
        }
        if (workdir_.empty()) throw SandboxError("cannot create a working copy under " + scratch.string());
        fs::copy(project_root, workdir_, fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
        if (ec) {
            fs::remove_all(workdir_, ec);
            throw SandboxError("cannot copy " + project_root.string() + ": " + ec.message());
        }
        for (const auto& h : hunks_) {
            if (originals_.count(h.file)) continue;
            std::ifstream in(workdir_ / h.file, std::ios::binary);
            if (!in) throw SandboxError("cannot read " + h.file + " in working copy");
            std::ostringstream ss;
            ss << in.rdbuf();
            originals_[h.file] = SourceText::parse(ss.str());
        }
    }

    CommandHarness(const CommandHarness&) = delete;
    CommandHarness& operator=(const CommandHarness&) = delete;

    ~CommandHarness() override {
        std::error_code ec;
        std::filesystem::remove_all(workdir_, ec);
    }

    const std::filesystem::path& workdir() const { return workdir_; }

    SuiteReport execute(const PatchSet& patches, const std::set<TestId>& skip) override {
        std::lock_guard lock(mu_);
        const auto t0 = std::chrono::steady_clock::now();
        const auto patched = apply_patchset(originals_, hunks_, patches);
        for (const auto& file : dirty_) {
            if (!patched.count(file)) write(file, originals_.at(file));
        }
        dirty_.clear();
        for (const auto& [file, text] : patched) {
            write(file, text);
            dirty_.insert(file);
        }

        auto env = spec_.env;
        // Candidates rewrite files many times a second, often at equal size;
        // an mtime-keyed bytecode cache would then run stale code.
        env.emplace("PYTHONDONTWRITEBYTECODE", "1");
        env["MENDKIT_SKIP_TESTS"] = join(std::vector<std::string>(skip.begin(), skip.end()), ",");

        SuiteReport report;
        Seconds budget = spec_.timeout;
        if (!spec_.build.empty()) {
            const auto b = run_process(spec_.build, workdir_, env, budget);
            budget -= std::chrono::steady_clock::now() - t0;
            if (b.timed_out || b.exit_code != 0) {
                report.timed_out = b.timed_out;
                report.wall_time = std::chrono::steady_clock::now() - t0;
                return report;
            }
        }
        if (budget.count() <= 0) {
            report.compiled = true;
            report.timed_out = true;
            report.wall_time = std::chrono::steady_clock::now() - t0;
            return report;
        }
        const auto t = run_process(spec_.test, workdir_, env, budget);
        report.outcomes = parse_test_output(t.out);
        for (const auto& id : skip) report.outcomes.erase(id);
        report.timed_out = t.timed_out;
        report.compiled = t.timed_out || t.exit_code == 0 || !report.outcomes.empty();
        if (!report.compiled) report.outcomes.clear();
        report.wall_time = std::chrono::steady_clock::now() - t0;
        return report;
    }

private:
    void write(const std::string& file, const SourceText& text) {
        std::ofstream out(workdir_ / file, std::ios::binary | std::ios::trunc);
        if (!out) throw SandboxError("cannot write " + file + " in working copy");
        out << text.str();
    }

    std::vector<HunkLocation> hunks_;
    CommandSpec spec_;
    std::filesystem::path workdir_;
    std::map<std::string, SourceText> originals_;
    std::set<std::string> dirty_;
    std::mutex mu_;
};

}  // namespace mendkit
