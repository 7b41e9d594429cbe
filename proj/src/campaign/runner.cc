// Copyright 2026 The Archfuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Crash-isolated execution of (model, backend) jobs.
//
// The parent stays single-threaded: it forks up to `parallelism` children,
// multiplexes their output pipes with poll() and reaps them with waitpid().
// Forking from a multithreaded parent could leave a child holding a lock
// another thread owned at fork time, so no worker threads are used.
#include "runner.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <system_error>

#include "archfuzz/engine.h"
#include "archfuzz/errors.h"
#include "archfuzz/graph.h"

namespace archfuzz {

namespace {

using Clock = std::chrono::steady_clock;

constexpr size_t kMaxCapturedOutput = 64 * 1024;
constexpr size_t kMaxMessageTail = 512;

// Exit codes of an internal child, mirroring `archfuzz run`.
int exit_code_for(Outcome o) {
  switch (o) {
    case Outcome::kOk:
      return 0;
    case Outcome::kNan:
      return 1;
    case Outcome::kCrash:
      return 2;
  }
  return 3;
}

std::string last_line(const std::string& output) {
  size_t end = output.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) return "";
  size_t begin = output.rfind('\n', end);
  begin = begin == std::string::npos ? 0 : begin + 1;
  std::string line = output.substr(begin, end - begin + 1);
  if (line.size() > kMaxMessageTail) line = line.substr(line.size() - kMaxMessageTail);
  return line;
}

std::string with_tail(std::string message, const std::string& output) {
  const std::string tail = last_line(output);
  if (!tail.empty()) message += ": " + tail;
  return message;
}

[[noreturn]] void run_child(const JobSpec& job) {
  if (job.external_command.empty()) {
    int code = 3;
    try {
      const TraceBundle bundle = run_backend(job.backend, *job.spec);
      write_trace(bundle, job.trace_out);
      code = exit_code_for(bundle.outcome);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s\n", e.what());
    }
    std::fflush(stderr);
    _exit(code);
  }
  // The adapter contract: <command> --model <dir> --backend <name> --trace-out <file>.
  const std::string script = job.external_command + " \"$@\"";
  const std::string model = job.model_dir.string();
  const std::string out = job.trace_out.string();
  execl("/bin/sh", "sh", "-c", script.c_str(), "sh", "--model", model.c_str(), "--backend",
        job.backend.c_str(), "--trace-out", out.c_str(), static_cast<char*>(nullptr));
  std::fprintf(stderr, "exec failed: %s\n", std::strerror(errno));
  _exit(127);
}

struct Running {
  size_t job = 0;
  pid_t pid = -1;
  int fd = -1;  // read end of the child's stdout/stderr pipe
  std::string output;
  Clock::time_point deadline;
};

void drain(Running& r) {
  char buf[4096];
  while (r.fd >= 0) {
    const ssize_t n = read(r.fd, buf, sizeof buf);
    if (n > 0) {
      r.output.append(buf, static_cast<size_t>(n));
      if (r.output.size() > kMaxCapturedOutput) {
        r.output.erase(0, r.output.size() - kMaxCapturedOutput);
      }
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) return;
    close(r.fd);  // EOF or a hard error
    r.fd = -1;
  }
}

Running spawn(const JobSpec& job, size_t index, double timeout_s) {
  std::error_code ec;
  std::filesystem::remove(job.trace_out, ec);
  std::filesystem::create_directories(job.trace_out.parent_path());
  int fds[2];
  if (pipe(fds) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
  std::fflush(nullptr);
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw IoError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);  // a timeout kills the whole group, adapter subprocesses included
    close(fds[0]);
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    close(fds[1]);
    run_child(job);
  }
  setpgid(pid, pid);
  close(fds[1]);
  fcntl(fds[0], F_SETFL, fcntl(fds[0], F_GETFL) | O_NONBLOCK);
  Running r;
  r.job = index;
  r.pid = pid;
  r.fd = fds[0];
  r.deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(timeout_s));
  return r;
}

// Reads the child's trace, or synthesizes a crash trace and sets
// `synthesized` when there is no valid one.
TraceBundle collect(const JobSpec& job, const Running& r, int status, bool timed_out,
                    bool& synthesized) {
  synthesized = true;
  if (timed_out) return crash_bundle(*job.spec, job.backend, "timeout");
  const bool exited = WIFEXITED(status);
  if (exited && WEXITSTATUS(status) <= 2 && std::filesystem::exists(job.trace_out)) {
    TraceBundle b;
    try {
      b = read_trace(job.trace_out);
    } catch (const TraceError& e) {
      return crash_bundle(*job.spec, job.backend, std::string("invalid trace: ") + e.what());
    }
    if (b.backend_id != job.backend || b.model_id != job.spec->model_id) {
      return crash_bundle(*job.spec, job.backend,
                          "trace names backend '" + b.backend_id + "' and model '" +
                              b.model_id + "'");
    }
    synthesized = false;
    return b;
  }
  if (WIFSIGNALED(status)) {
    const int sig = WTERMSIG(status);
    const char* name = strsignal(sig);
    return crash_bundle(*job.spec, job.backend,
                        with_tail("killed by signal " + std::to_string(sig) + " (" +
                                      (name ? name : "unknown") + ")",
                                  r.output));
  }
  return crash_bundle(*job.spec, job.backend,
                      with_tail("exited with status " + std::to_string(WEXITSTATUS(status)) +
                                    " without a trace",
                                r.output));
}

}  // namespace

TraceBundle crash_bundle(const ModelSpec& spec, const std::string& backend,
                         const std::string& message) {
  TraceBundle b;
  b.backend_id = backend;
  b.model_id = spec.model_id;
  b.loss = spec.loss;
  b.precision = "f32";
  b.outcome = Outcome::kCrash;
  b.message = message;
  const Adjacency adj(spec.graph);
  for (const Node& n : spec.graph.nodes) b.nodes.push_back({n.id, n.kind, adj.preds[n.id]});
  b.fc.assign(b.nodes.size(), std::nullopt);
  b.bc.assign(b.nodes.size(), {});
  return b;
}

void run_jobs(const std::vector<JobSpec>& jobs, Isolation isolation, int parallelism,
              double timeout_s, const std::function<void(size_t, TraceBundle)>& done) {
  if (isolation == Isolation::kNone) {
    for (size_t i = 0; i < jobs.size(); ++i) {
      if (!jobs[i].external_command.empty()) {
        throw ConfigError("external backends need process isolation");
      }
      TraceBundle b = run_backend(jobs[i].backend, *jobs[i].spec);
      std::filesystem::create_directories(jobs[i].trace_out.parent_path());
      write_trace(b, jobs[i].trace_out);
      done(i, std::move(b));
    }
    return;
  }

  std::vector<Running> running;
  size_t next = 0;
  while (next < jobs.size() || !running.empty()) {
    while (static_cast<int>(running.size()) < parallelism && next < jobs.size()) {
      running.push_back(spawn(jobs[next], next, timeout_s));
      ++next;
    }
    std::vector<pollfd> fds;
    for (const Running& r : running) {
      if (r.fd >= 0) fds.push_back({r.fd, POLLIN, 0});
    }
    // Short waits keep deadlines and exits without output responsive.
    poll(fds.data(), fds.size(), fds.empty() ? 5 : 20);

    for (size_t i = 0; i < running.size();) {
      Running& r = running[i];
      drain(r);
      int status = 0;
      const pid_t w = waitpid(r.pid, &status, WNOHANG);
      bool finished = w == r.pid;
      bool timed_out = false;
      if (!finished && Clock::now() >= r.deadline) {
        kill(-r.pid, SIGKILL);
        kill(r.pid, SIGKILL);
        waitpid(r.pid, &status, 0);
        finished = true;
        timed_out = true;
      }
      if (!finished) {
        ++i;
        continue;
      }
      if (r.fd >= 0) {
        drain(r);
        if (r.fd >= 0) close(r.fd);
      }
      const JobSpec& job = jobs[r.job];
      bool synthesized = false;
      TraceBundle b = collect(job, r, status, timed_out, synthesized);
      if (synthesized) write_trace(b, job.trace_out);  // every job leaves a trace
      const size_t index = r.job;
      running.erase(running.begin() + static_cast<std::ptrdiff_t>(i));
      done(index, std::move(b));
    }
  }
}

}  // namespace archfuzz
