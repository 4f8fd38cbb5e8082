#include "chansel/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "chansel/error.hpp"
#include "chansel/serialize.hpp"

namespace chansel::external {

using nlohmann::json;

namespace {

double field(const json& j, const char* key, bool required, double fallback) {
  if (!j.contains(key)) {
    if (required) throw ProtocolError(std::string("evaluator response lacks '") + key + "'");
    return fallback;
  }
  const auto& v = j.at(key);
  if (!v.is_number()) throw ProtocolError(std::string("evaluator response: '") + key + "' is not a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
    throw ProtocolError(std::string("evaluator response: '") + key + "' = " + v.dump() + " is outside [0, 1]");
  }
  return x;
}

void write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("cannot write to evaluator: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

EvalReport parse_response(const std::string& line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("evaluator response is not a JSON object: " + line);
  if (j.contains("error")) {
    throw EvaluatorError("external evaluator reported: " +
                         (j.at("error").is_string() ? j.at("error").get<std::string>() : j.at("error").dump()));
  }
  EvalReport r;
  r.f1 = field(j, "f1", true, 0.0);
  r.precision = field(j, "precision", false, 0.0);
  r.recall = field(j, "recall", false, 0.0);
  r.threshold = field(j, "threshold", false, 0.5);
  r.per_seed_scores = {r.f1};
  return r;
}

ExternalEvaluator::ExternalEvaluator(std::string command, std::string dataset, std::uint64_t seed,
                                     proxy::EvaluatorConfig budget, std::chrono::milliseconds timeout)
    : command_(std::move(command)),
      dataset_(std::move(dataset)),
      seed_(seed),
      budget_(budget),
      timeout_(timeout) {
  if (command_.empty()) throw ValidationError("external evaluator: empty command");
  if (timeout_.count() <= 0) throw ValidationError("external evaluator: timeout must be positive");
}

ExternalEvaluator::~ExternalEvaluator() { stop(); }

void ExternalEvaluator::start() {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EvaluatorError("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw EvaluatorError("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw EvaluatorError("fork failed");
  }
  if (pid == 0) {
    // Own process group, so stop() also reaches whatever the shell spawned.
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void ExternalEvaluator::stop() noexcept {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }
  pid_ = -1;
  buffer_.clear();
}

std::string ExternalEvaluator::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (buffer_.size() > kMaxResponseBytes) throw ProtocolError("evaluator response line too long");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw TimeoutError("external evaluator gave no response within " + std::to_string(timeout_.count()) + " ms");
    }
    pollfd p{from_child_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("cannot read from evaluator: ") + std::strerror(errno));
    }
    if (n == 0) throw ProtocolError("external evaluator closed its output before responding");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

EvalReport ExternalEvaluator::evaluate(std::span<const int> subset) {
  if (subset.empty()) throw ValidationError("external evaluator: empty subset");
  if (pid_ < 0) start();
  const json req = {{"dataset", dataset_},
                    {"channels", std::vector<int>(subset.begin(), subset.end())},
                    {"seed", seed_},
                    {"budget", to_json(budget_)}};
  try {
    write_all(to_child_, req.dump() + "\n");
    return parse_response(read_line());
  } catch (const ProtocolError&) {
    stop();  // stream state is unknown; the next request restarts the child
    throw;
  } catch (const TimeoutError&) {
    stop();
    throw;
  }
}

EvalReport external_evaluate(const std::string& dataset, std::span<const int> subset, const std::string& command,
                             std::uint64_t seed, const proxy::EvaluatorConfig& budget,
                             std::chrono::milliseconds timeout) {
  ExternalEvaluator ev(command, dataset, seed, budget, timeout);
  return ev.evaluate(subset);
}

}  // namespace chansel::external
