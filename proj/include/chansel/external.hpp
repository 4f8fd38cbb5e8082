#pragma once

// Subset evaluator backed by a child process speaking one JSON line per
// request and one per response over stdin/stdout.
//
//   request:  {"dataset": "<path>", "channels": [..], "seed": n, "budget": {..}}
//   response: {"f1": x, "precision": x, "recall": x, "threshold": x}
//
// A response may instead carry {"error": "<message>"}.

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

#include "chansel/evaluator.hpp"
#include "chansel/proxy.hpp"

namespace chansel::external {

inline constexpr std::chrono::milliseconds kDefaultTimeout = std::chrono::hours(1);
inline constexpr std::size_t kMaxResponseBytes = 1 << 20;

// Parses and range-checks one response line; throws ProtocolError.
EvalReport parse_response(const std::string& line);

class ExternalEvaluator : public SubsetEvaluator {
 public:
  // `command` runs under /bin/sh -c and is started on first use.
  ExternalEvaluator(std::string command, std::string dataset, std::uint64_t seed, proxy::EvaluatorConfig budget,
                    std::chrono::milliseconds timeout = kDefaultTimeout);
  ~ExternalEvaluator() override;
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  EvalReport evaluate(std::span<const int> subset) override;
  std::string describe() const override { return "exec:" + command_; }

  // Kills the child, if any.
  void stop() noexcept;

 private:
  void start();
  std::string read_line();

  std::string command_;
  std::string dataset_;
  std::uint64_t seed_;
  proxy::EvaluatorConfig budget_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// One request against a fresh child.
EvalReport external_evaluate(const std::string& dataset, std::span<const int> subset, const std::string& command,
                             std::uint64_t seed, const proxy::EvaluatorConfig& budget,
                             std::chrono::milliseconds timeout = kDefaultTimeout);

}  // namespace chansel::external
