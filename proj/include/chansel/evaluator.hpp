#pragma once

#include <span>
#include <string>

#include "chansel/metrics.hpp"

namespace chansel {

// Scores a channel subset; the search treats it as a black box.
// Implementations must be deterministic: the same subset always yields the
// same report.
class SubsetEvaluator {
 public:
  virtual ~SubsetEvaluator() = default;

  virtual EvalReport evaluate(std::span<const int> subset) = 0;

  // True when evaluate() may be called from several threads at once.
  virtual bool thread_safe() const noexcept { return false; }

  // Short identity string recorded in trace headers.
  virtual std::string describe() const = 0;
};

}  // namespace chansel
