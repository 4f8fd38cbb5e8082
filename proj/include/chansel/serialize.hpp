#pragma once

#include <nlohmann/json.hpp>

#include "chansel/metrics.hpp"
#include "chansel/proxy.hpp"

namespace chansel {

nlohmann::json to_json(const proxy::EvaluatorConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
proxy::EvaluatorConfig evaluator_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace chansel
