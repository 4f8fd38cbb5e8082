#include "chansel/serialize.hpp"

#include <set>
#include <string>

#include "chansel/error.hpp"

namespace chansel {

using nlohmann::json;

json to_json(const proxy::EvaluatorConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"loss_alpha", c.loss_alpha},
          {"pos_weight_cap", c.pos_weight_cap},
          {"hard_negative_fraction", c.hard_negative_fraction},
          {"hard_negative_period", c.hard_negative_period},
          {"seed", c.seed},
          {"neighborhood", c.neighborhood}};
}

proxy::EvaluatorConfig evaluator_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("evaluator config: expected an object");
  proxy::EvaluatorConfig c;
  static const std::set<std::string> known = {"epochs",         "learning_rate",          "adam_beta1",
                                              "adam_beta2",     "adam_eps",               "loss_alpha",
                                              "pos_weight_cap", "hard_negative_fraction", "hard_negative_period",
                                              "seed",           "neighborhood"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw FormatError("evaluator config: unknown key '" + k + "'");
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.loss_alpha = j.value("loss_alpha", c.loss_alpha);
    c.pos_weight_cap = j.value("pos_weight_cap", c.pos_weight_cap);
    c.hard_negative_fraction = j.value("hard_negative_fraction", c.hard_negative_fraction);
    c.hard_negative_period = j.value("hard_negative_period", c.hard_negative_period);
    c.seed = j.value("seed", c.seed);
    c.neighborhood = j.value("neighborhood", c.neighborhood);
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluator config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const EvalReport& r) {
  json j = {{"f1", r.f1},
            {"precision", r.precision},
            {"recall", r.recall},
            {"threshold", r.threshold},
            {"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"fn", r.counts.fn},
            {"tn", r.counts.tn}};
  if (!r.per_seed_scores.empty()) j["per_seed_scores"] = r.per_seed_scores;
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    r.f1 = j.at("f1").get<double>();
    r.precision = j.value("precision", 0.0);
    r.recall = j.value("recall", 0.0);
    r.threshold = j.value("threshold", 0.5);
    r.counts.tp = j.value("tp", std::uint64_t{0});
    r.counts.fp = j.value("fp", std::uint64_t{0});
    r.counts.fn = j.value("fn", std::uint64_t{0});
    r.counts.tn = j.value("tn", std::uint64_t{0});
    if (j.contains("per_seed_scores")) r.per_seed_scores = j.at("per_seed_scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
  return r;
}

}  // namespace chansel
