#pragma once

// Built-in proxy evaluator: a per-pixel logistic model over the
// (2r+1)x(2r+1) window of every selected channel, trained with Adam on a
// class-weighted BCE + soft Dice loss, fed by a class-balanced patch sampler
// with periodic hard-negative mining, and scored on the validation split
// with the threshold sweep.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chansel/evaluator.hpp"
#include "chansel/metrics.hpp"
#include "chansel/raster.hpp"

namespace chansel::proxy {

struct EvaluatorConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double loss_alpha = 0.5;  // weight of BCE; (1 - alpha) goes to Dice
  double pos_weight_cap = 50.0;
  double hard_negative_fraction = 0.25;
  int hard_negative_period = 5;
  std::uint64_t seed = 42;
  int neighborhood = 1;  // window radius

  // Throws ValidationError on out-of-range fields.
  void validate() const;
  int window_taps() const noexcept { return (2 * neighborhood + 1) * (2 * neighborhood + 1); }
};

inline constexpr double kProbabilityClamp = 1e-7;

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logit
};

// alpha * BCE_w + (1 - alpha) * (1 - Dice), with
//   BCE_w = mean(-(pos_weight * y * log q + (1 - y) * log(1 - q))),
//   q = clamp(sigmoid(z), 1e-7, 1 - 1e-7),
//   Dice  = (2 sum(p y) + 1) / (sum p + sum y + 1).
LossValue weighted_bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> truth,
                                 double alpha, double pos_weight);
// Same, writing the gradient into `grad` (sized like logits).
double weighted_bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                              double pos_weight, std::span<double> grad);
// Loss only, no gradient.
double weighted_bce_dice_value(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                               double pos_weight);

// Train-split patches grouped by whether they contain any event pixel.
struct SamplingPool {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

SamplingPool make_pool(const Dataset& d);

// Class-balanced epoch order: each draw picks the positive or negative group
// with probability 1/2; the minority group is drawn with replacement, the
// majority walks a reshuffled order. With only one group present the epoch
// is a plain shuffle. Deterministic per (seed, epoch).
class BalancedSampler {
 public:
  BalancedSampler(SamplingPool pool, std::uint64_t seed);

  std::vector<std::size_t> epoch(int epoch_index, std::size_t draws) const;

  const SamplingPool& pool() const noexcept { return pool_; }
  void set_negative_pool(std::vector<std::size_t> negatives) { pool_.negative = std::move(negatives); }
  // Set when the pool had no positive patch and sampling fell back to uniform.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  SamplingPool pool_;
  std::uint64_t seed_;
  std::vector<std::string> warnings_;
};

// Rank negatives by loss (descending, ties by position); the hardest
// floor(fraction * n) entries, capped at n / 2, take the places of the same
// number of easiest entries.
std::vector<std::size_t> rank_and_swap(std::span<const std::size_t> negatives, std::span<const double> losses,
                                       double fraction);

// Standardized, reflect-101 padded channel planes for every patch of a split
// dataset. Mean and standard deviation come from the train split only.
class FeatureBank {
 public:
  // `channels` empty means every dataset channel.
  FeatureBank(const Dataset& d, int radius, std::span<const int> channels = {});

  const Dataset& dataset() const noexcept { return dataset_; }
  int radius() const noexcept { return radius_; }
  std::span<const std::size_t> train() const noexcept { return train_; }
  std::span<const std::size_t> validation() const noexcept { return validation_; }

  bool has_channel(int index) const noexcept;
  double mean(int index) const;
  double stddev(int index) const;
  // Padded plane of one item: (h + 2r) x (w + 2r).
  std::span<const float> padded(int index, std::size_t item) const;

  // min(N_neg / N_pos, cap) over train pixels; 1 when there are no positives.
  double pos_weight(double cap) const;

 private:
  struct ChannelData {
    int index = 0;
    double mean = 0.0;
    double stddev = 1.0;
    std::vector<float> values;
  };
  const ChannelData& channel(int index) const;

  Dataset dataset_;
  int radius_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> validation_;
  std::vector<std::size_t> offsets_;  // per item, into ChannelData::values
  std::vector<ChannelData> channels_;
  std::uint64_t train_positive_ = 0;
  std::uint64_t train_negative_ = 0;
};

struct TrainedProxy {
  std::vector<int> subset;
  int radius = 1;
  // Per channel, window taps row-major; the bias is last.
  std::vector<double> weights;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  EvaluatorConfig config;
  double pos_weight = 1.0;
  double train_f1 = 0.0;
  double threshold = 0.5;  // train-split sweep optimum
};

// Fits a proxy on the bank's train split.
TrainedProxy train_proxy(const FeatureBank& bank, std::span<const int> subset, const EvaluatorConfig& cfg);

// Logits for one bank item. `sources[j]` names the item whose plane feeds
// subset channel j (empty = the item itself); this is how channel
// permutation is applied without copying planes.
void predict_logits(const FeatureBank& bank, const TrainedProxy& proxy, std::size_t item,
                    std::span<const std::size_t> sources, std::span<double> logits);

// Probability plane for an arbitrary patch, standardized with the proxy's stats.
Plane predict(const TrainedProxy& proxy, const RasterPatch& patch);

// Sweep-scored validation report; `sources_by_item` optionally remaps planes as above.
EvalReport score_validation(const FeatureBank& bank, const TrainedProxy& proxy,
                            std::span<const std::vector<std::size_t>> sources_by_item = {});
// Validation report at a fixed threshold.
EvalReport score_validation_at(const FeatureBank& bank, const TrainedProxy& proxy, double threshold,
                               std::span<const std::vector<std::size_t>> sources_by_item = {});

// Current per-patch mean losses and the refreshed negative pool.
std::vector<std::size_t> hard_negative_refresh(const FeatureBank& bank, const TrainedProxy& proxy,
                                               std::span<const std::size_t> negatives, double fraction);

EvalReport train_and_score(const FeatureBank& bank, std::span<const int> subset, const EvaluatorConfig& cfg);
EvalReport train_and_score(const Dataset& d, std::span<const int> subset, const EvaluatorConfig& cfg);

// Evaluator over a fixed split dataset; subsets are sorted before training
// so the score depends only on the set of channels.
class BuiltinEvaluator : public SubsetEvaluator {
 public:
  BuiltinEvaluator(const Dataset& d, EvaluatorConfig cfg);

  EvalReport evaluate(std::span<const int> subset) override;
  bool thread_safe() const noexcept override { return true; }
  std::string describe() const override;

  const FeatureBank& bank() const noexcept { return bank_; }
  const EvaluatorConfig& config() const noexcept { return cfg_; }

 private:
  EvaluatorConfig cfg_;
  FeatureBank bank_;
};

}  // namespace chansel::proxy
