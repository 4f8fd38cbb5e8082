#include "chansel/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "chansel/error.hpp"
#include "chansel/kernels.hpp"
#include "chansel/rng.hpp"

namespace chansel::proxy {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kSamplerStream = 0x5A3;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double loss_impl(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                 double pos_weight, double* grad) {
  const std::size_t n = logits.size();
  if (truth.size() != n) throw ValidationError("loss: logits and truth sizes differ");
  if (n == 0) return 0.0;
  thread_local std::vector<double> prob;
  prob.resize(n);
  double bce = 0.0, sum_p = 0.0, sum_y = 0.0, sum_py = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = sigmoid(logits[i]);
    prob[i] = p;
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (truth[i]) {
      bce -= pos_weight * std::log(q);
      sum_y += 1.0;
      sum_py += p;
    } else {
      bce -= std::log(1.0 - q);
    }
    sum_p += p;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  bce *= inv_n;
  const double denom = sum_p + sum_y + 1.0;
  const double numer = 2.0 * sum_py + 1.0;
  const double dice = numer / denom;
  const double loss = alpha * bce + (1.0 - alpha) * (1.0 - dice);
  if (grad) {
    const double inv_denom2 = 1.0 / (denom * denom);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = prob[i];
      const bool y = truth[i] != 0;
      double d_bce = 0.0;
      // The clamp is flat outside (1e-7, 1 - 1e-7), so the BCE term has no slope there.
      if (p > kProbabilityClamp && p < 1.0 - kProbabilityClamp) {
        d_bce = (y ? -pos_weight * (1.0 - p) : p) * inv_n;
      }
      const double d_dice_dp = ((y ? 2.0 * denom : 0.0) - numer) * inv_denom2;
      grad[i] = alpha * d_bce - (1.0 - alpha) * d_dice_dp * p * (1.0 - p);
    }
  }
  return loss;
}

struct Adam {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void update(std::vector<double>& w, std::span<const double> g, const EvaluatorConfig& c) {
    ++step;
    const double b1t = 1.0 - std::pow(c.adam_beta1, static_cast<double>(step));
    const double b2t = 1.0 - std::pow(c.adam_beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.adam_beta1 * m[i] + (1.0 - c.adam_beta1) * g[i];
      v[i] = c.adam_beta2 * v[i] + (1.0 - c.adam_beta2) * g[i] * g[i];
      const double mhat = m[i] / b1t;
      const double vhat = v[i] / b2t;
      w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_eps);
    }
  }
};

// Window-linear model evaluation over padded planes. The per-row float
// accumulators keep the inner loops vectorizable; accumulation order is fixed.
class WindowModel {
 public:
  WindowModel(int height, int width, int radius, std::size_t channels)
      : h_(height), w_(width), r_(radius), side_(2 * radius + 1), channels_(channels),
        row_(static_cast<std::size_t>(width)) {}

  std::size_t taps() const noexcept { return static_cast<std::size_t>(side_) * side_; }

  void forward(std::span<const float* const> planes, std::span<const double> weights, std::span<double> logits) {
    const int pw = w_ + 2 * r_;
    const double bias = weights[channels_ * taps()];
    wf_.resize(channels_ * taps());
    for (std::size_t k = 0; k < wf_.size(); ++k) wf_[k] = static_cast<float>(weights[k]);
    float* acc = row_.data();
    for (int y = 0; y < h_; ++y) {
      std::fill(row_.begin(), row_.end(), 0.0f);
      for (std::size_t c = 0; c < channels_; ++c) {
        const float* plane = planes[c];
        const float* wc = wf_.data() + c * taps();
        for (int dy = 0; dy < side_; ++dy) {
          const float* src_row = plane + static_cast<std::size_t>(y + dy) * pw;
          for (int dx = 0; dx < side_; ++dx) {
            const float wk = wc[dy * side_ + dx];
            const float* src = src_row + dx;
            for (int x = 0; x < w_; ++x) acc[x] += wk * src[x];
          }
        }
      }
      double* out = logits.data() + static_cast<std::size_t>(y) * w_;
      for (int x = 0; x < w_; ++x) out[x] = bias + static_cast<double>(acc[x]);
    }
  }

  // grad[k] = sum over pixels of g * window value at tap k; bias last.
  void backward(std::span<const float* const> planes, std::span<const double> g, std::span<double> grad) {
    const int pw = w_ + 2 * r_;
    std::fill(grad.begin(), grad.end(), 0.0);
    gf_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gf_[i] = static_cast<float>(g[i]);
    double bias = 0.0;
    for (double v : g) bias += v;
    grad[channels_ * taps()] = bias;
    for (std::size_t c = 0; c < channels_; ++c) {
      const float* plane = planes[c];
      double* gc = grad.data() + c * taps();
      for (int y = 0; y < h_; ++y) {
        const float* gy = gf_.data() + static_cast<std::size_t>(y) * w_;
        for (int dy = 0; dy < side_; ++dy) {
          const float* src_row = plane + static_cast<std::size_t>(y + dy) * pw;
          for (int dx = 0; dx < side_; ++dx) {
            gc[dy * side_ + dx] += dot(gy, src_row + dx, w_);
          }
        }
      }
    }
  }

 private:
  static double dot(const float* a, const float* b, int n) {
    float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int x = 0;
    for (; x + 8 <= n; x += 8) {
      for (int l = 0; l < 8; ++l) lanes[l] += a[x + l] * b[x + l];
    }
    double s = 0.0;
    for (int l = 0; l < 8; ++l) s += lanes[l];
    for (; x < n; ++x) s += static_cast<double>(a[x]) * b[x];
    return s;
  }

  int h_, w_, r_, side_;
  std::size_t channels_;
  std::vector<float> row_;
  std::vector<float> wf_;
  std::vector<float> gf_;
};

std::vector<const float*> planes_for(const FeatureBank& bank, std::span<const int> subset, std::size_t item,
                                     std::span<const std::size_t> sources) {
  std::vector<const float*> planes(subset.size());
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const std::size_t src = sources.empty() ? item : sources[j];
    planes[j] = bank.padded(subset[j], src).data();
  }
  return planes;
}

std::vector<double> item_losses(const FeatureBank& bank, const TrainedProxy& proxy,
                                std::span<const std::size_t> items) {
  std::vector<double> losses(items.size());
  std::vector<double> logits;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& it = bank.dataset().item(items[k]);
    logits.resize(it.patch.pixel_count());
    predict_logits(bank, proxy, items[k], {}, logits);
    losses[k] = weighted_bce_dice_value(logits, it.mask->data(), proxy.config.loss_alpha, proxy.pos_weight);
  }
  return losses;
}

TrainedProxy fit(const FeatureBank& bank, std::span<const int> subset, const EvaluatorConfig& cfg) {
  cfg.validate();
  if (subset.empty()) throw ValidationError("cannot train on an empty channel subset");
  if (cfg.neighborhood != bank.radius()) throw ValidationError("feature bank radius differs from config neighborhood");
  if (bank.train().empty()) throw ValidationError("train split is empty");

  TrainedProxy model;
  model.subset.assign(subset.begin(), subset.end());
  model.radius = cfg.neighborhood;
  model.config = cfg;
  for (int id : subset) {
    model.channel_mean.push_back(bank.mean(id));
    model.channel_std.push_back(bank.stddev(id));
  }
  model.pos_weight = bank.pos_weight(cfg.pos_weight_cap);

  const std::size_t taps = static_cast<std::size_t>(cfg.window_taps());
  const std::size_t n_weights = subset.size() * taps + 1;
  model.weights.assign(n_weights, 0.0);
  Rng init(derive_seed(cfg.seed, kInitStream));
  for (std::size_t k = 0; k + 1 < n_weights; ++k) model.weights[k] = 0.01 * init.normal();

  BalancedSampler sampler(make_pool(bank.dataset()), derive_seed(cfg.seed, kSamplerStream));
  const std::vector<std::size_t> base_negatives = sampler.pool().negative;
  const std::size_t draws = bank.train().size();

  Adam adam(n_weights);
  std::vector<double> logits, grad_logits, grad(n_weights);
  std::unique_ptr<WindowModel> model_shape;
  int shape_h = -1, shape_w = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t item : sampler.epoch(epoch, draws)) {
      const auto& it = bank.dataset().item(item);
      const int h = it.patch.height();
      const int w = it.patch.width();
      if (h != shape_h || w != shape_w) {
        model_shape = std::make_unique<WindowModel>(h, w, cfg.neighborhood, subset.size());
        shape_h = h;
        shape_w = w;
      }
      const auto planes = planes_for(bank, subset, item, {});
      logits.resize(it.patch.pixel_count());
      grad_logits.resize(logits.size());
      model_shape->forward(planes, model.weights, logits);
      epoch_loss += weighted_bce_dice_loss(logits, it.mask->data(), cfg.loss_alpha, model.pos_weight, grad_logits);
      model_shape->backward(planes, grad_logits, grad);
      adam.update(model.weights, grad, cfg);
    }
    const bool weights_finite =
        std::all_of(model.weights.begin(), model.weights.end(), [](double v) { return std::isfinite(v); });
    if (!std::isfinite(epoch_loss) || !weights_finite) {
      throw EvaluatorError("non-finite training loss in epoch " + std::to_string(epoch + 1));
    }
    const bool refresh_due = cfg.hard_negative_fraction > 0.0 && (epoch + 1) % cfg.hard_negative_period == 0 &&
                             epoch + 1 < cfg.epochs && base_negatives.size() >= 2;
    if (refresh_due) {
      sampler.set_negative_pool(hard_negative_refresh(bank, model, base_negatives, cfg.hard_negative_fraction));
    }
  }
  return model;
}

std::vector<Plane> validation_probabilities(const FeatureBank& bank, const TrainedProxy& proxy,
                                            std::span<const std::vector<std::size_t>> sources_by_item) {
  const auto val = bank.validation();
  if (val.empty()) throw ValidationError("validation split is empty");
  if (!sources_by_item.empty() && sources_by_item.size() != val.size()) {
    throw ValidationError("plane remapping must cover every validation item");
  }
  std::vector<Plane> probs(val.size());
  const auto n = static_cast<std::ptrdiff_t>(val.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto& it = bank.dataset().item(val[k]);
    std::vector<double> logits(it.patch.pixel_count());
    const std::span<const std::size_t> sources =
        sources_by_item.empty() ? std::span<const std::size_t>() : std::span<const std::size_t>(sources_by_item[k]);
    predict_logits(bank, proxy, val[k], sources, logits);
    Plane p(it.patch.height(), it.patch.width());
    for (std::size_t i = 0; i < logits.size(); ++i) p.values[i] = static_cast<float>(sigmoid(logits[i]));
    probs[k] = std::move(p);
  }
  return probs;
}

std::vector<PredictionView> views_for(const FeatureBank& bank, std::span<const std::size_t> items,
                                      const std::vector<Plane>& probs) {
  std::vector<PredictionView> views;
  views.reserve(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    views.push_back({probs[k].values, bank.dataset().item(items[k]).mask->data()});
  }
  return views;
}

}  // namespace

void EvaluatorConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("evaluator config: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(loss_alpha >= 0.0 && loss_alpha <= 1.0)) fail("loss_alpha must lie in [0, 1]");
  if (!(pos_weight_cap > 0.0)) fail("pos_weight_cap must be positive");
  if (!(hard_negative_fraction >= 0.0 && hard_negative_fraction < 1.0)) fail("hard_negative_fraction must lie in [0, 1)");
  if (hard_negative_period < 1) fail("hard_negative_period must be >= 1");
  if (neighborhood < 0) fail("neighborhood must be >= 0");
}

LossValue weighted_bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                                 double pos_weight) {
  LossValue out;
  out.grad.resize(logits.size());
  out.loss = loss_impl(logits, truth, alpha, pos_weight, out.grad.data());
  return out;
}

double weighted_bce_dice_loss(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                              double pos_weight, std::span<double> grad) {
  if (grad.size() != logits.size()) throw ValidationError("loss: gradient buffer size differs from logits");
  return loss_impl(logits, truth, alpha, pos_weight, grad.data());
}

double weighted_bce_dice_value(std::span<const double> logits, std::span<const std::uint8_t> truth, double alpha,
                               double pos_weight) {
  return loss_impl(logits, truth, alpha, pos_weight, nullptr);
}

SamplingPool make_pool(const Dataset& d) {
  SamplingPool pool;
  const bool split = d.is_split();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (split && d.split_of(i) != Split::train) continue;
    const auto& mask = d.item(i).mask;
    if (!mask) throw ValidationError("patch '" + d.item(i).name + "' has no mask");
    (mask->positive_count() > 0 ? pool.positive : pool.negative).push_back(i);
  }
  return pool;
}

BalancedSampler::BalancedSampler(SamplingPool pool, std::uint64_t seed) : pool_(std::move(pool)), seed_(seed) {
  if (pool_.positive.empty() && !pool_.negative.empty()) {
    warnings_.push_back("no positive patches in the train split; sampling uniformly");
  }
}

std::vector<std::size_t> BalancedSampler::epoch(int epoch_index, std::size_t draws) const {
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch_index)));
  std::vector<std::size_t> out;
  out.reserve(draws);

  if (pool_.positive.empty() || pool_.negative.empty()) {
    std::vector<std::size_t> all = pool_.positive;
    all.insert(all.end(), pool_.negative.begin(), pool_.negative.end());
    if (all.empty()) return out;
    std::vector<std::size_t> order = all;
    std::size_t cursor = order.size();
    while (out.size() < draws) {
      if (cursor == order.size()) {
        order = all;
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      out.push_back(order[cursor++]);
    }
    return out;
  }

  const bool positives_minor = pool_.positive.size() < pool_.negative.size();
  const auto& minority = positives_minor ? pool_.positive : pool_.negative;
  const auto& majority = positives_minor ? pool_.negative : pool_.positive;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  while (out.size() < draws) {
    const bool want_positive = rng.below(2) == 0;
    if (want_positive == positives_minor) {
      out.push_back(minority[rng.below(minority.size())]);
    } else {
      if (cursor == order.size()) {
        order = majority;
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      out.push_back(order[cursor++]);
    }
  }
  return out;
}

std::vector<std::size_t> rank_and_swap(std::span<const std::size_t> negatives, std::span<const double> losses,
                                       double fraction) {
  if (negatives.size() != losses.size()) throw ValidationError("rank_and_swap: one loss per negative required");
  std::vector<std::size_t> pool(negatives.begin(), negatives.end());
  const std::size_t n = pool.size();
  std::size_t k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  k = std::min(k, n / 2);
  if (k == 0) return pool;
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  for (std::size_t j = 0; j < k; ++j) pool[rank[n - 1 - j]] = negatives[rank[j]];
  return pool;
}

FeatureBank::FeatureBank(const Dataset& d, int radius, std::span<const int> channels)
    : dataset_(d), radius_(radius) {
  if (radius_ < 0) throw ValidationError("feature radius must be >= 0");
  if (!d.is_split()) throw ValidationError("dataset has no train/validation split");
  if (!d.has_masks()) throw ValidationError("every patch needs a mask for training");
  train_ = d.indices(Split::train);
  validation_ = d.indices(Split::validation);

  offsets_.resize(d.size() + 1, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = d.item(i).patch;
    offsets_[i + 1] = offsets_[i] + static_cast<std::size_t>(p.height() + 2 * radius_) * (p.width() + 2 * radius_);
  }
  for (std::size_t i : train_) {
    const std::size_t pos = d.item(i).mask->positive_count();
    train_positive_ += pos;
    train_negative_ += d.item(i).patch.pixel_count() - pos;
  }

  std::vector<int> ids(channels.begin(), channels.end());
  if (ids.empty()) {
    for (const auto& c : d.channels()) ids.push_back(c.index);
  }
  channels_.resize(ids.size());
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto ch = d.channels();
    if (std::none_of(ch.begin(), ch.end(), [&](const ChannelId& x) { return x.index == ids[c]; })) {
      throw ValidationError("unknown channel id " + std::to_string(ids[c]));
    }
    channels_[c].index = ids[c];
  }

  const auto nch = static_cast<std::ptrdiff_t>(channels_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < nch; ++c) {
    ChannelData& cd = channels_[c];
    double sum = 0.0;
    std::uint64_t count = 0;
    for (std::size_t i : train_) {
      const auto& p = dataset_.item(i).patch;
      const std::size_t slot = *p.slot_of(cd.index);
      const auto data = p.data();
      for (std::size_t px = 0; px < p.pixel_count(); ++px) sum += data[px * p.channel_count() + slot];
      count += p.pixel_count();
    }
    cd.mean = count ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (std::size_t i : train_) {
      const auto& p = dataset_.item(i).patch;
      const std::size_t slot = *p.slot_of(cd.index);
      const auto data = p.data();
      for (std::size_t px = 0; px < p.pixel_count(); ++px) {
        const double dv = data[px * p.channel_count() + slot] - cd.mean;
        ss += dv * dv;
      }
    }
    const double sd = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
    cd.stddev = sd > 1e-12 ? sd : 1.0;

    cd.values.resize(offsets_.back());
    for (std::size_t i = 0; i < dataset_.size(); ++i) {
      const auto& p = dataset_.item(i).patch;
      const std::size_t slot = *p.slot_of(cd.index);
      const int h = p.height();
      const int w = p.width();
      const int pw = w + 2 * radius_;
      float* dst = cd.values.data() + offsets_[i];
      for (int y = -radius_; y < h + radius_; ++y) {
        for (int x = -radius_; x < w + radius_; ++x) {
          const double v = p.at(kernels::reflect101(y, h), kernels::reflect101(x, w), slot);
          dst[static_cast<std::size_t>(y + radius_) * pw + (x + radius_)] =
              static_cast<float>((v - cd.mean) / cd.stddev);
        }
      }
    }
  }
}

const FeatureBank::ChannelData& FeatureBank::channel(int index) const {
  for (const auto& c : channels_) {
    if (c.index == index) return c;
  }
  throw ValidationError("unknown channel id " + std::to_string(index));
}

bool FeatureBank::has_channel(int index) const noexcept {
  return std::any_of(channels_.begin(), channels_.end(), [index](const ChannelData& c) { return c.index == index; });
}

double FeatureBank::mean(int index) const { return channel(index).mean; }
double FeatureBank::stddev(int index) const { return channel(index).stddev; }

std::span<const float> FeatureBank::padded(int index, std::size_t item) const {
  const auto& c = channel(index);
  return std::span<const float>(c.values).subspan(offsets_[item], offsets_[item + 1] - offsets_[item]);
}

double FeatureBank::pos_weight(double cap) const {
  if (train_positive_ == 0) return 1.0;
  return std::min(static_cast<double>(train_negative_) / static_cast<double>(train_positive_), cap);
}

void predict_logits(const FeatureBank& bank, const TrainedProxy& proxy, std::size_t item,
                    std::span<const std::size_t> sources, std::span<double> logits) {
  const auto& p = bank.dataset().item(item).patch;
  if (logits.size() != p.pixel_count()) throw ValidationError("logit buffer size differs from patch size");
  if (!sources.empty() && sources.size() != proxy.subset.size()) {
    throw ValidationError("one plane source per subset channel required");
  }
  for (std::size_t src : sources) {
    const auto& q = bank.dataset().item(src).patch;
    if (q.height() != p.height() || q.width() != p.width()) {
      throw ValidationError("plane source has a different patch shape");
    }
  }
  WindowModel m(p.height(), p.width(), proxy.radius, proxy.subset.size());
  const auto planes = planes_for(bank, proxy.subset, item, sources);
  m.forward(planes, proxy.weights, logits);
}

Plane predict(const TrainedProxy& proxy, const RasterPatch& patch) {
  const int h = patch.height();
  const int w = patch.width();
  const int r = proxy.radius;
  const int pw = w + 2 * r;
  std::vector<std::vector<float>> padded(proxy.subset.size());
  std::vector<const float*> planes(proxy.subset.size());
  for (std::size_t j = 0; j < proxy.subset.size(); ++j) {
    const std::size_t slot = patch.require_slot(proxy.subset[j]);
    auto& dst = padded[j];
    dst.resize(static_cast<std::size_t>(h + 2 * r) * pw);
    for (int y = -r; y < h + r; ++y) {
      for (int x = -r; x < w + r; ++x) {
        const double v = patch.at(kernels::reflect101(y, h), kernels::reflect101(x, w), slot);
        dst[static_cast<std::size_t>(y + r) * pw + (x + r)] =
            static_cast<float>((v - proxy.channel_mean[j]) / proxy.channel_std[j]);
      }
    }
    planes[j] = dst.data();
  }
  WindowModel m(h, w, r, proxy.subset.size());
  std::vector<double> logits(patch.pixel_count());
  m.forward(planes, proxy.weights, logits);
  Plane out(h, w);
  for (std::size_t i = 0; i < logits.size(); ++i) out.values[i] = static_cast<float>(sigmoid(logits[i]));
  return out;
}

EvalReport score_validation(const FeatureBank& bank, const TrainedProxy& proxy,
                            std::span<const std::vector<std::size_t>> sources_by_item) {
  const auto probs = validation_probabilities(bank, proxy, sources_by_item);
  const auto views = views_for(bank, bank.validation(), probs);
  auto report = threshold_sweep(views).report;
  report.per_seed_scores = {report.f1};
  return report;
}

EvalReport score_validation_at(const FeatureBank& bank, const TrainedProxy& proxy, double threshold,
                               std::span<const std::vector<std::size_t>> sources_by_item) {
  const auto probs = validation_probabilities(bank, proxy, sources_by_item);
  const auto views = views_for(bank, bank.validation(), probs);
  auto report = report_from_counts(confusion(views, threshold), threshold);
  report.per_seed_scores = {report.f1};
  return report;
}

std::vector<std::size_t> hard_negative_refresh(const FeatureBank& bank, const TrainedProxy& proxy,
                                               std::span<const std::size_t> negatives, double fraction) {
  if (fraction <= 0.0 || negatives.empty()) return {negatives.begin(), negatives.end()};
  const auto losses = item_losses(bank, proxy, negatives);
  return rank_and_swap(negatives, losses, fraction);
}

TrainedProxy train_proxy(const FeatureBank& bank, std::span<const int> subset, const EvaluatorConfig& cfg) {
  TrainedProxy model = fit(bank, subset, cfg);
  const auto train = bank.train();
  std::vector<Plane> probs(train.size());
  for (std::size_t k = 0; k < train.size(); ++k) {
    const auto& it = bank.dataset().item(train[k]);
    std::vector<double> logits(it.patch.pixel_count());
    predict_logits(bank, model, train[k], {}, logits);
    Plane p(it.patch.height(), it.patch.width());
    for (std::size_t i = 0; i < logits.size(); ++i) p.values[i] = static_cast<float>(sigmoid(logits[i]));
    probs[k] = std::move(p);
  }
  const auto sweep = threshold_sweep(views_for(bank, train, probs));
  model.train_f1 = sweep.report.f1;
  model.threshold = sweep.best_threshold;
  return model;
}

EvalReport train_and_score(const FeatureBank& bank, std::span<const int> subset, const EvaluatorConfig& cfg) {
  return score_validation(bank, fit(bank, subset, cfg));
}

EvalReport train_and_score(const Dataset& d, std::span<const int> subset, const EvaluatorConfig& cfg) {
  cfg.validate();
  if (subset.empty()) throw ValidationError("cannot train on an empty channel subset");
  const FeatureBank bank(d, cfg.neighborhood, subset);
  return train_and_score(bank, subset, cfg);
}

BuiltinEvaluator::BuiltinEvaluator(const Dataset& d, EvaluatorConfig cfg)
    : cfg_((cfg.validate(), cfg)), bank_(d, cfg.neighborhood) {}

EvalReport BuiltinEvaluator::evaluate(std::span<const int> subset) {
  std::vector<int> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  return train_and_score(bank_, sorted, cfg_);
}

std::string BuiltinEvaluator::describe() const { return "builtin"; }

}  // namespace chansel::proxy
