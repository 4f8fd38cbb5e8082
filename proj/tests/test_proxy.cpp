#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "chansel/error.hpp"
#include "chansel/proxy.hpp"
#include "test_util.hpp"

using namespace chansel;

namespace {

// Direct statement of alpha * BCE_w + (1 - alpha) * (1 - Dice).
double oracle_loss(const std::vector<double>& z, const std::vector<std::uint8_t>& y, double alpha, double pw) {
  double bce = 0.0, py = 0.0, ps = 0.0, ys = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
    bce += -(pw * y[i] * std::log(q) + (1 - y[i]) * std::log(1 - q));
    py += p * y[i];
    ps += p;
    ys += y[i];
  }
  bce /= static_cast<double>(z.size());
  const double dice = (2 * py + 1) / (ps + ys + 1);
  return alpha * bce + (1 - alpha) * (1 - dice);
}

// Patches with one positive rectangle in every other patch; channel 1 is the
// mask plus N(0, sigma) noise, channel 2 pure noise.
Dataset planted(std::uint64_t seed, double sigma, int n = 20, int size = 16) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<DatasetItem> items;
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(size) * size, 0);
    if (i % 2 == 0) {
      const int y0 = static_cast<int>(gen() % (size - 5)), x0 = static_cast<int>(gen() % (size - 5));
      for (int y = y0; y < y0 + 4; ++y)
        for (int x = x0; x < x0 + 4; ++x) m[y * size + x] = 1;
    }
    std::vector<float> data;
    for (int px = 0; px < size * size; ++px) {
      data.push_back(static_cast<float>(m[px] + sigma * noise(gen)));
      data.push_back(static_cast<float>(noise(gen)));
    }
    items.push_back({"p" + std::to_string(i), RasterPatch(size, size, testutil::numbered_channels(2), data),
                     LabelMask(size, size, m)});
  }
  return split_dataset(Dataset(std::move(items), {testutil::numbered_channels(2), {}}), 0.7, seed);
}

proxy::EvaluatorConfig quick(std::uint64_t seed = 1) {
  proxy::EvaluatorConfig c;
  c.epochs = 8;
  c.learning_rate = 0.05;
  c.seed = seed;
  return c;
}

double always_positive_f1(const proxy::FeatureBank& bank) {
  std::uint64_t pos = 0, total = 0;
  for (std::size_t i : bank.validation()) {
    pos += bank.dataset().item(i).mask->positive_count();
    total += bank.dataset().item(i).patch.pixel_count();
  }
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return 2 * p / (1 + p);
}

}  // namespace

TEST_SUITE("proxy") {
  TEST_CASE("loss value matches the formula") {
    std::mt19937_64 gen(41);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 5 + gen() % 30;
      std::vector<double> z(n);
      std::vector<std::uint8_t> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = u(gen);
        y[i] = gen() % 3 == 0;
      }
      for (double alpha : {0.0, 0.5, 1.0}) {
        const double pw = 1.0 + static_cast<double>(gen() % 10);
        CHECK(proxy::weighted_bce_dice_value(z, y, alpha, pw) ==
              doctest::Approx(oracle_loss(z, y, alpha, pw)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> u(-4.9, 4.9);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 5 + gen() % 30;
      std::vector<double> z(n);
      std::vector<std::uint8_t> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = u(gen);
        y[i] = gen() % 3 == 0;
      }
      for (double alpha : {0.0, 0.5, 1.0}) {
        const double pw = 3.0;
        const auto lv = proxy::weighted_bce_dice_loss(z, y, alpha, pw);
        CHECK(lv.loss == doctest::Approx(proxy::weighted_bce_dice_value(z, y, alpha, pw)));
        for (std::size_t i = 0; i < n; ++i) {
          const double h = 1e-5;
          auto zp = z, zm = z;
          zp[i] += h;
          zm[i] -= h;
          const double fd = (oracle_loss(zp, y, alpha, pw) - oracle_loss(zm, y, alpha, pw)) / (2 * h);
          const double rel = std::fabs(lv.grad[i] - fd) / std::max(std::fabs(fd), 1e-6);
          worst = std::max(worst, rel);
        }
      }
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("pos_weight is the capped class ratio") {
    const auto d = planted(43, 0.1);
    const proxy::FeatureBank bank(d, 1);
    std::uint64_t pos = 0, neg = 0;
    for (std::size_t i : bank.train()) {
      pos += d.item(i).mask->positive_count();
      neg += d.item(i).patch.pixel_count() - d.item(i).mask->positive_count();
    }
    const double ratio = static_cast<double>(neg) / static_cast<double>(pos);
    CHECK(bank.pos_weight(1000.0) == doctest::Approx(ratio));
    CHECK(bank.pos_weight(2.0) == 2.0);
  }

  TEST_CASE("feature bank standardizes with train statistics") {
    const auto d = planted(44, 0.5);
    const proxy::FeatureBank bank(d, 1);
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (std::size_t i : bank.train()) {
      for (float v : d.item(i).patch.plane_by_index(2).values) {
        sum += v;
        sq += static_cast<double>(v) * v;
        n += 1;
      }
    }
    const double mean = sum / n;
    CHECK(bank.mean(2) == doctest::Approx(mean).epsilon(1e-9));
    CHECK(bank.stddev(2) == doctest::Approx(std::sqrt(sq / n - mean * mean)).epsilon(1e-6));
    const auto padded = bank.padded(2, 0);
    CHECK(padded.size() == 18u * 18u);
    const double raw = d.item(0).patch.plane_by_index(2).at(0, 0);
    CHECK(padded[1 * 18 + 1] == doctest::Approx((raw - bank.mean(2)) / bank.stddev(2)).epsilon(1e-5));
    // Reflect-101: padded(-1, -1) equals plane(1, 1).
    CHECK(padded[0] == padded[2 * 18 + 2]);
  }

  TEST_CASE("separable channel is learned") {
    const auto d = planted(45, 0.1);
    const std::vector<int> subset{1};
    const auto r = proxy::train_and_score(d, subset, quick());
    CHECK(r.f1 >= 0.95);
  }

  TEST_CASE("noise channel stays near the always-positive baseline") {
    const auto d = planted(46, 0.1);
    const proxy::FeatureBank bank(d, 1);
    const std::vector<int> subset{2};
    const auto r = proxy::train_and_score(bank, subset, quick());
    CHECK(r.f1 <= always_positive_f1(bank) + 0.05);
  }

  TEST_CASE("training is deterministic and order-independent through the evaluator") {
    const auto d = planted(47, 0.3);
    proxy::BuiltinEvaluator ev(d, quick(9));
    const std::vector<int> a{1, 2}, b{2, 1};
    const auto ra = ev.evaluate(a);
    CHECK(ra == ev.evaluate(b));
    CHECK(ra == ev.evaluate(a));
    CHECK(ev.thread_safe());
  }

  TEST_CASE("invalid inputs") {
    const auto d = planted(48, 0.3);
    const std::vector<int> none;
    CHECK_THROWS_AS(proxy::train_and_score(d, none, quick()), ValidationError);
    const std::vector<int> unknown{5};
    CHECK_THROWS_AS(proxy::train_and_score(d, unknown, quick()), ValidationError);
    auto bad = quick();
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = quick();
    bad.hard_negative_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("divergence is reported with the epoch") {
    const auto d = planted(49, 0.3);
    auto cfg = quick();
    cfg.learning_rate = 1e308;
    const std::vector<int> subset{1, 2};
    try {
      proxy::train_and_score(d, subset, cfg);
      FAIL("expected EvaluatorError");
    } catch (const EvaluatorError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }

  TEST_CASE("balanced sampler") {
    proxy::SamplingPool pool{{0, 1}, {2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
    const proxy::BalancedSampler s(pool, 5);
    const auto e = s.epoch(0, 20000);
    std::map<std::size_t, int> hits;
    int positives = 0;
    for (auto i : e) {
      ++hits[i];
      positives += i < 2;
    }
    CHECK(std::fabs(positives / 20000.0 - 0.5) < 0.02);
    // The majority group is walked in full passes, so its counts differ by at most one.
    int lo = hits[2], hi = hits[2];
    for (std::size_t i = 2; i < 12; ++i) {
      lo = std::min(lo, hits[i]);
      hi = std::max(hi, hits[i]);
    }
    CHECK(hi - lo <= 1);
    CHECK(e == s.epoch(0, 20000));
    CHECK(e != s.epoch(1, 20000));
    CHECK(s.warnings().empty());
  }

  TEST_CASE("sampler without positives falls back to shuffling") {
    proxy::SamplingPool pool{{}, {4, 5, 6}};
    const proxy::BalancedSampler s(pool, 5);
    CHECK_FALSE(s.warnings().empty());
    auto e = s.epoch(0, 3);
    std::sort(e.begin(), e.end());
    CHECK(e == std::vector<std::size_t>{4, 5, 6});
  }

  TEST_CASE("rank_and_swap against a sort-based oracle") {
    std::mt19937_64 gen(50);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + gen() % 12;
      std::vector<std::size_t> neg(n);
      std::vector<double> loss(n);
      for (std::size_t i = 0; i < n; ++i) {
        neg[i] = 100 + i;
        loss[i] = static_cast<double>(gen() % 5);  // many ties
      }
      const double frac = (gen() % 10) / 10.0;
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t i = 0; i < n; ++i) order.push_back({-loss[i], i});
      std::sort(order.begin(), order.end());
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::floor(frac * n)), n / 2);
      auto want = neg;
      for (std::size_t j = 0; j < k; ++j) want[order[n - 1 - j].second] = neg[order[j].second];
      CHECK(proxy::rank_and_swap(neg, loss, frac) == want);
    }
  }
}
