#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "chansel/engineering.hpp"
#include "chansel/error.hpp"
#include "chansel/kernels.hpp"
#include "test_util.hpp"

using namespace chansel;
namespace eng = chansel::engineering;

namespace {

RasterPatch raw_patch(int h, int w, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  std::vector<Plane> planes;
  for (int b = 1; b <= 14; ++b) planes.push_back(testutil::random_plane(h, w, gen, lo, hi));
  return RasterPatch::from_planes(eng::raw_channels(), planes);
}

double ratio(double n, double d) { return std::fabs(d) < 1e-12 ? 0.0 : n / d; }

// Scalar re-statement of every pointwise engineered channel.
double scalar_channel(int id, double b2, double b3, double b4, double b8, double b11, double b12) {
  switch (id) {
    case 18: return ratio(b8 - b4, b8 + b4);
    case 19: case 29: return ratio(b8 - b11, b8 + b11);
    case 20: return ratio(b8 - b12, b8 + b12);
    case 21: return (b2 + b3 + b4) / 3.0;
    case 27: return 1.5 * ratio(b8 - b4, b8 + b4 + 0.5);
    case 28: return std::clamp(2.5 * ratio(b8 - b4, b8 + 6 * b4 - 7.5 * b2 + 1), -10.0, 10.0);
    case 30: return ratio((b11 + b4) - (b8 + b2), (b11 + b4) + (b8 + b2));
  }
  return NAN;
}

Plane one(float v) { return Plane(1, 1, v); }

}  // namespace

TEST_SUITE("engineering") {
  TEST_CASE("catalog") {
    const auto& cat = eng::channel_catalog();
    REQUIRE(cat.size() == 30);
    for (int i = 1; i <= 30; ++i) {
      CHECK(cat[i - 1].id.index == i);
      CHECK((cat[i - 1].kind == eng::ChannelKind::raw) == (i <= 14));
    }
    CHECK(eng::channel_spec(19).formula == eng::channel_spec(29).formula);
    CHECK_THROWS_AS(eng::channel_spec(31), ValidationError);
  }

  TEST_CASE("worked examples") {
    RasterPatch p = RasterPatch::from_planes(
        eng::raw_channels(), std::vector<Plane>(14, Plane(1, 3, std::vector<float>{0.0f, 5.0f, 10.0f})));
    const auto mm = eng::minmax_normalize(p, 2);
    CHECK(mm.values == std::vector<float>{0.0f, 0.5f, 1.0f});
    CHECK(eng::normalized_difference(one(0.5f), one(0.25f)).values[0] == doctest::Approx(1.0 / 3.0));
    CHECK(eng::savi(one(0.5f), one(0.25f)).values[0] == doctest::Approx(0.3));
    CHECK(eng::savi(one(1.0f), one(0.0f)).values[0] == doctest::Approx(1.0));
    CHECK(eng::evi(one(0.4f), one(0.2f), one(0.1f)).values[0] == doctest::Approx(0.27027).epsilon(1e-4));
    // (B11 + B4) = 0.6, (B8 + B2) = 0.2
    CHECK(eng::mndwi(one(0.4f), one(0.2f), one(0.1f), one(0.1f)).values[0] == doctest::Approx(0.5));
    CHECK(eng::grayscale(one(0.3f), one(0.6f), one(0.9f)).values[0] == doctest::Approx(0.6));
  }

  TEST_CASE("zero denominators give zero") {
    CHECK(eng::normalized_difference(one(0.0f), one(0.0f)).values[0] == 0.0f);
    CHECK(eng::normalized_difference(one(0.3f), one(-0.3f)).values[0] == 0.0f);
    CHECK(eng::savi(one(-0.25f), one(-0.25f)).values[0] == 0.0f);
    CHECK(eng::mndwi(one(0), one(0), one(0), one(0)).values[0] == 0.0f);
    // B8 + 6 B4 - 7.5 B2 + 1 = 0 exactly with B8 = 0.875, B4 = 0, B2 = 0.25
    CHECK(eng::evi(one(0.875f), one(0.0f), one(0.25f)).values[0] == 0.0f);
  }

  TEST_CASE("EVI is clamped") {
    // Denominator 1 - 1.875 + 1 = 0.125, so the raw value is 20.
    const float v = eng::evi(one(1.0f), one(0.0f), one(0.25f)).values[0];
    CHECK(std::fabs(v) <= 10.0f);
    CHECK(v == 10.0f);
  }

  TEST_CASE("constant plane min-max gives zeros") {
    RasterPatch p = RasterPatch::from_planes(eng::raw_channels(), std::vector<Plane>(14, Plane(3, 3, 7.0f)));
    const auto mm = eng::minmax_normalize(p, 4);
    CHECK(std::all_of(mm.values.begin(), mm.values.end(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS_AS(eng::minmax_normalize(p, 5), ValidationError);
  }

  TEST_CASE("pointwise channels match scalar formulas on random tuples") {
    std::mt19937_64 gen(21);
    // 1000 tuples as a 25 x 40 patch; wide range includes negatives and near-zero sums.
    const auto p = raw_patch(25, 40, gen, -1.0, 1.0);
    const auto e = eng::engineer_all(p);
    for (int id : {18, 19, 20, 21, 27, 28, 29, 30}) {
      const Plane got = e.plane_by_index(id);
      for (int y = 0; y < 25; ++y)
        for (int x = 0; x < 40; ++x) {
          auto b = [&](int band) { return static_cast<double>(p.plane_by_index(band).at(y, x)); };
          const double want = scalar_channel(id, b(2), b(3), b(4), b(8), b(11), b(12));
          const double tol = 1e-6 * std::max(1.0, std::fabs(want));
          CHECK_MESSAGE(std::fabs(got.at(y, x) - want) <= tol, "channel ", id, " at ", y, ",", x);
        }
    }
  }

  TEST_CASE("engineered patch layout") {
    std::mt19937_64 gen(22);
    const auto p = raw_patch(10, 12, gen, 0.01, 1.0);
    const auto e = eng::engineer_all(p);
    REQUIRE(e.channel_count() == 30);
    for (int i = 0; i < 30; ++i) CHECK(e.channels()[i].index == i + 1);
    CHECK(e.plane_by_index(29).values == e.plane_by_index(19).values);
    for (int b = 1; b <= 14; ++b) CHECK(e.plane_by_index(b).values == p.plane_by_index(b).values);
    const Plane gray = e.plane_by_index(21);
    CHECK(e.plane_by_index(22).values == kernels::gaussian3x3(gray).values);
    CHECK(e.plane_by_index(23).values == kernels::median3x3(gray).values);
    CHECK(e.plane_by_index(24).values == kernels::sobel3x3(gray).gx.values);
    CHECK(e.plane_by_index(25).values == kernels::sobel3x3(gray).gy.values);
    CHECK(e.plane_by_index(26).values == kernels::canny(gray).values);
    for (int id = 15; id <= 17; ++id) {
      const auto v = e.plane_by_index(id).values;
      CHECK(*std::min_element(v.begin(), v.end()) == 0.0f);
      CHECK(*std::max_element(v.begin(), v.end()) == 1.0f);
    }
  }

  TEST_CASE("subset of engineered ids, appended in ascending order") {
    std::mt19937_64 gen(23);
    const auto p = raw_patch(5, 5, gen);
    const std::vector<int> ids{28, 18};
    const auto e = eng::engineer_all(p, ids);
    REQUIRE(e.channel_count() == 16);
    CHECK(e.channels()[14].index == 18);
    CHECK(e.channels()[15].index == 28);
    const std::vector<int> bad{5};
    CHECK_THROWS_AS(eng::engineer_all(p, bad), ValidationError);
  }

  TEST_CASE("requires the raw bands") {
    std::mt19937_64 gen(24);
    const auto p = RasterPatch::from_planes(testutil::numbered_channels(3),
                                            std::vector<Plane>(3, testutil::random_plane(4, 4, gen)));
    CHECK_THROWS_AS(eng::engineer_all(p), ValidationError);
  }

  TEST_CASE("dataset engineering keeps split and names") {
    std::mt19937_64 gen(25);
    std::vector<DatasetItem> items;
    for (int i = 0; i < 4; ++i) items.push_back({"p" + std::to_string(i), raw_patch(6, 6, gen), std::nullopt});
    Dataset d(std::move(items), {eng::raw_channels(), {}});
    d = split_dataset(d, 0.5, 3);
    const auto ids = eng::all_engineered_ids();
    const auto e = eng::engineer_dataset(d, ids);
    CHECK(e.channels().size() == 30);
    CHECK(e.is_split());
    CHECK(std::vector<Split>(e.split().begin(), e.split().end()) ==
          std::vector<Split>(d.split().begin(), d.split().end()));
    CHECK(e.item(2).name == "p2");
    CHECK(e.item(2).patch == eng::engineer_all(d.item(2).patch));
  }
}
