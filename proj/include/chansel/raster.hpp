#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chansel {

// Channel identity. Indices 1-14 are the raw bands; 15-30 the engineered ones.
struct ChannelId {
  int index = 0;
  std::string name;

  friend bool operator==(const ChannelId&, const ChannelId&) = default;
};

// Single-channel raster, row-major.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  Plane(int h, int w, std::vector<float> v);

  std::size_t size() const noexcept { return values.size(); }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Plane& o) const noexcept { return height == o.height && width == o.width; }
};

// H x W x C cube, channel-last, float32. Immutable once constructed; the
// constructor rejects non-finite values and duplicate channel ids.
class RasterPatch {
 public:
  RasterPatch() = default;
  RasterPatch(int height, int width, std::vector<ChannelId> channels, std::vector<float> data);

  // Assemble a patch from planes in the given channel order.
  static RasterPatch from_planes(std::vector<ChannelId> channels, std::span<const Plane> planes);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t channel_count() const noexcept { return channels_.size(); }
  std::span<const ChannelId> channels() const noexcept { return channels_; }
  std::span<const float> data() const noexcept { return data_; }

  float at(int y, int x, std::size_t slot) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_.size() + slot];
  }

  std::optional<std::size_t> slot_of(int channel_index) const noexcept;
  // Throws ValidationError naming the id when absent.
  std::size_t require_slot(int channel_index) const;

  Plane plane(std::size_t slot) const;
  Plane plane_by_index(int channel_index) const { return plane(require_slot(channel_index)); }

  // Copy with extra planes appended after the existing channels.
  RasterPatch with_appended(std::span<const ChannelId> channels, std::span<const Plane> planes) const;

  friend bool operator==(const RasterPatch&, const RasterPatch&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<ChannelId> channels_;
  std::vector<float> data_;
};

// Binary landslide mask: 0 background, 1 event.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, std::vector<std::uint8_t> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::size_t positive_count() const noexcept;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

struct DatasetItem {
  std::string name;  // file name inside the dataset directory
  RasterPatch patch;
  std::optional<LabelMask> mask;
};

enum class Split : std::uint8_t { train, validation };

struct DatasetInfo {
  std::vector<ChannelId> channels;
  std::map<std::string, std::string> metadata;
};

// Ordered patches sharing one channel list, with an optional train/validation
// assignment. Items are shared between copies, so splitting is cheap.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<DatasetItem> items, DatasetInfo info);

  std::size_t size() const noexcept { return items_ ? items_->size() : 0; }
  const DatasetItem& item(std::size_t i) const { return (*items_)[i]; }
  std::span<const DatasetItem> items() const noexcept {
    return items_ ? std::span<const DatasetItem>(*items_) : std::span<const DatasetItem>();
  }
  std::span<const ChannelId> channels() const noexcept { return info_.channels; }
  const DatasetInfo& info() const noexcept { return info_; }
  bool has_masks() const noexcept;

  bool is_split() const noexcept { return !split_.empty(); }
  Split split_of(std::size_t i) const { return split_.at(i); }
  std::span<const Split> split() const noexcept { return split_; }
  std::vector<std::size_t> indices(Split which) const;
  std::uint64_t split_seed() const noexcept { return split_seed_; }
  double split_ratio() const noexcept { return split_ratio_; }

  Dataset with_split(std::vector<Split> split, std::uint64_t seed, double ratio) const;
  Dataset with_metadata(std::string key, std::string value) const;

  // FNV-1a over channel ids, dimensions, payloads, masks and split.
  std::uint64_t fingerprint() const;

 private:
  std::shared_ptr<const std::vector<DatasetItem>> items_;
  DatasetInfo info_;
  std::vector<Split> split_;
  std::uint64_t split_seed_ = 0;
  double split_ratio_ = 0.0;
};

// Ordered channel ids; the search state of the selection loop.
struct FeatureSubset {
  std::vector<int> ids;
  std::optional<double> score;
};

// Seeded shuffle, then the first ceil(ratio * N) patches go to train.
Dataset split_dataset(const Dataset& d, double ratio, std::uint64_t seed);

// Projection onto the listed channels, in the listed order.
RasterPatch select_channels(const RasterPatch& p, std::span<const int> ids);

Dataset select_channels(const Dataset& d, std::span<const int> ids);

// "1..14,21" -> 1, 2, ..., 14, 21. Order kept; duplicates rejected.
std::vector<int> parse_channel_list(std::string_view text);
std::string format_channel_list(std::span<const int> ids);

}  // namespace chansel
