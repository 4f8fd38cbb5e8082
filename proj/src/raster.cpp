#include "chansel/raster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "chansel/error.hpp"
#include "chansel/rng.hpp"

namespace chansel {

Plane::Plane(int h, int w, std::vector<float> v) : height(h), width(w), values(std::move(v)) {
  if (h <= 0 || w <= 0 || values.size() != static_cast<std::size_t>(h) * w) {
    throw ValidationError("plane dimensions do not match value count");
  }
}

RasterPatch::RasterPatch(int height, int width, std::vector<ChannelId> channels, std::vector<float> data)
    : height_(height), width_(width), channels_(std::move(channels)), data_(std::move(data)) {
  if (height_ <= 0 || width_ <= 0) {
    throw ValidationError("patch dimensions must be positive");
  }
  if (data_.size() != pixel_count() * channels_.size()) {
    throw ValidationError("patch payload length does not match height*width*channels");
  }
  std::set<int> seen;
  for (const auto& c : channels_) {
    if (!seen.insert(c.index).second) {
      throw ValidationError("duplicate channel id " + std::to_string(c.index));
    }
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      const std::size_t px = i / channels_.size();
      throw ValidationError("non-finite value at row " + std::to_string(px / width_) + ", col " +
                            std::to_string(px % width_) + ", channel " +
                            std::to_string(channels_[i % channels_.size()].index));
    }
  }
}

RasterPatch RasterPatch::from_planes(std::vector<ChannelId> channels, std::span<const Plane> planes) {
  if (planes.empty() || planes.size() != channels.size()) {
    throw ValidationError("from_planes: need one plane per channel");
  }
  const int h = planes.front().height;
  const int w = planes.front().width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::size_t nc = planes.size();
  std::vector<float> data(n * nc);
  for (std::size_t c = 0; c < nc; ++c) {
    if (planes[c].height != h || planes[c].width != w) {
      throw ValidationError("from_planes: plane shape mismatch");
    }
    for (std::size_t p = 0; p < n; ++p) data[p * nc + c] = planes[c].values[p];
  }
  return RasterPatch(h, w, std::move(channels), std::move(data));
}

std::optional<std::size_t> RasterPatch::slot_of(int channel_index) const noexcept {
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].index == channel_index) return i;
  }
  return std::nullopt;
}

std::size_t RasterPatch::require_slot(int channel_index) const {
  if (auto s = slot_of(channel_index)) return *s;
  throw ValidationError("unknown channel id " + std::to_string(channel_index));
}

Plane RasterPatch::plane(std::size_t slot) const {
  Plane out(height_, width_);
  const std::size_t nc = channels_.size();
  for (std::size_t p = 0; p < out.size(); ++p) out.values[p] = data_[p * nc + slot];
  return out;
}

RasterPatch RasterPatch::with_appended(std::span<const ChannelId> channels, std::span<const Plane> planes) const {
  if (channels.size() != planes.size()) {
    throw ValidationError("with_appended: need one plane per channel");
  }
  const std::size_t n = pixel_count();
  const std::size_t old_nc = channels_.size();
  const std::size_t nc = old_nc + channels.size();
  std::vector<float> data(n * nc);
  for (std::size_t p = 0; p < n; ++p) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(p * old_nc), old_nc,
                data.begin() + static_cast<std::ptrdiff_t>(p * nc));
  }
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].height != height_ || planes[c].width != width_) {
      throw ValidationError("with_appended: plane shape mismatch");
    }
    for (std::size_t p = 0; p < n; ++p) data[p * nc + old_nc + c] = planes[c].values[p];
  }
  std::vector<ChannelId> ids = channels_;
  ids.insert(ids.end(), channels.begin(), channels.end());
  return RasterPatch(height_, width_, std::move(ids), std::move(data));
}

LabelMask::LabelMask(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height_ <= 0 || width_ <= 0 || data_.size() != static_cast<std::size_t>(height_) * width_) {
    throw ValidationError("mask dimensions do not match payload length");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] > 1) {
      throw ValidationError("mask value " + std::to_string(data_[i]) + " at pixel " + std::to_string(i) +
                            " is not binary");
    }
  }
}

std::size_t LabelMask::positive_count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Dataset::Dataset(std::vector<DatasetItem> items, DatasetInfo info) : info_(std::move(info)) {
  for (const auto& it : items) {
    const auto ch = it.patch.channels();
    if (!std::equal(ch.begin(), ch.end(), info_.channels.begin(), info_.channels.end())) {
      throw ValidationError("patch '" + it.name + "' channel list differs from dataset channel list");
    }
    if (it.mask && (it.mask->height() != it.patch.height() || it.mask->width() != it.patch.width())) {
      throw ValidationError("patch '" + it.name + "': mask dimensions differ from patch dimensions");
    }
  }
  items_ = std::make_shared<const std::vector<DatasetItem>>(std::move(items));
}

bool Dataset::has_masks() const noexcept {
  return std::all_of(items().begin(), items().end(), [](const DatasetItem& it) { return it.mask.has_value(); });
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == which) out.push_back(i);
  }
  return out;
}

Dataset Dataset::with_split(std::vector<Split> split, std::uint64_t seed, double ratio) const {
  if (split.size() != size()) throw ValidationError("split length does not match dataset size");
  Dataset out = *this;
  out.split_ = std::move(split);
  out.split_seed_ = seed;
  out.split_ratio_ = ratio;
  return out;
}

Dataset Dataset::with_metadata(std::string key, std::string value) const {
  Dataset out = *this;
  out.info_.metadata[std::move(key)] = std::move(value);
  return out;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

std::uint64_t Dataset::fingerprint() const {
  Fnv1a f;
  for (const auto& c : info_.channels) f.value(c.index);
  for (const auto& it : items()) {
    f.value(it.patch.height());
    f.value(it.patch.width());
    f.bytes(it.patch.data().data(), it.patch.data().size_bytes());
    if (it.mask) f.bytes(it.mask->data().data(), it.mask->data().size_bytes());
  }
  for (auto s : split_) f.value(s);
  return f.h;
}

Dataset split_dataset(const Dataset& d, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  const std::size_t n = d.size();
  if (n < 2) throw ValidationError("split needs at least 2 patches");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  // 1e-9 absorbs representation error such as 0.7 * 10 = 7.000000000000001.
  auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<Split> split(n, Split::validation);
  for (std::size_t k = 0; k < n_train; ++k) split[order[k]] = Split::train;
  return d.with_split(std::move(split), seed, ratio);
}

RasterPatch select_channels(const RasterPatch& p, std::span<const int> ids) {
  if (ids.empty()) throw ValidationError("channel selection is empty");
  std::vector<std::size_t> slots;
  std::vector<ChannelId> channels;
  for (int id : ids) {
    const std::size_t s = p.require_slot(id);
    slots.push_back(s);
    channels.push_back(p.channels()[s]);
  }
  const std::size_t n = p.pixel_count();
  const std::size_t nc_in = p.channel_count();
  const std::size_t nc = slots.size();
  std::vector<float> data(n * nc);
  const auto src = p.data();
  for (std::size_t px = 0; px < n; ++px) {
    for (std::size_t c = 0; c < nc; ++c) data[px * nc + c] = src[px * nc_in + slots[c]];
  }
  return RasterPatch(p.height(), p.width(), std::move(channels), std::move(data));
}

Dataset select_channels(const Dataset& d, std::span<const int> ids) {
  std::vector<DatasetItem> items;
  items.reserve(d.size());
  for (const auto& it : d.items()) items.push_back({it.name, select_channels(it.patch, ids), it.mask});
  DatasetInfo info = d.info();
  info.channels.clear();
  for (int id : ids) {
    const auto ch = d.channels();
    const auto found = std::find_if(ch.begin(), ch.end(), [id](const ChannelId& c) { return c.index == id; });
    if (found == ch.end()) throw ValidationError("unknown channel id " + std::to_string(id));
    info.channels.push_back(*found);
  }
  Dataset out(std::move(items), std::move(info));
  if (d.is_split()) {
    out = out.with_split(std::vector<Split>(d.split().begin(), d.split().end()), d.split_seed(), d.split_ratio());
  }
  return out;
}

namespace {

int parse_channel_number(std::string_view t, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ValidationError("bad channel list '" + std::string(whole) + "'");
  }
  return v;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<int> parse_channel_list(std::string_view text) {
  std::vector<int> out;
  std::set<int> seen;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = strip(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto dots = item.find("..");
    int lo = 0;
    int hi = 0;
    if (dots == std::string_view::npos) {
      lo = hi = parse_channel_number(item, text);
    } else {
      lo = parse_channel_number(strip(item.substr(0, dots)), text);
      hi = parse_channel_number(strip(item.substr(dots + 2)), text);
      if (hi < lo) throw ValidationError("bad channel range in '" + std::string(text) + "'");
    }
    for (int c = lo; c <= hi; ++c) {
      if (c < 1) throw ValidationError("channel ids start at 1: '" + std::string(text) + "'");
      if (!seen.insert(c).second) throw ValidationError("channel " + std::to_string(c) + " listed twice");
      out.push_back(c);
    }
  }
  if (out.empty()) throw ValidationError("empty channel list");
  return out;
}

std::string format_channel_list(std::span<const int> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace chansel
