#pragma once

// BFP1 patch container and dataset manifest.
//
// Patch file layout (all integers little-endian):
//   "BFP1" | u32 height | u32 width | u32 channel_count | u32 mask_present
//   | f32[height*width*channel_count] row-major, channel-last
//   | u8[height*width] mask (only when mask_present == 1)
//
// A dataset directory holds one such file per patch plus manifest.json, which
// lists patch file names in order, the channel ids/names, and free-form
// string metadata.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chansel/raster.hpp"

namespace chansel::bfp {

inline constexpr char kMagic[4] = {'B', 'F', 'P', '1'};
inline constexpr std::size_t kHeaderBytes = 20;
inline constexpr const char* kManifestName = "manifest.json";

std::vector<std::uint8_t> encode_patch(const RasterPatch& patch, const LabelMask* mask);

struct DecodedPatch {
  RasterPatch patch;
  std::optional<LabelMask> mask;
};

// `channels` supplies the ids (from the manifest); its length must equal the
// file's channel_count. `label` is used in error messages.
DecodedPatch decode_patch(std::span<const std::uint8_t> bytes, std::span<const ChannelId> channels,
                          const std::string& label);

void write_patch(const std::filesystem::path& file, const RasterPatch& patch, const LabelMask* mask);
DecodedPatch read_patch(const std::filesystem::path& file, std::span<const ChannelId> channels);

// Writes every item as <item.name> (or pNNNNN.bfp when unnamed) plus the manifest.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

// Files are read in parallel; items come back in manifest order.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace chansel::bfp
