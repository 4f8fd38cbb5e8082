#include "chansel/bfp.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "chansel/error.hpp"

namespace chansel::bfp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string item_file_name(const DatasetItem& it, std::size_t i) {
  if (!it.name.empty()) return it.name;
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%05zu.bfp", i);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_patch(const RasterPatch& patch, const LabelMask* mask) {
  if (mask && (mask->height() != patch.height() || mask->width() != patch.width())) {
    throw ValidationError("mask dimensions differ from patch dimensions");
  }
  std::vector<std::uint8_t> out;
  const auto payload = patch.data();
  out.reserve(kHeaderBytes + payload.size() * 4 + (mask ? mask->data().size() : 0));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(patch.height()));
  put_u32(out, static_cast<std::uint32_t>(patch.width()));
  put_u32(out, static_cast<std::uint32_t>(patch.channel_count()));
  put_u32(out, mask ? 1u : 0u);
  for (float v : payload) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (mask) out.insert(out.end(), mask->data().begin(), mask->data().end());
  return out;
}

DecodedPatch decode_patch(std::span<const std::uint8_t> bytes, std::span<const ChannelId> channels,
                          const std::string& label) {
  if (bytes.size() < kHeaderBytes) throw FormatError(label + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError(label + ": bad magic (expected BFP1)");
  const std::uint32_t h = get_u32(bytes.data() + 4);
  const std::uint32_t w = get_u32(bytes.data() + 8);
  const std::uint32_t nc = get_u32(bytes.data() + 12);
  const std::uint32_t mask_present = get_u32(bytes.data() + 16);
  if (h == 0 || w == 0 || nc == 0) throw FormatError(label + ": zero dimension in header");
  if (mask_present > 1) throw FormatError(label + ": mask_present must be 0 or 1");
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  const std::uint64_t expected = kHeaderBytes + n * nc * 4 + (mask_present ? n : 0);
  if (bytes.size() < expected) {
    throw FormatError(label + ": truncated payload (" + std::to_string(bytes.size()) + " of " +
                      std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) throw FormatError(label + ": trailing bytes after payload");
  if (nc != channels.size()) {
    throw ValidationError(label + ": file has " + std::to_string(nc) + " channels, manifest lists " +
                          std::to_string(channels.size()));
  }
  std::vector<float> data(n * nc);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) data[i] = std::bit_cast<float>(get_u32(p));

  DecodedPatch out;
  try {
    out.patch = RasterPatch(static_cast<int>(h), static_cast<int>(w),
                            std::vector<ChannelId>(channels.begin(), channels.end()), std::move(data));
    if (mask_present) {
      out.mask = LabelMask(static_cast<int>(h), static_cast<int>(w), std::vector<std::uint8_t>(p, p + n));
    }
  } catch (const ValidationError& e) {
    throw ValidationError(label + ": " + e.what());
  }
  return out;
}

void write_patch(const fs::path& file, const RasterPatch& patch, const LabelMask* mask) {
  const auto bytes = encode_patch(patch, mask);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + file.string());
}

DecodedPatch read_patch(const fs::path& file, std::span<const ChannelId> channels) {
  const auto bytes = read_file(file);
  return decode_patch(bytes, channels, file.filename().string());
}

void save_dataset(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "BFP1";
  manifest["version"] = 1;
  json channels = json::array();
  for (const auto& c : d.channels()) channels.push_back({{"index", c.index}, {"name", c.name}});
  manifest["channels"] = channels;
  json patches = json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& it = d.item(i);
    const std::string name = item_file_name(it, i);
    write_patch(dir / name, it.patch, it.mask ? &*it.mask : nullptr);
    patches.push_back(name);
  }
  manifest["patches"] = patches;
  manifest["metadata"] = d.info().metadata;
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("missing " + manifest_path.string());
  DatasetInfo info;
  std::vector<std::string> files;
  try {
    const json m = json::parse(in);
    if (m.at("format").get<std::string>() != "BFP1") throw FormatError("manifest format is not BFP1");
    for (const auto& c : m.at("channels")) {
      info.channels.push_back({c.at("index").get<int>(), c.at("name").get<std::string>()});
    }
    files = m.at("patches").get<std::vector<std::string>>();
    if (m.contains("metadata")) info.metadata = m.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  std::vector<DatasetItem> items(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  const auto n = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      auto decoded = read_patch(dir / files[i], info.channels);
      items[i] = {files[i], std::move(decoded.patch), std::move(decoded.mask)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return Dataset(std::move(items), std::move(info));
}

}  // namespace chansel::bfp
