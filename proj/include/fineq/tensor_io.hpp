#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fineq/types.hpp"

namespace fineq {

/// JSON manifest describing a raw little-endian f32 data file:
///   { "name": "w", "rows": 2, "cols": 3, "dtype": "f32",
///     "data_path": "w.bin", "channel_axis": "row" }
/// data_path is resolved relative to the manifest's directory.
struct TensorManifest {
  std::string name;
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::string dtype = "f32";
  std::string data_path;
  ChannelAxis channel_axis = ChannelAxis::Row;
};

TensorManifest read_manifest(const std::filesystem::path& path);

/// Reads manifest + data file. Distinct errors for a missing file, a data
/// file whose byte count disagrees with rows*cols*4, and non-finite values.
FloatTensor load_tensor(const std::filesystem::path& manifest_path);

/// Writes <base>.json and <base>.bin ("base" is `path` minus a trailing
/// .json if present). Returns the manifest path.
std::filesystem::path save_tensor(const FloatTensor& t,
                                  const std::filesystem::path& path);

std::vector<uint8_t> serialize_packed(const PackedTensor& p);
PackedTensor parse_packed(const uint8_t* data, size_t size);

void write_packed(const PackedTensor& p, const std::filesystem::path& path);
PackedTensor read_packed(const std::filesystem::path& path);

}  // namespace fineq
