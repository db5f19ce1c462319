#include "fineq/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace fineq {

namespace {

void put_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(uint8_t(x));
  v.push_back(uint8_t(x >> 8));
}

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(uint8_t(x >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& v, float x) {
  put_u32(v, std::bit_cast<uint32_t>(x));
}

uint16_t get_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                const void* data, size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorKind::Io, "cannot create " + path.string());
  out.write(static_cast<const char*>(data), std::streamsize(size));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace

TensorManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::MissingFile, "cannot open " + path.string());

  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadManifest,
                path.string() + ": " + e.what());
  }

  TensorManifest m;
  try {
    m.rows = j.at("rows").get<uint32_t>();
    m.cols = j.at("cols").get<uint32_t>();
    m.dtype = j.at("dtype").get<std::string>();
    m.data_path = j.at("data_path").get<std::string>();
    m.name = j.value("name", path.stem().string());
    const std::string axis = j.value("channel_axis", "row");
    if (axis == "row")
      m.channel_axis = ChannelAxis::Row;
    else if (axis == "col")
      m.channel_axis = ChannelAxis::Col;
    else
      throw Error(ErrorKind::BadManifest,
                  "channel_axis must be \"row\" or \"col\", got " + axis);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadManifest, path.string() + ": " + e.what());
  }

  if (m.dtype != "f32")
    throw Error(ErrorKind::BadManifest, "unsupported dtype " + m.dtype);
  if (m.rows == 0 || m.cols == 0)
    throw Error(ErrorKind::BadManifest, "rows and cols must be >= 1");
  return m;
}

FloatTensor load_tensor(const std::filesystem::path& manifest_path) {
  const TensorManifest m = read_manifest(manifest_path);

  std::filesystem::path data_path(m.data_path);
  if (data_path.is_relative())
    data_path = manifest_path.parent_path() / data_path;

  const std::vector<uint8_t> bytes = read_file(data_path);
  const uint64_t expect = uint64_t(m.rows) * m.cols * 4;
  if (bytes.size() != expect)
    throw Error(ErrorKind::SizeMismatch,
                data_path.string() + ": expected " + std::to_string(expect) +
                    " bytes, found " + std::to_string(bytes.size()));

  FloatTensor t(m.rows, m.cols, m.channel_axis);
  for (uint64_t i = 0; i < t.size(); ++i)
    t.data[i] = get_f32(bytes.data() + 4 * i);
  require_finite(t);
  return t;
}

std::filesystem::path save_tensor(const FloatTensor& t,
                                  const std::filesystem::path& path) {
  if (t.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "cannot save an empty tensor");

  std::filesystem::path base = path;
  if (base.extension() == ".json") base.replace_extension();
  const std::filesystem::path manifest_path =
      std::filesystem::path(base).concat(".json");
  const std::filesystem::path data_path =
      std::filesystem::path(base).concat(".bin");

  std::vector<uint8_t> bytes;
  bytes.reserve(t.size() * 4);
  for (float v : t.data) put_f32(bytes, v);
  write_file(data_path, bytes.data(), bytes.size());

  nlohmann::ordered_json j;
  j["name"] = base.filename().string();
  j["rows"] = t.rows;
  j["cols"] = t.cols;
  j["dtype"] = "f32";
  j["data_path"] = data_path.filename().string();
  j["channel_axis"] = t.channel_axis == ChannelAxis::Row ? "row" : "col";
  const std::string text = j.dump(2) + "\n";
  write_file(manifest_path, text.data(), text.size());
  return manifest_path;
}

std::vector<uint8_t> serialize_packed(const PackedTensor& p) {
  const uint32_t channels = p.num_channels();
  const uint64_t block_bytes =
      uint64_t(channels) * p.blocks_per_channel() * kBlockBytes;
  if (p.scales.size() != channels || p.blocks.size() != block_bytes)
    throw Error(ErrorKind::Internal, "packed tensor layout is inconsistent");

  std::vector<uint8_t> out;
  out.reserve(kPackedHeaderBytes + 4ull * channels + block_bytes);
  out.insert(out.end(), kPackedMagic, kPackedMagic + 4);
  put_u16(out, kPackedVersion);
  put_u32(out, p.rows);
  put_u32(out, p.cols);
  out.push_back(uint8_t(p.channel_axis));
  put_u32(out, p.clusters_per_channel);
  for (float s : p.scales) put_f32(out, s);
  out.insert(out.end(), p.blocks.begin(), p.blocks.end());
  return out;
}

PackedTensor parse_packed(const uint8_t* data, size_t size) {
  if (size < kPackedHeaderBytes)
    throw Error(ErrorKind::Truncated, "packed stream shorter than header");
  if (std::memcmp(data, kPackedMagic, 4) != 0)
    throw Error(ErrorKind::BadMagic, "not a packed tensor (bad magic)");
  const uint16_t version = get_u16(data + 4);
  if (version != kPackedVersion)
    throw Error(ErrorKind::BadVersion,
                "unsupported packed version " + std::to_string(version));

  PackedTensor p;
  p.rows = get_u32(data + 6);
  p.cols = get_u32(data + 10);
  const uint8_t axis = data[14];
  if (axis > 1)
    throw Error(ErrorKind::InvalidArgument,
                "channel_axis byte must be 0 or 1");
  p.channel_axis = ChannelAxis(axis);
  p.clusters_per_channel = get_u32(data + 15);

  if (p.rows == 0 || p.cols == 0)
    throw Error(ErrorKind::InvalidArgument, "packed dims must be >= 1");
  if (p.clusters_per_channel != clusters_for_length(p.channel_length()))
    throw Error(ErrorKind::InvalidArgument,
                "cluster count disagrees with tensor dims");

  const uint32_t channels = p.num_channels();
  const uint64_t block_bytes =
      uint64_t(channels) * p.blocks_per_channel() * kBlockBytes;
  const uint64_t expect = kPackedHeaderBytes + 4ull * channels + block_bytes;
  if (size != expect)
    throw Error(ErrorKind::Truncated,
                "packed stream is " + std::to_string(size) +
                    " bytes, expected " + std::to_string(expect));

  p.scales.resize(channels);
  const uint8_t* cursor = data + kPackedHeaderBytes;
  for (uint32_t c = 0; c < channels; ++c, cursor += 4) {
    p.scales[c] = get_f32(cursor);
    if (!(p.scales[c] >= 0.0f) || !std::isfinite(p.scales[c]))
      throw Error(ErrorKind::InvalidArgument,
                  "scale " + std::to_string(c) + " is not a finite value >= 0");
  }
  p.blocks.assign(cursor, cursor + block_bytes);
  return p;
}

void write_packed(const PackedTensor& p, const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = serialize_packed(p);
  write_file(path, bytes.data(), bytes.size());
}

PackedTensor read_packed(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  return parse_packed(bytes.data(), bytes.size());
}

}  // namespace fineq
