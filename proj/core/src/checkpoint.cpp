#include "hbf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace hbf {

namespace bytes {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) {
    out.push_back(static_cast<unsigned char>((v >> (8 * k)) & 0xFFu));
  }
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) {
    out.push_back(static_cast<unsigned char>((v >> (8 * k)) & 0xFFu));
  }
}

void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw FormatError("unexpected end of file at byte " + std::to_string(pos_));
  }
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(data_[pos_ + static_cast<std::size_t>(k)]) << (8 * k);
  }
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) {
    v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(k)]) << (8 * k);
  }
  pos_ += 8;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::raw(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

}  // namespace bytes

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file for reading", path);
  }
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failed", path);
  }
  return data;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open file for writing", tmp);
    }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      throw IoError("write failed", tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move file into place", path);
  }
}

std::vector<unsigned char> serialize_network(const NetworkParams& params) {
  // Validates the layer table against the payload before anything is written.
  const Network check(params);
  std::vector<unsigned char> out;
  out.insert(out.end(), {'B', 'F', 'N', '1'});
  bytes::put_u32(out, kCheckpointVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(params.role));
  bytes::put_u32(out, static_cast<std::uint32_t>(params.input.rows));
  bytes::put_u32(out, static_cast<std::uint32_t>(params.input.cols));
  bytes::put_u32(out, static_cast<std::uint32_t>(params.input.channels));
  bytes::put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const LayerSpec& s : params.layers) {
    bytes::put_u32(out, static_cast<std::uint32_t>(s.kind));
    bytes::put_u32(out, static_cast<std::uint32_t>(s.size));
    bytes::put_u32(out, s.frozen ? 1u : 0u);
    bytes::put_u32(out, 0u);
    bytes::put_f64(out, s.dropout_p);
  }
  const NetworkParams& p = check.params();
  bytes::put_u32(out, static_cast<std::uint32_t>(p.input_mean.size()));
  for (Eigen::Index c = 0; c < p.input_mean.size(); ++c) bytes::put_f64(out, p.input_mean(c));
  for (Eigen::Index c = 0; c < p.input_std.size(); ++c) bytes::put_f64(out, p.input_std(c));
  bytes::put_u64(out, static_cast<std::uint64_t>(p.params.size()));
  for (Eigen::Index k = 0; k < p.params.size(); ++k) bytes::put_f64(out, p.params(k));
  return out;
}

NetworkParams deserialize_network(const std::vector<unsigned char>& data) {
  bytes::Reader in(data);
  if (in.raw(4) != "BFN1") {
    throw FormatError("not a network checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkParams p;
  const std::uint32_t role = in.u32();
  if (role > static_cast<std::uint32_t>(NetRole::kCustom)) {
    throw FormatError("unknown role tag " + std::to_string(role));
  }
  p.role = static_cast<NetRole>(role);
  p.input.rows = static_cast<int>(in.u32());
  p.input.cols = static_cast<int>(in.u32());
  p.input.channels = static_cast<int>(in.u32());
  const std::uint32_t count = in.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    LayerSpec s;
    const std::uint32_t kind = in.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::kOutputRegression)) {
      throw FormatError("unknown layer kind " + std::to_string(kind));
    }
    s.kind = static_cast<LayerKind>(kind);
    s.size = static_cast<int>(in.u32());
    s.frozen = in.u32() != 0;
    in.u32();
    s.dropout_p = in.f64();
    p.layers.push_back(s);
  }
  const std::uint32_t channels = in.u32();
  p.input_mean.resize(channels);
  p.input_std.resize(channels);
  for (std::uint32_t c = 0; c < channels; ++c) p.input_mean(c) = in.f64();
  for (std::uint32_t c = 0; c < channels; ++c) p.input_std(c) = in.f64();
  const std::uint64_t n = in.u64();
  if (n > data.size() / 8) {
    throw FormatError("parameter count exceeds file size");
  }
  p.params.resize(static_cast<Eigen::Index>(n));
  for (std::uint64_t k = 0; k < n; ++k) p.params(static_cast<Eigen::Index>(k)) = in.f64();
  if (!in.done()) {
    throw FormatError("trailing bytes after parameter payload");
  }
  try {
    const Network check(p);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return p;
}

void save_network(const NetworkParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_network(params));
}

NetworkParams load_network(const std::filesystem::path& path) {
  try {
    return deserialize_network(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + " in " + path.string());
  }
}

}  // namespace hbf
