#pragma once

#include "hbf/network.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hbf {

/// Failure reading or writing a file. Carries the offending path.
class IoError : public Error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : Error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Malformed file contents (bad magic, unsupported version, truncation).
class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> serialize_network(const NetworkParams& params);
NetworkParams deserialize_network(const std::vector<unsigned char>& bytes);

/// Writes to a temporary sibling and renames, so a crash never leaves a half-written model.
void save_network(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_network(const std::filesystem::path& path);

/// Little-endian byte helpers shared by the binary formats.
namespace bytes {
void put_u32(std::vector<unsigned char>& out, std::uint32_t v);
void put_u64(std::vector<unsigned char>& out, std::uint64_t v);
void put_f64(std::vector<unsigned char>& out, double v);

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& data) : data_(data) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string raw(std::size_t n);
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;
  const std::vector<unsigned char>& data_;
  std::size_t pos_ = 0;
};
}  // namespace bytes

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& data);

}  // namespace hbf
