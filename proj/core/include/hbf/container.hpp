#pragma once

#include "hbf/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace hbf {

inline constexpr std::uint32_t kContainerVersion = 1;

/// One named array in a BFD1 container. Real data is f64, complex is c128;
/// payloads are column-major.
struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<double>, std::vector<Complex>> data;

  static NamedArray from_real(std::string name, const RMatrix& m);
  static NamedArray from_complex(std::string name, const CMatrix& m);
  bool is_complex() const { return data.index() == 1; }
  /// Rank-1 or rank-2 arrays only.
  RMatrix to_real() const;
  CMatrix to_complex() const;
};

std::vector<unsigned char> serialize_container(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> deserialize_container(const std::vector<unsigned char>& bytes);

void save_container(const std::vector<NamedArray>& arrays, const std::filesystem::path& path);
std::vector<NamedArray> load_container(const std::filesystem::path& path);

/// Throws FormatError when `name` is absent.
const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace hbf
