#include "hbf/container.hpp"

#include "hbf/checkpoint.hpp"

namespace hbf {

NamedArray NamedArray::from_real(std::string name, const RMatrix& m) {
  NamedArray a;
  a.name = std::move(name);
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.data = std::vector<double>(m.data(), m.data() + m.size());
  return a;
}

NamedArray NamedArray::from_complex(std::string name, const CMatrix& m) {
  NamedArray a;
  a.name = std::move(name);
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.data = std::vector<Complex>(m.data(), m.data() + m.size());
  return a;
}

namespace {

std::pair<Eigen::Index, Eigen::Index> matrix_shape(const NamedArray& a) {
  if (a.dims.size() == 1) return {static_cast<Eigen::Index>(a.dims[0]), 1};
  if (a.dims.size() == 2) {
    return {static_cast<Eigen::Index>(a.dims[0]), static_cast<Eigen::Index>(a.dims[1])};
  }
  throw FormatError("array '" + a.name + "' has rank " + std::to_string(a.dims.size()) +
                    ", expected 1 or 2");
}

}  // namespace

RMatrix NamedArray::to_real() const {
  if (is_complex()) throw FormatError("array '" + name + "' is complex, expected real");
  const auto [r, c] = matrix_shape(*this);
  const auto& v = std::get<0>(data);
  return Eigen::Map<const RMatrix>(v.data(), r, c);
}

CMatrix NamedArray::to_complex() const {
  if (!is_complex()) throw FormatError("array '" + name + "' is real, expected complex");
  const auto [r, c] = matrix_shape(*this);
  const auto& v = std::get<1>(data);
  return Eigen::Map<const CMatrix>(v.data(), r, c);
}

std::vector<unsigned char> serialize_container(const std::vector<NamedArray>& arrays) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'B', 'F', 'D', '1'});
  bytes::put_u32(out, kContainerVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    std::uint64_t count = 1;
    for (std::uint64_t d : a.dims) count *= d;
    const std::size_t stored = a.is_complex() ? std::get<1>(a.data).size() : std::get<0>(a.data).size();
    if (stored != count) {
      throw std::invalid_argument("serialize_container: array '" + a.name + "' length does not match dims");
    }
    bytes::put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    bytes::put_u32(out, a.is_complex() ? 1u : 0u);
    bytes::put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (std::uint64_t d : a.dims) bytes::put_u64(out, d);
    if (a.is_complex()) {
      for (const Complex& v : std::get<1>(a.data)) {
        bytes::put_f64(out, v.real());
        bytes::put_f64(out, v.imag());
      }
    } else {
      for (double v : std::get<0>(a.data)) bytes::put_f64(out, v);
    }
  }
  return out;
}

std::vector<NamedArray> deserialize_container(const std::vector<unsigned char>& data) {
  bytes::Reader in(data);
  if (in.raw(4) != "BFD1") {
    throw FormatError("not a data container (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedArray> arrays;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = in.raw(in.u32());
    const std::uint32_t dtype = in.u32();
    if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype));
    const std::uint32_t rank = in.u32();
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.dims.push_back(in.u64());
      n *= a.dims.back();
    }
    const std::uint64_t width = dtype == 1 ? 16 : 8;
    if (n > data.size() / width) throw FormatError("array '" + a.name + "' exceeds file size");
    if (dtype == 1) {
      std::vector<Complex> v(static_cast<std::size_t>(n));
      for (auto& x : v) {
        const double re = in.f64();
        x = Complex(re, in.f64());
      }
      a.data = std::move(v);
    } else {
      std::vector<double> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = in.f64();
      a.data = std::move(v);
    }
    arrays.push_back(std::move(a));
  }
  if (!in.done()) throw FormatError("trailing bytes after the last array");
  return arrays;
}

void save_container(const std::vector<NamedArray>& arrays, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_container(arrays));
}

std::vector<NamedArray> load_container(const std::filesystem::path& path) {
  return deserialize_container(read_file(path));
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const NamedArray& a : arrays) {
    if (a.name == name) return a;
  }
  throw FormatError("container has no array named '" + name + "'");
}

}  // namespace hbf
