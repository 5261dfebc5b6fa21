#include "hbf/checkpoint.hpp"
#include "hbf/container.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace hbf {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hbf_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

NetworkParams sample_network() {
  ArchitectureOptions arch;
  arch.conv_filters = 3;
  arch.fc_units = {6, 5};
  arch.dropout_p = 0.25;
  NetworkParams p = make_network(NetRole::kBfNet, {4, 8, 3}, 12, arch, 21);
  p.layers.front().frozen = true;
  p.input_mean = RVector::LinSpaced(3, -1.0, 1.0);
  p.input_std = RVector::Constant(3, 0.5);
  return p;
}

TEST(Bytes, LittleEndianLayout) {
  std::vector<unsigned char> out;
  bytes::put_u32(out, 0x01020304u);
  bytes::put_u64(out, 0x1122334455667788ull);
  bytes::put_f64(out, 1.0);
  ASSERT_EQ(out.size(), 20u);
  EXPECT_EQ(out[0], 0x04);
  EXPECT_EQ(out[3], 0x01);
  EXPECT_EQ(out[4], 0x88);
  EXPECT_EQ(out[11], 0x11);
  EXPECT_EQ(out[19], 0x3f);  // 1.0 = 0x3ff0000000000000
  bytes::Reader in(out);
  EXPECT_EQ(in.u32(), 0x01020304u);
  EXPECT_EQ(in.u64(), 0x1122334455667788ull);
  EXPECT_EQ(in.f64(), 1.0);
  EXPECT_TRUE(in.done());
  EXPECT_THROW(in.u32(), FormatError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const NetworkParams p = sample_network();
  const auto bytes = serialize_network(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BFN1");
  const NetworkParams q = deserialize_network(bytes);
  EXPECT_EQ(q.role, p.role);
  EXPECT_EQ(q.input, p.input);
  EXPECT_EQ(q.layers, p.layers);
  EXPECT_TRUE(q.params == p.params);
  EXPECT_TRUE(q.input_mean == p.input_mean);
  EXPECT_TRUE(q.input_std == p.input_std);
  EXPECT_EQ(serialize_network(q), bytes);
}

TEST(Checkpoint, FileRoundTripLeavesNoTemporary) {
  const fs::path dir = scratch_dir("ckpt");
  const NetworkParams p = sample_network();
  save_network(p, dir / "net.bfn");
  EXPECT_TRUE(load_network(dir / "net.bfn").params == p.params);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  fs::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto good = serialize_network(sample_network());
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_network(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize_network(bad_version), FormatError);
  auto bad_role = good;
  bad_role[8] = 7;
  EXPECT_THROW(deserialize_network(bad_role), FormatError);
  const std::vector<unsigned char> truncated(good.begin(), good.end() - 3);
  EXPECT_THROW(deserialize_network(truncated), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_network(trailing), FormatError);
  // A layer table that no longer matches the payload length.
  auto bad_size = good;
  bad_size[28 + 4] += 1;  // size field of the first layer
  EXPECT_THROW(deserialize_network(bad_size), FormatError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_network("/nonexistent/dir/net.bfn"), IoError);
}

TEST(Container, RoundTripRealAndComplex) {
  RMatrix r(2, 3);
  r << 1, 2, 3, 4, 5, 6;
  const CMatrix c = test::random_complex(3, 2, 4);
  const std::vector<NamedArray> arrays{NamedArray::from_real("inputs", r),
                                       NamedArray::from_complex("h", c)};
  const auto bytes = serialize_container(arrays);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BFD1");
  const auto back = deserialize_container(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "inputs");
  EXPECT_EQ(back[0].dims, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_FALSE(back[0].is_complex());
  EXPECT_TRUE(back[0].to_real() == r);
  EXPECT_TRUE(back[1].is_complex());
  EXPECT_TRUE(find_array(back, "h").to_complex() == c);
  EXPECT_THROW(find_array(back, "missing"), FormatError);
  EXPECT_EQ(serialize_container(back), bytes);
}

TEST(Container, FileRoundTripAndBadMagic) {
  const fs::path dir = scratch_dir("bfd");
  const std::vector<NamedArray> arrays{NamedArray::from_real("x", RMatrix::Identity(2, 2))};
  save_container(arrays, dir / "d.bfd");
  EXPECT_TRUE(load_container(dir / "d.bfd")[0].to_real() == RMatrix::Identity(2, 2));
  auto bytes = serialize_container(arrays);
  bytes[3] = '9';
  EXPECT_THROW(deserialize_container(bytes), FormatError);
  bytes = serialize_container(arrays);
  bytes.resize(bytes.size() - 1);
  EXPECT_THROW(deserialize_container(bytes), FormatError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace hbf
