#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "viap/classifier.hpp"
#include "viap/model_io.hpp"

namespace {

std::uint32_t read_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

TEST(ModelIo, RoundTripIsBitExact) {
  const viap::ModelParams p = viap::init_params({32, 32, 3, 6}, 99);
  const std::string bytes = viap::encode_params(p);
  const viap::ModelParams q = viap::decode_params(bytes);
  EXPECT_TRUE(p == q);
  EXPECT_EQ(viap::encode_params(q), bytes);
}

TEST(ModelIo, LayoutStartsWithMagicAndArchRecord) {
  const viap::ModelParams p = viap::init_params({8, 8, 3, 4}, 1);
  const std::string bytes = viap::encode_params(p);
  EXPECT_EQ(bytes.substr(0, 8), "VIAPNET1");
  EXPECT_EQ(read_u32(bytes, 8), 4u);
  EXPECT_EQ(bytes.substr(12, 4), "arch");
  EXPECT_EQ(read_u32(bytes, 16), 1u);
  // 6 tensor records: name length + name + rank + extents + payload.
  std::size_t expect = 8 + (4 + 4 + 4 + 8 + 4 * 8);
  for (std::size_t i = 0; i < 6; ++i) {
    const viap::Tensor* t = p.fields()[i];
    expect += 4 + viap::ModelParams::kFieldNames[i].size() + 4 + 8 * t->rank() + 8 * t->size();
  }
  EXPECT_EQ(bytes.size(), expect);
}

TEST(ModelIo, PayloadIsLittleEndianDoubles) {
  viap::ModelParams p = viap::ModelParams::zeros({4, 4, 3, 2});
  p.dense_b[1] = -1.25;
  const std::string bytes = viap::encode_params(p);
  std::uint64_t want = std::bit_cast<std::uint64_t>(-1.25);
  std::string le(8, '\0');
  for (int i = 0; i < 8; ++i) le[static_cast<std::size_t>(i)] = static_cast<char>((want >> (8 * i)) & 0xff);
  EXPECT_EQ(bytes.substr(bytes.size() - 8), le);
}

TEST(ModelIo, RejectsCorruptFiles) {
  const std::string bytes = viap::encode_params(viap::init_params({8, 8, 3, 4}, 2));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(viap::decode_params(bad_magic), viap::Error);
  EXPECT_THROW(viap::decode_params(bytes.substr(0, bytes.size() - 3)), viap::Error);
  EXPECT_THROW(viap::decode_params(bytes + "extra"), viap::Error);
  try {
    viap::decode_params("VIAPNET1");
    FAIL();
  } catch (const viap::Error& e) {
    EXPECT_EQ(e.kind(), "bad_file");
  }
}

TEST(ModelIo, SaveAndLoad) {
  const auto path = std::filesystem::temp_directory_path() / "viap_model_io_test.bin";
  const viap::ModelParams p = viap::init_params({8, 8, 3, 3}, 3);
  viap::save_params(p, path.string());
  EXPECT_TRUE(viap::load_params(path.string()) == p);
  std::filesystem::remove(path);
  EXPECT_THROW(viap::load_params(path.string()), viap::Error);
}
