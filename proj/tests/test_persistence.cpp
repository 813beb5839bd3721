#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "tabdl/errors.hpp"
#include "tabdl/weights.hpp"

using namespace tabdl;

namespace {

std::vector<NamedTensor> sample_tensors() {
  Rng rng(1);
  Tensor w({3, 4}), b({4}), k({2, 1, 2, 3});
  for (auto* t : {&w, &b, &k})
    for (auto& v : t->values()) v = rng.uniform(-2.0, 2.0);
  return {{"layer.weight", w}, {"layer.bias", b}, {"conv.filters", k}};
}

// Byte position of tensor `which`'s payload offset field in the manifest.
std::size_t offset_field(const std::vector<std::uint8_t>& bytes, std::size_t which) {
  std::size_t pos = 4 + 1 + 4;
  for (std::size_t t = 0;; ++t) {
    const std::size_t name_len = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2 + name_len;
    const std::size_t rank = bytes[pos];
    pos += 1 + 4 * rank;
    if (t == which) return pos;
    pos += 8;
  }
}

std::string decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_weights(bytes, "model.adpm");
  } catch (const format_error& e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST_CASE("round trip through a file") {
  const auto src = sample_tensors();
  const auto path = std::filesystem::temp_directory_path() / "tabdl_persistence_roundtrip.adpm";
  save_weights(path, src);

  const auto entries = read_weights(path);
  REQUIRE(entries.size() == src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    CHECK(entries[i].name == src[i].name);
    CHECK(entries[i].shape == src[i].tensor.shape());
    for (std::size_t j = 0; j < src[i].tensor.size(); ++j)
      CHECK(entries[i].values[j] == static_cast<float>(src[i].tensor[j]));
  }

  // Loading reproduces exactly what quantizing in memory gives.
  std::vector<NamedTensor> dst;
  for (const auto& t : src) dst.push_back({t.name, Tensor(t.tensor.shape(), 0.0)});
  load_weights(path, dst);
  auto expect = sample_tensors();
  quantize_to_float(expect);
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i].tensor.size(); ++j) CHECK(dst[i].tensor[j] == expect[i].tensor[j]);

  // Encoding is a pure function of the tensors.
  CHECK(encode_weights(src) == encode_weights(sample_tensors()));
  std::filesystem::remove(path);
}

TEST_CASE("header layout") {
  const auto bytes = encode_weights(sample_tensors());
  CHECK(std::memcmp(bytes.data(), "ADPM", 4) == 0);
  CHECK(bytes[4] == kWeightFormatVersion);
  CHECK(bytes[5] == 3);
  // Payload is f32, so the file ends 4 bytes per value after the last offset.
  std::uint64_t last = 0;
  std::memcpy(&last, bytes.data() + offset_field(bytes, 2), 8);
  CHECK(last + 4 * 12 == bytes.size());
}

TEST_CASE("corrupted containers are rejected and name the source") {
  const auto good = encode_weights(sample_tensors());
  SUBCASE("magic") {
    auto bad = good;
    bad[0] = 'X';
    const auto msg = decode_error(bad);
    CHECK(msg.find("model.adpm") != std::string::npos);
    CHECK(msg.find("magic") != std::string::npos);
  }
  SUBCASE("version") {
    auto bad = good;
    bad[4] = 9;
    CHECK_FALSE(decode_error(bad).empty());
  }
  SUBCASE("truncated at every length") {
    for (std::size_t n = 0; n < good.size(); ++n) {
      INFO("length " << n);
      CHECK(decode_error(std::vector<std::uint8_t>(good.begin(), good.begin() + n)).find("model.adpm") !=
            std::string::npos);
    }
  }
  SUBCASE("overlapping payloads") {
    auto bad = good;
    std::memcpy(bad.data() + offset_field(bad, 1), bad.data() + offset_field(bad, 0), 8);
    CHECK_FALSE(decode_error(bad).empty());
  }
  SUBCASE("offset past the end") {
    auto bad = good;
    const std::uint64_t far = good.size() + 100;
    std::memcpy(bad.data() + offset_field(bad, 2), &far, 8);
    CHECK_FALSE(decode_error(bad).empty());
  }
  SUBCASE("offset inside the manifest") {
    auto bad = good;
    const std::uint64_t early = 6;
    std::memcpy(bad.data() + offset_field(bad, 0), &early, 8);
    CHECK_FALSE(decode_error(bad).empty());
  }
}

TEST_CASE("assigning into a model") {
  const auto entries = decode_weights(encode_weights(sample_tensors()), "m");
  SUBCASE("shape mismatch") {
    std::vector<NamedTensor> dst{{"layer.weight", Tensor({4, 3})}};
    CHECK_THROWS_AS(assign_weights(entries, dst, "m"), format_error);
  }
  SUBCASE("missing tensor") {
    std::vector<NamedTensor> dst{{"layer.other", Tensor({3, 4})}};
    CHECK_THROWS_AS(assign_weights(entries, dst, "m"), format_error);
  }
  SUBCASE("subset by name") {
    std::vector<NamedTensor> dst{{"layer.bias", Tensor({4})}};
    assign_weights(entries, dst, "m");
    CHECK(dst[0].tensor[2] == static_cast<double>(entries[1].values[2]));
  }
  SUBCASE("missing file") {
    try {
      read_weights("/nonexistent/w.adpm");
      FAIL("expected data_error");
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find("/nonexistent/w.adpm") != std::string::npos);
    }
  }
}
