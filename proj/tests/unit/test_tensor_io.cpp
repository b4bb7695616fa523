#include <doctest.h>

#include <cstring>
#include <sstream>

#include "stsim/tensor_io.hpp"
#include "test_util.hpp"

using namespace stsim;

TEST_CASE("tns header layout is byte-exact") {
  TensorF32 t{{2, 3}, {1, 2, 3, 4, 5, 6}};
  std::ostringstream os;
  write_tensor(os, t);
  const std::string b = os.str();
  REQUIRE(b.size() == 4 + 2 + 1 + 1 + 2 * 8 + 6 * 4);
  CHECK(b.substr(0, 4) == "STSN");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[5]) == 0);
  CHECK(static_cast<unsigned char>(b[6]) == 1);  // f32
  CHECK(static_cast<unsigned char>(b[7]) == 2);  // ndim
  CHECK(static_cast<unsigned char>(b[8]) == 2);
  CHECK(static_cast<unsigned char>(b[16]) == 3);
  float first;
  std::memcpy(&first, b.data() + 24, 4);
  CHECK(first == 1.0f);
}

TEST_CASE("tns round trip is bit-exact for several blocks") {
  TensorF32 a{{3}, {0.1f, -0.0f, 1e-30f}};
  TensorF32 b{{1, 2, 2}, {1, 2, 3, 4}};
  std::stringstream ss;
  write_tensor(ss, a);
  write_tensor(ss, b);
  CHECK(has_tensor(ss));
  const TensorF32 ra = read_tensor<float>(ss);
  CHECK(has_tensor(ss));
  const TensorF32 rb = read_tensor<float>(ss);
  CHECK_FALSE(has_tensor(ss));
  CHECK(std::memcmp(ra.data.data(), a.data.data(), 12) == 0);
  CHECK(rb == b);

  testing::TempDir dir("tns");
  const std::vector<TensorF64> blocks{{{2}, {1.0 / 3.0, -2.5}}, {{0}, {}}};
  save_tensors(dir.path / "x.tns", blocks);
  CHECK(load_tensors<double>(dir.path / "x.tns") == blocks);
}

TEST_CASE("tns rejects malformed input") {
  CHECK_THROWS_AS(([] {
                    std::ostringstream os;
                    write_tensor(os, TensorF32{{2, 2}, {1, 2, 3}});
                  }()),
                  InvalidInput);
  std::ostringstream os;
  write_tensor(os, TensorF32{{2}, {1, 2}});
  std::string bytes = os.str();
  {
    std::istringstream in(bytes);
    CHECK_THROWS_AS(read_tensor<double>(in), InvalidInput);  // dtype mismatch
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_tensor<float>(in), InvalidInput);  // truncated
  }
  bytes[0] = 'X';
  std::istringstream in(bytes);
  CHECK_THROWS_AS(read_tensor<float>(in), InvalidInput);
}
