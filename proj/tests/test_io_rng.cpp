#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "tal/error.hpp"
#include "tal/io.hpp"
#include "tal/rng.hpp"

namespace tal {
namespace {

TEST(Io, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(io::format_double(19.0), "19");
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(1.0 / 19.0), "0.05263157894736842");
  EXPECT_EQ(io::format_double(1e-12), "1e-12");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(io::format_optional(std::nullopt), "");
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, AtomicWriteAndRead) {
  const auto p = std::filesystem::temp_directory_path() / "tal_io_test.txt";
  io::write_file_atomic(p, "hello\n");
  EXPECT_EQ(io::read_file(p), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
  std::filesystem::remove(p);
  EXPECT_THROW(io::read_file(p), Error);
  EXPECT_THROW(io::write_file_atomic("/nonexistent_dir/x/y.txt", "z"), Error);
}

TEST(Rng, PortableSequence) {
  rng::Engine a(5);
  rng::Engine b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(rng::uniform01(a), rng::uniform01(b));
  EXPECT_NE(rng::derive_seed(1, 0), rng::derive_seed(1, 1));
  EXPECT_EQ(rng::derive_seed(1, 2), rng::derive_seed(1, 2));
}

TEST(Rng, UniformBelowCoversRange) {
  rng::Engine eng(0);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng::uniform_below(eng, 7)];
  for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, NormalMoments) {
  rng::Engine eng(1);
  double s = 0.0;
  double ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng::standard_normal(eng);
    s += x;
    ss += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.01);
}

TEST(Errors, KindNames) {
  EXPECT_STREQ(to_string(ErrorKind::kDomain), "domain");
  const TrainingError e("boom", 12);
  EXPECT_EQ(e.step(), 12);
  EXPECT_EQ(e.kind(), ErrorKind::kTraining);
}

}  // namespace
}  // namespace tal
