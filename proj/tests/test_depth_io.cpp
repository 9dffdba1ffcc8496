#include <gtest/gtest.h>

#include <fstream>

#include "tdvc/depth_io.hpp"
#include "tdvc/error.hpp"
#include "test_util.hpp"

using namespace tdvc;
namespace fs = std::filesystem;

namespace {

Frame gradient_frame(std::size_t w, std::size_t h, std::uint16_t base) {
  Frame f(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) f.at(x, y) = static_cast<std::uint16_t>(base + 300 * x + 7 * y);
  return f;
}

}  // namespace

TEST(DepthIo, ReadsSixteenBitPgms) {
  const fs::path dir = test::scratch_dir("io_pgm16");
  for (int i = 2; i >= 0; --i) write_pgm(dir / ("f" + std::to_string(i) + ".pgm"), gradient_frame(64, 48, 1000 * i), 16);
  const DepthSequence seq = ingest(dir);
  ASSERT_EQ(seq.frames.size(), 3u);
  EXPECT_EQ(seq.bit_depth, 16u);
  EXPECT_EQ(seq.width(), 64u);
  EXPECT_EQ(seq.height(), 48u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(seq.frames[i], gradient_frame(64, 48, 1000 * i));
}

TEST(DepthIo, PgmIsBigEndianWithComments) {
  const fs::path dir = test::scratch_dir("io_pgm_be");
  {
    std::ofstream out(dir / "a.pgm", std::ios::binary);
    out << "P5\n# depth\n2 1\n65535\n";
    out.put('\x01').put('\x02').put('\xFF').put('\x00');
  }
  unsigned depth = 0;
  const Frame f = read_pgm(dir / "a.pgm", depth);
  EXPECT_EQ(depth, 16u);
  EXPECT_EQ(f.at(0, 0), 0x0102);
  EXPECT_EQ(f.at(1, 0), 0xFF00);
}

TEST(DepthIo, EightBitPgm) {
  const fs::path dir = test::scratch_dir("io_pgm8");
  Frame f(3, 2);
  f.pixels = {0, 10, 20, 30, 40, 255};
  write_pgm(dir / "a.pgm", f, 8);
  const DepthSequence seq = ingest(dir / "a.pgm");
  EXPECT_EQ(seq.bit_depth, 8u);
  EXPECT_EQ(seq.frames[0], f);
}

TEST(DepthIo, ColourPgmIsRejectedByName) {
  const fs::path dir = test::scratch_dir("io_p6");
  write_pgm(dir / "a.pgm", gradient_frame(4, 4, 0), 16);
  {
    std::ofstream out(dir / "b.ppm", std::ios::binary);
    out << "P6\n4 4\n255\n" << std::string(48, '\0');
  }
  try {
    ingest(dir);
    FAIL() << "expected UnsupportedFormatError";
  } catch (const UnsupportedFormatError& e) {
    EXPECT_NE(std::string(e.what()).find("b.ppm"), std::string::npos);
  }
}

TEST(DepthIo, MixedDimensionsAreRejected) {
  const fs::path dir = test::scratch_dir("io_mixed");
  write_pgm(dir / "a.pgm", gradient_frame(4, 4, 0), 16);
  write_pgm(dir / "b.pgm", gradient_frame(5, 4, 0), 16);
  EXPECT_THROW(ingest(dir), DomainError);
}

TEST(DepthIo, RawFramesWithSidecar) {
  const fs::path dir = test::scratch_dir("io_raw");
  {
    std::ofstream dims(dir / "raw.dims");
    dims << "2 2 16\n";
    std::ofstream raw(dir / "f0.raw", std::ios::binary);
    const unsigned char bytes[] = {0x01, 0x00, 0x00, 0x01, 0xFF, 0xFF, 0x10, 0x00};
    raw.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
  }
  const DepthSequence seq = ingest(dir);
  ASSERT_EQ(seq.frames.size(), 1u);
  EXPECT_EQ(seq.frames[0].pixels, (std::vector<std::uint16_t>{1, 256, 65535, 16}));
}

TEST(DepthIo, MissingInputAndEmptyDirectory) {
  EXPECT_THROW(ingest(fs::path("/nonexistent/depth")), IoError);
  EXPECT_THROW(ingest(test::scratch_dir("io_empty")), DomainError);
}

TEST(DepthIo, WriteSequenceRoundTrip) {
  const fs::path dir = test::scratch_dir("io_write");
  DepthSequence seq;
  for (int i = 0; i < 12; ++i) seq.frames.push_back(gradient_frame(6, 5, 100 * i));
  write_sequence(dir, seq);
  EXPECT_TRUE(fs::exists(dir / "frame_00011.pgm"));
  const DepthSequence back = ingest(dir);
  EXPECT_EQ(back.frames, seq.frames);
}
