#pragma once

#include <filesystem>
#include <vector>

#include "tdvc/frame.hpp"

namespace tdvc {

struct DepthSequence {
  std::vector<Frame> frames;
  unsigned bit_depth = 16;
  double fps = 15.0;

  std::size_t width() const { return frames.empty() ? 0 : frames.front().width; }
  std::size_t height() const { return frames.empty() ? 0 : frames.front().height; }
  double peak() const { return peak_for_bit_depth(bit_depth); }

  // Throws DomainError when empty, non-uniform or out of range.
  void validate() const;
};

// Binary PGM (P5). 16-bit samples are big-endian per the PGM convention.
Frame read_pgm(const std::filesystem::path& path, unsigned& bit_depth);
void write_pgm(const std::filesystem::path& path, const Frame& frame, unsigned bit_depth);

// Headerless raw frame: 8-bit, or 16-bit little-endian. Dimensions come from
// `<file>.dims` or, failing that, `raw.dims` in the same directory; either
// holds "width height bit_depth".
Frame read_raw(const std::filesystem::path& path, unsigned& bit_depth);

// Loads .pgm/.pnm/.ppm/.raw files (a directory is expanded to its entries),
// sorted lexicographically by file name. Throws UnsupportedFormatError naming
// the file for colour or ASCII netpbm variants and DomainError on mixed
// dimensions or bit depths.
DepthSequence ingest(const std::vector<std::filesystem::path>& inputs);
DepthSequence ingest(const std::filesystem::path& input);

// Writes frame_00000.pgm, frame_00001.pgm, ... into `dir`.
void write_sequence(const std::filesystem::path& dir, const DepthSequence& seq);

}  // namespace tdvc
