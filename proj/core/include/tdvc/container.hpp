#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tdvc/factor_codec.hpp"

namespace tdvc {

inline constexpr std::array<char, 4> kStreamMagic = {'T', 'D', 'V', 'C'};
inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 32;
inline constexpr std::size_t kGroupHeaderBytes = 12;
inline constexpr std::size_t kPlaneHeaderBytes = 36;
inline constexpr std::uint32_t kPlanesPerGroup = 3;

// Byte layout (little-endian, fixed width):
//   header  : magic[4] version u32 width u32 height u32 frames u32
//             group_size u32 bit_depth u32 group_count u32
//   group   : rank u32 qp u32 plane_count u32, then plane_count planes
//   plane   : rows u32 cols u32 scale f64 offset f64 kind u32
//             checksum u32 byte_length u32, then byte_length payload bytes
struct StreamHeader {
  std::uint32_t version = kStreamVersion;
  std::uint32_t frame_width = 0;
  std::uint32_t frame_height = 0;
  std::uint32_t frames_total = 0;
  std::uint32_t group_size = 0;
  std::uint32_t bit_depth_source = 16;
  std::uint32_t group_count = 0;

  // Frames carried by group `index` (the last one may be short).
  std::uint32_t frames_in_group(std::uint32_t index) const;

  void validate() const;

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct GroupRecord {
  std::uint32_t rank = 0;
  int qp = 0;
  std::vector<QuantizedPlane> planes;

  friend bool operator==(const GroupRecord&, const GroupRecord&) = default;
};

struct Stream {
  StreamHeader header;
  std::vector<GroupRecord> groups;

  friend bool operator==(const Stream&, const Stream&) = default;
};

std::uint32_t group_count_for(std::uint32_t frames_total, std::uint32_t group_size);

// Exact serialized size of a stream.
std::size_t stream_size(const StreamHeader& header, const std::vector<GroupRecord>& groups);

std::vector<std::uint8_t> serialize_stream(const StreamHeader& header, const std::vector<GroupRecord>& groups);

// Returns the number of bytes written. Throws IoError when the sink fails.
std::size_t write_stream(const StreamHeader& header, const std::vector<GroupRecord>& groups, std::ostream& sink);

// Throws FormatError on a bad magic or inconsistent structure,
// UnsupportedVersionError for versions above 1 and BitstreamError (with the
// byte offset) on truncation.
Stream read_stream(std::span<const std::uint8_t> bytes);
Stream read_stream(std::istream& source);

// byte_count * 8 / 1000 / (frames_total / fps).
double stream_bitrate_kbps(std::size_t byte_count, std::size_t frames_total, double fps = 15.0);

}  // namespace tdvc
