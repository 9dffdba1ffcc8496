#include "tdvc/container.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const noexcept { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw BitstreamError(std::string("stream truncated in ") + what, in_.size());
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::vector<std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> out(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_groups(const StreamHeader& header, const std::vector<GroupRecord>& groups) {
  header.validate();
  if (groups.size() != header.group_count && !groups.empty()) {
    throw DomainError("group record count does not match header group_count");
  }
  for (std::uint32_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (group.rank < 1) throw DomainError("group rank must be positive");
    if (group.planes.size() != kPlanesPerGroup) throw DomainError("group must carry exactly three planes");
    const std::uint32_t rows[3] = {header.frame_height, header.frame_width, header.frames_in_group(g)};
    for (std::size_t p = 0; p < group.planes.size(); ++p) {
      const auto& plane = group.planes[p];
      if (plane.cols != group.rank || plane.rows != rows[p]) throw DomainError("plane dimensions inconsistent with header");
      if (plane.qp != group.qp) throw DomainError("plane QP differs from group QP");
    }
  }
}

}  // namespace

std::uint32_t group_count_for(std::uint32_t frames_total, std::uint32_t group_size) {
  if (group_size == 0) throw DomainError("group size must be positive");
  return static_cast<std::uint32_t>((static_cast<std::uint64_t>(frames_total) + group_size - 1) / group_size);
}

std::uint32_t StreamHeader::frames_in_group(std::uint32_t index) const {
  if (index >= group_count) throw DomainError("group index out of range");
  const std::uint64_t start = static_cast<std::uint64_t>(index) * group_size;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(group_size, frames_total - start));
}

void StreamHeader::validate() const {
  if (frame_width < 1 || frame_height < 1 || frames_total < 1 || group_size < 1) {
    throw DomainError("stream dimensions must be positive");
  }
  if (bit_depth_source != 8 && bit_depth_source != 16) throw DomainError("source bit depth must be 8 or 16");
  if (group_count != group_count_for(frames_total, group_size)) {
    throw DomainError("group_count must equal ceil(frames_total / group_size)");
  }
}

std::size_t stream_size(const StreamHeader&, const std::vector<GroupRecord>& groups) {
  std::size_t total = kStreamHeaderBytes;
  for (const auto& group : groups) {
    total += kGroupHeaderBytes;
    for (const auto& plane : group.planes) total += kPlaneHeaderBytes + plane.payload.size();
  }
  return total;
}

std::vector<std::uint8_t> serialize_stream(const StreamHeader& header, const std::vector<GroupRecord>& groups) {
  check_groups(header, groups);
  std::vector<std::uint8_t> out;
  out.reserve(stream_size(header, groups));
  ByteWriter w(out);
  w.bytes({reinterpret_cast<const std::uint8_t*>(kStreamMagic.data()), kStreamMagic.size()});
  w.u32(header.version);
  w.u32(header.frame_width);
  w.u32(header.frame_height);
  w.u32(header.frames_total);
  w.u32(header.group_size);
  w.u32(header.bit_depth_source);
  w.u32(header.group_count);
  for (const auto& group : groups) {
    w.u32(group.rank);
    w.u32(static_cast<std::uint32_t>(group.qp));
    w.u32(static_cast<std::uint32_t>(group.planes.size()));
    for (const auto& plane : group.planes) {
      w.u32(static_cast<std::uint32_t>(plane.rows));
      w.u32(static_cast<std::uint32_t>(plane.cols));
      w.f64(plane.scale);
      w.f64(plane.offset);
      w.u32(static_cast<std::uint32_t>(plane.kind));
      w.u32(plane.checksum);
      w.u32(static_cast<std::uint32_t>(plane.payload.size()));
      w.bytes(plane.payload);
    }
  }
  return out;
}

std::size_t write_stream(const StreamHeader& header, const std::vector<GroupRecord>& groups, std::ostream& sink) {
  const auto bytes = serialize_stream(header, groups);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  sink.flush();
  if (!sink) throw IoError("failed to write stream");
  return bytes.size();
}

Stream read_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(kStreamMagic.size(), "magic");
  if (std::memcmp(bytes.data(), kStreamMagic.data(), kStreamMagic.size()) != 0) {
    throw FormatError("not a TDVC stream (bad magic)");
  }
  r.bytes(kStreamMagic.size(), "magic");

  Stream stream;
  auto& h = stream.header;
  h.version = r.u32("header");
  if (h.version > kStreamVersion) {
    throw UnsupportedVersionError("stream version " + std::to_string(h.version) + " is not supported");
  }
  if (h.version == 0) throw FormatError("stream version 0 is invalid");
  h.frame_width = r.u32("header");
  h.frame_height = r.u32("header");
  h.frames_total = r.u32("header");
  h.group_size = r.u32("header");
  h.bit_depth_source = r.u32("header");
  h.group_count = r.u32("header");
  try {
    h.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid stream header: ") + e.what());
  }

  // Header-only streams are valid; otherwise every group must be present.
  if (r.offset() == bytes.size()) return stream;

  for (std::uint32_t g = 0; g < h.group_count; ++g) {
    GroupRecord group;
    group.rank = r.u32("group header");
    const std::uint32_t qp = r.u32("group header");
    const std::uint32_t plane_count = r.u32("group header");
    if (group.rank < 1) throw FormatError("group " + std::to_string(g) + " has rank 0");
    if (qp > static_cast<std::uint32_t>(kMaxQp)) throw FormatError("group " + std::to_string(g) + " has QP out of range");
    if (plane_count != kPlanesPerGroup) throw FormatError("group " + std::to_string(g) + " must carry three planes");
    group.qp = static_cast<int>(qp);
    const std::uint32_t rows[3] = {h.frame_height, h.frame_width, h.frames_in_group(g)};
    for (std::uint32_t p = 0; p < plane_count; ++p) {
      QuantizedPlane plane;
      plane.rows = r.u32("plane header");
      plane.cols = r.u32("plane header");
      plane.scale = r.f64("plane header");
      plane.offset = r.f64("plane header");
      const std::uint32_t kind = r.u32("plane header");
      plane.checksum = r.u32("plane header");
      const std::uint32_t length = r.u32("plane header");
      if (plane.rows != rows[p] || plane.cols != group.rank) {
        throw FormatError("plane dimensions inconsistent with stream header");
      }
      if (kind > static_cast<std::uint32_t>(PayloadKind::kBridged)) throw FormatError("unknown plane payload kind");
      if (!(plane.scale > 0.0) || !std::isfinite(plane.scale) || !std::isfinite(plane.offset)) {
        throw FormatError("plane scale/offset invalid");
      }
      plane.kind = static_cast<PayloadKind>(kind);
      plane.qp = group.qp;
      plane.payload = r.bytes(length, "plane payload");
      group.planes.push_back(std::move(plane));
    }
    stream.groups.push_back(std::move(group));
  }
  if (r.offset() != bytes.size()) {
    throw FormatError("stream has " + std::to_string(bytes.size() - r.offset()) + " trailing bytes");
  }
  return stream;
}

Stream read_stream(std::istream& source) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  if (source.bad()) throw IoError("failed to read stream");
  return read_stream(bytes);
}

double stream_bitrate_kbps(std::size_t byte_count, std::size_t frames_total, double fps) {
  if (frames_total == 0) throw DomainError("bitrate needs at least one frame");
  if (!(fps > 0.0)) throw DomainError("fps must be positive");
  const double seconds = static_cast<double>(frames_total) / fps;
  return static_cast<double>(byte_count) * 8.0 / 1000.0 / seconds;
}

}  // namespace tdvc
