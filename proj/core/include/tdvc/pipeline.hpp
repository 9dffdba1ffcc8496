#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tdvc/container.hpp"
#include "tdvc/cp_als.hpp"
#include "tdvc/depth_io.hpp"
#include "tdvc/metrics.hpp"

namespace tdvc {

class ExternalEncoder;

struct EncodeConfig {
  std::size_t rank = 1;
  int qp = 4;
  std::uint32_t group_size = 8;
  std::uint64_t seed = 0;
  // rank and seed are taken from the fields above.
  AlsConfig als;
  const ExternalEncoder* bridge = nullptr;
};

std::uint32_t sequence_group_count(const DepthSequence& seq, std::uint32_t group_size);

// H x W x g tensor of group `group_index`, values divided by the peak.
DenseTensor build_group_tensor(const DepthSequence& seq, std::size_t group_index, std::uint32_t group_size);

// Canonical CP model of every group. Group g is seeded with seed + g.
std::vector<KruskalModel> decompose_sequence(const DepthSequence& seq, const EncodeConfig& config,
                                             std::vector<AlsReport>* reports = nullptr);

StreamHeader make_stream_header(const DepthSequence& seq, std::uint32_t group_size);

// Quantizes and serializes already decomposed groups.
std::vector<std::uint8_t> encode_models(const DepthSequence& seq, const std::vector<KruskalModel>& models,
                                        std::uint32_t group_size, int qp, const ExternalEncoder* bridge = nullptr);

std::vector<std::uint8_t> encode_sequence(const DepthSequence& seq, const EncodeConfig& config);

// Reconstructs every group, clamps to [0, 1] and rescales to the source bit
// depth with round-to-nearest.
DepthSequence decode_sequence(std::span<const std::uint8_t> container, const ExternalEncoder* bridge = nullptr,
                              double fps = 15.0);

// Receives every decoded sequence of a sweep, e.g. to hand it to a renderer.
using DecodedFrameHook = std::function<void(int rank, int qp, const DepthSequence& decoded)>;

struct SweepSpec {
  std::vector<int> ranks = {1, 5, 10, 15, 20};
  std::vector<int> qps = {2, 6, 10, 14, 20, 26, 38};
  std::uint32_t group_size = 8;
  std::uint64_t seed = 0;
  AlsConfig als;
  std::string scene = "sequence";
  std::string camera = "0";
  // When set, each cell's container is written as rank<R>_qp<Q>.tdvc.
  std::filesystem::path container_dir;
  DecodedFrameHook on_decoded;
  const ExternalEncoder* bridge = nullptr;
  // Ranks are decomposed concurrently on up to this many threads; results
  // are merged in (rank, qp) order regardless.
  unsigned threads = 1;

  void validate() const;
};

struct SweepResult {
  std::vector<RdRow> rows;
  // One curve per rank with at least four successful cells.
  std::vector<LabeledCurve> curves;
};

// Mean PSNR and SSIM of `test` against `reference`, frame by frame.
struct SequenceQuality {
  double psnr_db = 0.0;
  double ssim = 0.0;
};
SequenceQuality compare_sequences(const DepthSequence& reference, const DepthSequence& test);

SweepResult rd_sweep(const DepthSequence& seq, const SweepSpec& spec);

// Plot-ready series: rank,bitrate_kbps,psnr_db,ssim sorted by rank then rate.
void write_plot_data(std::ostream& out, const std::vector<RdRow>& rows);

}  // namespace tdvc
