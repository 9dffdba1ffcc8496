#include "tdvc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <string>

#include "tdvc/error.hpp"
#include "tdvc/factor_codec.hpp"

namespace tdvc {
namespace fs = std::filesystem;

std::uint32_t sequence_group_count(const DepthSequence& seq, std::uint32_t group_size) {
  return group_count_for(static_cast<std::uint32_t>(seq.frames.size()), group_size);
}

DenseTensor build_group_tensor(const DepthSequence& seq, std::size_t group_index, std::uint32_t group_size) {
  seq.validate();
  if (group_size == 0) throw DomainError("group size must be positive");
  const std::size_t first = group_index * group_size;
  if (first >= seq.frames.size()) throw DomainError("group index out of range");
  const std::size_t count = std::min<std::size_t>(group_size, seq.frames.size() - first);
  const std::size_t h = seq.height();
  const std::size_t w = seq.width();
  const double inv_peak = 1.0 / seq.peak();
  std::vector<double> data(h * w * count);
  for (std::size_t f = 0; f < count; ++f) {
    const Frame& frame = seq.frames[first + f];
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t y = 0; y < h; ++y) data[y + h * (x + w * f)] = frame.at(x, y) * inv_peak;
    }
  }
  return DenseTensor({h, w, count}, std::move(data));
}

std::vector<KruskalModel> decompose_sequence(const DepthSequence& seq, const EncodeConfig& config,
                                             std::vector<AlsReport>* reports) {
  const std::uint32_t groups = sequence_group_count(seq, config.group_size);
  std::vector<KruskalModel> models;
  models.reserve(groups);
  for (std::uint32_t g = 0; g < groups; ++g) {
    AlsConfig als = config.als;
    als.rank = config.rank;
    als.seed = config.seed + g;
    auto [model, report] = cp_als(build_group_tensor(seq, g, config.group_size), als);
    models.push_back(std::move(model));
    if (reports != nullptr) reports->push_back(std::move(report));
  }
  return models;
}

StreamHeader make_stream_header(const DepthSequence& seq, std::uint32_t group_size) {
  seq.validate();
  StreamHeader header;
  header.frame_width = static_cast<std::uint32_t>(seq.width());
  header.frame_height = static_cast<std::uint32_t>(seq.height());
  header.frames_total = static_cast<std::uint32_t>(seq.frames.size());
  header.group_size = group_size;
  header.bit_depth_source = seq.bit_depth;
  header.group_count = sequence_group_count(seq, group_size);
  return header;
}

std::vector<std::uint8_t> encode_models(const DepthSequence& seq, const std::vector<KruskalModel>& models,
                                        std::uint32_t group_size, int qp, const ExternalEncoder* bridge) {
  const StreamHeader header = make_stream_header(seq, group_size);
  if (models.size() != header.group_count) throw DomainError("one model per group is required");
  std::vector<GroupRecord> groups;
  groups.reserve(models.size());
  for (const auto& model : models) {
    GroupRecord record;
    record.rank = static_cast<std::uint32_t>(model.rank());
    record.qp = qp;
    record.planes = encode_model(model, qp, bridge);
    groups.push_back(std::move(record));
  }
  return serialize_stream(header, groups);
}

std::vector<std::uint8_t> encode_sequence(const DepthSequence& seq, const EncodeConfig& config) {
  qstep_for_qp(config.qp);
  const auto models = decompose_sequence(seq, config);
  return encode_models(seq, models, config.group_size, config.qp, config.bridge);
}

DepthSequence decode_sequence(std::span<const std::uint8_t> container, const ExternalEncoder* bridge, double fps) {
  const Stream stream = read_stream(container);
  const StreamHeader& h = stream.header;
  if (stream.groups.size() != h.group_count) throw FormatError("stream carries no group records");

  DepthSequence seq;
  seq.bit_depth = h.bit_depth_source;
  seq.fps = fps;
  seq.frames.reserve(h.frames_total);
  const double peak = seq.peak();
  for (std::uint32_t g = 0; g < h.group_count; ++g) {
    const DenseTensor approx = reconstruct(decode_model(stream.groups[g].planes, bridge));
    const std::size_t count = h.frames_in_group(g);
    for (std::size_t f = 0; f < count; ++f) {
      Frame frame(h.frame_width, h.frame_height);
      for (std::size_t x = 0; x < frame.width; ++x) {
        for (std::size_t y = 0; y < frame.height; ++y) {
          const double v = std::clamp(approx(y, x, f), 0.0, 1.0);
          frame.at(x, y) = static_cast<std::uint16_t>(std::lround(v * peak));
        }
      }
      seq.frames.push_back(std::move(frame));
    }
  }
  return seq;
}

void SweepSpec::validate() const {
  if (ranks.empty() || qps.empty()) throw DomainError("sweep needs at least one rank and one QP");
  for (int r : ranks) {
    if (r < 1) throw DomainError("sweep ranks must be positive");
  }
  for (int q : qps) qstep_for_qp(q);
  if (group_size < 1) throw DomainError("group size must be positive");
}

SequenceQuality compare_sequences(const DepthSequence& reference, const DepthSequence& test) {
  if (reference.frames.size() != test.frames.size()) throw DomainError("sequences differ in frame count");
  if (reference.frames.empty()) throw DomainError("sequences are empty");
  SequenceQuality q;
  const double peak = reference.peak();
  for (std::size_t i = 0; i < reference.frames.size(); ++i) {
    const FramePair pair{reference.frames[i], test.frames[i], peak};
    q.psnr_db += psnr(pair);
    q.ssim += ssim(pair);
  }
  q.psnr_db /= static_cast<double>(reference.frames.size());
  q.ssim /= static_cast<double>(reference.frames.size());
  return q;
}

namespace {

std::vector<RdRow> sweep_rank(const DepthSequence& seq, const SweepSpec& spec, int rank) {
  std::vector<RdRow> rows;
  auto blank_row = [&](int qp) {
    RdRow row;
    row.scene = spec.scene;
    row.camera = spec.camera;
    row.rank = rank;
    row.qp = qp;
    return row;
  };

  std::vector<KruskalModel> models;
  try {
    EncodeConfig config;
    config.rank = static_cast<std::size_t>(rank);
    config.group_size = spec.group_size;
    config.seed = spec.seed;
    config.als = spec.als;
    models = decompose_sequence(seq, config);
  } catch (const std::exception& e) {
    for (int qp : spec.qps) {
      RdRow row = blank_row(qp);
      row.error = e.what();
      rows.push_back(std::move(row));
    }
    return rows;
  }

  for (int qp : spec.qps) {
    RdRow row = blank_row(qp);
    try {
      const auto bytes = encode_models(seq, models, spec.group_size, qp, spec.bridge);
      row.bytes = bytes.size();
      row.bitrate_kbps = stream_bitrate_kbps(bytes.size(), seq.frames.size(), seq.fps);
      if (!spec.container_dir.empty()) {
        fs::create_directories(spec.container_dir);
        const fs::path path =
            spec.container_dir / ("rank" + std::to_string(rank) + "_qp" + std::to_string(qp) + ".tdvc");
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("cannot write " + path.string());
      }
      DepthSequence decoded = decode_sequence(bytes, spec.bridge, seq.fps);
      const SequenceQuality quality = compare_sequences(seq, decoded);
      row.psnr_db = quality.psnr_db;
      row.ssim = quality.ssim;
      if (spec.on_decoded) spec.on_decoded(rank, qp, decoded);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

SweepResult rd_sweep(const DepthSequence& seq, const SweepSpec& spec) {
  spec.validate();
  seq.validate();

  std::vector<std::vector<RdRow>> per_rank(spec.ranks.size());
  const unsigned threads = std::max(1u, spec.threads);
  if (threads == 1 || spec.on_decoded) {
    for (std::size_t i = 0; i < spec.ranks.size(); ++i) per_rank[i] = sweep_rank(seq, spec, spec.ranks[i]);
  } else {
    for (std::size_t start = 0; start < spec.ranks.size(); start += threads) {
      std::vector<std::future<std::vector<RdRow>>> jobs;
      const std::size_t end = std::min(spec.ranks.size(), start + threads);
      for (std::size_t i = start; i < end; ++i) {
        jobs.push_back(std::async(std::launch::async, sweep_rank, std::cref(seq), std::cref(spec), spec.ranks[i]));
      }
      for (std::size_t i = start; i < end; ++i) per_rank[i] = jobs[i - start].get();
    }
  }

  SweepResult result;
  for (auto& rows : per_rank) {
    for (auto& row : rows) result.rows.push_back(std::move(row));
  }
  for (int rank : spec.ranks) {
    std::vector<RdRow> subset;
    for (const auto& row : result.rows) {
      if (row.rank == rank && row.error.empty()) subset.push_back(row);
    }
    if (subset.size() < 4) continue;
    try {
      auto curves = curves_from_rows(subset);
      for (auto& c : curves) result.curves.push_back(std::move(c));
    } catch (const DomainError&) {
      // Duplicate bitrates (e.g. QPs collapsing to one size) make no curve.
    }
  }
  return result;
}

void write_plot_data(std::ostream& out, const std::vector<RdRow>& rows) {
  std::vector<const RdRow*> ok;
  for (const auto& row : rows) {
    if (row.error.empty()) ok.push_back(&row);
  }
  std::stable_sort(ok.begin(), ok.end(), [](const RdRow* a, const RdRow* b) {
    return a->rank != b->rank ? a->rank < b->rank : a->bitrate_kbps < b->bitrate_kbps;
  });
  out << "rank,bitrate_kbps,psnr_db,ssim\n" << std::setprecision(10);
  for (const RdRow* row : ok) {
    out << row->rank << ',' << row->bitrate_kbps << ',' << row->psnr_db << ',' << row->ssim << '\n';
  }
}

}  // namespace tdvc
