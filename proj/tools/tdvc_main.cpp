#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdvc/container.hpp"
#include "tdvc/error.hpp"
#include "tdvc/external_bridge.hpp"
#include "tdvc/metrics.hpp"
#include "tdvc/pipeline.hpp"
#include "tdvc/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tdvc::IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  if (path == "-") {
    std::cout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::cout.flush();
    if (!std::cout) throw tdvc::IoError("failed writing to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw tdvc::IoError("cannot write " + path);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw tdvc::IoError("cannot create " + path);
  return out;
}

std::vector<tdvc::RdRow> load_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tdvc::IoError("cannot open " + path);
  return tdvc::read_rd_csv(in);
}

const tdvc::LabeledCurve& pick_anchor(const std::vector<tdvc::LabeledCurve>& anchors, const tdvc::LabeledCurve& test) {
  const tdvc::LabeledCurve* same_view = nullptr;
  for (const auto& a : anchors) {
    if (a.scene != test.scene || a.camera != test.camera) continue;
    if (a.rank == test.rank) return a;
    if (same_view == nullptr) same_view = &a;
  }
  if (same_view != nullptr) return *same_view;
  if (anchors.size() == 1) return anchors.front();
  throw tdvc::DomainError("no anchor curve for scene " + test.scene + " camera " + test.camera);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-decomposition depth video codec"};
  app.require_subcommand(1);

  std::optional<tdvc::ExternalEncoder> bridge;
  auto load_bridge = [&]() -> const tdvc::ExternalEncoder* {
    bridge = tdvc::ExternalEncoder::from_environment();
    return bridge ? &*bridge : nullptr;
  };

  tdvc::EncodeConfig enc;
  std::string enc_in, enc_out;
  bool pp = false;
  auto* encode = app.add_subcommand("encode", "Encode a directory of depth frames into a .tdvc stream");
  encode->add_option("--rank", enc.rank, "CP rank per frame group")->check(CLI::PositiveNumber);
  encode->add_option("--qp", enc.qp, "Quantization parameter (0-51)")->check(CLI::Range(0, 51));
  encode->add_option("--group", enc.group_size, "Frames per tensor group")->check(CLI::PositiveNumber);
  encode->add_option("--seed", enc.seed, "Initialization seed");
  encode->add_option("--max-sweeps", enc.als.max_sweeps, "ALS sweep budget")->check(CLI::PositiveNumber);
  encode->add_flag("--pp", pp, "Use pairwise perturbation");
  encode->add_option("-i,--input", enc_in, "Frame directory or file")->required();
  encode->add_option("-o,--output", enc_out, "Output stream, '-' for stdout")->required();

  std::string dec_in, dec_out;
  double dec_fps = 15.0;
  auto* decode = app.add_subcommand("decode", "Decode a .tdvc stream into PGM frames");
  decode->add_option("-i,--input", dec_in, "Input stream, '-' for stdin")->required();
  decode->add_option("-o,--output", dec_out, "Output directory")->required();
  decode->add_option("--fps", dec_fps, "Frame rate")->check(CLI::PositiveNumber);

  tdvc::SweepSpec sweep;
  std::string sweep_in, sweep_out, sweep_plot, sweep_containers;
  double sweep_fps = 15.0;
  bool sweep_pp = false;
  auto* rd = app.add_subcommand("rd-sweep", "Encode over a rank x QP grid and tabulate rate and quality");
  rd->add_option("--ranks", sweep.ranks, "Comma-separated ranks")->delimiter(',');
  rd->add_option("--qps", sweep.qps, "Comma-separated QPs")->delimiter(',');
  rd->add_option("--group", sweep.group_size, "Frames per tensor group")->check(CLI::PositiveNumber);
  rd->add_option("--seed", sweep.seed, "Initialization seed");
  rd->add_option("--scene", sweep.scene, "Scene label");
  rd->add_option("--camera", sweep.camera, "Camera label");
  rd->add_option("--fps", sweep_fps, "Frame rate used for kbps")->check(CLI::PositiveNumber);
  rd->add_option("--threads", sweep.threads, "Ranks decomposed concurrently")->check(CLI::PositiveNumber);
  rd->add_flag("--pp", sweep_pp, "Use pairwise perturbation");
  rd->add_option("--plot-data", sweep_plot, "Also write plot-ready series here");
  rd->add_option("--containers", sweep_containers, "Keep every cell's stream in this directory");
  rd->add_option("-i,--input", sweep_in, "Frame directory or file")->required();
  rd->add_option("-o,--output", sweep_out, "CSV output")->required();

  std::string ref_dir, test_dir;
  auto* metrics = app.add_subcommand("metrics", "Per-frame and mean PSNR/SSIM of two frame sets");
  metrics->add_option("--ref", ref_dir, "Reference frames")->required();
  metrics->add_option("--test", test_dir, "Test frames")->required();

  std::string anchor_csv, test_csv;
  auto* bd = app.add_subcommand("bdrate", "Bjontegaard delta rate of RD curves against an anchor");
  bd->add_option("--anchor", anchor_csv, "Anchor RD CSV")->required();
  bd->add_option("--test", test_csv, "Test RD CSV")->required();

  tdvc::SyntheticSpec synth;
  std::string synth_out;
  auto* gen = app.add_subcommand("synth", "Write a synthetic depth sequence as PGM frames");
  gen->add_option("--width", synth.width)->check(CLI::PositiveNumber);
  gen->add_option("--height", synth.height)->check(CLI::PositiveNumber);
  gen->add_option("--frames", synth.frames)->check(CLI::PositiveNumber);
  gen->add_option("--objects", synth.objects);
  gen->add_option("--seed", synth.seed);
  gen->add_option("-o,--output", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*encode) {
      const tdvc::DepthSequence seq = tdvc::ingest(fs::path(enc_in));
      enc.als.pp_enabled = pp;
      enc.bridge = load_bridge();
      write_all(enc_out, tdvc::encode_sequence(seq, enc));
    } else if (*decode) {
      load_bridge();
      const auto bytes = read_all(dec_in);
      tdvc::write_sequence(dec_out, tdvc::decode_sequence(bytes, bridge ? &*bridge : nullptr, dec_fps));
    } else if (*rd) {
      tdvc::DepthSequence seq = tdvc::ingest(fs::path(sweep_in));
      seq.fps = sweep_fps;
      sweep.als.pp_enabled = sweep_pp;
      sweep.container_dir = sweep_containers;
      sweep.bridge = load_bridge();
      const tdvc::SweepResult result = tdvc::rd_sweep(seq, sweep);
      auto out = open_output(sweep_out);
      tdvc::write_rd_csv(out, result.rows);
      if (!sweep_plot.empty()) {
        auto plot = open_output(sweep_plot);
        tdvc::write_plot_data(plot, result.rows);
      }
      for (const auto& row : result.rows) {
        if (!row.error.empty()) std::cerr << "rank " << row.rank << " qp " << row.qp << ": " << row.error << '\n';
      }
    } else if (*metrics) {
      const tdvc::DepthSequence ref = tdvc::ingest(fs::path(ref_dir));
      const tdvc::DepthSequence test = tdvc::ingest(fs::path(test_dir));
      if (ref.frames.size() != test.frames.size()) throw tdvc::DomainError("frame counts differ");
      std::cout << "frame,psnr_db,ssim\n" << std::setprecision(10);
      for (std::size_t i = 0; i < ref.frames.size(); ++i) {
        const tdvc::FramePair pair{ref.frames[i], test.frames[i], ref.peak()};
        std::cout << i << ',' << tdvc::psnr(pair) << ',' << tdvc::ssim(pair) << '\n';
      }
      const tdvc::SequenceQuality q = tdvc::compare_sequences(ref, test);
      std::cout << "mean," << q.psnr_db << ',' << q.ssim << '\n';
    } else if (*bd) {
      const auto anchors = tdvc::curves_from_rows(load_rows(anchor_csv));
      const auto tests = tdvc::curves_from_rows(load_rows(test_csv));
      if (anchors.empty() || tests.empty()) throw tdvc::DomainError("both CSVs need at least one complete curve");
      std::cout << "scene,camera,rank,bd_rate_percent\n" << std::setprecision(10);
      for (const auto& t : tests) {
        const double v = tdvc::bd_rate(pick_anchor(anchors, t).curve, t.curve);
        std::cout << t.scene << ',' << t.camera << ',' << t.rank << ',' << v << '\n';
      }
    } else if (*gen) {
      tdvc::write_sequence(synth_out, tdvc::synthetic_depth_sequence(synth));
    }
  } catch (const tdvc::ExternalToolError& e) {
    std::cerr << "tdvc: " << tdvc::category_name(e.category()) << ": " << e.what() << '\n';
    if (!e.diagnostics().empty()) std::cerr << e.diagnostics() << '\n';
    return static_cast<int>(e.category());
  } catch (const tdvc::Error& e) {
    std::cerr << "tdvc: " << tdvc::category_name(e.category()) << ": " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "tdvc: " << e.what() << '\n';
    return 64;
  }
  return 0;
}
