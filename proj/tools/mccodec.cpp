// mccodec: train LSDT models, encode/decode motion streams, evaluate and benchmark.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 corrupt stream, 5 model/stream mismatch.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mocap/mocap.hpp"

using namespace mocap;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { ok = 0, usage = 2, data = 3, corrupt = 4, mismatch = 5 };

int exit_code(errc code) {
  switch (code) {
    case errc::invalid_argument:
    case errc::invalid_dimension:
    case errc::invalid_sweep: return usage;
    case errc::format_mismatch:
    case errc::corrupt_stream:
    case errc::truncated_stream:
    case errc::symbol_missing: return corrupt;
    case errc::model_mismatch: return mismatch;
    default: return data;
  }
}

/// Model files are inputs like motion files: damage there is a data error.
TransformModel read_model(const fs::path& path) {
  try {
    return load_model(path);
  } catch (const error& e) {
    if (e.code() == errc::format_mismatch || e.code() == errc::corrupt_stream)
      fail(errc::malformed_input, path.string() + ": " + e.what());
    throw;
  }
}

MotionSequence read_motion(const std::string& path, std::optional<int> joints) {
  if (path == "-") {
    std::string text((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return parse_motion_csv(text, joints);
  }
  return load_motion(path, joints);
}

std::string provenance_line(const std::string& command, const json& config) {
  json p;
  p["tool"] = "mccodec";
  p["version"] = kVersion;
  p["command"] = command;
  p["config"] = config;
  return "# provenance: " + p.dump() + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), errc::io_failure, "cannot open '" + path.string() + "' for writing");
  os << text;
  require(static_cast<bool>(os), errc::io_failure, "write to '" + path.string() + "' failed");
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("MCCODEC_THREADS")) {
    const int n = std::atoi(env);
    require(n > 0, errc::invalid_argument, "MCCODEC_THREADS must be a positive integer");
    return n;
  }
  return 1;
}

struct TrainArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string convergence;
  int P = 8;
  int K = 500;
  double tol = 1e-8;
  std::string init = "dct";
  bool residuals = false;
  std::optional<int> joints;
  int threads = 0;
};

int cmd_train(const TrainArgs& a) {
  TrainOptions opt;
  opt.sparsity = a.P;
  opt.max_iterations = a.K;
  opt.tolerance = a.tol;
  opt.init = parse_init(a.init);
  opt.threads = resolve_threads(a.threads);
  require(a.P >= 1, errc::invalid_argument, "--P must be >= 1");
  require(a.K >= 1, errc::invalid_argument, "--K must be >= 1");
  require(a.tol >= 0, errc::invalid_argument, "--tol must be >= 0");

  std::vector<MotionSequence> seqs;
  for (const auto& in : a.inputs) seqs.push_back(read_motion(in, a.joints));
  require(a.P <= seqs.front().joints(), errc::invalid_argument,
          "--P " + std::to_string(a.P) + " exceeds J=" + std::to_string(seqs.front().joints()));
  auto batch = TrainingBatch::from_sequences(seqs, a.residuals);
  const auto model = train_lsdt(batch, opt);
  save_model(model, a.out);

  json cfg = {{"inputs", a.inputs}, {"P", a.P},         {"K", a.K},      {"tol", a.tol},
              {"init", a.init},     {"residuals", a.residuals}, {"N", batch.size()}, {"J", batch.joints()}};
  std::ostringstream csv;
  write_convergence_csv(csv, model.meta());
  const fs::path conv = a.convergence.empty() ? fs::path(a.out).parent_path() / "convergence.csv" : fs::path(a.convergence);
  write_text(conv, provenance_line("train", cfg) + csv.str());

  std::cout.precision(10);
  for (int d = 0; d < 3; ++d) {
    const auto& t = model.meta().traces[d];
    std::cout << to_string(static_cast<Dim>(d)) << ": objective " << t.objective.back() << " after " << t.iterations
              << " iterations (" << to_string(t.stop) << ")\n";
  }
  return ok;
}

struct EncodeArgs {
  std::string in;
  std::string model;
  std::string out;
  std::string codec = "clip";
  std::string mode = "offline";
  int L = 240;
  int b = 12;
  std::vector<std::string> table_refs;
  std::optional<int> joints;
};

int cmd_encode(const EncodeArgs& a) {
  require(a.codec == "frame" || a.codec == "clip", errc::invalid_argument, "--codec must be frame or clip");
  require(a.mode == "offline" || a.mode == "streaming", errc::invalid_argument, "--mode must be offline or streaming");
  require(a.mode == "offline" || a.codec == "frame", errc::invalid_argument, "streaming mode needs --codec frame");
  require(a.b >= 2 && a.b <= 16, errc::invalid_argument, "--b must be in [2, 16]");
  require(a.L >= 1 && a.L <= 0xFFFF, errc::invalid_argument, "--L must be in [1, 65535]");
  const auto model = read_model(a.model);

  CompressedStream stream;
  int frames = 0;
  if (a.mode == "streaming") {
    std::vector<MotionSequence> refs;
    for (const auto& r : a.table_refs) refs.push_back(load_motion(r, model.joints()));
    StreamingFrameEncoder enc(model, a.b, streaming_tables(refs, model, a.b));
    auto push = [&](const MotionSequence& one) {
      detail::check_model(one, model);
      for (int i = 0; i < one.frames(); ++i) {
        const auto bits = enc.push(one, i);
        std::cout << "frame " << frames++ << " bits " << bits << '\n' << std::flush;
      }
    };
    if (a.in == "-") {
      // One CSV row at a time, coded as soon as it arrives.
      std::optional<int> joints = a.joints;
      std::string line;
      while (std::getline(std::cin, line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
          double fps = 120;
          detail::parse_csv_header(t, joints, fps, 0);
          continue;
        }
        push(parse_motion_csv(t, joints ? joints : std::optional<int>(model.joints())));
      }
    } else {
      push(read_motion(a.in, a.joints));
    }
    require(frames > 0, errc::malformed_input, "no frames to encode");
    stream = std::move(enc).finish();
  } else {
    const auto seq = read_motion(a.in, a.joints);
    frames = seq.frames();
    stream = a.codec == "frame" ? encode_frame_based(seq, model, a.b) : encode_clip_based(seq, model, a.L, a.b);
  }
  const auto bytes = stream.serialize();
  io::write_file(a.out, bytes);
  std::cout << "CR " << compression_ratio(frames, model.joints(), bytes.size()) << " (" << bytes.size()
            << " bytes, " << frames << " frames)\n";
  return ok;
}

int cmd_decode(const std::string& in, const std::string& model_path, const std::string& out) {
  const auto model = read_model(model_path);
  const auto stream = load_stream(in);
  save_motion(decode_stream(stream, model), out);
  return ok;
}

int cmd_eval(const std::string& a, const std::string& b, const std::string& per_joint, std::optional<int> joints) {
  const auto x = read_motion(a, joints);
  const auto y = read_motion(b, joints);
  const Vector pj = per_joint_distortion(x, y);
  std::cout.precision(10);
  std::cout << "D " << pj.mean() << '\n';
  if (!per_joint.empty()) {
    std::ostringstream os;
    write_per_joint_csv(os, pj);
    write_text(per_joint, os.str());
  }
  return ok;
}

struct BenchArgs {
  std::vector<std::string> inputs;
  std::string model;
  std::vector<std::string> train;
  std::vector<int> P;
  std::string codec = "both";
  std::vector<int> b{6, 8, 10, 12, 14};
  std::vector<int> L{60, 120, 240};
  std::string out_dir = ".";
  std::vector<double> fractions;
  int K = 500;
  std::string init = "dct";
  std::optional<int> joints;
  int threads = 0;
};

void bench_one(const BenchArgs& a, const TransformModel& model, const std::vector<MotionSequence>& seqs,
               const std::vector<std::string>& names, const fs::path& dir, json cfg) {
  SweepConfig sweep;
  sweep.frame = a.codec != "clip";
  sweep.clip = a.codec != "frame";
  sweep.bits = a.b;
  sweep.clip_lengths = a.L;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const fs::path sub = seqs.size() == 1 ? dir : dir / fs::path(names[s]).stem();
    cfg["input"] = names[s];
    std::ostringstream rd;
    write_rd_csv(rd, rd_sweep(seqs[s], model, sweep));
    write_text(sub / "rd.csv", provenance_line("bench", cfg) + rd.str());
    if (!a.fractions.empty()) {
      std::vector<SparsityPoint> pts;
      for (auto t : {SpatialTransform::lsdt, SpatialTransform::dct, SpatialTransform::dwt}) {
        const auto c = sparsity_distortion_curve(seqs[s], t, a.fractions, &model);
        pts.insert(pts.end(), c.begin(), c.end());
      }
      std::ostringstream sp;
      write_sparsity_csv(sp, pts);
      write_text(sub / "sparsity.csv", provenance_line("bench", cfg) + sp.str());
    }
  }
}

int cmd_bench(const BenchArgs& a) {
  require(a.codec == "frame" || a.codec == "clip" || a.codec == "both", errc::invalid_argument,
          "--codec must be frame, clip or both");
  require(!a.b.empty(), errc::invalid_sweep, "empty --b list");
  for (int b : a.b) require(b >= 2 && b <= 16, errc::invalid_argument, "--b values must be in [2, 16]");
  require(a.codec == "frame" || !a.L.empty(), errc::invalid_sweep, "empty --L list");
  for (int L : a.L) require(L >= 1 && L <= 0xFFFF, errc::invalid_argument, "--L values must be in [1, 65535]");
  for (double f : a.fractions) kept_coefficients(f, 1);
  require(!a.model.empty() || !a.train.empty(), errc::invalid_argument, "bench needs --model or --train");
  require(a.P.empty() || !a.train.empty(), errc::invalid_argument, "a --P sweep needs --train data");

  std::vector<MotionSequence> seqs;
  for (const auto& in : a.inputs) seqs.push_back(read_motion(in, a.joints));
  json cfg = {{"codec", a.codec}, {"b", a.b}, {"L", a.L}, {"fractions", a.fractions}};

  if (!a.model.empty() && a.P.empty()) {
    cfg["model"] = a.model;
    bench_one(a, read_model(a.model), seqs, a.inputs, a.out_dir, cfg);
    return ok;
  }
  std::vector<MotionSequence> train;
  for (const auto& t : a.train) train.push_back(read_motion(t, a.joints));
  const auto batch = TrainingBatch::from_sequences(train);
  const std::vector<int> Ps = a.P.empty() ? std::vector<int>{8} : a.P;
  for (int P : Ps) {
    TrainOptions opt;
    opt.sparsity = P;
    opt.max_iterations = a.K;
    opt.init = parse_init(a.init);
    opt.threads = resolve_threads(a.threads);
    const auto model = train_lsdt(batch, opt);
    cfg["train"] = a.train;
    cfg["P"] = P;
    cfg["K"] = a.K;
    cfg["init"] = a.init;
    const fs::path dir = a.P.empty() ? fs::path(a.out_dir) : fs::path(a.out_dir) / ("P" + std::to_string(P));
    bench_one(a, model, seqs, a.inputs, dir, cfg);
    std::ostringstream conv;
    write_convergence_csv(conv, model.meta());
    write_text(dir / "convergence.csv", provenance_line("bench", cfg) + conv.str());
  }
  return ok;
}

struct GenArgs {
  SyntheticParams p;
  std::optional<std::uint64_t> skeleton;
  std::string out;
};

int cmd_gen(GenArgs a) {
  a.p.skeleton_seed = a.skeleton;
  save_motion(gen_synthetic(a.p), a.out);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-capture compression with learned sparse decorrelation transforms"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::optional<int> joints;
  auto add_joints = [&](CLI::App* sub) {
    sub->add_option("--joints", joints, "Marker count for CSV input without a '# J=' header");
  };

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Learn per-axis LSDT bases from motion files");
  train->add_option("--in", ta.inputs, "Training motion files (.csv or raw)")->required()->expected(1, -1);
  train->add_option("--out", ta.out, "Output model file")->required();
  train->add_option("--P", ta.P, "Sparsity parameter (nonzeros per frame)")->capture_default_str();
  train->add_option("--K", ta.K, "Maximum iterations")->capture_default_str();
  train->add_option("--tol", ta.tol, "Relative objective decrease over 10 iterations to stop at")->capture_default_str();
  train->add_option("--init", ta.init, "Initial basis: dct, haar, identity or pca")->capture_default_str();
  train->add_option("--convergence", ta.convergence, "Convergence CSV (default: convergence.csv next to --out)");
  train->add_flag("--residuals", ta.residuals, "Train on frame differences instead of raw frames");
  train->add_option("--threads", ta.threads, "Worker threads (env MCCODEC_THREADS)");
  add_joints(train);

  EncodeArgs ea;
  auto* encode = app.add_subcommand("encode", "Compress a motion file");
  encode->add_option("--in", ea.in, "Input motion file, or - for CSV on stdin")->required();
  encode->add_option("--model", ea.model, "Model file")->required();
  encode->add_option("--out", ea.out, "Output stream (.mccs)")->required();
  encode->add_option("--codec", ea.codec, "frame or clip")->capture_default_str();
  encode->add_option("--mode", ea.mode, "offline (two-pass tables) or streaming (frame codec, fixed tables)")
      ->capture_default_str();
  encode->add_option("--L", ea.L, "Clip length (clip codec)")->capture_default_str();
  encode->add_option("--b", ea.b, "Quantizer bits")->capture_default_str();
  encode->add_option("--tables-from", ea.table_refs, "Streaming mode: motion files to build entropy tables from");
  add_joints(encode);

  std::string din, dmodel, dout;
  auto* decode = app.add_subcommand("decode", "Decompress a stream");
  decode->add_option("--in", din, "Input stream")->required();
  decode->add_option("--model", dmodel, "Model file")->required();
  decode->add_option("--out", dout, "Output motion file")->required();

  std::string ea_a, ea_b, per_joint;
  auto* eval = app.add_subcommand("eval", "Distortion between two motion files");
  eval->add_option("original", ea_a, "Reference motion")->required();
  eval->add_option("reconstructed", ea_b, "Reconstructed motion")->required();
  eval->add_option("--per-joint", per_joint, "Write per-joint distortion CSV");
  add_joints(eval);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Rate-distortion and sparsity sweeps");
  bench->add_option("--in", ba.inputs, "Test motion files")->required()->expected(1, -1);
  bench->add_option("--model", ba.model, "Model file");
  bench->add_option("--train", ba.train, "Training files (trains a model per --P value)")->expected(1, -1);
  bench->add_option("--P", ba.P, "Sparsity values for a P sweep")->delimiter(',');
  bench->add_option("--K", ba.K, "Maximum iterations when training")->capture_default_str();
  bench->add_option("--init", ba.init, "Initial basis when training")->capture_default_str();
  bench->add_option("--codec", ba.codec, "frame, clip or both")->capture_default_str();
  bench->add_option("--b", ba.b, "Quantizer bit depths")->delimiter(',')->capture_default_str();
  bench->add_option("--L", ba.L, "Clip lengths")->delimiter(',')->capture_default_str();
  bench->add_option("--fractions", ba.fractions, "Nonzero fractions for sparsity.csv")->delimiter(',');
  bench->add_option("--out-dir", ba.out_dir, "Directory for rd.csv / sparsity.csv")->capture_default_str();
  bench->add_option("--threads", ba.threads, "Worker threads (env MCCODEC_THREADS)");
  add_joints(bench);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Write a synthetic motion sequence");
  gen->add_option("--J", ga.p.joints, "Markers")->capture_default_str();
  gen->add_option("--F", ga.p.frames, "Frames")->capture_default_str();
  gen->add_option("--rank", ga.p.rank, "Subspace rank k")->capture_default_str();
  gen->add_option("--seed", ga.p.seed, "Motion seed")->capture_default_str();
  gen->add_option("--skeleton-seed", ga.skeleton, "Skeleton seed (default: --seed)");
  gen->add_option("--harmonics", ga.p.harmonics, "Sinusoids per latent curve")->capture_default_str();
  gen->add_option("--max-freq", ga.p.max_frequency, "Highest frequency in Hz")->capture_default_str();
  gen->add_option("--fps", ga.p.frame_rate, "Frame rate")->capture_default_str();
  gen->add_option("--noise", ga.p.noise, "Gaussian noise std-dev")->capture_default_str();
  gen->add_option("--out", ga.out, "Output motion file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : usage;
  }

  try {
    ta.joints = ea.joints = ba.joints = joints;
    if (*train) return cmd_train(ta);
    if (*encode) return cmd_encode(ea);
    if (*decode) return cmd_decode(din, dmodel, dout);
    if (*eval) return cmd_eval(ea_a, ea_b, per_joint, joints);
    if (*bench) return cmd_bench(ba);
    if (*gen) return cmd_gen(ga);
  } catch (const error& e) {
    std::cerr << "mccodec: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "mccodec: " << e.what() << '\n';
    return data;
  }
  return usage;
}
