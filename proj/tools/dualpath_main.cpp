// Copyright 2026 The dualpath Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset synthesis, enhancement, toy training,
// analytic cost counting, and runtime profiling. Every command is
// deterministic under --seed except the wall-clock fields in profiling
// output. Bad input exits with a one-line diagnostic, never a stack dump.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualpath/complexity.hpp"
#include "dualpath/pipeline.hpp"
#include "dualpath/profiler.hpp"
#include "dualpath/synth.hpp"
#include "dualpath/wav.hpp"

namespace fs = std::filesystem;
using namespace dualpath;

namespace {

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 17;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
  cmd->add_option("--config", c.config_path, "model configuration file (key = value lines)");
  cmd->add_option("--seed", c.seed, "random seed (default 17)");
  cmd->add_option("--set", c.overrides, "override a config key, e.g. --set chunk_size=100 (repeatable)");
}

std::ofstream open_out_file(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// enhance
// ---------------------------------------------------------------------------

struct EnhanceArgs {
  CommonArgs common;
  std::string in_path, out_path, checkpoint, reference;
  bool debug_unit_mask = false;
};

void run_enhance(const EnhanceArgs& a, bool config_given) {
  EnhancementModel model = [&] {
    if (!a.checkpoint.empty()) {
      if (config_given)
        throw std::invalid_argument("--checkpoint already carries a configuration; drop --config/--set");
      return load_checkpoint(a.checkpoint);
    }
    ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides);
    std::mt19937_64 rng(a.common.seed);
    return make_model(rng, cfg);
  }();

  WavData wav = read_wav(a.in_path);
  if (wav.sample_rate != model.config.sample_rate)
    throw std::invalid_argument("input sample rate " + std::to_string(int(wav.sample_rate)) +
                                " does not match the model's " + std::to_string(int(model.config.sample_rate)));
  size_t n = wav.samples.size();

  std::vector<double> est;
  if (a.debug_unit_mask) {
    Encoded e = encode(wav.samples, model);
    Tensor y = decode(e.w, e.phase, model, n);
    est.assign(y.data(), y.data() + y.numel());
  } else {
    Tensor y = enhance_forward(model, wav.samples);
    est.assign(y.data(), y.data() + y.numel());
  }

  std::cout << std::fixed << std::setprecision(6);
  if (a.debug_unit_mask)
    std::cout << "unit_mask_interior_si_sdr_db = " << si_sdr_interior(est, wav.samples, model.config.frame_len)
              << "\n";
  if (!a.reference.empty()) {
    WavData ref = read_wav(a.reference);
    if (ref.samples.size() != n) throw std::invalid_argument("reference length does not match input length");
    std::cout << "input_si_sdr_db = " << si_sdr(wav.samples, ref.samples) << "\n";
    std::cout << "output_si_sdr_db = " << si_sdr(est, ref.samples) << "\n";
  }

  write_wav(a.out_path, est, wav.sample_rate);
  std::cout << "wrote " << a.out_path << " (" << n << " samples)\n";
}

// ---------------------------------------------------------------------------
// train-toy
// ---------------------------------------------------------------------------

struct TrainArgs {
  CommonArgs common;
  std::string data_manifest;
  std::string out_dir = ".";
  size_t steps = 200;
  double lr = 1e-3;
  double clip = 5.0;
};

void run_train_toy(const TrainArgs& a) {
  if (a.steps == 0) throw std::invalid_argument("--steps must be positive");
  ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides);
  std::mt19937_64 rng(a.common.seed);
  EnhancementModel model = make_model(rng, cfg);

  auto pairs = load_training_pairs(a.data_manifest);
  std::vector<double> trace = train_toy(model, pairs, a.steps, a.lr, a.clip);

  fs::create_directories(a.out_dir);
  fs::path ckpt = fs::path(a.out_dir) / "checkpoint.bin";
  save_checkpoint(ckpt.string(), model);

  fs::path loss_path = fs::path(a.out_dir) / "loss.csv";
  {
    std::ofstream out = open_out_file(loss_path);
    out << "step,loss\n" << std::setprecision(17);
    for (size_t i = 0; i < trace.size(); ++i) out << (i + 1) << ',' << trace[i] << '\n';
  }

  std::cout << std::setprecision(12);
  std::cout << "pairs = " << pairs.size() << "\n";
  std::cout << "steps = " << trace.size() << "\n";
  std::cout << "initial_loss = " << trace.front() << "\n";
  std::cout << "final_loss = " << trace.back() << "\n";
  std::cout << "wrote " << ckpt.string() << "\n";
  std::cout << "wrote " << loss_path.string() << "\n";
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  CommonArgs common;
  std::string out_dir;
  size_t pairs = 4;
  double seconds = 4.0;
  std::vector<double> snr_grid = {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};
};

void run_gen_data(const GenDataArgs& a) {
  ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides, false);
  DatasetOptions opt;
  opt.pairs = a.pairs;
  opt.seconds = a.seconds;
  opt.snr_grid = a.snr_grid;
  opt.sample_rate = cfg.sample_rate;
  std::vector<ManifestRow> rows = generate_dataset(a.out_dir, a.common.seed, opt);
  std::cout << "wrote " << rows.size() << " triplets to " << a.out_dir << "\n";
  std::cout << "manifest = " << (fs::path(a.out_dir) / "manifest.csv").string() << "\n";
}

// ---------------------------------------------------------------------------
// count-macs
// ---------------------------------------------------------------------------

struct CountMacsArgs {
  CommonArgs common;
  double seconds = 10.0;
  bool presets = false;
};

void print_breakdown(const ModelConfig& cfg, double seconds) {
  size_t samples = size_t(std::llround(seconds * cfg.sample_rate));
  ComplexityConfig cc = ComplexityConfig::from_model(cfg, samples);
  cc.validate();
  MacBreakdown b = count_macs(cc);
  std::cout << "config = " << config_id(cfg) << "\n";
  std::cout << "seconds = " << seconds << "\n";
  std::cout << "samples = " << samples << "\n";
  for (const auto& [key, value] : breakdown_rows(b)) {
    if (key.find("gmacs") != std::string::npos)
      std::cout << key << " = " << std::fixed << std::setprecision(4) << value << "\n";
    else
      std::cout << key << " = " << std::fixed << std::setprecision(0) << value << "\n";
    std::cout.unsetf(std::ios::fixed);
    std::cout << std::setprecision(6);
  }
}

void run_count_macs(const CountMacsArgs& a) {
  if (a.seconds <= 0.0) throw std::invalid_argument("--seconds must be positive");
  if (a.presets) {
    std::cout << "config,seconds,gmacs,dense_gmacs\n";
    std::cout << std::fixed << std::setprecision(4);
    for (const ModelConfig& cfg : benchmark_preset_configs()) {
      size_t samples = size_t(std::llround(a.seconds * cfg.sample_rate));
      MacBreakdown b = count_macs(ComplexityConfig::from_model(cfg, samples));
      std::cout << config_id(cfg) << ',' << a.seconds << ',' << b.gmacs() << ',' << b.dense_gmacs() << "\n";
    }
    return;
  }
  ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides, false);
  print_breakdown(cfg, a.seconds);
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

struct ProfileArgs {
  CommonArgs common;
  std::string mode = "forward";
  std::string out_dir = ".";
  double seconds = 10.0;
  size_t runs = 10;
  std::vector<double> seconds_list = {10.0, 30.0, 60.0};
  double max_seconds = 60.0;
  size_t max_points = 40;
  double stop_after_rtf = 0.0;
};

void run_profile(const ProfileArgs& a) {
  fs::create_directories(a.out_dir);
  if (a.mode == "forward") {
    ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides);
    std::mt19937_64 rng(a.common.seed);
    EnhancementModel model = make_model(rng, cfg);
    ProfileReport rep = profile_forward(model, a.seconds, a.runs);
    fs::path p = fs::path(a.out_dir) / "profile.csv";
    std::ofstream out = open_out_file(p);
    write_profile_csv(out, {rep}, true);
    std::cout << "config = " << rep.config_id << "\n";
    std::cout << "median_wall_ms = " << rep.median_wall_ms << "\n";
    std::cout << "peak_bytes = " << rep.peak_bytes << "\n";
    std::cout << "wrote " << p.string() << "\n";
  } else if (a.mode == "memory") {
    ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides);
    std::mt19937_64 rng(a.common.seed);
    EnhancementModel model = make_model(rng, cfg);
    std::vector<MemoryPoint> pts = memory_curve(model, a.seconds_list);
    fs::path p = fs::path(a.out_dir) / "memory.csv";
    std::ofstream out = open_out_file(p);
    write_memory_csv(out, {{config_id(cfg), pts}});
    std::cout << "wrote " << p.string() << " (" << pts.size() << " rows)\n";
  } else if (a.mode == "stream") {
    ModelConfig cfg = load_model_config(a.common.config_path, a.common.overrides, false);
    ComplexityConfig::from_model(cfg, size_t(std::llround(a.max_seconds * cfg.sample_rate))).validate();
    StreamOptions opts;
    opts.max_points = a.max_points;
    opts.stop_after_rtf = a.stop_after_rtf;
    std::vector<RtfPoint> pts = simulate_streaming(cfg, a.max_seconds, opts);
    fs::path p = fs::path(a.out_dir) / "rtf.csv";
    std::ofstream out = open_out_file(p);
    write_rtf_csv(out, {{config_id(cfg), pts}});
    const RtfPoint* crossing = nullptr;
    for (const RtfPoint& pt : pts)
      if (pt.rtf >= 1.0) {
        crossing = &pt;
        break;
      }
    if (crossing)
      std::cout << "rtf crossing: chunk " << crossing->chunk_index << " at " << crossing->seconds
                << " s of audio (rtf " << crossing->rtf << ")\n";
    else
      std::cout << "no rtf crossing up to " << a.max_seconds << " s\n";
    std::cout << "wrote " << p.string() << " (" << pts.size() << " rows)\n";
  } else {
    throw std::invalid_argument("--mode must be forward, memory or stream");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-path speech enhancement: synthesis, training, counting, profiling"};
  app.require_subcommand(1);

  EnhanceArgs enh;
  CLI::App* enhance_cmd = app.add_subcommand("enhance", "denoise a wav file");
  add_common(enhance_cmd, enh.common);
  enhance_cmd->add_option("--in", enh.in_path, "input wav")->required();
  enhance_cmd->add_option("--out", enh.out_path, "output wav")->required();
  enhance_cmd->add_option("--checkpoint", enh.checkpoint, "trained model checkpoint");
  enhance_cmd->add_option("--reference", enh.reference, "clean reference wav for SI-SDR reporting");
  enhance_cmd->add_flag("--debug-unit-mask", enh.debug_unit_mask,
                        "bypass the masking network (encoder/decoder transparency check)");

  TrainArgs trn;
  CLI::App* train_cmd = app.add_subcommand("train-toy", "overfit the model on a small manifest");
  add_common(train_cmd, trn.common);
  train_cmd->add_option("--data", trn.data_manifest, "dataset manifest csv")->required();
  train_cmd->add_option("--steps", trn.steps, "optimizer steps (default 200)");
  train_cmd->add_option("--lr", trn.lr, "learning rate (default 1e-3)");
  train_cmd->add_option("--clip", trn.clip, "global gradient-norm clip (default 5)");
  train_cmd->add_option("--out", trn.out_dir, "output directory for checkpoint.bin and loss.csv");

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "synthesize clean/noise/mix triplets");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--pairs", gen.pairs, "number of triplets (default 4)");
  gen_cmd->add_option("--seconds", gen.seconds, "clip length in seconds (default 4)");
  gen_cmd->add_option("--snr-grid", gen.snr_grid, "comma-separated SNRs in dB")->delimiter(',');

  CountMacsArgs cm;
  CLI::App* count_cmd = app.add_subcommand("count-macs", "analytic multiply-accumulate counts");
  add_common(count_cmd, cm.common);
  count_cmd->add_option("--seconds", cm.seconds, "utterance length in seconds (default 10)");
  count_cmd->add_flag("--table1", cm.presets, "emit the six benchmark preset rows");

  ProfileArgs prof;
  CLI::App* prof_cmd = app.add_subcommand("profile", "measure wall time, memory or streaming real-time factor");
  add_common(prof_cmd, prof.common);
  prof_cmd->add_option("--mode", prof.mode, "forward | memory | stream (default forward)");
  prof_cmd->add_option("--out", prof.out_dir, "output directory for csv files");
  prof_cmd->add_option("--seconds", prof.seconds, "utterance length for forward mode (default 10)");
  prof_cmd->add_option("--runs", prof.runs, "timed repetitions for forward mode (default 10)");
  prof_cmd->add_option("--seconds-list", prof.seconds_list, "lengths for memory mode")->delimiter(',');
  prof_cmd->add_option("--max-seconds", prof.max_seconds, "sweep limit for stream mode (default 60)");
  prof_cmd->add_option("--max-points", prof.max_points, "sample budget for stream mode (default 40)");
  prof_cmd->add_option("--stop-after-rtf", prof.stop_after_rtf,
                       "stop the stream sweep once this real-time factor is reached (0 = never)");

  enhance_cmd->callback([&] {
    run_enhance(enh, enhance_cmd->count("--config") > 0 || enhance_cmd->count("--set") > 0);
  });
  train_cmd->callback([&] { run_train_toy(trn); });
  gen_cmd->callback([&] { run_gen_data(gen); });
  count_cmd->callback([&] { run_count_macs(cm); });
  prof_cmd->callback([&] { run_profile(prof); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (...) {
    std::cerr << "error: unexpected failure\n";
    return 1;
  }
  return 0;
}
